//! Runs plain and compact certification on the same vote multisets and
//! reports both results.
//!
//! A trial draws one round-1 input per party (honest inputs share a random
//! base vector; Byzantine inputs are truncations or forks of honest ones),
//! then lets every party, Byzantine or not, pick any `n - f` votes of the
//! previous round in any order. Each certificate is built in both codecs
//! from the same votes, verified, and its certified values recorded.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::crypto::{MsgKind, Verifier};
use crate::pc::certify::{qc1_certify, qc2_mcp, qc3_low_high};
use crate::pc::verify::{check_qc1, check_qc2, check_qc3};
use crate::pc::{Codec, Instance, Memo, PcConfig, Qc, Variant, Vote1, Vote2, Vote3};
use crate::prefix::{PrefixVector, Value};
use crate::wire::sign_bytes;

use super::{build_qc1, build_qc2, build_qc3, make_vote1, make_vote2, verify_qc1, verify_qc2, verify_qc3, CVote3};

/// Value(s) certified by one certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certified {
    Qc1(PrefixVector),
    Qc2(PrefixVector),
    Qc3(PrefixVector, PrefixVector),
}

/// Inputs of one trial.
#[derive(Debug, Clone)]
pub struct Trial {
    pub n: usize,
    pub f: usize,
    pub l: usize,
    pub inputs: Vec<PrefixVector>,
}

/// Certified values, certificate by certificate, in both codecs.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub plain: Vec<Certified>,
    pub compact: Vec<Certified>,
}

fn symbol(rng: &mut impl Rng, alphabet: usize) -> Value {
    Value::new([b'a' + rng.gen_range(0..alphabet) as u8])
}

/// Draws a trial. The last `f` parties are Byzantine.
pub fn random_trial(rng: &mut impl Rng, n: usize, f: usize, l: usize) -> Trial {
    let alphabet = rng.gen_range(2..=3);
    let base: Vec<Value> = (0..l).map(|_| symbol(rng, alphabet)).collect();
    let mut inputs = Vec::with_capacity(n);
    for _ in 0..n - f {
        let keep = rng.gen_range(0..=l);
        let mut v = base[..keep].to_vec();
        if rng.gen_bool(0.3) {
            while v.len() < rng.gen_range(keep..=l) {
                v.push(symbol(rng, alphabet));
            }
        }
        inputs.push(PrefixVector(v));
    }
    for _ in 0..f {
        let src = inputs[rng.gen_range(0..n - f)].clone();
        let v = match rng.gen_range(0..3) {
            0 => src.prefix(rng.gen_range(0..=src.len())),
            1 => {
                let mut v = src.prefix(rng.gen_range(0..=src.len())).0;
                if v.len() < l {
                    v.push(Value::new(b"z"));
                }
                PrefixVector(v)
            }
            _ => PrefixVector((0..rng.gen_range(0..=l)).map(|_| symbol(rng, alphabet)).collect()),
        };
        inputs.push(v);
    }
    Trial { n, f, l, inputs }
}

fn pick<T: Clone>(rng: &mut impl Rng, items: &[T], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    idx
}

/// Runs one trial; any certificate that fails verification is an error.
pub fn run_trial(trial: &Trial, ver: &Verifier, rng: &mut impl Rng) -> Result<Outcome, String> {
    let (n, f, l) = (trial.n, trial.f, trial.l);
    let q = n - f;
    let plain = PcConfig::new(n, f, l, Variant::ThreeRound, Codec::Plain, Instance::standalone())
        .map_err(|e| e.to_string())?;
    let compact = PcConfig { codec: Codec::Compact, ..plain };
    let tag = |k: MsgKind| plain.tag(k);
    let mut out = Outcome::default();

    let v1p: Vec<Arc<Vote1>> = (0..n)
        .map(|i| {
            let value = trial.inputs[i].clone();
            let sig = ver.keyring(i).sign(&tag(MsgKind::Vote1), &sign_bytes(&value.0));
            Arc::new(Vote1 { value, sig, memo: Memo::default() })
        })
        .collect();
    let v1c: Vec<_> = (0..n).map(|i| Arc::new(make_vote1(&compact, &ver.keyring(i), trial.inputs[i].clone()))).collect();

    let mut v2p = Vec::with_capacity(n);
    let mut v2c = Vec::with_capacity(n);
    for i in 0..n {
        let sel = pick(rng, &v1p, q);
        let qp = Arc::new(Qc::new(sel.iter().map(|&j| v1p[j].clone()).collect()));
        let qcv: Vec<_> = sel.iter().map(|&j| v1c[j].clone()).collect();
        let qc = Arc::new(build_qc1(&compact, &qcv).map_err(|e| e.to_string())?);
        if !check_qc1(&qp, &plain, ver) {
            return Err("plain QC1 rejected".into());
        }
        verify_qc1(&qc, &compact, ver).map_err(|e| format!("compact QC1 rejected: {e}"))?;
        let x = qc1_certify(&qp, &plain).map_err(|e| e.to_string())?;
        out.plain.push(Certified::Qc1(x.clone()));
        out.compact.push(Certified::Qc1(qc.x.clone()));
        let sig = ver.keyring(i).sign(&tag(MsgKind::Vote2), &sign_bytes(&x.0));
        v2p.push(Arc::new(Vote2 { value: x, sig, qc1: qp, memo: Memo::default() }));
        v2c.push(Arc::new(make_vote2(&compact, &ver.keyring(i), qc)));
    }

    let mut v3p = Vec::with_capacity(n);
    let mut v3c = Vec::with_capacity(n);
    for i in 0..n {
        let sel = pick(rng, &v2p, q);
        let qp = Arc::new(Qc::new(sel.iter().map(|&j| v2p[j].clone()).collect()));
        let qcv: Vec<_> = sel.iter().map(|&j| v2c[j].clone()).collect();
        let qc = Arc::new(build_qc2(&compact, &qcv));
        if !check_qc2(&qp, &plain, ver) {
            return Err("plain QC2 rejected".into());
        }
        verify_qc2(&qc, &compact, ver).map_err(|e| format!("compact QC2 rejected: {e}"))?;
        let xp = qc2_mcp(&qp).map_err(|e| e.to_string())?;
        out.plain.push(Certified::Qc2(xp.clone()));
        out.compact.push(Certified::Qc2(qc.xp.clone()));
        let keys = ver.keyring(i);
        let sig = keys.sign(&tag(MsgKind::Vote3), &sign_bytes(&xp.0));
        v3p.push(Arc::new(Vote3 { value: xp, sig, qc1: None, qc2: qp, memo: Memo::default() }));
        let csig = keys.sign(&tag(MsgKind::Vote3), &sign_bytes(&qc.xp.0));
        v3c.push(Arc::new(CVote3 { xp: qc.xp.clone(), sig: csig, qc2: qc, memo: Memo::default() }));
    }

    for _ in 0..n {
        let sel = pick(rng, &v3p, q);
        let qp = Qc::new(sel.iter().map(|&j| v3p[j].clone()).collect());
        let qcv: Vec<_> = sel.iter().map(|&j| v3c[j].clone()).collect();
        let qc = build_qc3(&qcv).map_err(|e| e.to_string())?;
        if !check_qc3(&qp, &plain, ver) {
            return Err("plain QC3 rejected".into());
        }
        let (lo, hi) = verify_qc3(&qc, &compact, ver).map_err(|e| format!("compact QC3 rejected: {e}"))?;
        let (plo, phi) = qc3_low_high(&qp).map_err(|e| e.to_string())?;
        out.plain.push(Certified::Qc3(plo, phi));
        out.compact.push(Certified::Qc3(lo, hi));
    }
    Ok(out)
}
