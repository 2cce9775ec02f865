//! Vote and certificate validation, and the public low/high predicates.
//!
//! A vote is valid when its signature covers its value under the round's
//! domain tag, its embedded certificates are valid, and recertifying them
//! yields exactly the carried value. Results are cached on the immutable
//! objects (see [`super::Memo`]).

use std::collections::HashSet;

use crate::compact;
use crate::crypto::{MsgKind, Verifier};
use crate::prefix::PrefixVector;
use crate::wire::sign_bytes;

use super::certify::{qc12_certify, qc1_certify, qc2_mcp, qc2_mcp_mce, qc3_low_high, qc3_opt, qc4_low_high};
use super::{PcConfig, PlainVote, Proof, Qc, Qc1, Qc2, Qc3, Qc4, Variant, Vote1, Vote2, Vote3, Vote4};

fn sig_ok<V: PlainVote>(v: &V, kind: MsgKind, cfg: &PcConfig, ver: &Verifier) -> bool {
    v.value().len() <= cfg.l
        && v.sig().signer < cfg.n
        && ver.verify(&cfg.tag(kind), &sign_bytes(&v.value().0), v.sig())
}

fn quorum_ok<V: PlainVote>(qc: &Qc<V>, cfg: &PcConfig, each: impl Fn(&V) -> bool) -> bool {
    qc.memo.get_or(cfg, || {
        if qc.votes.len() != cfg.quorum() {
            return false;
        }
        let mut seen = HashSet::new();
        qc.votes.iter().all(|v| seen.insert(v.sig().signer) && each(v))
    })
}

pub fn check_vote1(v: &Vote1, cfg: &PcConfig, ver: &Verifier) -> bool {
    v.memo.get_or(cfg, || sig_ok(v, MsgKind::Vote1, cfg, ver))
}

pub fn check_qc1(qc: &Qc1, cfg: &PcConfig, ver: &Verifier) -> bool {
    quorum_ok(qc, cfg, |v| check_vote1(v, cfg, ver))
}

pub fn check_vote2(v: &Vote2, cfg: &PcConfig, ver: &Verifier) -> bool {
    v.memo.get_or(cfg, || {
        sig_ok(v, MsgKind::Vote2, cfg, ver)
            && check_qc1(&v.qc1, cfg, ver)
            && qc1_certify(&v.qc1, cfg).is_ok_and(|x| x == v.value)
    })
}

pub fn check_qc2(qc: &Qc2, cfg: &PcConfig, ver: &Verifier) -> bool {
    quorum_ok(qc, cfg, |v| check_vote2(v, cfg, ver))
}

pub fn check_vote3(v: &Vote3, cfg: &PcConfig, ver: &Verifier) -> bool {
    v.memo.get_or(cfg, || {
        if !sig_ok(v, MsgKind::Vote3, cfg, ver) || !check_qc2(&v.qc2, cfg, ver) {
            return false;
        }
        match (cfg.variant, &v.qc1) {
            (Variant::ThreeRound, None) => qc2_mcp(&v.qc2).is_ok_and(|x| x == v.value),
            (Variant::Optimistic, Some(qc1)) => {
                check_qc1(qc1, cfg, ver) && qc12_certify(qc1, &v.qc2, cfg).is_ok_and(|z| z == v.value)
            }
            _ => false,
        }
    })
}

pub fn check_qc3(qc: &Qc3, cfg: &PcConfig, ver: &Verifier) -> bool {
    quorum_ok(qc, cfg, |v| check_vote3(v, cfg, ver))
}

pub fn check_vote4(v: &Vote4, cfg: &PcConfig, ver: &Verifier) -> bool {
    v.memo.get_or(cfg, || {
        cfg.variant == Variant::Optimistic
            && sig_ok(v, MsgKind::Vote4, cfg, ver)
            && check_qc3(&v.qc3, cfg, ver)
            && qc3_opt(&v.qc3).is_ok_and(|(zp, _)| zp == v.value)
    })
}

pub fn check_qc4(qc: &Qc4, cfg: &PcConfig, ver: &Verifier) -> bool {
    quorum_ok(qc, cfg, |v| check_vote4(v, cfg, ver))
}

/// Low and high values a proof certifies under `cfg`, each `None` when the
/// proof does not certify that output.
pub fn certified(cfg: &PcConfig, ver: &Verifier, proof: &Proof) -> (Option<PrefixVector>, Option<PrefixVector>) {
    match (cfg.variant, proof) {
        (Variant::ThreeRound, Proof::Qc3(q)) if check_qc3(q, cfg, ver) => match qc3_low_high(q) {
            Ok((lo, hi)) => (Some(lo), Some(hi)),
            Err(_) => (None, None),
        },
        (Variant::ThreeRound, Proof::Compact(q)) => match compact::verify_qc3(q, cfg, ver) {
            Ok((lo, hi)) => (Some(lo), Some(hi)),
            Err(_) => (None, None),
        },
        (Variant::Fast5f1, Proof::Qc2(q)) if check_qc2(q, cfg, ver) => match qc2_mcp_mce(q) {
            Ok((lo, hi)) => (Some(lo), Some(hi)),
            Err(_) => (None, None),
        },
        (Variant::Optimistic, Proof::Qc2(q)) if check_qc2(q, cfg, ver) => match qc2_mcp(q) {
            Ok(yp) if yp.len() == cfg.l => (Some(yp.clone()), Some(yp)),
            _ => (None, None),
        },
        (Variant::Optimistic, Proof::Qc3(q)) if check_qc3(q, cfg, ver) => match qc3_opt(q) {
            Ok((_, Some(ze))) => (None, Some(ze)),
            _ => (None, None),
        },
        (Variant::Optimistic, Proof::Qc4(q)) if check_qc4(q, cfg, ver) => match qc4_low_high(q) {
            Ok((lo, hi)) => (Some(lo), Some(hi)),
            Err(_) => (None, None),
        },
        _ => (None, None),
    }
}

/// Public low predicate.
pub fn predicate_low(cfg: &PcConfig, ver: &Verifier, v: &PrefixVector, proof: &Proof) -> bool {
    certified(cfg, ver, proof).0.as_ref() == Some(v)
}

/// Public high predicate.
pub fn predicate_high(cfg: &PcConfig, ver: &Verifier, v: &PrefixVector, proof: &Proof) -> bool {
    certified(cfg, ver, proof).1.as_ref() == Some(v)
}
