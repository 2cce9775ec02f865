//! Compact codec for the 3-round protocol.
//!
//! Every vector is viewed padded with `⊥` to capacity `L`. Round-1 and
//! round-2 votes carry one signature per padded prefix (lengths `0..=L`), so
//! a certificate can carry each voter's signature on a short truncation of
//! its vote instead of the whole vote:
//!
//! * a compact QC1 stores the certified `x` and, per voter, either "equal to
//!   `x`" or the first position where the vote leaves `x` and the element
//!   found there;
//! * a compact QC2 stores a multi-signature on the common prefix `x_p` and
//!   either one QC1 (all votes equal) or two witnesses whose votes diverge
//!   right after `x_p`;
//! * a compact QC3 stores the shortest and longest `x_p` with their QC2s and
//!   one length per voter.
//!
//! Certified values are identical to the plain codec's.

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

use crate::crypto::{MsgKind, PartyId, Signature, Verifier};
use crate::pc::certify::CertifyError;
use crate::pc::engine::{Emitted, PcAction, Round};
use crate::pc::{Memo, OutputKind, PcConfig, PcMsg, Proof};
use crate::prefix::{common_len, longest_supported_prefix, mce, PrefixVector, Value};
use crate::wire::{sign_bytes, Decode, DecodeError, DecodeErrorKind, Encode, Reader, Sink};

pub mod equivalence;

/// Why a compact vote or certificate was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Reject {
    #[error("expected {want} signers, found {got}")]
    QuorumSize { want: usize, got: usize },
    #[error("signer {0} is unknown or repeated")]
    Signer(PartyId),
    #[error("vector exceeds capacity or has a trailing ⊥")]
    Shape,
    #[error("expected {want} prefix signatures, found {got}")]
    PrefixSigCount { want: usize, got: usize },
    #[error("signature blob has the wrong size")]
    BlobSize,
    #[error("invalid signature by party {0}")]
    Signature(PartyId),
    #[error("truncation of party {0} does not diverge from x")]
    Truncation(PartyId),
    #[error("certified value does not match the carried value")]
    Mismatch,
    #[error("divergence witnesses are invalid")]
    Witness,
    #[error("lengths do not span the carried low and high values")]
    Span,
    #[error("nested certificate rejected: {0}")]
    Nested(Box<Reject>),
}

type Check = Memo<Result<(), Reject>>;

/// How one voter's round-1 vote relates to the certified `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trunc {
    /// The padded vote equals padded `x`.
    Full,
    /// The padded vote agrees with padded `x` on `at` positions and holds
    /// `next` at position `at`.
    Diverge { at: usize, next: Value },
}

/// Round-1 vote: the input and a signature on each of its padded prefixes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CVote1 {
    pub signer: PartyId,
    pub value: PrefixVector,
    pub sigs: Vec<Arc<[u8]>>,
    pub memo: Check,
}

/// Compact QC1 certifying `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactQc1 {
    pub x: PrefixVector,
    pub entries: Vec<(PartyId, Trunc)>,
    pub blob: Vec<u8>,
    pub memo: Check,
}

/// Round-2 vote: `x`, a signature on each padded prefix of `x`, and the QC1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CVote2 {
    pub signer: PartyId,
    pub x: PrefixVector,
    pub sigs: Vec<Arc<[u8]>>,
    pub qc1: Arc<CompactQc1>,
    pub memo: Check,
}

/// A voter whose round-2 value continues `x_p` with `next`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub party: PartyId,
    pub next: Value,
    pub sig: Arc<[u8]>,
    pub qc1: Arc<CompactQc1>,
}

/// Why `x_p` cannot be extended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Qc2Proof {
    /// All round-2 values are equal; the QC1 certifies that value.
    Full(Arc<CompactQc1>),
    /// Two round-2 values diverge right after `x_p`.
    Split(Box<[Witness; 2]>),
}

/// Compact QC2 certifying `x_p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactQc2 {
    pub xp: PrefixVector,
    pub signers: Vec<PartyId>,
    pub blob: Vec<u8>,
    pub proof: Qc2Proof,
    pub memo: Check,
}

/// Round-3 vote on `x_p` with its QC2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CVote3 {
    pub xp: PrefixVector,
    pub sig: Signature,
    pub qc2: Arc<CompactQc2>,
    pub memo: Check,
}

/// Compact QC3 certifying `(low, high)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactQc3 {
    pub low: PrefixVector,
    pub qc2_low: Arc<CompactQc2>,
    pub high: PrefixVector,
    pub qc2_high: Arc<CompactQc2>,
    /// Each voter's `x_p` as a prefix length of `high`.
    pub entries: Vec<(PartyId, usize)>,
    pub blob: Vec<u8>,
    pub memo: Check,
}

/// Capacity check for certified vectors, which may end in ⊥ when inputs hold
/// interior ⊥ entries.
fn shape_ok(v: &PrefixVector, cfg: &PcConfig) -> Result<(), Reject> {
    if v.len() > cfg.l {
        return Err(Reject::Shape);
    }
    Ok(())
}

/// Shape check for round-1 inputs: padded prefix signatures cannot tell a
/// trailing ⊥ apart, so inputs must be canonical.
fn input_shape_ok(v: &PrefixVector, cfg: &PcConfig) -> Result<(), Reject> {
    if v.len() > cfg.l || v.0.last().is_some_and(Value::is_bot) {
        return Err(Reject::Shape);
    }
    Ok(())
}

fn signers_ok<'a>(signers: impl ExactSizeIterator<Item = &'a PartyId>, cfg: &PcConfig) -> Result<(), Reject> {
    let want = cfg.quorum();
    if signers.len() != want {
        return Err(Reject::QuorumSize { want, got: signers.len() });
    }
    let mut seen = HashSet::new();
    for &p in signers {
        if p >= cfg.n || !seen.insert(p) {
            return Err(Reject::Signer(p));
        }
    }
    Ok(())
}

fn blob_sig(blob: &[u8], i: usize, ver: &Verifier, signer: PartyId) -> Signature {
    let k = ver.sig_len();
    Signature { signer, bytes: blob[i * k..(i + 1) * k].into() }
}

fn blob_ok(blob: &[u8], count: usize, ver: &Verifier) -> Result<(), Reject> {
    if blob.len() != count * ver.sig_len() {
        return Err(Reject::BlobSize);
    }
    Ok(())
}

fn check_sig(ver: &Verifier, cfg: &PcConfig, kind: MsgKind, elems: &[Value], sig: &Signature) -> Result<(), Reject> {
    if ver.verify(&cfg.tag(kind), &sign_bytes(elems), sig) {
        Ok(())
    } else {
        Err(Reject::Signature(sig.signer))
    }
}

fn check_prefix_sigs(
    ver: &Verifier,
    cfg: &PcConfig,
    kind: MsgKind,
    signer: PartyId,
    v: &PrefixVector,
    sigs: &[Arc<[u8]>],
) -> Result<(), Reject> {
    if signer >= cfg.n {
        return Err(Reject::Signer(signer));
    }
    if kind == MsgKind::Vote1 {
        input_shape_ok(v, cfg)?;
    } else {
        shape_ok(v, cfg)?;
    }
    if sigs.len() != cfg.l + 1 {
        return Err(Reject::PrefixSigCount { want: cfg.l + 1, got: sigs.len() });
    }
    let pv = v.padded(cfg.l);
    for (k, s) in sigs.iter().enumerate() {
        check_sig(ver, cfg, kind, &pv[..k], &Signature { signer, bytes: s.clone() })?;
    }
    Ok(())
}

fn nested(r: Result<(), Reject>) -> Result<(), Reject> {
    r.map_err(|e| Reject::Nested(Box::new(e)))
}

/// Validates a round-1 vote.
pub fn verify_vote1(v: &CVote1, cfg: &PcConfig, ver: &Verifier) -> Result<(), Reject> {
    v.memo.get_or(cfg, || check_prefix_sigs(ver, cfg, MsgKind::Vote1, v.signer, &v.value, &v.sigs))
}

/// Validates a compact QC1; on success it certifies `qc.x`.
pub fn verify_qc1(qc: &CompactQc1, cfg: &PcConfig, ver: &Verifier) -> Result<(), Reject> {
    qc.memo.get_or(cfg, || {
        signers_ok(qc.entries.iter().map(|(p, _)| p), cfg)?;
        shape_ok(&qc.x, cfg)?;
        blob_ok(&qc.blob, qc.entries.len(), ver)?;
        let px = qc.x.padded(cfg.l);
        let mut logical = Vec::with_capacity(qc.entries.len());
        for (i, (p, t)) in qc.entries.iter().enumerate() {
            let vp = match t {
                Trunc::Full => px.clone(),
                Trunc::Diverge { at, next } => {
                    if *at >= cfg.l || *next == px[*at] {
                        return Err(Reject::Truncation(*p));
                    }
                    let mut vp = px[..*at].to_vec();
                    vp.push(next.clone());
                    vp
                }
            };
            check_sig(ver, cfg, MsgKind::Vote1, &vp, &blob_sig(&qc.blob, i, ver, *p))?;
            logical.push(PrefixVector::from_padded(&vp));
        }
        match longest_supported_prefix(logical.iter(), cfg.support()) {
            Ok(x) if x == qc.x => Ok(()),
            _ => Err(Reject::Mismatch),
        }
    })
}

/// Validates a round-2 vote.
pub fn verify_vote2(v: &CVote2, cfg: &PcConfig, ver: &Verifier) -> Result<(), Reject> {
    v.memo.get_or(cfg, || {
        check_prefix_sigs(ver, cfg, MsgKind::Vote2, v.signer, &v.x, &v.sigs)?;
        nested(verify_qc1(&v.qc1, cfg, ver))?;
        if v.qc1.x != v.x {
            return Err(Reject::Mismatch);
        }
        Ok(())
    })
}

/// Validates a compact QC2; on success it certifies `qc.xp`.
pub fn verify_qc2(qc: &CompactQc2, cfg: &PcConfig, ver: &Verifier) -> Result<(), Reject> {
    qc.memo.get_or(cfg, || {
        signers_ok(qc.signers.iter(), cfg)?;
        shape_ok(&qc.xp, cfg)?;
        blob_ok(&qc.blob, qc.signers.len(), ver)?;
        let full = qc.xp.padded(cfg.l);
        let m = match &qc.proof {
            Qc2Proof::Full(_) => cfg.l,
            Qc2Proof::Split(_) => qc.xp.len(),
        };
        let signed = &full[..m];
        for (i, p) in qc.signers.iter().enumerate() {
            check_sig(ver, cfg, MsgKind::Vote2, signed, &blob_sig(&qc.blob, i, ver, *p))?;
        }
        match &qc.proof {
            Qc2Proof::Full(qc1) => {
                nested(verify_qc1(qc1, cfg, ver))?;
                if qc1.x != qc.xp {
                    return Err(Reject::Mismatch);
                }
            }
            Qc2Proof::Split(w) => {
                if m >= cfg.l || w[0].party == w[1].party || w[0].next == w[1].next {
                    return Err(Reject::Witness);
                }
                for w in w.iter() {
                    if !qc.signers.contains(&w.party) {
                        return Err(Reject::Witness);
                    }
                    let mut ext = signed.to_vec();
                    ext.push(w.next.clone());
                    check_sig(ver, cfg, MsgKind::Vote2, &ext, &Signature { signer: w.party, bytes: w.sig.clone() })?;
                    nested(verify_qc1(&w.qc1, cfg, ver))?;
                    if w.qc1.x.padded(cfg.l)[..=m] != ext[..] {
                        return Err(Reject::Witness);
                    }
                }
            }
        }
        Ok(())
    })
}

/// Validates a round-3 vote.
pub fn verify_vote3(v: &CVote3, cfg: &PcConfig, ver: &Verifier) -> Result<(), Reject> {
    v.memo.get_or(cfg, || {
        if v.sig.signer >= cfg.n {
            return Err(Reject::Signer(v.sig.signer));
        }
        shape_ok(&v.xp, cfg)?;
        check_sig(ver, cfg, MsgKind::Vote3, &v.xp.0, &v.sig)?;
        nested(verify_qc2(&v.qc2, cfg, ver))?;
        if v.qc2.xp != v.xp {
            return Err(Reject::Mismatch);
        }
        Ok(())
    })
}

/// Validates a compact QC3 and returns the certified `(low, high)`.
pub fn verify_qc3(qc: &CompactQc3, cfg: &PcConfig, ver: &Verifier) -> Result<(PrefixVector, PrefixVector), Reject> {
    qc.memo.get_or(cfg, || {
        signers_ok(qc.entries.iter().map(|(p, _)| p), cfg)?;
        shape_ok(&qc.low, cfg)?;
        shape_ok(&qc.high, cfg)?;
        blob_ok(&qc.blob, qc.entries.len(), ver)?;
        let hl = qc.high.len();
        for (i, (p, len)) in qc.entries.iter().enumerate() {
            if *len > hl {
                return Err(Reject::Span);
            }
            check_sig(ver, cfg, MsgKind::Vote3, &qc.high.0[..*len], &blob_sig(&qc.blob, i, ver, *p))?;
        }
        let min = qc.entries.iter().map(|e| e.1).min().unwrap_or(0);
        let max = qc.entries.iter().map(|e| e.1).max().unwrap_or(0);
        if max != hl || min != qc.low.len() || qc.high.0[..min] != qc.low.0[..] {
            return Err(Reject::Span);
        }
        nested(verify_qc2(&qc.qc2_low, cfg, ver))?;
        nested(verify_qc2(&qc.qc2_high, cfg, ver))?;
        if qc.qc2_low.xp != qc.low || qc.qc2_high.xp != qc.high {
            return Err(Reject::Mismatch);
        }
        Ok(())
    })?;
    Ok((qc.low.clone(), qc.high.clone()))
}

/// Builds a round-1 vote signing every padded prefix of `v`.
pub fn make_vote1(cfg: &PcConfig, keys: &crate::crypto::Keyring, v: PrefixVector) -> CVote1 {
    let sigs = prefix_sigs(cfg, keys, MsgKind::Vote1, &v);
    CVote1 { signer: keys.id(), value: v, sigs, memo: Memo::default() }
}

fn prefix_sigs(cfg: &PcConfig, keys: &crate::crypto::Keyring, kind: MsgKind, v: &PrefixVector) -> Vec<Arc<[u8]>> {
    let pv = v.padded(cfg.l);
    let tag = cfg.tag(kind);
    (0..=cfg.l).map(|k| keys.sign(&tag, &sign_bytes(&pv[..k])).bytes).collect()
}

/// Builds the compact QC1 for a quorum of valid round-1 votes.
pub fn build_qc1(cfg: &PcConfig, votes: &[Arc<CVote1>]) -> Result<CompactQc1, CertifyError> {
    let x = longest_supported_prefix(votes.iter().map(|v| &v.value), cfg.support())?;
    let px = x.padded(cfg.l);
    let mut entries = Vec::with_capacity(votes.len());
    let mut blob = Vec::new();
    for v in votes {
        let pv = v.value.padded(cfg.l);
        let at = common_len(&pv, &px);
        let (t, k) = if at == cfg.l {
            (Trunc::Full, cfg.l)
        } else {
            (Trunc::Diverge { at, next: pv[at].clone() }, at + 1)
        };
        entries.push((v.signer, t));
        blob.extend_from_slice(&v.sigs[k]);
    }
    Ok(CompactQc1 { x, entries, blob, memo: Memo::default() })
}

/// Builds a round-2 vote for a valid compact QC1.
pub fn make_vote2(cfg: &PcConfig, keys: &crate::crypto::Keyring, qc1: Arc<CompactQc1>) -> CVote2 {
    let sigs = prefix_sigs(cfg, keys, MsgKind::Vote2, &qc1.x);
    CVote2 { signer: keys.id(), x: qc1.x.clone(), sigs, qc1, memo: Memo::default() }
}

/// Builds the compact QC2 for a quorum of valid round-2 votes.
pub fn build_qc2(cfg: &PcConfig, votes: &[Arc<CVote2>]) -> CompactQc2 {
    let padded: Vec<Vec<Value>> = votes.iter().map(|v| v.x.padded(cfg.l)).collect();
    let m = padded.iter().map(|p| common_len(p, &padded[0])).min().unwrap_or(cfg.l);
    let signers = votes.iter().map(|v| v.signer).collect();
    let blob = votes.iter().flat_map(|v| v.sigs[m].iter().copied()).collect();
    let (xp, proof) = if m == cfg.l {
        (votes[0].x.clone(), Qc2Proof::Full(votes[0].qc1.clone()))
    } else {
        let k = (1..votes.len()).find(|&i| padded[i][m] != padded[0][m]).expect("some vote diverges at m");
        let w = |i: usize| Witness {
            party: votes[i].signer,
            next: padded[i][m].clone(),
            sig: votes[i].sigs[m + 1].clone(),
            qc1: votes[i].qc1.clone(),
        };
        (PrefixVector(padded[0][..m].to_vec()), Qc2Proof::Split(Box::new([w(0), w(k)])))
    };
    CompactQc2 { xp, signers, blob, proof, memo: Memo::default() }
}

/// Builds the compact QC3 for a quorum of valid round-3 votes.
pub fn build_qc3(votes: &[Arc<CVote3>]) -> Result<CompactQc3, CertifyError> {
    let high = mce(votes.iter().map(|v| &v.xp))?.ok_or(CertifyError::MceUndefined)?;
    let lo = votes.iter().min_by_key(|v| v.xp.len()).ok_or(crate::prefix::PrefixError::EmptySet)?;
    let hi = votes.iter().max_by_key(|v| v.xp.len()).expect("non-empty");
    let entries = votes.iter().map(|v| (v.sig.signer, v.xp.len())).collect();
    let blob = votes.iter().flat_map(|v| v.sig.bytes.iter().copied()).collect();
    Ok(CompactQc3 {
        low: lo.xp.clone(),
        qc2_low: lo.qc2.clone(),
        high,
        qc2_high: hi.qc2.clone(),
        entries,
        blob,
        memo: Memo::default(),
    })
}

/// Engine for the 3-round protocol under the compact codec.
pub(crate) struct CompactEngine {
    cfg: PcConfig,
    keys: crate::crypto::Keyring,
    ver: Verifier,
    r1: Round<CVote1>,
    r2: Round<CVote2>,
    r3: Round<CVote3>,
    sent: [bool; 4],
    emitted: Emitted,
    halted: bool,
    dropped: usize,
}

impl CompactEngine {
    pub(crate) fn new(cfg: PcConfig, keys: crate::crypto::Keyring) -> Self {
        let ver = keys.verifier();
        CompactEngine {
            cfg,
            keys,
            ver,
            r1: Round::new(cfg.n),
            r2: Round::new(cfg.n),
            r3: Round::new(cfg.n),
            sent: [false; 4],
            emitted: Emitted::default(),
            halted: false,
            dropped: 0,
        }
    }

    pub(crate) fn dropped(&self) -> usize {
        self.dropped
    }

    pub(crate) fn round1_values(&self) -> Vec<PrefixVector> {
        self.r1.collected().iter().map(|v| v.value.clone()).collect()
    }

    pub(crate) fn input(&mut self, v: PrefixVector) -> Vec<PcAction> {
        if self.sent[1] || self.halted {
            return Vec::new();
        }
        self.sent[1] = true;
        vec![PcAction::Broadcast(PcMsg::CVote1(Arc::new(make_vote1(&self.cfg, &self.keys, v))))]
    }

    pub(crate) fn on_message(&mut self, from: usize, msg: PcMsg) -> Vec<PcAction> {
        if self.halted || from >= self.cfg.n || msg.signer() != from {
            self.dropped += 1;
            return Vec::new();
        }
        let (cfg, ver, q) = (&self.cfg, &self.ver, self.cfg.quorum());
        let ok = match msg {
            PcMsg::CVote1(v) if verify_vote1(&v, cfg, ver).is_ok() => {
                self.r1.add(from, v, q);
                true
            }
            PcMsg::CVote2(v) if verify_vote2(&v, cfg, ver).is_ok() => {
                self.r2.add(from, v, q);
                true
            }
            PcMsg::CVote3(v) if verify_vote3(&v, cfg, ver).is_ok() => {
                self.r3.add(from, v, q);
                true
            }
            _ => false,
        };
        if !ok {
            self.dropped += 1;
            return Vec::new();
        }
        let mut out = Vec::new();
        if let Err(e) = self.progress(&mut out) {
            self.halted = true;
            out.push(PcAction::Fault(e.to_string()));
        }
        out
    }

    fn progress(&mut self, out: &mut Vec<PcAction>) -> Result<(), CertifyError> {
        let cfg = self.cfg;
        if let (Some(qc), false) = (self.r1.qc.clone(), self.sent[2]) {
            self.sent[2] = true;
            let qc1 = Arc::new(build_qc1(&cfg, &qc.votes)?);
            let v = make_vote2(&cfg, &self.keys, qc1);
            out.push(PcAction::Broadcast(PcMsg::CVote2(Arc::new(v))));
        }
        if let (Some(qc), false) = (self.r2.qc.clone(), self.sent[3]) {
            self.sent[3] = true;
            let qc2 = Arc::new(build_qc2(&cfg, &qc.votes));
            let sig = self.keys.sign(&cfg.tag(MsgKind::Vote3), &sign_bytes(&qc2.xp.0));
            let v = CVote3 { xp: qc2.xp.clone(), sig, qc2, memo: Memo::default() };
            out.push(PcAction::Broadcast(PcMsg::CVote3(Arc::new(v))));
        }
        if let (Some(qc), false) = (self.r3.qc.clone(), self.emitted.low) {
            let qc3 = Arc::new(build_qc3(&qc.votes)?);
            let (lo, hi) = (qc3.low.clone(), qc3.high.clone());
            self.emitted.emit(out, OutputKind::Low, lo, Proof::Compact(qc3.clone()));
            self.emitted.emit(out, OutputKind::High, hi, Proof::Compact(qc3));
        }
        Ok(())
    }
}

fn put_sigs<S: Sink>(s: &mut S, sigs: &[Arc<[u8]>]) {
    s.put_varint(sigs.len() as u64);
    for b in sigs {
        s.put_len_bytes(b);
    }
}

fn get_sigs(r: &mut Reader<'_>) -> Result<Vec<Arc<[u8]>>, DecodeError> {
    r.list("sigs", |r| r.len_bytes().map(Arc::from))
}

impl Encode for CVote1 {
    fn encode<S: Sink>(&self, s: &mut S) {
        s.put_varint(self.signer as u64);
        self.value.encode(s);
        put_sigs(s, &self.sigs);
    }
}

impl Decode for CVote1 {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let signer = r.field("signer", |r| r.usize())?;
        let value = r.field("value", PrefixVector::decode)?;
        let sigs = get_sigs(r)?;
        Ok(CVote1 { signer, value, sigs, memo: Memo::default() })
    }
}

impl Encode for Trunc {
    fn encode<S: Sink>(&self, s: &mut S) {
        match self {
            Trunc::Full => s.put_u8(0),
            Trunc::Diverge { at, next } => {
                s.put_u8(1);
                s.put_varint(*at as u64);
                next.encode(s);
            }
        }
    }
}

impl Decode for Trunc {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(Trunc::Full),
            1 => {
                let at = r.field("at", |r| r.usize())?;
                let next = r.field("next", Value::decode)?;
                Ok(Trunc::Diverge { at, next })
            }
            t => Err(r.err(DecodeErrorKind::BadTag(t))),
        }
    }
}

impl Encode for CompactQc1 {
    fn encode<S: Sink>(&self, s: &mut S) {
        self.x.encode(s);
        s.put_varint(self.entries.len() as u64);
        for (p, t) in &self.entries {
            s.put_varint(*p as u64);
            t.encode(s);
        }
        s.put_len_bytes(&self.blob);
    }
}

impl Decode for CompactQc1 {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let x = r.field("x", PrefixVector::decode)?;
        let entries = r.list("entries", |r| {
            let p = r.field("signer", |r| r.usize())?;
            let t = r.field("trunc", Trunc::decode)?;
            Ok((p, t))
        })?;
        let blob = r.field("blob", |r| r.len_bytes())?.to_vec();
        Ok(CompactQc1 { x, entries, blob, memo: Memo::default() })
    }
}

impl Encode for CVote2 {
    fn encode<S: Sink>(&self, s: &mut S) {
        s.put_varint(self.signer as u64);
        self.x.encode(s);
        put_sigs(s, &self.sigs);
        self.qc1.encode(s);
    }
}

impl Decode for CVote2 {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let signer = r.field("signer", |r| r.usize())?;
        let x = r.field("x", PrefixVector::decode)?;
        let sigs = get_sigs(r)?;
        let qc1 = r.field("qc1", Arc::<CompactQc1>::decode)?;
        Ok(CVote2 { signer, x, sigs, qc1, memo: Memo::default() })
    }
}

impl Encode for Witness {
    fn encode<S: Sink>(&self, s: &mut S) {
        s.put_varint(self.party as u64);
        self.next.encode(s);
        s.put_len_bytes(&self.sig);
        self.qc1.encode(s);
    }
}

impl Decode for Witness {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let party = r.field("party", |r| r.usize())?;
        let next = r.field("next", Value::decode)?;
        let sig = r.field("sig", |r| r.len_bytes())?.into();
        let qc1 = r.field("qc1", Arc::<CompactQc1>::decode)?;
        Ok(Witness { party, next, sig, qc1 })
    }
}

impl Encode for CompactQc2 {
    fn encode<S: Sink>(&self, s: &mut S) {
        self.xp.encode(s);
        s.put_varint(self.signers.len() as u64);
        for p in &self.signers {
            s.put_varint(*p as u64);
        }
        s.put_len_bytes(&self.blob);
        match &self.proof {
            Qc2Proof::Full(q) => {
                s.put_u8(0);
                q.encode(s);
            }
            Qc2Proof::Split(w) => {
                s.put_u8(1);
                w[0].encode(s);
                w[1].encode(s);
            }
        }
    }
}

impl Decode for CompactQc2 {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let xp = r.field("xp", PrefixVector::decode)?;
        let signers = r.list("signers", |r| r.usize())?;
        let blob = r.field("blob", |r| r.len_bytes())?.to_vec();
        let proof = r.field("proof", |r| match r.u8()? {
            0 => r.field("qc1", Arc::<CompactQc1>::decode).map(Qc2Proof::Full),
            1 => {
                let a = r.field("w0", Witness::decode)?;
                let b = r.field("w1", Witness::decode)?;
                Ok(Qc2Proof::Split(Box::new([a, b])))
            }
            t => Err(r.err(DecodeErrorKind::BadTag(t))),
        })?;
        Ok(CompactQc2 { xp, signers, blob, proof, memo: Memo::default() })
    }
}

impl Encode for CVote3 {
    fn encode<S: Sink>(&self, s: &mut S) {
        self.xp.encode(s);
        self.sig.encode(s);
        self.qc2.encode(s);
    }
}

impl Decode for CVote3 {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let xp = r.field("xp", PrefixVector::decode)?;
        let sig = r.field("sig", Signature::decode)?;
        let qc2 = r.field("qc2", Arc::<CompactQc2>::decode)?;
        Ok(CVote3 { xp, sig, qc2, memo: Memo::default() })
    }
}

impl Encode for CompactQc3 {
    fn encode<S: Sink>(&self, s: &mut S) {
        self.low.encode(s);
        self.qc2_low.encode(s);
        self.high.encode(s);
        self.qc2_high.encode(s);
        s.put_varint(self.entries.len() as u64);
        for (p, len) in &self.entries {
            s.put_varint(*p as u64);
            s.put_varint(*len as u64);
        }
        s.put_len_bytes(&self.blob);
    }
}

impl Decode for CompactQc3 {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let low = r.field("low", PrefixVector::decode)?;
        let qc2_low = r.field("qc2_low", Arc::<CompactQc2>::decode)?;
        let high = r.field("high", PrefixVector::decode)?;
        let qc2_high = r.field("qc2_high", Arc::<CompactQc2>::decode)?;
        let entries = r.list("entries", |r| {
            let p = r.field("signer", |r| r.usize())?;
            let len = r.field("len", |r| r.usize())?;
            Ok((p, len))
        })?;
        let blob = r.field("blob", |r| r.len_bytes())?.to_vec();
        Ok(CompactQc3 { low, qc2_low, high, qc2_high, entries, blob, memo: Memo::default() })
    }
}
