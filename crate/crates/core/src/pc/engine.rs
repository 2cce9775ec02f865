//! Per-party reactor for one PC instance. Each call consumes one event and
//! returns the resulting broadcasts and outputs; the engine has no clock and
//! performs no IO.

use std::sync::Arc;

use thiserror::Error;

use crate::compact::CompactEngine;
use crate::crypto::{Keyring, MsgKind, Verifier};
use crate::prefix::{PrefixVector, Value};
use crate::wire::sign_bytes;

use super::certify::{qc12_certify, qc1_certify, qc2_mcp, qc2_mcp_mce, qc3_low_high, qc3_opt, qc4_low_high};
use super::verify::{check_vote1, check_vote2, check_vote3, check_vote4};
use super::{
    Codec, Memo, OutputKind, PcConfig, PcMsg, PcOutput, PlainVote, Proof, Qc, Variant, Vote1, Vote2, Vote3, Vote4,
};

/// Engine input errors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PcError {
    #[error("input of length {len} exceeds capacity {l}")]
    InputTooLong { len: usize, l: usize },
    #[error("the compact codec needs inputs without a trailing ⊥")]
    TrailingBot,
}

/// Effects requested by an engine step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PcAction {
    Broadcast(PcMsg),
    Output(PcOutput),
    /// A locally formed certificate could not be certified; the instance
    /// halts.
    Fault(String),
}

/// Collects the first `n - f` votes of one round from distinct senders.
pub(crate) struct Round<V> {
    from: Vec<bool>,
    votes: Vec<Arc<V>>,
    pub(crate) qc: Option<Arc<Qc<V>>>,
}

impl<V> Round<V> {
    pub(crate) fn new(n: usize) -> Self {
        Round { from: vec![false; n], votes: Vec::new(), qc: None }
    }

    /// Adds a verified vote; returns true when this vote completes the quorum.
    pub(crate) fn add(&mut self, signer: usize, v: Arc<V>, quorum: usize) -> bool {
        if self.qc.is_some() || self.from[signer] {
            return false;
        }
        self.from[signer] = true;
        self.votes.push(v);
        if self.votes.len() == quorum {
            self.qc = Some(Arc::new(Qc::new(std::mem::take(&mut self.votes))));
            return true;
        }
        false
    }

    /// Votes collected so far, or the quorum once formed.
    pub(crate) fn collected(&self) -> Vec<Arc<V>> {
        match &self.qc {
            Some(q) => q.votes.clone(),
            None => self.votes.clone(),
        }
    }
}

/// Tracks which outputs were emitted.
#[derive(Default)]
pub(crate) struct Emitted {
    pub(crate) opt: bool,
    pub(crate) low: bool,
    pub(crate) high: bool,
}

impl Emitted {
    /// Emits `kind` unless it was already emitted; the first output stands.
    pub(crate) fn emit(&mut self, out: &mut Vec<PcAction>, kind: OutputKind, value: PrefixVector, proof: Proof) {
        let flag = match kind {
            OutputKind::Opt => &mut self.opt,
            OutputKind::Low => &mut self.low,
            OutputKind::High => &mut self.high,
        };
        if *flag {
            return;
        }
        *flag = true;
        out.push(PcAction::Output(PcOutput { kind, value, proof }));
    }
}

struct PlainEngine {
    cfg: PcConfig,
    keys: Keyring,
    ver: Verifier,
    r1: Round<Vote1>,
    r2: Round<Vote2>,
    r3: Round<Vote3>,
    r4: Round<Vote4>,
    sent: [bool; 5],
    done4: bool,
    emitted: Emitted,
    halted: bool,
    dropped: usize,
}

impl PlainEngine {
    fn new(cfg: PcConfig, keys: Keyring) -> Self {
        let ver = keys.verifier();
        PlainEngine {
            cfg,
            keys,
            ver,
            r1: Round::new(cfg.n),
            r2: Round::new(cfg.n),
            r3: Round::new(cfg.n),
            r4: Round::new(cfg.n),
            sent: [false; 5],
            done4: false,
            emitted: Emitted::default(),
            halted: false,
            dropped: 0,
        }
    }

    fn sign(&self, kind: MsgKind, v: &PrefixVector) -> crate::crypto::Signature {
        self.keys.sign(&self.cfg.tag(kind), &sign_bytes(&v.0))
    }

    fn input(&mut self, v: PrefixVector) -> Vec<PcAction> {
        if self.sent[1] || self.halted {
            return Vec::new();
        }
        self.sent[1] = true;
        let sig = self.sign(MsgKind::Vote1, &v);
        vec![PcAction::Broadcast(PcMsg::Vote1(Arc::new(Vote1 { value: v, sig, memo: Memo::default() })))]
    }

    fn on_message(&mut self, from: usize, msg: PcMsg) -> Vec<PcAction> {
        if self.halted || from >= self.cfg.n || msg.signer() != from {
            self.dropped += 1;
            return Vec::new();
        }
        let (cfg, ver, q) = (&self.cfg, &self.ver, self.cfg.quorum());
        let ok = match msg {
            PcMsg::Vote1(v) if check_vote1(&v, cfg, ver) => {
                self.r1.add(from, v, q);
                true
            }
            PcMsg::Vote2(v) if check_vote2(&v, cfg, ver) => {
                self.r2.add(from, v, q);
                true
            }
            PcMsg::Vote3(v) if check_vote3(&v, cfg, ver) => {
                self.r3.add(from, v, q);
                true
            }
            PcMsg::Vote4(v) if check_vote4(&v, cfg, ver) => {
                self.r4.add(from, v, q);
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
            out.push(PcAction::Fault(e));
        }
        out
    }

    fn progress(&mut self, out: &mut Vec<PcAction>) -> Result<(), String> {
        let cfg = self.cfg;
        let err = |e: super::certify::CertifyError| e.to_string();
        if let (Some(qc1), false) = (self.r1.qc.clone(), self.sent[2]) {
            self.sent[2] = true;
            let v = qc1_certify(&qc1, &cfg).map_err(err)?;
            let sig = self.sign(MsgKind::Vote2, &v);
            out.push(PcAction::Broadcast(PcMsg::Vote2(Arc::new(Vote2 { value: v, sig, qc1, memo: Memo::default() }))));
        }
        match cfg.variant {
            Variant::Fast5f1 => {
                if let (Some(qc2), false) = (self.r2.qc.clone(), self.emitted.low) {
                    let (lo, hi) = qc2_mcp_mce(&qc2).map_err(err)?;
                    self.emitted.emit(out, OutputKind::Low, lo, Proof::Qc2(qc2.clone()));
                    self.emitted.emit(out, OutputKind::High, hi, Proof::Qc2(qc2));
                }
            }
            Variant::ThreeRound => {
                if let (Some(qc2), false) = (self.r2.qc.clone(), self.sent[3]) {
                    self.sent[3] = true;
                    let xp = qc2_mcp(&qc2).map_err(err)?;
                    let sig = self.sign(MsgKind::Vote3, &xp);
                    let v = Vote3 { value: xp, sig, qc1: None, qc2, memo: Memo::default() };
                    out.push(PcAction::Broadcast(PcMsg::Vote3(Arc::new(v))));
                }
                if let (Some(qc3), false) = (self.r3.qc.clone(), self.emitted.low) {
                    let (lo, hi) = qc3_low_high(&qc3).map_err(err)?;
                    self.emitted.emit(out, OutputKind::Low, lo, Proof::Qc3(qc3.clone()));
                    self.emitted.emit(out, OutputKind::High, hi, Proof::Qc3(qc3));
                }
            }
            Variant::Optimistic => {
                if let (Some(qc2), false) = (self.r2.qc.clone(), self.emitted.opt) {
                    let yp = qc2_mcp(&qc2).map_err(err)?;
                    self.emitted.emit(out, OutputKind::Opt, yp.clone(), Proof::Qc2(qc2.clone()));
                    if yp.len() == cfg.l {
                        self.emitted.emit(out, OutputKind::Low, yp.clone(), Proof::Qc2(qc2.clone()));
                        self.emitted.emit(out, OutputKind::High, yp, Proof::Qc2(qc2));
                    }
                }
                if let (Some(qc1), Some(qc2), false) = (self.r1.qc.clone(), self.r2.qc.clone(), self.sent[3]) {
                    self.sent[3] = true;
                    let z = qc12_certify(&qc1, &qc2, &cfg).map_err(err)?;
                    let sig = self.sign(MsgKind::Vote3, &z);
                    let v = Vote3 { value: z, sig, qc1: Some(qc1), qc2, memo: Memo::default() };
                    out.push(PcAction::Broadcast(PcMsg::Vote3(Arc::new(v))));
                }
                if let (Some(qc3), false) = (self.r3.qc.clone(), self.sent[4]) {
                    self.sent[4] = true;
                    let (zp, ze) = qc3_opt(&qc3).map_err(err)?;
                    if let (Some(ze), false) = (ze, self.emitted.high) {
                        self.emitted.emit(out, OutputKind::High, ze, Proof::Qc3(qc3.clone()));
                    }
                    let sig = self.sign(MsgKind::Vote4, &zp);
                    out.push(PcAction::Broadcast(PcMsg::Vote4(Arc::new(Vote4 {
                        value: zp,
                        sig,
                        qc3,
                        memo: Memo::default(),
                    }))));
                }
                if let (Some(qc4), false) = (self.r4.qc.clone(), self.done4) {
                    self.done4 = true;
                    let (lo, hi) = qc4_low_high(&qc4).map_err(err)?;
                    if !self.emitted.low {
                        self.emitted.emit(out, OutputKind::Low, lo, Proof::Qc4(qc4.clone()));
                    }
                    if !self.emitted.high {
                        self.emitted.emit(out, OutputKind::High, hi, Proof::Qc4(qc4));
                    }
                }
            }
        }
        Ok(())
    }
}

enum Inner {
    Plain(Box<PlainEngine>),
    Compact(Box<CompactEngine>),
}

/// One party's engine for one PC instance, for either codec.
pub struct PcEngine {
    cfg: PcConfig,
    has_input: bool,
    inner: Inner,
}

impl PcEngine {
    pub fn new(cfg: PcConfig, keys: Keyring) -> Self {
        let inner = match cfg.codec {
            Codec::Plain => Inner::Plain(Box::new(PlainEngine::new(cfg, keys))),
            Codec::Compact => Inner::Compact(Box::new(CompactEngine::new(cfg, keys))),
        };
        PcEngine { cfg, has_input: false, inner }
    }

    pub fn config(&self) -> &PcConfig {
        &self.cfg
    }

    pub fn has_input(&self) -> bool {
        self.has_input
    }

    /// Supplies the party's input vector; later calls are ignored.
    pub fn input(&mut self, v: PrefixVector) -> Result<Vec<PcAction>, PcError> {
        if v.len() > self.cfg.l {
            return Err(PcError::InputTooLong { len: v.len(), l: self.cfg.l });
        }
        if self.cfg.codec == Codec::Compact && v.0.last().is_some_and(Value::is_bot) {
            return Err(PcError::TrailingBot);
        }
        self.has_input = true;
        Ok(match &mut self.inner {
            Inner::Plain(e) => e.input(v),
            Inner::Compact(e) => e.input(v),
        })
    }

    /// Handles one message from `from`; invalid messages are dropped.
    pub fn on_message(&mut self, from: usize, msg: PcMsg) -> Vec<PcAction> {
        match &mut self.inner {
            Inner::Plain(e) => e.on_message(from, msg),
            Inner::Compact(e) => e.on_message(from, msg),
        }
    }

    /// Number of messages dropped as invalid or duplicate-round.
    pub fn dropped(&self) -> usize {
        match &self.inner {
            Inner::Plain(e) => e.dropped,
            Inner::Compact(e) => e.dropped(),
        }
    }

    /// Round-1 votes seen so far (for adversaries and diagnostics).
    pub fn round1_values(&self) -> Vec<PrefixVector> {
        match &self.inner {
            Inner::Plain(e) => e.r1.collected().iter().map(|v| v.value().clone()).collect(),
            Inner::Compact(e) => e.round1_values(),
        }
    }
}
