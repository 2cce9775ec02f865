//! The Prefix Consensus family: 3-round, optimistic (4 rounds with a 2-round
//! optimistic output) and the 2-round protocol for `n >= 5f+1`, together with
//! the public predicates that make their outputs verifiable.

pub mod certify;
pub mod engine;
pub mod verify;

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compact::{CVote1, CVote2, CVote3, CompactQc3};
use crate::crypto::{DomainTag, MsgKind, Signature};
use crate::prefix::PrefixVector;
use crate::wire::{put_list, Decode, DecodeError, DecodeErrorKind, Encode, Reader, Sink};

pub use engine::{PcAction, PcEngine};

/// Protocol variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    ThreeRound,
    Optimistic,
    Fast5f1,
}

/// Message encoding: full nested votes, or the compact prefix-signature
/// encoding (3-round only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Codec {
    #[default]
    Plain,
    Compact,
}

/// Protocol family byte of the domain tag.
pub const FAMILY_PC: u8 = 1;
/// Family byte for views nested inside Strong PC.
pub const FAMILY_SPC: u8 = 2;

/// Identifies one protocol instance; every signature is bound to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Instance {
    pub family: u8,
    pub slot: u64,
    pub view: u64,
}

impl Instance {
    pub fn standalone() -> Self {
        Instance { family: FAMILY_PC, slot: 0, view: 0 }
    }

    pub fn tag(&self, kind: MsgKind) -> DomainTag {
        DomainTag::new(kind, self.family, self.slot, self.view)
    }
}

/// Configuration errors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{variant:?} requires n >= {need}, got n = {n} with f = {f}")]
    Resilience { variant: Variant, n: usize, f: usize, need: usize },
    #[error("compact codec supports only the 3-round variant")]
    CompactVariant,
    #[error("vector capacity must be positive")]
    ZeroCapacity,
}

/// Static parameters of one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcConfig {
    pub n: usize,
    pub f: usize,
    pub l: usize,
    pub variant: Variant,
    pub codec: Codec,
    pub inst: Instance,
}

impl PcConfig {
    pub fn new(n: usize, f: usize, l: usize, variant: Variant, codec: Codec, inst: Instance) -> Result<Self, ConfigError> {
        let need = match variant {
            Variant::ThreeRound | Variant::Optimistic => 3 * f + 1,
            Variant::Fast5f1 => 5 * f + 1,
        };
        if n < need {
            return Err(ConfigError::Resilience { variant, n, f, need });
        }
        if codec == Codec::Compact && variant != Variant::ThreeRound {
            return Err(ConfigError::CompactVariant);
        }
        if l == 0 {
            return Err(ConfigError::ZeroCapacity);
        }
        Ok(PcConfig { n, f, l, variant, codec, inst })
    }

    /// Quorum size `n - f`.
    pub fn quorum(&self) -> usize {
        self.n - self.f
    }

    /// Support threshold for the first certification step.
    pub fn support(&self) -> usize {
        match self.variant {
            Variant::ThreeRound | Variant::Optimistic => self.f + 1,
            Variant::Fast5f1 => self.n - 2 * self.f,
        }
    }

    pub fn tag(&self, kind: MsgKind) -> DomainTag {
        self.inst.tag(kind)
    }

    pub fn with_inst(mut self, inst: Instance) -> Self {
        self.inst = inst;
        self
    }
}

/// Cached validity of an immutable vote or certificate, keyed by the
/// configuration it was checked under (one verifier per process is assumed).
/// A lookup under another configuration recomputes without caching; cloning
/// yields an empty cache so that edited copies are re-verified.
pub struct Memo<T = bool>(OnceLock<(PcConfig, T)>);

impl<T> Default for Memo<T> {
    fn default() -> Self {
        Memo(OnceLock::new())
    }
}

impl<T: Clone> Memo<T> {
    pub fn get_or(&self, cfg: &PcConfig, f: impl FnOnce() -> T) -> T {
        match self.0.get() {
            Some((c, v)) if c == cfg => v.clone(),
            Some(_) => f(),
            None => self.0.get_or_init(|| (*cfg, f())).1.clone(),
        }
    }
}

impl<T> Clone for Memo<T> {
    fn clone(&self) -> Self {
        Memo::default()
    }
}

impl<T> PartialEq for Memo<T> {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl<T> Eq for Memo<T> {}

impl<T> fmt::Debug for Memo<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_")
    }
}

/// Round-1 vote on an input vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vote1 {
    pub value: PrefixVector,
    pub sig: Signature,
    pub memo: Memo,
}

/// Round-2 vote carrying the QC1 that certifies its value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vote2 {
    pub value: PrefixVector,
    pub sig: Signature,
    pub qc1: Arc<Qc1>,
    pub memo: Memo,
}

/// Round-3 vote; the optimistic variant also carries the voter's QC1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vote3 {
    pub value: PrefixVector,
    pub sig: Signature,
    pub qc1: Option<Arc<Qc1>>,
    pub qc2: Arc<Qc2>,
    pub memo: Memo,
}

/// Round-4 vote (optimistic variant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vote4 {
    pub value: PrefixVector,
    pub sig: Signature,
    pub qc3: Arc<Qc3>,
    pub memo: Memo,
}

/// A quorum of same-round votes from distinct signers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Qc<V> {
    pub votes: Vec<Arc<V>>,
    pub memo: Memo,
}

impl<V> Qc<V> {
    pub fn new(votes: Vec<Arc<V>>) -> Self {
        Qc { votes, memo: Memo::default() }
    }
}

pub type Qc1 = Qc<Vote1>;
pub type Qc2 = Qc<Vote2>;
pub type Qc3 = Qc<Vote3>;
pub type Qc4 = Qc<Vote4>;

/// Common accessors of plain votes.
pub trait PlainVote {
    fn value(&self) -> &PrefixVector;
    fn sig(&self) -> &Signature;
}

macro_rules! plain_vote {
    ($t:ty) => {
        impl PlainVote for $t {
            fn value(&self) -> &PrefixVector {
                &self.value
            }
            fn sig(&self) -> &Signature {
                &self.sig
            }
        }
    };
}

plain_vote!(Vote1);
plain_vote!(Vote2);
plain_vote!(Vote3);
plain_vote!(Vote4);

impl<V: PlainVote> Qc<V> {
    pub fn values(&self) -> Vec<&PrefixVector> {
        self.votes.iter().map(|v| v.value()).collect()
    }

    pub fn signers(&self) -> Vec<usize> {
        self.votes.iter().map(|v| v.sig().signer).collect()
    }
}

/// Certificate attached to a verifiable output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Proof {
    Qc2(Arc<Qc2>),
    Qc3(Arc<Qc3>),
    Qc4(Arc<Qc4>),
    Compact(Arc<CompactQc3>),
}

impl Proof {
    pub fn stage(&self) -> &'static str {
        match self {
            Proof::Qc2(_) => "qc2",
            Proof::Qc3(_) => "qc3",
            Proof::Qc4(_) => "qc4",
            Proof::Compact(_) => "cqc3",
        }
    }
}

/// Which output an action carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Opt,
    Low,
    High,
}

/// One output of an instance with its proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcOutput {
    pub kind: OutputKind,
    pub value: PrefixVector,
    pub proof: Proof,
}

/// Messages of one PC instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PcMsg {
    Vote1(Arc<Vote1>),
    Vote2(Arc<Vote2>),
    Vote3(Arc<Vote3>),
    Vote4(Arc<Vote4>),
    CVote1(Arc<CVote1>),
    CVote2(Arc<CVote2>),
    CVote3(Arc<CVote3>),
}

impl PcMsg {
    /// Short kind name used in metrics and transcripts.
    pub fn kind_name(&self) -> &'static str {
        match self {
            PcMsg::Vote1(_) => "vote1",
            PcMsg::Vote2(_) => "vote2",
            PcMsg::Vote3(_) => "vote3",
            PcMsg::Vote4(_) => "vote4",
            PcMsg::CVote1(_) => "cvote1",
            PcMsg::CVote2(_) => "cvote2",
            PcMsg::CVote3(_) => "cvote3",
        }
    }

    /// The signer claimed by the message.
    pub fn signer(&self) -> usize {
        match self {
            PcMsg::Vote1(v) => v.sig.signer,
            PcMsg::Vote2(v) => v.sig.signer,
            PcMsg::Vote3(v) => v.sig.signer,
            PcMsg::Vote4(v) => v.sig.signer,
            PcMsg::CVote1(v) => v.signer,
            PcMsg::CVote2(v) => v.signer,
            PcMsg::CVote3(v) => v.sig.signer,
        }
    }

    pub fn tag_byte(&self) -> u8 {
        match self {
            PcMsg::Vote1(_) => 0x10,
            PcMsg::Vote2(_) => 0x11,
            PcMsg::Vote3(_) => 0x12,
            PcMsg::Vote4(_) => 0x13,
            PcMsg::CVote1(_) => 0x14,
            PcMsg::CVote2(_) => 0x15,
            PcMsg::CVote3(_) => 0x16,
        }
    }
}

impl Encode for Vote1 {
    fn encode<S: Sink>(&self, s: &mut S) {
        self.value.encode(s);
        self.sig.encode(s);
    }
}

impl Decode for Vote1 {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let value = r.field("value", PrefixVector::decode)?;
        let sig = r.field("sig", Signature::decode)?;
        Ok(Vote1 { value, sig, memo: Memo::default() })
    }
}

impl Encode for Vote2 {
    fn encode<S: Sink>(&self, s: &mut S) {
        self.value.encode(s);
        self.sig.encode(s);
        self.qc1.encode(s);
    }
}

impl Decode for Vote2 {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let value = r.field("value", PrefixVector::decode)?;
        let sig = r.field("sig", Signature::decode)?;
        let qc1 = r.field("qc1", Arc::<Qc1>::decode)?;
        Ok(Vote2 { value, sig, qc1, memo: Memo::default() })
    }
}

impl Encode for Vote3 {
    fn encode<S: Sink>(&self, s: &mut S) {
        self.value.encode(s);
        self.sig.encode(s);
        match &self.qc1 {
            None => s.put_u8(0),
            Some(q) => {
                s.put_u8(1);
                q.encode(s);
            }
        }
        self.qc2.encode(s);
    }
}

impl Decode for Vote3 {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let value = r.field("value", PrefixVector::decode)?;
        let sig = r.field("sig", Signature::decode)?;
        let qc1 = r.field("qc1", |r| match r.u8()? {
            0 => Ok(None),
            1 => Arc::<Qc1>::decode(r).map(Some),
            t => Err(r.err(DecodeErrorKind::BadTag(t))),
        })?;
        let qc2 = r.field("qc2", Arc::<Qc2>::decode)?;
        Ok(Vote3 { value, sig, qc1, qc2, memo: Memo::default() })
    }
}

impl Encode for Vote4 {
    fn encode<S: Sink>(&self, s: &mut S) {
        self.value.encode(s);
        self.sig.encode(s);
        self.qc3.encode(s);
    }
}

impl Decode for Vote4 {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let value = r.field("value", PrefixVector::decode)?;
        let sig = r.field("sig", Signature::decode)?;
        let qc3 = r.field("qc3", Arc::<Qc3>::decode)?;
        Ok(Vote4 { value, sig, qc3, memo: Memo::default() })
    }
}

impl<V: Encode> Encode for Qc<V> {
    fn encode<S: Sink>(&self, s: &mut S) {
        put_list(s, &self.votes);
    }
}

impl<V: Decode> Decode for Qc<V> {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Qc::new(r.list("votes", Arc::<V>::decode)?))
    }
}

impl Encode for Proof {
    fn encode<S: Sink>(&self, s: &mut S) {
        match self {
            Proof::Qc2(q) => {
                s.put_u8(2);
                q.encode(s)
            }
            Proof::Qc3(q) => {
                s.put_u8(3);
                q.encode(s)
            }
            Proof::Qc4(q) => {
                s.put_u8(4);
                q.encode(s)
            }
            Proof::Compact(q) => {
                s.put_u8(0x13);
                q.encode(s)
            }
        }
    }
}

impl Decode for Proof {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            2 => r.field("qc2", Arc::<Qc2>::decode).map(Proof::Qc2),
            3 => r.field("qc3", Arc::<Qc3>::decode).map(Proof::Qc3),
            4 => r.field("qc4", Arc::<Qc4>::decode).map(Proof::Qc4),
            0x13 => r.field("cqc3", Arc::<CompactQc3>::decode).map(Proof::Compact),
            t => Err(r.err(DecodeErrorKind::BadTag(t))),
        }
    }
}

impl Encode for PcMsg {
    fn encode<S: Sink>(&self, s: &mut S) {
        s.put_u8(self.tag_byte());
        match self {
            PcMsg::Vote1(v) => v.encode(s),
            PcMsg::Vote2(v) => v.encode(s),
            PcMsg::Vote3(v) => v.encode(s),
            PcMsg::Vote4(v) => v.encode(s),
            PcMsg::CVote1(v) => v.encode(s),
            PcMsg::CVote2(v) => v.encode(s),
            PcMsg::CVote3(v) => v.encode(s),
        }
    }
}

impl Decode for PcMsg {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0x10 => r.field("vote1", Arc::<Vote1>::decode).map(PcMsg::Vote1),
            0x11 => r.field("vote2", Arc::<Vote2>::decode).map(PcMsg::Vote2),
            0x12 => r.field("vote3", Arc::<Vote3>::decode).map(PcMsg::Vote3),
            0x13 => r.field("vote4", Arc::<Vote4>::decode).map(PcMsg::Vote4),
            0x14 => r.field("cvote1", Arc::<CVote1>::decode).map(PcMsg::CVote1),
            0x15 => r.field("cvote2", Arc::<CVote2>::decode).map(PcMsg::CVote2),
            0x16 => r.field("cvote3", Arc::<CVote3>::decode).map(PcMsg::CVote3),
            t => Err(r.err(DecodeErrorKind::BadTag(t))),
        }
    }
}
