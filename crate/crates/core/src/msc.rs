//! Multi-slot consensus: one Strong PC instance per slot over the ranked
//! digests of the parties' proposals.
//!
//! Each slot starts with a proposal broadcast and a 2Δ timer; the slot's
//! Strong PC runs on the ranked digest vector once every proposal arrived
//! or the timer fired. Its low is committed early, its high finishes the
//! slot, and the ranking for the next slot demotes the first party left out
//! of the high.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::crypto::{hash, Digest, Keyring, PartyId};
use crate::pc::{Codec, ConfigError, OutputKind, Variant};
use crate::prefix::PrefixVector;
use crate::sim::{Action, Report, Time};
use crate::spc::{digest_value, hbot_value, SpcConfig, SpcEngine, SpcMsg};
use crate::wire::{Decode, DecodeError, DecodeErrorKind, Encode, Reader, Sink};

/// Proposals and SPC traffic more than this many slots ahead are dropped.
pub const SLOT_WINDOW: u64 = 2;

/// Moves the first party excluded from `high` (position `|high| + 1`) to
/// the end; identity when `high` has full length.
pub fn update_rank(rank: &[PartyId], high: &PrefixVector) -> Vec<PartyId> {
    let mut r = rank.to_vec();
    let l = high.len();
    if l < r.len() {
        let p = r.remove(l);
        r.push(p);
    }
    r
}

/// Digest of a slot's proposal payload.
pub fn payload_digest(slot: u64, payload: &[u8]) -> Digest {
    let mut b = Vec::with_capacity(8 + payload.len());
    b.extend_from_slice(&slot.to_be_bytes());
    b.extend_from_slice(payload);
    hash(Some(&b))
}

/// Multi-slot parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MscConfig {
    pub n: usize,
    pub f: usize,
    pub variant: Variant,
    pub codec: Codec,
    /// Slot and view timer duration (2Δ).
    pub timeout: Time,
    /// Ranking of slot 1.
    pub rank: Vec<PartyId>,
    /// Number of slots to run.
    pub slots: u64,
}

impl MscConfig {
    pub fn new(n: usize, f: usize, timeout: Time, slots: u64) -> Result<Self, ConfigError> {
        let cfg = MscConfig {
            n,
            f,
            variant: Variant::ThreeRound,
            codec: Codec::Plain,
            timeout,
            rank: (0..n).collect(),
            slots,
        };
        cfg.spc(1, cfg.rank.clone()).check()?;
        Ok(cfg)
    }

    fn spc(&self, slot: u64, rank: Vec<PartyId>) -> SpcConfig {
        SpcConfig { n: self.n, f: self.f, l: self.n, variant: self.variant, codec: self.codec, slot, timeout: self.timeout, rank }
    }
}

/// Multi-slot messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MscMsg {
    Proposal { slot: u64, payload: Arc<[u8]> },
    Spc { slot: u64, msg: SpcMsg },
    FetchReq { slot: u64, digest: Digest },
    FetchResp { slot: u64, payload: Arc<[u8]> },
}

impl MscMsg {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MscMsg::Proposal { .. } => "proposal",
            MscMsg::Spc { msg, .. } => msg.kind_name(),
            MscMsg::FetchReq { .. } => "payload_req",
            MscMsg::FetchResp { .. } => "payload_resp",
        }
    }
}

/// Payload source: the proposal for a slot.
pub type Payloads = Box<dyn Fn(u64) -> Vec<u8>>;

/// External validity of proposals.
pub type Validity = fn(&[u8]) -> bool;

fn slot_timer(slot: u64) -> u64 {
    slot << 1
}

fn view_timer(slot: u64, view: u64) -> u64 {
    ((slot << 24) | view) << 1 | 1
}

type Out = Vec<Action<MscMsg>>;

/// One party's multi-slot engine.
pub struct MscEngine {
    cfg: MscConfig,
    keys: Keyring,
    payloads: Payloads,
    valid: Validity,
    slot: u64,
    buffers: BTreeMap<u64, Vec<Option<Digest>>>,
    preimages: HashMap<Digest, Arc<[u8]>>,
    future: BTreeMap<u64, Vec<(PartyId, SpcMsg)>>,
    spc: BTreeMap<u64, SpcEngine>,
    ranks: BTreeMap<u64, Vec<PartyId>>,
    highs: BTreeMap<u64, PrefixVector>,
    ran: BTreeSet<u64>,
    queue: VecDeque<(u64, usize, PartyId, Digest)>,
    queued: HashSet<Digest>,
    committed: HashSet<Digest>,
    requested: HashSet<Digest>,
    served: HashSet<(PartyId, Digest)>,
    dropped: usize,
}

impl MscEngine {
    pub fn new(cfg: MscConfig, keys: Keyring, payloads: Payloads) -> Self {
        MscEngine {
            cfg,
            keys,
            payloads,
            valid: |_| true,
            slot: 0,
            buffers: BTreeMap::new(),
            preimages: HashMap::new(),
            future: BTreeMap::new(),
            spc: BTreeMap::new(),
            ranks: BTreeMap::new(),
            highs: BTreeMap::new(),
            ran: BTreeSet::new(),
            queue: VecDeque::new(),
            queued: HashSet::new(),
            committed: HashSet::new(),
            requested: HashSet::new(),
            served: HashSet::new(),
            dropped: 0,
        }
    }

    /// Sets the external validity predicate applied to received proposals.
    pub fn with_validity(mut self, valid: Validity) -> Self {
        self.valid = valid;
        self
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Ranking used by a slot.
    pub fn rank(&self, slot: u64) -> Option<&Vec<PartyId>> {
        self.ranks.get(&slot)
    }

    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn start(&mut self) -> Out {
        let mut out = Vec::new();
        self.new_slot(1, &mut out);
        out
    }

    pub fn on_message(&mut self, from: PartyId, msg: MscMsg) -> Out {
        let mut out = Vec::new();
        if from >= self.cfg.n {
            self.dropped += 1;
            return out;
        }
        match msg {
            MscMsg::Proposal { slot, payload } => self.on_proposal(from, slot, payload, &mut out),
            MscMsg::Spc { slot, msg } => {
                if slot > self.slot {
                    if slot <= self.slot + SLOT_WINDOW {
                        self.future.entry(slot).or_default().push((from, msg));
                    } else {
                        self.dropped += 1;
                    }
                } else if let Some(e) = self.spc.get_mut(&slot) {
                    let acts = e.on_message(from, msg);
                    self.spc_actions(slot, acts, &mut out);
                }
            }
            MscMsg::FetchReq { slot, digest } => {
                if let Some(p) = self.preimages.get(&digest) {
                    if self.served.insert((from, digest)) {
                        out.push(Action::Send(from, MscMsg::FetchResp { slot, payload: p.clone() }));
                    }
                }
            }
            MscMsg::FetchResp { slot, payload } => {
                let d = payload_digest(slot, &payload);
                if self.requested.contains(&d) && !self.preimages.contains_key(&d) {
                    self.preimages.insert(d, payload);
                    self.flush(&mut out);
                } else {
                    self.dropped += 1;
                }
            }
        }
        out
    }

    pub fn on_timer(&mut self, id: u64) -> Out {
        let mut out = Vec::new();
        if id & 1 == 0 {
            let slot = id >> 1;
            if slot == self.slot {
                self.run_spc(slot, &mut out);
            }
        } else {
            let (slot, view) = (id >> 25, (id >> 1) & ((1 << 24) - 1));
            if let Some(e) = self.spc.get_mut(&slot) {
                let acts = e.on_timer(view);
                self.spc_actions(slot, acts, &mut out);
            }
        }
        out
    }

    fn new_slot(&mut self, s: u64, out: &mut Out) {
        if s > self.cfg.slots {
            return;
        }
        self.slot = s;
        let rank = match (self.ranks.get(&(s - 1)), self.highs.get(&(s - 1))) {
            (Some(r), Some(h)) => update_rank(r, h),
            _ => self.cfg.rank.clone(),
        };
        self.ranks.insert(s, rank.clone());
        self.spc.insert(s, SpcEngine::new(self.cfg.spc(s, rank), self.keys.clone()));
        out.push(Action::Report(Report::SlotStart { slot: s }));
        let payload: Arc<[u8]> = (self.payloads)(s).into();
        out.push(Action::Broadcast(MscMsg::Proposal { slot: s, payload }));
        out.push(Action::Timer { id: slot_timer(s), after: self.cfg.timeout });
        for (from, msg) in self.future.remove(&s).unwrap_or_default() {
            let acts = self.spc.get_mut(&s).expect("just created").on_message(from, msg);
            self.spc_actions(s, acts, out);
        }
        self.future.retain(|&k, _| k > s);
        if self.buffers.get(&s).is_some_and(|b| b.iter().all(Option::is_some)) {
            self.run_spc(s, out);
        }
    }

    fn on_proposal(&mut self, from: PartyId, s: u64, payload: Arc<[u8]>, out: &mut Out) {
        if s < self.slot.max(1) || s > self.slot + SLOT_WINDOW || !(self.valid)(&payload) {
            self.dropped += 1;
            return;
        }
        let d = payload_digest(s, &payload);
        self.preimages.entry(d).or_insert(payload);
        let n = self.cfg.n;
        let buf = self.buffers.entry(s).or_insert_with(|| vec![None; n]);
        if buf[from].is_none() {
            buf[from] = Some(d);
        }
        if s == self.slot && buf.iter().all(Option::is_some) {
            self.run_spc(s, out);
        }
        if !self.queue.is_empty() {
            self.flush(out);
        }
    }

    fn run_spc(&mut self, s: u64, out: &mut Out) {
        if !self.ran.insert(s) {
            return;
        }
        let rank = self.ranks[&s].clone();
        let buf = self.buffers.get(&s).cloned().unwrap_or_else(|| vec![None; self.cfg.n]);
        let input = rank.iter().map(|&p| buf[p].as_ref().map_or_else(hbot_value, digest_value)).collect();
        let acts = self.spc.get_mut(&s).expect("slot engine").input(PrefixVector(input)).expect("length n");
        self.spc_actions(s, acts, out);
    }

    fn spc_actions(&mut self, s: u64, acts: Vec<Action<SpcMsg>>, out: &mut Out) {
        let mut advance = false;
        for a in acts {
            match a {
                Action::Broadcast(msg) => out.push(Action::Broadcast(MscMsg::Spc { slot: s, msg })),
                Action::Send(to, msg) => out.push(Action::Send(to, MscMsg::Spc { slot: s, msg })),
                Action::Timer { id, after } => out.push(Action::Timer { id: view_timer(s, id), after }),
                Action::Report(Report::Spc { kind, value, slot }) => {
                    out.push(Action::Report(Report::Spc { slot, kind, value: value.clone() }));
                    self.commit(s, &value, out);
                    if kind == OutputKind::High {
                        let rank = self.ranks[&s].clone();
                        out.push(Action::Report(Report::SlotHigh { slot: s, high: value.clone(), rank }));
                        self.highs.insert(s, value);
                        advance = s == self.slot;
                    }
                }
                Action::Report(r) => out.push(Action::Report(r)),
            }
        }
        if advance {
            self.new_slot(s + 1, out);
        }
    }

    fn commit(&mut self, s: u64, v: &PrefixVector, out: &mut Out) {
        let bot = hbot_value();
        let rank = &self.ranks[&s];
        for (k, e) in v.0.iter().enumerate() {
            if *e == bot {
                continue;
            }
            let Some(d) = e.bytes().and_then(|b| <[u8; 32]>::try_from(b).ok()).map(Digest) else {
                continue;
            };
            if self.committed.contains(&d) || !self.queued.insert(d) {
                continue;
            }
            self.queue.push_back((s, k, rank[k], d));
        }
        self.flush(out);
    }

    /// Commits queued entries in order while their payloads are known.
    fn flush(&mut self, out: &mut Out) {
        while let Some(&(slot, index, origin, digest)) = self.queue.front() {
            if !self.preimages.contains_key(&digest) {
                if self.requested.insert(digest) {
                    out.push(Action::Broadcast(MscMsg::FetchReq { slot, digest }));
                }
                return;
            }
            self.queue.pop_front();
            self.committed.insert(digest);
            out.push(Action::Report(Report::Commit { slot, index, origin, digest }));
        }
    }
}

// ---- wire encoding ---------------------------------------------------------

impl Encode for MscMsg {
    fn encode<S: Sink>(&self, s: &mut S) {
        match self {
            MscMsg::Proposal { slot, payload } => {
                s.put_u8(0x30);
                s.put_varint(*slot);
                s.put_len_bytes(payload);
            }
            MscMsg::Spc { slot, msg } => {
                s.put_u8(0x31);
                s.put_varint(*slot);
                msg.encode(s);
            }
            MscMsg::FetchReq { slot, digest } => {
                s.put_u8(0x32);
                s.put_varint(*slot);
                digest.encode(s);
            }
            MscMsg::FetchResp { slot, payload } => {
                s.put_u8(0x33);
                s.put_varint(*slot);
                s.put_len_bytes(payload);
            }
        }
    }
}

impl Decode for MscMsg {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let tag = r.u8()?;
        let slot = r.field("slot", |r| r.varint())?;
        match tag {
            0x30 => Ok(MscMsg::Proposal { slot, payload: r.field("payload", |r| r.len_bytes())?.into() }),
            0x31 => Ok(MscMsg::Spc { slot, msg: r.field("msg", SpcMsg::decode)? }),
            0x32 => Ok(MscMsg::FetchReq { slot, digest: r.field("digest", Digest::decode)? }),
            0x33 => Ok(MscMsg::FetchResp { slot, payload: r.field("payload", |r| r.len_bytes())?.into() }),
            t => Err(r.err(DecodeErrorKind::BadTag(t))),
        }
    }
}
