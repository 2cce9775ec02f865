//! Leaderless Strong Prefix Consensus.
//!
//! A sequence of views, each running one verifiable PC instance. View 1
//! decides on the parties' inputs; every later view decides on the ranked
//! digests of the proposal objects (view-entry certificates) received for
//! it, under a ranking shifted by one position per view. A view whose
//! verifiable high has a parent (first non-⊥ digest pointing at a certified
//! earlier high) yields a direct certificate into the next view; otherwise
//! `f + 1` signed empty-view statements are aggregated into an indirect
//! certificate that skips it. Committing a low follows parent pointers back
//! to view 1, whose high every honest party then outputs.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use crate::crypto::{hash, hbot, AggregateSignature, Digest, Keyring, MsgKind, PartyId, Signature, Verifier};
use crate::pc::verify::{predicate_high, predicate_low};
use crate::pc::{Codec, ConfigError, Instance, OutputKind, PcAction, PcConfig, PcEngine, PcMsg, Proof, Variant, FAMILY_SPC};
use crate::pc::engine::PcError;
use crate::prefix::{PrefixVector, Value};
use crate::sim::{Action, Report, Time};
use crate::wire::{Decode, DecodeError, DecodeErrorKind, Encode, Reader, Sink};

/// VPC messages more than this many views ahead of the local view are
/// dropped.
pub const VIEW_WINDOW: u64 = 64;

/// Left rotation by one: `(p1, p2, ..., pn) -> (p2, ..., pn, p1)`.
pub fn shift(rank: &[PartyId]) -> Vec<PartyId> {
    let mut r = rank.to_vec();
    if !r.is_empty() {
        r.rotate_left(1);
    }
    r
}

/// Ranking used for the input of view `w >= 2`: the initial ranking for
/// view 2, shifted once per later view.
pub fn view_rank(rank: &[PartyId], w: u64) -> Vec<PartyId> {
    let mut r = rank.to_vec();
    if !r.is_empty() && w > 2 {
        let k = ((w - 2) % r.len() as u64) as usize;
        r.rotate_left(k);
    }
    r
}

/// The digest value standing for a missing proposal.
pub fn hbot_value() -> Value {
    Value::new(hbot().0)
}

/// Element value carrying a digest.
pub fn digest_value(d: &Digest) -> Value {
    Value::new(d.0)
}

fn value_digest(v: &Value) -> Option<Digest> {
    let b = v.bytes()?;
    let arr: [u8; 32] = b.try_into().ok()?;
    Some(Digest(arr))
}

/// Static parameters of one Strong PC instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpcConfig {
    pub n: usize,
    pub f: usize,
    /// Input capacity of view 1; later views decide length-`n` vectors.
    pub l: usize,
    pub variant: Variant,
    pub codec: Codec,
    /// Slot number bound into every signature (0 when standalone).
    pub slot: u64,
    /// View timer duration (2Δ).
    pub timeout: Time,
    /// Input ranking; views shift it.
    pub rank: Vec<PartyId>,
}

impl SpcConfig {
    pub fn new(n: usize, f: usize, l: usize, timeout: Time) -> Result<Self, ConfigError> {
        let cfg = SpcConfig {
            n,
            f,
            l,
            variant: Variant::ThreeRound,
            codec: Codec::Plain,
            slot: 0,
            timeout,
            rank: (0..n).collect(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Validates the nested PC parameters.
    pub fn check(&self) -> Result<(), ConfigError> {
        self.vpc(1)?;
        self.vpc(2).map(|_| ())
    }

    fn vpc(&self, w: u64) -> Result<PcConfig, ConfigError> {
        let l = if w == 1 { self.l } else { self.n };
        PcConfig::new(self.n, self.f, l, self.variant, self.codec, Instance { family: FAMILY_SPC, slot: self.slot, view: w })
    }

    /// Configuration of the verifiable PC instance of view `w`.
    pub fn view_config(&self, w: u64) -> PcConfig {
        self.vpc(w).expect("checked at construction")
    }

    fn tag(&self, w: u64) -> crate::crypto::DomainTag {
        Instance { family: FAMILY_SPC, slot: self.slot, view: w }.tag(MsgKind::EmptyView)
    }
}

/// Justification for entering a view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cert {
    /// A verifiable high of view `view` that has a parent.
    Direct { view: u64, high: PrefixVector, proof: Proof },
    /// `f + 1` signed statements that view `view` was empty, carrying the
    /// highest reported verifiable high (of view `star`).
    Indirect { view: u64, star: u64, high: PrefixVector, proof: Proof, sigma: AggregateSignature },
}

impl Cert {
    /// The view the certificate leaves.
    pub fn view(&self) -> u64 {
        match self {
            Cert::Direct { view, .. } | Cert::Indirect { view, .. } => *view,
        }
    }

    /// The referenced `(view, high)` pair.
    pub fn parent(&self) -> (u64, &PrefixVector) {
        match self {
            Cert::Direct { view, high, .. } => (*view, high),
            Cert::Indirect { star, high, .. } => (*star, high),
        }
    }

    fn proof(&self) -> &Proof {
        match self {
            Cert::Direct { proof, .. } | Cert::Indirect { proof, .. } => proof,
        }
    }
}

/// A party's proposal for view `view`: its view-entry certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposalObj {
    pub view: u64,
    pub cert: Cert,
}

impl ProposalObj {
    pub fn digest(&self) -> Digest {
        hash(Some(&self.to_bytes()))
    }
}

/// Signed statement that view `view` produced a parentless high.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmptyView {
    pub view: u64,
    pub star: u64,
    pub high: PrefixVector,
    pub proof: Proof,
    pub sig: Signature,
}

/// Bytes signed by an empty-view statement.
pub fn empty_view_bytes(w: u64, star: u64) -> Vec<u8> {
    let mut m = Vec::with_capacity(16);
    m.extend_from_slice(&w.to_be_bytes());
    m.extend_from_slice(&star.to_be_bytes());
    m
}

/// A verifiable low of some view, gossiped for commitment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewCommit {
    pub view: u64,
    pub value: PrefixVector,
    pub proof: Proof,
}

/// Strong PC messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpcMsg {
    Vpc { view: u64, msg: PcMsg },
    NewView(Arc<ProposalObj>),
    EmptyView(Arc<EmptyView>),
    NewCommit(Arc<NewCommit>),
    FetchReq(Digest),
    FetchResp(Arc<ProposalObj>),
}

impl SpcMsg {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SpcMsg::Vpc { msg, .. } => msg.kind_name(),
            SpcMsg::NewView(_) => "new_view",
            SpcMsg::EmptyView(_) => "empty_view",
            SpcMsg::NewCommit(_) => "new_commit",
            SpcMsg::FetchReq(_) => "fetch_req",
            SpcMsg::FetchResp(_) => "fetch_resp",
        }
    }
}

#[derive(Debug, Clone)]
enum Pending {
    NewView(PartyId, Arc<ProposalObj>),
    EmptyView(PartyId, Arc<EmptyView>),
    High(u64, PrefixVector, Proof),
    Commit(u64, PrefixVector),
}

/// Computation blocked on the preimage of a digest.
struct Missing(Digest);

type Out = Vec<Action<SpcMsg>>;

/// One party's Strong PC engine.
pub struct SpcEngine {
    cfg: SpcConfig,
    keys: Keyring,
    ver: Verifier,
    view: u64,
    vpc: BTreeMap<u64, PcEngine>,
    ran: BTreeSet<u64>,
    proposals: BTreeMap<u64, Vec<Option<Digest>>>,
    empties: BTreeMap<u64, Vec<Arc<EmptyView>>>,
    star: Option<(u64, PrefixVector, Proof)>,
    store: HashMap<Digest, Arc<ProposalObj>>,
    sent_new_view: BTreeSet<u64>,
    sent_empty: BTreeSet<u64>,
    relayed: HashSet<(u64, PrefixVector)>,
    committed_views: BTreeSet<u64>,
    low: Option<PrefixVector>,
    high: Option<PrefixVector>,
    parked: Vec<Pending>,
    requested: HashSet<Digest>,
    served: HashSet<(PartyId, Digest)>,
    store_grew: bool,
    dropped: usize,
}

impl SpcEngine {
    pub fn new(cfg: SpcConfig, keys: Keyring) -> Self {
        let ver = keys.verifier();
        SpcEngine {
            cfg,
            keys,
            ver,
            view: 1,
            vpc: BTreeMap::new(),
            ran: BTreeSet::new(),
            proposals: BTreeMap::new(),
            empties: BTreeMap::new(),
            star: None,
            store: HashMap::new(),
            sent_new_view: BTreeSet::new(),
            sent_empty: BTreeSet::new(),
            relayed: HashSet::new(),
            committed_views: BTreeSet::new(),
            low: None,
            high: None,
            parked: Vec::new(),
            requested: HashSet::new(),
            served: HashSet::new(),
            store_grew: false,
            dropped: 0,
        }
    }

    pub fn config(&self) -> &SpcConfig {
        &self.cfg
    }

    /// Current view.
    pub fn view(&self) -> u64 {
        self.view
    }

    pub fn low(&self) -> Option<&PrefixVector> {
        self.low.as_ref()
    }

    pub fn high(&self) -> Option<&PrefixVector> {
        self.high.as_ref()
    }

    /// Messages dropped as invalid.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Stored proposal object for a digest.
    pub fn preimage(&self, d: &Digest) -> Option<Arc<ProposalObj>> {
        self.store.get(d).cloned()
    }

    /// Supplies the input, which runs the view-1 instance.
    pub fn input(&mut self, v: PrefixVector) -> Result<Out, PcError> {
        let mut out = Vec::new();
        let acts = self.engine(1).input(v)?;
        self.pc_actions(1, acts, &mut out);
        self.drain(&mut out);
        Ok(out)
    }

    /// Handles one message.
    pub fn on_message(&mut self, from: PartyId, msg: SpcMsg) -> Out {
        let mut out = Vec::new();
        if from >= self.cfg.n {
            self.dropped += 1;
            return out;
        }
        if self.high.is_some() {
            // Quiescent: only serve preimages.
            if let SpcMsg::FetchReq(d) = msg {
                self.serve(from, d, &mut out);
            }
            return out;
        }
        match msg {
            SpcMsg::Vpc { view, msg } => {
                if view == 0 || view > self.view + VIEW_WINDOW {
                    self.dropped += 1;
                } else {
                    let acts = self.engine(view).on_message(from, msg);
                    self.pc_actions(view, acts, &mut out);
                }
            }
            SpcMsg::NewView(obj) => self.attempt(Pending::NewView(from, obj), &mut out),
            SpcMsg::EmptyView(ev) => self.attempt(Pending::EmptyView(from, ev), &mut out),
            SpcMsg::NewCommit(nc) => self.on_new_commit(nc, &mut out),
            SpcMsg::FetchReq(d) => self.serve(from, d, &mut out),
            SpcMsg::FetchResp(obj) => {
                let d = obj.digest();
                if self.requested.contains(&d) {
                    self.insert(d, obj);
                } else {
                    self.dropped += 1;
                }
            }
        }
        self.drain(&mut out);
        out
    }

    /// Timer of view `w` expired.
    pub fn on_timer(&mut self, w: u64) -> Out {
        let mut out = Vec::new();
        if self.high.is_none() {
            self.run_vpc(w, &mut out);
            self.drain(&mut out);
        }
        out
    }

    fn engine(&mut self, w: u64) -> &mut PcEngine {
        let cfg = self.cfg.view_config(w);
        let keys = &self.keys;
        self.vpc.entry(w).or_insert_with(|| PcEngine::new(cfg, keys.clone()))
    }

    fn pc_actions(&mut self, w: u64, acts: Vec<PcAction>, out: &mut Out) {
        for a in acts {
            match a {
                PcAction::Broadcast(msg) => out.push(Action::Broadcast(SpcMsg::Vpc { view: w, msg })),
                PcAction::Output(o) => match o.kind {
                    OutputKind::Low => {
                        self.relayed.insert((w, o.value.clone()));
                        out.push(Action::Broadcast(SpcMsg::NewCommit(Arc::new(NewCommit {
                            view: w,
                            value: o.value,
                            proof: o.proof,
                        }))));
                    }
                    OutputKind::High => self.attempt(Pending::High(w, o.value, o.proof), out),
                    OutputKind::Opt => {}
                },
                PcAction::Fault(e) => out.push(Action::Report(Report::Fault(format!("view {w}: {e}")))),
            }
        }
    }

    fn serve(&mut self, from: PartyId, d: Digest, out: &mut Out) {
        if let Some(obj) = self.store.get(&d) {
            if self.served.insert((from, d)) {
                out.push(Action::Send(from, SpcMsg::FetchResp(obj.clone())));
            }
        }
    }

    fn insert(&mut self, d: Digest, obj: Arc<ProposalObj>) {
        if self.store.insert(d, obj).is_none() {
            self.store_grew = true;
        }
    }

    /// Retries parked computations while new preimages keep arriving.
    fn drain(&mut self, out: &mut Out) {
        while self.store_grew && !self.parked.is_empty() {
            self.store_grew = false;
            for p in std::mem::take(&mut self.parked) {
                self.attempt(p, out);
            }
        }
        self.store_grew = false;
    }

    fn attempt(&mut self, p: Pending, out: &mut Out) {
        let res = match p.clone() {
            Pending::NewView(from, obj) => self.on_new_view(from, obj, out),
            Pending::EmptyView(from, ev) => self.on_empty_view(from, ev, out),
            Pending::High(w, v, proof) => self.on_vpc_high(w, v, proof, out),
            Pending::Commit(w, v) => self.commit(w, v, out),
        };
        if let Err(Missing(d)) = res {
            if self.requested.insert(d) {
                out.push(Action::Broadcast(SpcMsg::FetchReq(d)));
            }
            self.parked.push(p);
        }
    }

    /// First non-⊥ entry's certified `(view, high)`; `(0, [])` when all
    /// entries are ⊥.
    fn parent(&self, v: &PrefixVector) -> Result<(u64, PrefixVector), Missing> {
        let bot = hbot_value();
        for e in &v.0 {
            if *e == bot {
                continue;
            }
            let Some(d) = value_digest(e) else {
                // Not a digest; it has no preimage and never resolves.
                return Err(Missing(hash(e.bytes())));
            };
            return match self.store.get(&d) {
                Some(obj) => {
                    let (w, h) = obj.cert.parent();
                    Ok((w, h.clone()))
                }
                None => Err(Missing(d)),
            };
        }
        Ok((0, PrefixVector::empty()))
    }

    fn has_parent(&self, w: u64, v: &PrefixVector) -> Result<bool, Missing> {
        if w == 1 {
            return Ok(true);
        }
        Ok(self.parent(v)? != (0, PrefixVector::empty()))
    }

    fn high_ok(&self, w: u64, v: &PrefixVector, proof: &Proof) -> bool {
        w >= 1 && predicate_high(&self.cfg.view_config(w), &self.ver, v, proof)
    }

    fn valid_cert(&self, w: u64, cert: &Cert) -> Result<bool, Missing> {
        if w < 2 || cert.view() + 1 != w {
            return Ok(false);
        }
        match cert {
            Cert::Direct { view, high, proof } => {
                if !self.high_ok(*view, high, proof) {
                    return Ok(false);
                }
                self.has_parent(*view, high)
            }
            Cert::Indirect { view, star, high, proof, sigma } => {
                let mut max = 0;
                for (_, m) in sigma.messages() {
                    if m.len() != 16 {
                        return Ok(false);
                    }
                    let w2 = u64::from_be_bytes(m[..8].try_into().expect("8 bytes"));
                    let wh = u64::from_be_bytes(m[8..].try_into().expect("8 bytes"));
                    if w2 != *view {
                        return Ok(false);
                    }
                    max = max.max(wh);
                }
                if sigma.len() < self.cfg.f + 1 || !sigma.verify(&self.ver, &self.cfg.tag(*view)) {
                    return Ok(false);
                }
                if *star != max || !self.high_ok(*star, high, proof) {
                    return Ok(false);
                }
                self.has_parent(*star, high)
            }
        }
    }

    fn broadcast_new_view(&mut self, obj: ProposalObj, out: &mut Out) {
        if self.sent_new_view.insert(obj.view) {
            out.push(Action::Broadcast(SpcMsg::NewView(Arc::new(obj))));
        }
    }

    fn on_vpc_high(&mut self, w: u64, v: PrefixVector, proof: Proof, out: &mut Out) -> Result<(), Missing> {
        if self.has_parent(w, &v)? {
            self.broadcast_new_view(ProposalObj { view: w + 1, cert: Cert::Direct { view: w, high: v, proof } }, out);
        } else if let Some((star, high, pi)) = self.star.clone() {
            if self.sent_empty.insert(w) {
                let sig = self.keys.sign(&self.cfg.tag(w), &empty_view_bytes(w, star));
                let ev = EmptyView { view: w, star, high, proof: pi, sig };
                out.push(Action::Broadcast(SpcMsg::EmptyView(Arc::new(ev))));
            }
        }
        Ok(())
    }

    fn on_new_view(&mut self, from: PartyId, obj: Arc<ProposalObj>, out: &mut Out) -> Result<(), Missing> {
        let w = obj.view;
        if w < self.view {
            return Ok(());
        }
        if !self.valid_cert(w, &obj.cert)? {
            self.dropped += 1;
            return Ok(());
        }
        let d = obj.digest();
        self.insert(d, obj.clone());
        if w > self.view {
            self.broadcast_new_view((*obj).clone(), out);
            self.view = w;
            out.push(Action::Report(Report::View { slot: self.cfg.slot, view: w }));
            out.push(Action::Timer { id: w, after: self.cfg.timeout });
        }
        let (pw, ph) = obj.cert.parent();
        if self.star.as_ref().is_none_or(|s| pw > s.0) {
            self.star = Some((pw, ph.clone(), obj.cert.proof().clone()));
        }
        if let Cert::Indirect { star, .. } = &obj.cert {
            out.push(Action::Report(Report::Skip { slot: self.cfg.slot, view: w, star: *star }));
        }
        let n = self.cfg.n;
        let buf = self.proposals.entry(w).or_insert_with(|| vec![None; n]);
        if buf[from].is_none() {
            buf[from] = Some(d);
        }
        if buf.iter().all(Option::is_some) {
            self.run_vpc(w, out);
        }
        Ok(())
    }

    fn on_empty_view(&mut self, from: PartyId, ev: Arc<EmptyView>, out: &mut Out) -> Result<(), Missing> {
        let w = ev.view;
        if w < self.view || w <= ev.star || ev.sig.signer != from {
            self.dropped += 1;
            return Ok(());
        }
        if !self.ver.verify(&self.cfg.tag(w), &empty_view_bytes(w, ev.star), &ev.sig)
            || !self.high_ok(ev.star, &ev.high, &ev.proof)
        {
            self.dropped += 1;
            return Ok(());
        }
        if !self.has_parent(ev.star, &ev.high)? {
            self.dropped += 1;
            return Ok(());
        }
        let q = self.empties.entry(w).or_default();
        if q.iter().any(|e| e.sig.signer == from) {
            return Ok(());
        }
        q.push(ev);
        if q.len() == self.cfg.f + 1 {
            let entries: Vec<_> =
                q.iter().map(|e| (e.sig.signer, empty_view_bytes(w, e.star), e.sig.clone())).collect();
            let best = q.iter().max_by_key(|e| e.star).expect("non-empty").clone();
            let sigma = AggregateSignature::aggregate(&self.ver, &self.cfg.tag(w), &entries)
                .expect("entries were verified individually");
            let cert = Cert::Indirect { view: w, star: best.star, high: best.high.clone(), proof: best.proof.clone(), sigma };
            self.broadcast_new_view(ProposalObj { view: w + 1, cert }, out);
        }
        Ok(())
    }

    fn on_new_commit(&mut self, nc: Arc<NewCommit>, out: &mut Out) {
        if nc.view == 0 || !predicate_low(&self.cfg.view_config(nc.view), &self.ver, &nc.value, &nc.proof) {
            self.dropped += 1;
            return;
        }
        if self.relayed.insert((nc.view, nc.value.clone())) {
            out.push(Action::Broadcast(SpcMsg::NewCommit(nc.clone())));
        }
        self.attempt(Pending::Commit(nc.view, nc.value.clone()), out);
    }

    fn commit(&mut self, w: u64, v: PrefixVector, out: &mut Out) -> Result<(), Missing> {
        if w == 1 {
            if self.low.is_none() {
                self.low = Some(v.clone());
                out.push(Action::Report(Report::Spc { slot: self.cfg.slot, kind: OutputKind::Low, value: v }));
            }
            return Ok(());
        }
        let (wp, vp) = self.parent(&v)?;
        if self.committed_views.insert(w) {
            out.push(Action::Report(Report::ViewLow { slot: self.cfg.slot, view: w, parent: wp }));
        }
        match wp {
            0 => Ok(()),
            1 => {
                if self.high.is_none() {
                    self.high = Some(vp.clone());
                    out.push(Action::Report(Report::Spc { slot: self.cfg.slot, kind: OutputKind::High, value: vp }));
                }
                Ok(())
            }
            _ if wp < w => self.commit(wp, vp, out),
            _ => Ok(()),
        }
    }

    fn run_vpc(&mut self, w: u64, out: &mut Out) {
        if w < 2 || !self.ran.insert(w) {
            return;
        }
        let bot = hbot_value();
        let buf = self.proposals.get(&w).cloned().unwrap_or_else(|| vec![None; self.cfg.n]);
        let input = view_rank(&self.cfg.rank, w)
            .iter()
            .map(|&p| buf.get(p).copied().flatten().map_or_else(|| bot.clone(), |d| digest_value(&d)))
            .collect();
        let acts = self.engine(w).input(PrefixVector(input)).expect("length n fits view capacity");
        self.pc_actions(w, acts, out);
    }
}

// ---- wire encoding ---------------------------------------------------------

impl Encode for Cert {
    fn encode<S: Sink>(&self, s: &mut S) {
        match self {
            Cert::Direct { view, high, proof } => {
                s.put_u8(0);
                s.put_varint(*view);
                high.encode(s);
                proof.encode(s);
            }
            Cert::Indirect { view, star, high, proof, sigma } => {
                s.put_u8(1);
                s.put_varint(*view);
                s.put_varint(*star);
                high.encode(s);
                proof.encode(s);
                sigma.encode(s);
            }
        }
    }
}

impl Decode for Cert {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(Cert::Direct {
                view: r.field("view", |r| r.varint())?,
                high: r.field("high", PrefixVector::decode)?,
                proof: r.field("proof", Proof::decode)?,
            }),
            1 => Ok(Cert::Indirect {
                view: r.field("view", |r| r.varint())?,
                star: r.field("star", |r| r.varint())?,
                high: r.field("high", PrefixVector::decode)?,
                proof: r.field("proof", Proof::decode)?,
                sigma: r.field("sigma", AggregateSignature::decode)?,
            }),
            t => Err(r.err(DecodeErrorKind::BadTag(t))),
        }
    }
}

impl Encode for ProposalObj {
    fn encode<S: Sink>(&self, s: &mut S) {
        s.put_varint(self.view);
        self.cert.encode(s);
    }
}

impl Decode for ProposalObj {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(ProposalObj { view: r.field("view", |r| r.varint())?, cert: r.field("cert", Cert::decode)? })
    }
}

impl Encode for EmptyView {
    fn encode<S: Sink>(&self, s: &mut S) {
        s.put_varint(self.view);
        s.put_varint(self.star);
        self.high.encode(s);
        self.proof.encode(s);
        self.sig.encode(s);
    }
}

impl Decode for EmptyView {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(EmptyView {
            view: r.field("view", |r| r.varint())?,
            star: r.field("star", |r| r.varint())?,
            high: r.field("high", PrefixVector::decode)?,
            proof: r.field("proof", Proof::decode)?,
            sig: r.field("sig", Signature::decode)?,
        })
    }
}

impl Encode for NewCommit {
    fn encode<S: Sink>(&self, s: &mut S) {
        s.put_varint(self.view);
        self.value.encode(s);
        self.proof.encode(s);
    }
}

impl Decode for NewCommit {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(NewCommit {
            view: r.field("view", |r| r.varint())?,
            value: r.field("value", PrefixVector::decode)?,
            proof: r.field("proof", Proof::decode)?,
        })
    }
}

impl Encode for SpcMsg {
    fn encode<S: Sink>(&self, s: &mut S) {
        match self {
            SpcMsg::Vpc { view, msg } => {
                s.put_u8(0x20);
                s.put_varint(*view);
                msg.encode(s);
            }
            SpcMsg::NewView(o) => {
                s.put_u8(0x21);
                o.encode(s);
            }
            SpcMsg::EmptyView(e) => {
                s.put_u8(0x22);
                e.encode(s);
            }
            SpcMsg::NewCommit(c) => {
                s.put_u8(0x23);
                c.encode(s);
            }
            SpcMsg::FetchReq(d) => {
                s.put_u8(0x24);
                d.encode(s);
            }
            SpcMsg::FetchResp(o) => {
                s.put_u8(0x25);
                o.encode(s);
            }
        }
    }
}

impl Decode for SpcMsg {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0x20 => Ok(SpcMsg::Vpc { view: r.field("view", |r| r.varint())?, msg: r.field("msg", PcMsg::decode)? }),
            0x21 => Ok(SpcMsg::NewView(r.field("new_view", Arc::<ProposalObj>::decode)?)),
            0x22 => Ok(SpcMsg::EmptyView(r.field("empty_view", Arc::<EmptyView>::decode)?)),
            0x23 => Ok(SpcMsg::NewCommit(r.field("new_commit", Arc::<NewCommit>::decode)?)),
            0x24 => Ok(SpcMsg::FetchReq(r.field("digest", Digest::decode)?)),
            0x25 => Ok(SpcMsg::FetchResp(r.field("object", Arc::<ProposalObj>::decode)?)),
            t => Err(r.err(DecodeErrorKind::BadTag(t))),
        }
    }
}
