//! Seeded deterministic discrete-event simulator.
//!
//! Parties are message-driven [`Node`]s. The simulator owns a virtual clock
//! with rational time, delivers envelopes according to a [`DelayPolicy`]
//! (synchronized start or partial synchrony with GST/Δ), fires timers,
//! applies round-robin suspension windows, and lets an [`Interceptor`]
//! rewrite what Byzantine parties send. Simultaneous events are ordered by
//! the key `(time, sender, receiver, sequence)`, so a run is a pure function
//! of its inputs and seed.

pub mod adversary;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest as _, Sha256};

use crate::crypto::{Digest, PartyId};
use crate::derived::GradedOutput;
use crate::pc::{OutputKind, PcOutput};
use crate::prefix::{PrefixVector, Value};
use crate::wire::Encode;

/// Virtual time in units of δ.
pub type Time = Rational64;

/// Integer time.
pub fn t(v: i64) -> Time {
    Time::from_integer(v)
}

/// Effects a node asks the simulator to perform.
#[derive(Debug, Clone)]
pub enum Action<M> {
    /// Send to every party; the copy to self is delivered locally and not
    /// counted as network traffic.
    Broadcast(M),
    /// Point-to-point send.
    Send(PartyId, M),
    /// Fire `on_timer(id)` after the given duration.
    Timer { id: u64, after: Time },
    /// Observable event recorded in the metrics.
    Report(Report),
}

/// Messages carried by the simulator.
pub trait Message: Clone + Encode {
    /// Short kind name for metrics and transcripts.
    fn kind(&self) -> &'static str;

    /// One-line description for transcripts.
    fn summary(&self) -> String {
        self.kind().to_string()
    }
}

/// A message-driven protocol participant.
pub trait Node {
    type Msg: Message;

    fn start(&mut self) -> Vec<Action<Self::Msg>>;

    fn on_message(&mut self, from: PartyId, msg: Self::Msg) -> Vec<Action<Self::Msg>>;

    fn on_timer(&mut self, id: u64) -> Vec<Action<Self::Msg>>;
}

/// Observable protocol events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Report {
    /// Output of a standalone PC instance.
    Pc(PcOutput),
    /// Strong PC low or high output.
    Spc { slot: u64, kind: OutputKind, value: PrefixVector },
    /// A Strong PC party entered a view.
    View { slot: u64, view: u64 },
    /// A verifiable low of view `view > 1` was committed; `parent` is the
    /// view its parent points to, 0 when the low is parentless (empty).
    ViewLow { slot: u64, view: u64, parent: u64 },
    /// An indirect certificate into `view` referencing parent view `star`
    /// was formed or accepted.
    Skip { slot: u64, view: u64, star: u64 },
    /// A multi-slot party started a slot.
    SlotStart { slot: u64 },
    /// A payload was committed.
    Commit { slot: u64, index: usize, origin: PartyId, digest: Digest },
    /// A slot finished with this high value under this ranking.
    SlotHigh { slot: u64, high: PrefixVector, rank: Vec<PartyId> },
    /// Graded consensus output.
    Graded(GradedOutput),
    /// Binary or validated consensus decision; `None` is undecided.
    Decide(Option<Value>),
    /// An engine detected an impossible local state.
    Fault(String),
}

/// Per-link base delay override.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkDelay {
    pub from: PartyId,
    pub to: PartyId,
    pub delay: Time,
}

/// Network timing model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayPolicy {
    /// Global stabilization time.
    pub gst: Time,
    /// Post-GST delivery bound Δ.
    pub delta_cap: Time,
    /// Base delay δ of the synchronized preset.
    pub delta: Time,
    /// Post-GST delays drawn uniformly from `(0, Δ]` instead of exactly δ.
    pub jitter: bool,
    /// Pre-GST delays drawn uniformly from `(0, GST + Δ - t]`, which permutes
    /// pre-GST delivery orders.
    pub fuzz: bool,
    /// Links stretched to the latest admissible delivery before GST.
    pub slow_links: Vec<(PartyId, PartyId)>,
    pub links: Vec<LinkDelay>,
}

/// Number of discrete steps random delays are drawn from.
const GRAIN: i64 = 16;

impl DelayPolicy {
    /// Every message takes exactly δ; all parties start together.
    pub fn synchronized(delta: Time) -> Self {
        DelayPolicy {
            gst: t(0),
            delta_cap: delta,
            delta,
            jitter: false,
            fuzz: false,
            slow_links: Vec::new(),
            links: Vec::new(),
        }
    }

    /// Random delays, fuzzed before `gst`, at most `delta_cap` after.
    pub fn partial(gst: Time, delta_cap: Time) -> Self {
        DelayPolicy {
            gst,
            delta_cap,
            delta: delta_cap,
            jitter: true,
            fuzz: true,
            slow_links: Vec::new(),
            links: Vec::new(),
        }
    }

    /// Latest admissible delivery time of a message sent at `now`.
    pub fn deadline(&self, now: Time) -> Time {
        now.max(self.gst) + self.delta_cap
    }

    fn uniform(rng: &mut ChaCha8Rng, span: Time) -> Time {
        span * Time::new(rng.gen_range(1..=GRAIN), GRAIN)
    }

    /// Delay of one envelope.
    pub fn draw(&self, rng: &mut ChaCha8Rng, from: PartyId, to: PartyId, now: Time) -> Time {
        let latest = self.deadline(now) - now;
        if now < self.gst {
            if self.slow_links.contains(&(from, to)) {
                return latest;
            }
            if self.fuzz {
                return Self::uniform(rng, latest);
            }
        }
        let base = match self.links.iter().find(|l| l.from == from && l.to == to) {
            Some(l) => l.delay,
            None if self.jitter => Self::uniform(rng, self.delta_cap),
            None => self.delta,
        };
        base.min(latest)
    }
}

/// Round-robin suspension: during window `r` (of length `window`, counted
/// from `start`) party `order[r mod len]` neither sends nor receives; its
/// deliveries and timers are deferred to the end of the window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Suspension {
    pub start: Time,
    pub window: Time,
    pub order: Vec<PartyId>,
}

impl Suspension {
    /// The suspended party at `now` and the end of its window.
    pub fn at(&self, now: Time) -> Option<(PartyId, Time)> {
        if now < self.start || self.order.is_empty() {
            return None;
        }
        let r = ((now - self.start) / self.window).floor().to_integer();
        let party = self.order[r as usize % self.order.len()];
        Some((party, self.start + self.window * (r + 1)))
    }
}

/// Rewrites what Byzantine replicas send.
pub trait Interceptor<M> {
    /// Messages actually sent from `from`'s replica `replica` to `to` in
    /// place of `msg` (empty to omit, several to duplicate or inject).
    fn route(&mut self, from: PartyId, replica: usize, to: PartyId, msg: &M, rng: &mut ChaCha8Rng) -> Vec<M>;
}

/// Passes every message through unchanged.
pub struct NoInterceptor;

impl<M: Clone> Interceptor<M> for NoInterceptor {
    fn route(&mut self, _: PartyId, _: usize, _: PartyId, msg: &M, _: &mut ChaCha8Rng) -> Vec<M> {
        vec![msg.clone()]
    }
}

/// One simulated party: zero replicas is a silent party, two replicas model
/// a split-brain equivocator.
pub struct Party<N> {
    pub byzantine: bool,
    pub replicas: Vec<N>,
}

impl<N> Party<N> {
    pub fn honest(node: N) -> Self {
        Party { byzantine: false, replicas: vec![node] }
    }
}

/// Simulation limits and options.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub delay: DelayPolicy,
    pub suspension: Option<Suspension>,
    /// Events after this time are not processed.
    pub horizon: Time,
    pub max_events: u64,
    pub seed: u64,
    /// Keep the full transcript (the hash is always computed).
    pub transcript: bool,
    /// Attach the hex encoding of each delivered message to its record.
    pub wire: bool,
}

impl SimConfig {
    pub fn new(delay: DelayPolicy, seed: u64) -> Self {
        SimConfig { delay, suspension: None, horizon: t(10_000), max_events: 5_000_000, seed, transcript: false, wire: false }
    }
}

/// A report stamped with time and party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamped {
    pub time: Time,
    pub party: PartyId,
    pub report: Report,
}

/// One transcript line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Record {
    pub time: String,
    pub kind: String,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub summary: String,
    pub bytes: usize,
    /// Hex of the encoded message, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wire: Option<String>,
}

/// Network counters for one message kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KindCount {
    pub messages: u64,
    pub bytes: u64,
}

/// Everything observed during one run.
#[derive(Debug, Clone)]
pub struct SimResult {
    /// Reports of honest parties in time order.
    pub reports: Vec<Stamped>,
    /// Network messages (self-delivery excluded).
    pub messages: u64,
    pub bytes: u64,
    pub per_kind: BTreeMap<&'static str, KindCount>,
    pub events: u64,
    pub end_time: Time,
    /// The run stopped at the horizon or the event cap.
    pub truncated: bool,
    /// Largest delay of an honest-to-honest envelope sent at or after GST.
    pub max_post_gst_delay: Time,
    /// Suspension windows actually applied, as `(party, window end)`.
    pub suspensions: Vec<(PartyId, Time)>,
    pub transcript_hash: [u8; 32],
    pub transcript: Option<Vec<Record>>,
}

impl SimResult {
    /// Reports of one party.
    pub fn of(&self, party: PartyId) -> impl Iterator<Item = &Stamped> + '_ {
        self.reports.iter().filter(move |s| s.party == party)
    }

    pub fn transcript_hex(&self) -> String {
        hex::encode(self.transcript_hash)
    }
}

enum Payload<M> {
    Deliver { msg: M, bytes: usize, replica: Option<usize> },
    Timer { id: u64, replica: usize },
}

struct Event<M> {
    time: Time,
    from: PartyId,
    to: PartyId,
    seq: u64,
    payload: Payload<M>,
}

impl<M> Event<M> {
    fn key(&self) -> (Time, PartyId, PartyId, u64) {
        (self.time, self.from, self.to, self.seq)
    }
}

impl<M> PartialEq for Event<M> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<M> Eq for Event<M> {}

impl<M> PartialOrd for Event<M> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<M> Ord for Event<M> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

struct Engine<'a, N: Node> {
    cfg: &'a SimConfig,
    parties: Vec<Party<N>>,
    interceptor: &'a mut dyn Interceptor<N::Msg>,
    queue: BinaryHeap<Event<N::Msg>>,
    seq: u64,
    now: Time,
    net_rng: ChaCha8Rng,
    adv_rng: ChaCha8Rng,
    hasher: Sha256,
    out: SimResult,
}

impl<N: Node> Engine<'_, N> {
    fn push(&mut self, time: Time, from: PartyId, to: PartyId, payload: Payload<N::Msg>) {
        self.seq += 1;
        self.queue.push(Event { time, from, to, seq: self.seq, payload });
    }

    fn hash_line(&mut self, kind: &str, from: PartyId, to: PartyId, extra: &[u8]) {
        let h = &mut self.hasher;
        h.update(self.now.numer().to_be_bytes());
        h.update(self.now.denom().to_be_bytes());
        h.update((from as u64).to_be_bytes());
        h.update((to as u64).to_be_bytes());
        h.update(kind.as_bytes());
        h.update([0]);
        h.update(extra);
    }

    fn send(&mut self, from: PartyId, replica: usize, to: PartyId, msg: &N::Msg) {
        let n = self.parties.len();
        if to >= n {
            return;
        }
        let msgs = if self.parties[from].byzantine {
            self.interceptor.route(from, replica, to, msg, &mut self.adv_rng)
        } else {
            vec![msg.clone()]
        };
        for m in msgs {
            let d = self.cfg.delay.draw(&mut self.net_rng, from, to, self.now);
            if self.now >= self.cfg.delay.gst && !self.parties[from].byzantine && !self.parties[to].byzantine {
                self.out.max_post_gst_delay = self.out.max_post_gst_delay.max(d);
            }
            let bytes = m.encoded_len();
            self.out.messages += 1;
            self.out.bytes += bytes as u64;
            let c = self.out.per_kind.entry(m.kind()).or_default();
            c.messages += 1;
            c.bytes += bytes as u64;
            self.push(self.now + d, from, to, Payload::Deliver { msg: m, bytes, replica: None });
        }
    }

    fn apply(&mut self, party: PartyId, replica: usize, actions: Vec<Action<N::Msg>>) {
        for a in actions {
            match a {
                Action::Broadcast(m) => {
                    for to in 0..self.parties.len() {
                        if to == party {
                            let bytes = m.encoded_len();
                            self.push(self.now, party, party, Payload::Deliver { msg: m.clone(), bytes, replica: Some(replica) });
                        } else {
                            self.send(party, replica, to, &m);
                        }
                    }
                }
                Action::Send(to, m) if to == party => {
                    let bytes = m.encoded_len();
                    self.push(self.now, party, party, Payload::Deliver { msg: m, bytes, replica: Some(replica) });
                }
                Action::Send(to, m) => self.send(party, replica, to, &m),
                Action::Timer { id, after } => self.push(self.now + after, party, party, Payload::Timer { id, replica }),
                Action::Report(r) => {
                    if !self.parties[party].byzantine {
                        let text = format!("{r:?}");
                        self.hash_line("report", party, party, text.as_bytes());
                        if let Some(tr) = &mut self.out.transcript {
                            tr.push(Record {
                                time: self.now.to_string(),
                                kind: "report".into(),
                                sender: party,
                                receiver: party,
                                summary: text,
                                bytes: 0,
                                wire: None,
                            });
                        }
                        self.out.reports.push(Stamped { time: self.now, party, report: r });
                    }
                }
            }
        }
    }

    fn step(&mut self, ev: Event<N::Msg>) {
        let to = ev.to;
        match ev.payload {
            Payload::Deliver { msg, bytes, replica } => {
                let kind = msg.kind();
                let wire = self.cfg.wire;
                self.hash_line(kind, ev.from, to, &(bytes as u64).to_be_bytes());
                if let Some(tr) = &mut self.out.transcript {
                    tr.push(Record {
                        time: self.now.to_string(),
                        kind: kind.into(),
                        sender: ev.from,
                        receiver: to,
                        summary: msg.summary(),
                        bytes,
                        wire: wire.then(|| hex::encode(msg.to_bytes())),
                    });
                }
                let targets: Vec<usize> = match replica {
                    Some(r) => vec![r],
                    None => (0..self.parties[to].replicas.len()).collect(),
                };
                for r in targets {
                    let acts = self.parties[to].replicas[r].on_message(ev.from, msg.clone());
                    self.apply(to, r, acts);
                }
            }
            Payload::Timer { id, replica } => {
                self.hash_line("timer", to, to, &id.to_be_bytes());
                let acts = self.parties[to].replicas[replica].on_timer(id);
                self.apply(to, replica, acts);
            }
        }
    }

    fn run(mut self) -> SimResult {
        for p in 0..self.parties.len() {
            for r in 0..self.parties[p].replicas.len() {
                let acts = self.parties[p].replicas[r].start();
                self.apply(p, r, acts);
            }
        }
        while let Some(ev) = self.queue.pop() {
            if ev.time > self.cfg.horizon || self.out.events >= self.cfg.max_events {
                self.out.truncated = true;
                break;
            }
            self.now = ev.time;
            if let Some((p, end)) = self.cfg.suspension.as_ref().and_then(|s| s.at(self.now)) {
                if p == ev.to {
                    if self.out.suspensions.last() != Some(&(p, end)) {
                        self.out.suspensions.push((p, end));
                    }
                    self.push(end, ev.from, ev.to, ev.payload);
                    continue;
                }
            }
            self.out.events += 1;
            self.step(ev);
        }
        self.out.end_time = self.now;
        self.out.transcript_hash = self.hasher.finalize().into();
        self.out
    }
}

/// Runs the parties to quiescence (or the configured limits).
pub fn run<N: Node>(cfg: &SimConfig, parties: Vec<Party<N>>, interceptor: &mut dyn Interceptor<N::Msg>) -> SimResult {
    let out = SimResult {
        reports: Vec::new(),
        messages: 0,
        bytes: 0,
        per_kind: BTreeMap::new(),
        events: 0,
        end_time: t(0),
        truncated: false,
        max_post_gst_delay: t(0),
        suspensions: Vec::new(),
        transcript_hash: [0; 32],
        transcript: cfg.transcript.then(Vec::new),
    };
    let engine = Engine {
        cfg,
        parties,
        interceptor,
        queue: BinaryHeap::new(),
        seq: 0,
        now: t(0),
        net_rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        adv_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_adc0_ffee),
        hasher: Sha256::new(),
        out,
    };
    engine.run()
}
