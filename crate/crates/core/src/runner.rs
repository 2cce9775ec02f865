//! Builds and runs a [`Scenario`]: parties, adversary, network, and the
//! metrics document of the run.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checks::{self, AuditRecord, Violation};
use crate::crypto::{scheme_by_name, PartyId, Verifier};
use crate::derived::{bit_value, BinaryNode, GradedNode, ValidatedNode};
use crate::msc::{payload_digest, MscConfig, MscEngine};
use crate::nodes::{PcNode, SpcNode};
use crate::pc::{Instance, PcConfig, PcEngine, FAMILY_SPC};
use crate::prefix::{PrefixVector, Value};
use crate::scenario::{AdversarySpec, BehaviorKind, Preset, Protocol, Scenario, SchemaError};
use crate::sim::adversary::{Behavior, Strategy, Tamper};
use crate::sim::{self, DelayPolicy, KindCount, LinkDelay, Node, Party, Report, SimConfig, SimResult, Suspension, Time};
use crate::spc::SpcConfig;

/// Validity predicate of generated validated-consensus inputs.
pub fn default_validity(b: &[u8]) -> bool {
    !b.starts_with(b"invalid")
}

/// Payload party `party` proposes in `slot`; `alt` is an equivocator's
/// second payload.
pub fn payload(party: PartyId, slot: u64, alt: bool) -> Vec<u8> {
    format!("tx {party}/{slot}{}", if alt { "'" } else { "" }).into_bytes()
}

/// Inputs of every party; `alt_*` feed an equivocator's second replica.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inputs {
    /// Vector inputs (length 1 for graded and binary).
    pub vectors: Vec<PrefixVector>,
    pub alt_vectors: Vec<PrefixVector>,
    /// Validated-consensus inputs.
    pub bytes: Vec<Vec<u8>>,
    pub alt_bytes: Vec<Vec<u8>>,
}

fn fork(v: &PrefixVector, party: PartyId) -> PrefixVector {
    let mut x = v.clone();
    let tag = Value::new(format!("eq{party}"));
    match x.0.last_mut() {
        Some(e) => *e = tag,
        None => x.0.push(tag),
    }
    x
}

fn gen_vectors(n: usize, l: usize, rng: &mut ChaCha8Rng) -> Vec<PrefixVector> {
    (0..n)
        .map(|i| {
            let len = if rng.gen_bool(0.5) { l } else { rng.gen_range(0..=l) };
            let split = if rng.gen_bool(0.4) { rng.gen_range(0..=len) } else { len };
            PrefixVector(
                (0..len)
                    .map(|k| if k < split { Value::new(format!("v{k}")) } else { Value::new(format!("x{i}.{k}")) })
                    .collect(),
            )
        })
        .collect()
}

impl Inputs {
    /// Explicit inputs from the scenario, the rest generated from its seed.
    pub fn build(sc: &Scenario) -> Self {
        let n = sc.n;
        let mut rng = ChaCha8Rng::seed_from_u64(sc.inputs.seed.unwrap_or(sc.seed) ^ 0x1_0b5);
        let to_vec = |v: &Vec<String>| PrefixVector(v.iter().map(Value::new).collect());
        let (vectors, bytes) = match sc.protocol {
            Protocol::Graded => {
                let values = sc.inputs.values.clone().unwrap_or_else(|| {
                    if rng.gen_bool(0.5) {
                        vec!["a".into(); n]
                    } else {
                        (0..n).map(|_| if rng.gen_bool(0.5) { "a".into() } else { "b".into() }).collect()
                    }
                });
                (values.iter().map(|v| PrefixVector(vec![Value::new(v)])).collect(), Vec::new())
            }
            Protocol::Binary => {
                let bits = sc.inputs.bits.clone().unwrap_or_else(|| (0..n).map(|_| rng.gen_bool(0.5)).collect());
                (bits.iter().map(|&b| PrefixVector(vec![bit_value(b)])).collect(), Vec::new())
            }
            Protocol::Validated => {
                let values = sc.inputs.values.clone().unwrap_or_else(|| (0..n).map(|i| format!("val{i}")).collect());
                (Vec::new(), values.into_iter().map(String::into_bytes).collect())
            }
            Protocol::Msc => (Vec::new(), Vec::new()),
            _ => {
                let v = match &sc.inputs.vectors {
                    Some(v) => v.iter().map(to_vec).collect(),
                    None => gen_vectors(n, sc.l, &mut rng),
                };
                (v, Vec::new())
            }
        };
        let alt_vectors = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| match sc.protocol {
                Protocol::Binary => {
                    let flipped = v.0.first() != Some(&bit_value(true));
                    PrefixVector(vec![bit_value(flipped)])
                }
                Protocol::Graded => PrefixVector(vec![Value::new(format!("alt{i}"))]),
                _ => fork(v, i),
            })
            .collect();
        let alt_bytes = (0..bytes.len()).map(|i| format!("invalid{i}").into_bytes()).collect();
        Inputs { vectors, alt_vectors, bytes, alt_bytes }
    }

    fn vector(&self, p: PartyId, replica: usize) -> PrefixVector {
        if replica == 1 { self.alt_vectors[p].clone() } else { self.vectors[p].clone() }
    }

    fn bytes(&self, p: PartyId, replica: usize) -> Vec<u8> {
        if replica == 1 { self.alt_bytes[p].clone() } else { self.bytes[p].clone() }
    }
}

/// A validated scenario with its keys and inputs.
pub struct Setup {
    pub sc: Scenario,
    pub verifier: Verifier,
    pub inputs: Inputs,
}

impl Setup {
    pub fn new(sc: Scenario) -> Result<Self, SchemaError> {
        sc.validate()?;
        let verifier = Verifier::new(scheme_by_name(sc.crypto.name(), sc.n, sc.seed).expect("known backend"));
        let inputs = Inputs::build(&sc);
        Ok(Setup { sc, verifier, inputs })
    }

    /// Timer duration 2Δ.
    pub fn timeout(&self) -> Time {
        self.sc.delay.delta_cap.0 * 2
    }

    /// Configuration of a standalone PC instance.
    pub fn pc_config(&self) -> PcConfig {
        let l = if self.sc.protocol == Protocol::Graded { 1 } else { self.sc.l };
        PcConfig::new(self.sc.n, self.sc.f, l, self.sc.protocol.variant(), self.sc.codec, Instance::standalone())
            .expect("validated")
    }

    /// Configuration of a standalone Strong PC instance.
    pub fn spc_config(&self) -> SpcConfig {
        let l = match self.sc.protocol {
            Protocol::Binary => 1,
            Protocol::Validated => self.sc.n,
            _ => self.sc.l,
        };
        let mut cfg = SpcConfig::new(self.sc.n, self.sc.f, l, self.timeout()).expect("validated");
        cfg.codec = self.sc.codec;
        cfg
    }

    pub fn msc_config(&self) -> MscConfig {
        let mut cfg = MscConfig::new(self.sc.n, self.sc.f, self.timeout(), self.sc.slots).expect("validated");
        cfg.codec = self.sc.codec;
        cfg
    }

    /// Network model.
    pub fn delay(&self) -> DelayPolicy {
        let d = &self.sc.delay;
        let mut p = match d.preset {
            Preset::Synchronized => {
                let mut p = DelayPolicy::synchronized(d.delta.0);
                p.delta_cap = d.delta_cap.0;
                p.gst = d.gst.0;
                p
            }
            Preset::Partial => {
                let mut p = DelayPolicy::partial(d.gst.0, d.delta_cap.0);
                p.delta = d.delta.0;
                p.fuzz = d.fuzz;
                p
            }
        };
        p.slow_links = d.slow_links.clone();
        p.links = d.links.iter().map(|l| LinkDelay { from: l.from, to: l.to, delay: l.delay.0 }).collect();
        p
    }

    pub fn sim_config(&self) -> SimConfig {
        let sc = &self.sc;
        let mut cfg = SimConfig::new(self.delay(), sc.seed);
        cfg.horizon = sc.limits.horizon.0;
        cfg.max_events = sc.limits.max_events;
        cfg.transcript = sc.output.transcript;
        cfg.wire = sc.output.wire;
        cfg.suspension = sc.suspension.as_ref().map(|s| Suspension {
            start: s.start.0,
            window: s.window.0,
            order: s.order.clone().unwrap_or_else(|| sc.honest()),
        });
        cfg
    }

    fn behavior(&self, a: &AdversarySpec) -> Behavior {
        let n = self.sc.n;
        match a.behavior {
            BehaviorKind::Honest => Behavior::Honest,
            BehaviorKind::Silent => Behavior::Silent,
            BehaviorKind::Equivocate => Behavior::Equivocate {
                second: a.second.clone().unwrap_or_else(|| (n / 2..n).filter(|&p| p != a.party).collect()),
            },
            BehaviorKind::Censor => Behavior::Censor { reveal_to: a.reveal_to.clone() },
            BehaviorKind::WithholdBody => Behavior::WithholdBody { reveal_to: a.reveal_to.clone() },
            BehaviorKind::Doctor => Behavior::Doctor,
        }
    }

    fn simulate<N, F>(&self, inst: Instance, mut make: F) -> SimResult
    where
        N: Node,
        N::Msg: Tamper,
        F: FnMut(PartyId, usize) -> N,
    {
        let mut strategy = Strategy::new(inst);
        let mut parties = Vec::with_capacity(self.sc.n);
        for p in 0..self.sc.n {
            match self.sc.adversary.iter().find(|a| a.party == p) {
                None => parties.push(Party::honest(make(p, 0))),
                Some(a) => {
                    let b = self.behavior(a);
                    let replicas = (0..b.replicas()).map(|r| make(p, r)).collect();
                    strategy = strategy.with(p, b, self.verifier.keyring(p));
                    parties.push(Party { byzantine: true, replicas });
                }
            }
        }
        sim::run(&self.sim_config(), parties, &mut strategy)
    }

    /// Runs the scenario once.
    pub fn run(&self) -> SimResult {
        let spc_inst = Instance { family: FAMILY_SPC, slot: 0, view: 0 };
        let keys = |p| self.verifier.keyring(p);
        match self.sc.protocol {
            Protocol::Pc3 | Protocol::PcOpt | Protocol::Pc5f1 => {
                let cfg = self.pc_config();
                self.simulate(Instance::standalone(), |p, r| PcNode {
                    engine: PcEngine::new(cfg, keys(p)),
                    input: Some(self.inputs.vector(p, r)),
                })
            }
            Protocol::Graded => {
                let cfg = self.pc_config();
                self.simulate(Instance::standalone(), |p, r| {
                    GradedNode::new(PcEngine::new(cfg, keys(p)), self.inputs.vector(p, r).0.first().cloned())
                })
            }
            Protocol::Spc => {
                let cfg = self.spc_config();
                self.simulate(spc_inst, |p, r| SpcNode {
                    engine: crate::spc::SpcEngine::new(cfg.clone(), keys(p)),
                    input: Some(self.inputs.vector(p, r)),
                })
            }
            Protocol::Binary => {
                let cfg = self.spc_config();
                self.simulate(spc_inst, |p, r| {
                    let bit = self.inputs.vector(p, r).0.first() == Some(&bit_value(true));
                    BinaryNode::new(cfg.clone(), keys(p), bit)
                })
            }
            Protocol::Validated => {
                let cfg = self.spc_config();
                self.simulate(spc_inst, |p, r| {
                    ValidatedNode::new(cfg.clone(), keys(p), self.inputs.bytes(p, r), default_validity)
                })
            }
            Protocol::Msc => {
                let cfg = self.msc_config();
                self.simulate(spc_inst, |p, r| {
                    MscEngine::new(cfg.clone(), keys(p), Box::new(move |s| payload(p, s, r == 1)))
                })
            }
        }
    }
}

/// Formats a time as an integer or `a/b`.
pub fn fmt_time(x: Time) -> String {
    x.to_string()
}

/// One observable output in the metrics document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputRecord {
    pub party: PartyId,
    pub time: String,
    pub kind: String,
    pub value: String,
}

/// Earliest and latest honest time of one output kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Span {
    pub first: String,
    pub last: String,
}

/// Per-slot summary of a multi-slot run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotSummary {
    pub slot: u64,
    pub start: String,
    pub end: String,
    pub high_len: usize,
    pub rank: Vec<PartyId>,
    pub post_gst: bool,
    pub censored: bool,
    pub demoted: Option<PartyId>,
    pub demoted_byzantine: bool,
}

/// Metrics document of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Metrics {
    pub name: String,
    pub protocol: String,
    pub n: usize,
    pub f: usize,
    pub l: usize,
    pub codec: String,
    pub crypto: String,
    pub seed: u64,
    pub byzantine: Vec<PartyId>,
    pub messages: u64,
    pub bytes: u64,
    pub per_kind: BTreeMap<String, KindCount>,
    pub events: u64,
    pub end_time: String,
    pub truncated: bool,
    pub transcript_hash: String,
    pub latency: BTreeMap<String, Span>,
    pub max_view: u64,
    pub outputs: Vec<OutputRecord>,
    pub slots: Vec<SlotSummary>,
    pub censored_slots: Vec<u64>,
    pub violations: Vec<Violation>,
}

/// A finished run.
pub struct Outcome {
    pub setup: Setup,
    pub sim: SimResult,
    pub violations: Vec<Violation>,
    pub audit: Vec<AuditRecord>,
}

fn describe(r: &Report) -> Option<(String, String)> {
    Some(match r {
        Report::Pc(o) => (format!("{:?}", o.kind).to_lowercase(), format!("{:?}", o.value)),
        Report::Spc { slot, kind, value } => {
            let k = format!("{kind:?}").to_lowercase();
            (if *slot == 0 { k } else { format!("slot {slot} {k}") }, format!("{value:?}"))
        }
        Report::Graded(g) => ("graded".into(), format!("{:?} grade {}", g.value, g.grade)),
        Report::Decide(d) => ("decide".into(), format!("{d:?}")),
        Report::Commit { slot, index, origin, digest } => {
            ("commit".into(), format!("slot {slot} index {index} origin {origin} {digest:?}"))
        }
        Report::Skip { view, star, .. } => ("skip".into(), format!("view {view} star {star}")),
        Report::ViewLow { view, parent, .. } => ("view_low".into(), format!("view {view} parent {parent}")),
        Report::Fault(e) => ("fault".into(), e.clone()),
        _ => return None,
    })
}

impl Outcome {
    /// Validates, runs and checks a scenario.
    pub fn of(sc: Scenario) -> Result<Self, SchemaError> {
        let setup = Setup::new(sc)?;
        let sim = setup.run();
        let violations = checks::check(&setup, &sim);
        let audit = if setup.sc.protocol == Protocol::Msc { checks::censorship_audit(&setup, &sim) } else { Vec::new() };
        Ok(Outcome { setup, sim, violations, audit })
    }

    /// Slots censored after GST.
    pub fn censored_slots(&self) -> Vec<u64> {
        self.audit.iter().filter(|a| a.post_gst && a.censored).map(|a| a.slot).collect()
    }

    /// Earliest and latest honest time of each output kind.
    pub fn latency(&self) -> BTreeMap<String, Span> {
        let mut m: BTreeMap<String, (Time, Time)> = BTreeMap::new();
        for s in &self.sim.reports {
            if let Some((k, _)) = describe(&s.report) {
                let e = m.entry(k).or_insert((s.time, s.time));
                e.0 = e.0.min(s.time);
                e.1 = e.1.max(s.time);
            }
        }
        m.into_iter().map(|(k, (a, b))| (k, Span { first: fmt_time(a), last: fmt_time(b) })).collect()
    }

    pub fn metrics(&self) -> Metrics {
        let sc = &self.setup.sc;
        let sim = &self.sim;
        let outputs = sim
            .reports
            .iter()
            .filter(|s| !matches!(s.report, Report::Commit { .. }))
            .filter_map(|s| {
                describe(&s.report).map(|(kind, value)| OutputRecord { party: s.party, time: fmt_time(s.time), kind, value })
            })
            .collect();
        let max_view = sim
            .reports
            .iter()
            .filter_map(|s| match s.report {
                Report::View { view, .. } => Some(view),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let slots = self
            .audit
            .iter()
            .map(|a| SlotSummary {
                slot: a.slot,
                start: fmt_time(a.start),
                end: fmt_time(a.end),
                high_len: a.high_len,
                rank: a.rank.clone(),
                post_gst: a.post_gst,
                censored: a.censored,
                demoted: a.demoted,
                demoted_byzantine: a.demoted.is_some_and(|p| sc.byzantine().contains(&p)),
            })
            .collect();
        Metrics {
            name: sc.name.clone(),
            protocol: sc.protocol.name().into(),
            n: sc.n,
            f: sc.f,
            l: sc.l,
            codec: format!("{:?}", sc.codec).to_lowercase(),
            crypto: sc.crypto.name().into(),
            seed: sc.seed,
            byzantine: sc.byzantine(),
            messages: sim.messages,
            bytes: sim.bytes,
            per_kind: sim.per_kind.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            events: sim.events,
            end_time: fmt_time(sim.end_time),
            truncated: sim.truncated,
            transcript_hash: sim.transcript_hex(),
            latency: self.latency(),
            max_view,
            outputs,
            slots,
            censored_slots: self.censored_slots(),
            violations: self.violations.clone(),
        }
    }

    /// Commit log of the first honest party, one JSON object per line.
    pub fn write_commit_log(&self, w: &mut dyn Write) -> io::Result<()> {
        let Some(&first) = self.setup.sc.honest().first() else { return Ok(()) };
        for s in self.sim.of(first) {
            if let Report::Commit { slot, index, origin, digest } = &s.report {
                let line = serde_json::json!({
                    "time": fmt_time(s.time),
                    "slot": slot,
                    "index": index,
                    "origin": origin,
                    "digest": hex::encode(digest.0),
                });
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }

    /// Full transcript, one JSON object per line (requires `output.transcript`).
    pub fn write_transcript(&self, w: &mut dyn Write) -> io::Result<()> {
        for r in self.sim.transcript.iter().flatten() {
            writeln!(w, "{}", serde_json::to_string(r).map_err(io::Error::other)?)?;
        }
        Ok(())
    }

    /// Writes `metrics.json`, `commits.jsonl` (multi-slot) and
    /// `transcript.jsonl` (when recorded) into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let m = serde_json::to_string_pretty(&self.metrics()).map_err(io::Error::other)?;
        std::fs::write(dir.join("metrics.json"), m + "\n")?;
        if self.setup.sc.protocol == Protocol::Msc {
            let mut f = io::BufWriter::new(std::fs::File::create(dir.join("commits.jsonl"))?);
            self.write_commit_log(&mut f)?;
        }
        if self.sim.transcript.is_some() {
            let mut f = io::BufWriter::new(std::fs::File::create(dir.join("transcript.jsonl"))?);
            self.write_transcript(&mut f)?;
        }
        Ok(())
    }
}

/// Digest every party could propose in `slot` (both replicas).
pub fn slot_digests(sc: &Scenario, slot: u64) -> Vec<(PartyId, crate::crypto::Digest)> {
    (0..sc.n).flat_map(|p| [false, true].map(|alt| (p, payload_digest(slot, &payload(p, slot, alt))))).collect()
}
