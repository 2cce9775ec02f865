//! Invariant checkers applied to finished runs, and the censorship audit of
//! multi-slot runs.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::crypto::{Digest, PartyId};
use crate::derived::GradedOutput;
use crate::msc::payload_digest;
use crate::pc::verify::{predicate_high, predicate_low};
use crate::pc::{OutputKind, PcOutput, Variant};
use crate::prefix::{consistent, is_prefix, mcp, PrefixVector, Value};
use crate::runner::{default_validity, payload, slot_digests, Setup};
use crate::scenario::{Preset, Protocol};
use crate::sim::{Report, SimResult, Time};
use crate::spc::{digest_value, hbot_value};

/// A property that failed in a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub property: String,
    pub party: Option<PartyId>,
    pub detail: String,
}

struct Sink(Vec<Violation>);

impl Sink {
    fn fail(&mut self, property: &str, party: Option<PartyId>, detail: String) {
        self.0.push(Violation { property: property.into(), party, detail });
    }

    fn ensure(&mut self, ok: bool, property: &str, party: Option<PartyId>, detail: impl FnOnce() -> String) {
        if !ok {
            self.fail(property, party, detail());
        }
    }
}

/// Checks every property that applies to the scenario's protocol.
pub fn check(setup: &Setup, sim: &SimResult) -> Vec<Violation> {
    let mut s = Sink(Vec::new());
    for r in &sim.reports {
        if let Report::Fault(e) = &r.report {
            s.fail("no_faults", Some(r.party), e.clone());
        }
    }
    match setup.sc.protocol {
        Protocol::Pc3 | Protocol::PcOpt | Protocol::Pc5f1 => check_pc(setup, sim, &mut s),
        Protocol::Graded => {
            check_pc(setup, sim, &mut s);
            check_graded(setup, sim, &mut s);
        }
        Protocol::Spc | Protocol::Binary | Protocol::Validated => check_spc(setup, sim, &mut s),
        Protocol::Msc => check_msc(setup, sim, &mut s),
    }
    s.0
}

fn honest_inputs(setup: &Setup) -> Vec<PrefixVector> {
    setup.sc.honest().iter().map(|&p| setup.inputs.vectors[p].clone()).collect()
}

/// Every element of `out` matches some honest input at the same index.
fn available(out: &PrefixVector, inputs: &[PrefixVector]) -> Option<usize> {
    (0..out.len()).find(|&k| !inputs.iter().any(|h| h.0.get(k) == Some(&out.0[k])))
}

fn pc_outputs(sim: &SimResult, p: PartyId) -> BTreeMap<OutputKind, PcOutput> {
    let mut m = BTreeMap::new();
    for s in sim.of(p) {
        if let Report::Pc(o) = &s.report {
            m.entry(o.kind).or_insert_with(|| o.clone());
        }
    }
    m
}

fn check_pc(setup: &Setup, sim: &SimResult, s: &mut Sink) {
    let sc = &setup.sc;
    let cfg = setup.pc_config();
    let ver = &setup.verifier;
    let honest = sc.honest();
    let inputs = honest_inputs(setup);
    let base = mcp(inputs.iter()).expect("nonempty honest set");
    let outs: BTreeMap<PartyId, BTreeMap<OutputKind, PcOutput>> =
        honest.iter().map(|&p| (p, pc_outputs(sim, p))).collect();
    let val = |p: PartyId, k: OutputKind| outs[&p].get(&k).map(|o| &o.value);
    let highs: Vec<&PrefixVector> = honest.iter().filter_map(|&p| val(p, OutputKind::High)).collect();
    let lows: Vec<&PrefixVector> = honest.iter().filter_map(|&p| val(p, OutputKind::Low)).collect();
    for &p in &honest {
        let (Some(lo), Some(hi)) = (val(p, OutputKind::Low), val(p, OutputKind::High)) else {
            s.fail("termination", Some(p), "missing low or high".into());
            continue;
        };
        s.ensure(is_prefix(lo, hi), "upper_bound", Some(p), || format!("own low {lo:?} vs high {hi:?}"));
        for h in &highs {
            s.ensure(is_prefix(lo, h), "upper_bound", Some(p), || format!("low {lo:?} not a prefix of high {h:?}"));
            s.ensure(consistent(hi, h), "consistency", Some(p), || format!("high {hi:?} vs {h:?}"));
        }
        s.ensure(is_prefix(&base, lo), "validity", Some(p), || format!("mcp {base:?} not a prefix of low {lo:?}"));
        for out in [lo, hi] {
            if let Some(k) = available(out, &inputs) {
                s.fail("availability", Some(p), format!("index {k} of {out:?} matches no honest input"));
            }
        }
        if cfg.variant == Variant::Optimistic {
            match val(p, OutputKind::Opt) {
                Some(opt) => {
                    s.ensure(is_prefix(opt, lo), "opt_prefix", Some(p), || format!("opt {opt:?} vs low {lo:?}"));
                    if honest.len() == sc.n {
                        s.ensure(is_prefix(&base, opt), "opt_validity", Some(p), || format!("opt {opt:?}"));
                    }
                }
                None => s.fail("termination", Some(p), "missing opt".into()),
            }
        }
        for o in outs[&p].values() {
            let ok = match o.kind {
                OutputKind::Low => predicate_low(&cfg, ver, &o.value, &o.proof),
                OutputKind::High => predicate_high(&cfg, ver, &o.value, &o.proof),
                OutputKind::Opt => true,
            };
            s.ensure(ok, "proof_valid", Some(p), || format!("{:?} proof rejected", o.kind));
            for cand in doctored(&o.value, &highs, &lows) {
                if predicate_low(&cfg, ver, &cand, &o.proof) && !highs.iter().all(|h| is_prefix(&cand, h)) {
                    s.fail("proof_soundness", Some(p), format!("low predicate accepts {cand:?} above an honest high"));
                }
                if predicate_high(&cfg, ver, &cand, &o.proof)
                    && !(lows.iter().all(|l| is_prefix(l, &cand)) && highs.iter().all(|h| consistent(&cand, h)))
                {
                    s.fail("proof_soundness", Some(p), format!("high predicate accepts inconsistent {cand:?}"));
                }
            }
        }
    }
}

/// Candidate values paired with a genuine proof.
fn doctored(v: &PrefixVector, highs: &[&PrefixVector], lows: &[&PrefixVector]) -> Vec<PrefixVector> {
    let mut c = Vec::new();
    let mut ext = v.clone();
    ext.0.push(Value::new(b"zz"));
    c.push(ext);
    if !v.is_empty() {
        c.push(v.prefix(v.len() - 1));
        let mut swapped = v.clone();
        *swapped.0.last_mut().expect("nonempty") = Value::new(b"zz");
        c.push(swapped);
    }
    c.extend(highs.iter().chain(lows).map(|x| (*x).clone()));
    c.sort_by_key(|x| format!("{x:?}"));
    c.dedup();
    c
}

fn check_graded(setup: &Setup, sim: &SimResult, s: &mut Sink) {
    let honest = setup.sc.honest();
    let mut got: BTreeMap<PartyId, GradedOutput> = BTreeMap::new();
    for st in &sim.reports {
        if let Report::Graded(g) = &st.report {
            got.entry(st.party).or_insert_with(|| g.clone());
        }
    }
    for &p in &honest {
        s.ensure(got.contains_key(&p), "graded_termination", Some(p), || "no graded output".into());
    }
    for (&p, g) in &got {
        s.ensure((g.grade == 0) == g.value.is_none(), "graded_shape", Some(p), || format!("{g:?}"));
        for (&q, h) in &got {
            if g.grade == 2 {
                s.ensure(h.grade >= 1 && h.value == g.value, "graded_agreement", Some(p), || {
                    format!("{p} has {g:?}, {q} has {h:?}")
                });
            }
            if g.grade >= 1 && h.grade >= 1 {
                s.ensure(h.value == g.value, "graded_consistency", Some(p), || format!("{p} has {g:?}, {q} has {h:?}"));
            }
        }
    }
    let inputs = honest_inputs(setup);
    if inputs.windows(2).all(|w| w[0] == w[1]) {
        let x = inputs[0].0.first().cloned();
        for (&p, g) in &got {
            s.ensure(g.grade == 2 && g.value == x, "graded_validity", Some(p), || format!("{g:?} with unanimous {x:?}"));
        }
    }
}

struct SpcView {
    low: Option<PrefixVector>,
    high: Option<PrefixVector>,
    view_lows: Vec<(u64, u64)>,
    skips: Vec<(u64, u64)>,
    decide: Option<Option<Value>>,
}

fn spc_view(sim: &SimResult, p: PartyId, slot: u64) -> SpcView {
    let mut v = SpcView { low: None, high: None, view_lows: Vec::new(), skips: Vec::new(), decide: None };
    for st in sim.of(p) {
        match &st.report {
            Report::Spc { slot: s, kind: OutputKind::Low, value } if *s == slot => {
                v.low.get_or_insert_with(|| value.clone());
            }
            Report::Spc { slot: s, kind: OutputKind::High, value } if *s == slot => {
                v.high.get_or_insert_with(|| value.clone());
            }
            Report::ViewLow { slot: s, view, parent } if *s == slot => v.view_lows.push((*view, *parent)),
            Report::Skip { slot: s, view, star } if *s == slot => v.skips.push((*view, *star)),
            Report::Decide(d) => {
                v.decide.get_or_insert_with(|| d.clone());
            }
            _ => {}
        }
    }
    v
}

/// Strong PC properties of one instance (standalone or one slot).
fn check_spc_instance(
    honest: &[PartyId],
    views: &BTreeMap<PartyId, SpcView>,
    inputs: Option<&[PrefixVector]>,
    s: &mut Sink,
) {
    let highs: Vec<&PrefixVector> = views.values().filter_map(|v| v.high.as_ref()).collect();
    for &p in honest {
        let v = &views[&p];
        let (Some(lo), Some(hi)) = (&v.low, &v.high) else {
            s.fail("termination", Some(p), "missing low or high".into());
            continue;
        };
        for h in &highs {
            s.ensure(hi == *h, "agreement", Some(p), || format!("high {hi:?} vs {h:?}"));
            s.ensure(is_prefix(lo, h), "upper_bound", Some(p), || format!("low {lo:?} vs high {h:?}"));
        }
        if let Some(inputs) = inputs {
            let base = mcp(inputs.iter()).expect("nonempty");
            s.ensure(is_prefix(&base, lo), "validity", Some(p), || format!("mcp {base:?} vs low {lo:?}"));
            for out in [lo, hi] {
                if let Some(k) = available(out, inputs) {
                    s.fail("availability", Some(p), format!("index {k} of {out:?} matches no honest input"));
                }
            }
        }
    }
    // An indirect certificate into view w with parent view `star` certifies
    // that no view strictly between them committed a non-empty low.
    let committed: BTreeSet<u64> =
        views.values().flat_map(|v| v.view_lows.iter().filter(|(_, parent)| *parent != 0).map(|(w, _)| *w)).collect();
    for (&p, v) in views {
        for &(w, star) in &v.skips {
            if let Some(bad) = committed.iter().find(|&&x| x > star && x < w) {
                s.fail("skip_conservative", Some(p), format!("skip into {w} from {star} passes committed view {bad}"));
            }
        }
    }
}

fn check_spc(setup: &Setup, sim: &SimResult, s: &mut Sink) {
    let sc = &setup.sc;
    let honest = sc.honest();
    let views: BTreeMap<PartyId, SpcView> = honest.iter().map(|&p| (p, spc_view(sim, p, 0))).collect();
    let inputs = (sc.protocol != Protocol::Validated).then(|| honest_inputs(setup));
    check_spc_instance(&honest, &views, inputs.as_deref(), s);
    match sc.protocol {
        Protocol::Binary | Protocol::Validated => {
            let decisions: Vec<(PartyId, &Option<Value>)> =
                views.iter().filter_map(|(&p, v)| v.decide.as_ref().map(|d| (p, d))).collect();
            for &p in &honest {
                s.ensure(views[&p].decide.is_some(), "decide_termination", Some(p), || "no decision".into());
            }
            for &(p, d) in &decisions {
                for &(q, e) in &decisions {
                    s.ensure(d == e, "decide_agreement", Some(p), || format!("{p} decided {d:?}, {q} decided {e:?}"));
                }
            }
            if sc.protocol == Protocol::Binary {
                let bits = inputs.as_deref().unwrap_or_default();
                if bits.windows(2).all(|w| w[0] == w[1]) {
                    let b = bits[0].0.first().cloned();
                    for &(p, d) in &decisions {
                        s.ensure(*d == b, "decide_validity", Some(p), || format!("decided {d:?}, all input {b:?}"));
                    }
                }
            } else {
                let known: BTreeSet<&[u8]> =
                    setup.inputs.bytes.iter().chain(&setup.inputs.alt_bytes).map(Vec::as_slice).collect();
                for &(p, d) in &decisions {
                    match d {
                        Some(v) => {
                            let b = v.bytes().unwrap_or_default();
                            s.ensure(default_validity(b), "decide_validity", Some(p), || format!("invalid {v:?}"));
                            s.ensure(known.contains(b), "decide_integrity", Some(p), || format!("unknown {v:?}"));
                        }
                        None => {
                            let fault_free = sc.adversary.is_empty() && sc.delay.preset == Preset::Synchronized;
                            s.ensure(!fault_free, "decide_liveness", Some(p), || "undecided in a fault-free run".into());
                        }
                    }
                }
            }
        }
        _ => {}
    }
}

fn check_msc(setup: &Setup, sim: &SimResult, s: &mut Sink) {
    let sc = &setup.sc;
    let honest = sc.honest();
    let mut seqs: BTreeMap<PartyId, Vec<(u64, Digest)>> = BTreeMap::new();
    let mut highs: BTreeMap<u64, BTreeMap<PartyId, (PrefixVector, Vec<PartyId>)>> = BTreeMap::new();
    for st in &sim.reports {
        match &st.report {
            Report::Commit { slot, origin, digest, .. } => {
                seqs.entry(st.party).or_default().push((*slot, *digest));
                let ok = slot_digests(sc, *slot).contains(&(*origin, *digest));
                s.ensure(ok, "commit_integrity", Some(st.party), || format!("slot {slot} digest {digest:?} origin {origin}"));
            }
            Report::SlotHigh { slot, high, rank } => {
                highs.entry(*slot).or_default().entry(st.party).or_insert_with(|| (high.clone(), rank.clone()));
            }
            _ => {}
        }
    }
    for slot in 1..=sc.slots {
        let per = highs.get(&slot);
        for &p in &honest {
            if per.is_none_or(|m| !m.contains_key(&p)) {
                s.fail("termination", Some(p), format!("slot {slot} unfinished"));
            }
        }
        let Some(per) = per else { continue };
        let mut it = per.iter();
        if let Some((_, first)) = it.next() {
            for (&q, other) in it {
                s.ensure(other == first, "slot_agreement", Some(q), || format!("slot {slot}: {other:?} vs {first:?}"));
            }
        }
        let known: BTreeSet<Value> = slot_digests(sc, slot).iter().map(|(_, d)| digest_value(d)).collect();
        for (&p, (high, _)) in per {
            for (k, e) in high.0.iter().enumerate() {
                let ok = *e == hbot_value() || known.contains(e);
                s.ensure(ok, "availability", Some(p), || format!("slot {slot} index {k} is no proposal digest"));
            }
        }
        let views: BTreeMap<PartyId, SpcView> = honest.iter().map(|&p| (p, spc_view(sim, p, slot))).collect();
        check_spc_instance(&honest, &views, None, s);
    }
    let empty = Vec::new();
    let seq = |p: PartyId| seqs.get(&p).unwrap_or(&empty);
    for &p in &honest {
        for &q in &honest {
            let (a, b) = (seq(p), seq(q));
            let m = a.len().min(b.len());
            s.ensure(a[..m] == b[..m], "commit_agreement", Some(p), || format!("commit logs of {p} and {q} diverge"));
            if !sim.truncated {
                s.ensure(a.len() == b.len(), "commit_agreement", Some(p), || {
                    format!("{p} committed {} entries, {q} {}", a.len(), b.len())
                });
            }
        }
        let mut seen = BTreeSet::new();
        s.ensure(seq(p).iter().all(|x| seen.insert(*x)), "commit_unique", Some(p), || "duplicate commit".into());
    }
}

/// Censorship audit of one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditRecord {
    pub slot: u64,
    /// Earliest honest start.
    pub start: Time,
    /// Latest honest finish.
    pub end: Time,
    pub high_len: usize,
    pub rank: Vec<PartyId>,
    /// The slot started at or after GST.
    pub post_gst: bool,
    /// Some honest proposal is missing from the slot's high.
    pub censored: bool,
    /// Party moved to the end of the next ranking.
    pub demoted: Option<PartyId>,
}

/// Per-slot censorship and demotion record, from the first honest party's
/// view of each finished slot.
pub fn censorship_audit(setup: &Setup, sim: &SimResult) -> Vec<AuditRecord> {
    let sc = &setup.sc;
    let honest = sc.honest();
    let mut out = Vec::new();
    for slot in 1..=sc.slots {
        let mut start: Option<Time> = None;
        let mut end: Option<Time> = None;
        let mut high = None;
        for st in &sim.reports {
            match &st.report {
                Report::SlotStart { slot: x } if *x == slot => start = Some(start.map_or(st.time, |t| t.min(st.time))),
                Report::SlotHigh { slot: x, high: h, rank } if *x == slot => {
                    end = Some(end.map_or(st.time, |t| t.max(st.time)));
                    high.get_or_insert_with(|| (h.clone(), rank.clone()));
                }
                _ => {}
            }
        }
        let (Some(start), Some(end), Some((high, rank))) = (start, end, high) else { break };
        let censored = honest.iter().any(|&p| !high.0.contains(&digest_value(&payload_digest(slot, &payload(p, slot, false)))));
        out.push(AuditRecord {
            slot,
            start,
            end,
            high_len: high.len(),
            post_gst: start >= sc.delay.gst.0,
            censored,
            demoted: (high.len() < sc.n).then(|| rank[high.len()]),
            rank,
        });
    }
    out
}
