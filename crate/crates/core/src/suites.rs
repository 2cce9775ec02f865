//! Seeded property suites: randomized scenarios (fuzzed pre-GST schedules,
//! built-in adversaries) run in bulk, with per-property violation counts
//! and a reproducer for the first failure.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checks::{AuditRecord, Violation};
use crate::crypto::PartyId;
use crate::pc::Codec;
use crate::runner::Outcome;
use crate::scenario::{
    AdversarySpec, BehaviorKind, Preset, Protocol, Scenario, SuspensionSpec, TimeSpec,
};

/// Maps `f` over `items`, on the rayon pool when the `parallel` feature is
/// enabled.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential counterpart of [`par_map`].
pub fn seq_map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

/// How a suite distributes its runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Parallel,
    Sequential,
}

/// Named property suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Every property of every protocol.
    Safety,
    Upperbound,
    Validity,
    Consistency,
    Availability,
    /// Proof predicates under doctoring adversaries.
    Soundness,
    /// Strong PC and the consensus protocols built on it.
    Agreement,
    /// Multi-slot agreement, ranking agreement, commit integrity.
    Slots,
    Graded,
    /// Post-GST censorship bound and demotion audit.
    Censorship,
    /// Round-robin suspension plus f−1 silent parties.
    Leaderless,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Safety,
        Suite::Upperbound,
        Suite::Validity,
        Suite::Consistency,
        Suite::Availability,
        Suite::Soundness,
        Suite::Agreement,
        Suite::Slots,
        Suite::Graded,
        Suite::Censorship,
        Suite::Leaderless,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Safety => "safety",
            Suite::Upperbound => "upperbound",
            Suite::Validity => "validity",
            Suite::Consistency => "consistency",
            Suite::Availability => "availability",
            Suite::Soundness => "soundness",
            Suite::Agreement => "agreement",
            Suite::Slots => "slots",
            Suite::Graded => "graded",
            Suite::Censorship => "censorship",
            Suite::Leaderless => "leaderless",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }

    /// Protocols exercised by default.
    pub fn protocols(self) -> Vec<Protocol> {
        use Protocol::*;
        match self {
            Suite::Safety => Protocol::ALL.to_vec(),
            Suite::Upperbound | Suite::Validity | Suite::Consistency | Suite::Soundness => vec![Pc3, PcOpt, Pc5f1],
            Suite::Availability => vec![Pc3, PcOpt, Pc5f1, Spc, Msc],
            Suite::Agreement => vec![Spc, Binary, Validated],
            Suite::Slots | Suite::Censorship => vec![Msc],
            Suite::Graded => vec![Graded],
            Suite::Leaderless => vec![Spc, Msc],
        }
    }

    /// Properties the suite reports on; `None` is all of them.
    fn properties(self) -> Option<&'static [&'static str]> {
        Some(match self {
            Suite::Upperbound => &["upper_bound"],
            Suite::Validity => &["validity", "opt_validity"],
            Suite::Consistency => &["consistency", "opt_prefix"],
            Suite::Availability => &["availability"],
            Suite::Soundness => &["proof_valid", "proof_soundness"],
            Suite::Leaderless => &["termination", "slot_agreement", "agreement"],
            _ => return None,
        })
    }
}

/// Parameters of a suite run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteConfig {
    pub suite: Suite,
    /// Party counts, cycled over runs.
    pub ns: Vec<usize>,
    /// Fault bound; `None` is the largest the protocol tolerates.
    pub f: Option<usize>,
    /// Overrides the suite's protocol list.
    pub protocols: Option<Vec<Protocol>>,
    pub runs: usize,
    pub seed: u64,
    /// Slots per multi-slot run (post-GST slots for the censorship suite).
    pub slots: u64,
}

impl SuiteConfig {
    pub fn new(suite: Suite, runs: usize) -> Self {
        SuiteConfig { suite, ns: vec![4, 7], f: None, protocols: None, runs, seed: 0, slots: 4 }
    }
}

/// Outcome of a suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub runs: usize,
    /// Runs with a fuzzed pre-GST schedule.
    pub fuzzed: usize,
    /// Violations per checked property (zero entries included).
    pub properties: BTreeMap<String, usize>,
    /// Largest post-GST censored-slot count seen (censorship suite).
    pub max_censored: usize,
    pub first_failure: Option<Failure>,
}

/// Reproducer of a failing run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub seed: u64,
    pub violation: Violation,
    /// Scenario file reproducing the run.
    pub scenario: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.values().all(|&v| v == 0)
    }
}

/// Largest fault bound for `n`.
pub fn max_f(protocol: Protocol, n: usize) -> usize {
    match protocol {
        Protocol::Pc5f1 => (n - 1) / 5,
        _ => (n - 1) / 3,
    }
}

fn pick_parties(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<PartyId> {
    let mut all: Vec<PartyId> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(k);
    all.sort_unstable();
    all
}

fn strict_subset(rng: &mut ChaCha8Rng, honest: &[PartyId]) -> Vec<PartyId> {
    let k = rng.gen_range(0..honest.len());
    let mut h = honest.to_vec();
    h.shuffle(rng);
    h.truncate(k);
    h.sort_unstable();
    h
}

/// A randomized scenario: fuzzed pre-GST schedule, random inputs, up to `f`
/// Byzantine parties with random built-in behaviors.
pub fn fuzz_scenario(protocol: Protocol, n: usize, f: usize, seed: u64, slots: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf022);
    let mut sc = Scenario::new(protocol, n, f, rng.gen_range(1..=4));
    sc.name = format!("fuzz-{protocol}-{n}-{seed}");
    sc.seed = seed;
    sc.slots = slots;
    if protocol.variant() == crate::pc::Variant::ThreeRound && rng.gen_bool(0.3) {
        sc.codec = Codec::Compact;
    }
    sc.delay.preset = Preset::Partial;
    sc.delay.gst = TimeSpec::int(rng.gen_range(1..=12));
    sc.delay.delta_cap = TimeSpec::int(2);
    let k = rng.gen_range(0..=f);
    let byz = pick_parties(&mut rng, n, k);
    let honest: Vec<PartyId> = (0..n).filter(|p| !byz.contains(p)).collect();
    sc.adversary = byz
        .iter()
        .map(|&p| {
            let behavior = *BehaviorKind::ALL.choose(&mut rng).expect("nonempty");
            AdversarySpec { party: p, behavior, second: None, reveal_to: strict_subset(&mut rng, &honest) }
        })
        .collect();
    sc
}

/// Persistent censors or equivocators on a synchronized-after-GST network
/// with `slots` post-GST slots.
pub fn censorship_scenario(n: usize, f: usize, seed: u64, slots: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xce25);
    let mut sc = Scenario::new(Protocol::Msc, n, f, n);
    sc.name = format!("censorship-{n}-{seed}");
    sc.seed = seed;
    sc.slots = slots;
    if rng.gen_bool(0.5) {
        sc.delay.preset = Preset::Partial;
        sc.delay.fuzz = false;
    }
    let byz = pick_parties(&mut rng, n, f);
    let honest: Vec<PartyId> = (0..n).filter(|p| !byz.contains(p)).collect();
    sc.adversary = byz
        .iter()
        .map(|&p| {
            let behavior = if rng.gen_bool(0.5) { BehaviorKind::Equivocate } else { BehaviorKind::Censor };
            AdversarySpec { party: p, behavior, second: None, reveal_to: strict_subset(&mut rng, &honest) }
        })
        .collect();
    sc
}

/// Round-robin suspension of honest parties plus `f − 1` silent parties.
pub fn leaderless_scenario(protocol: Protocol, n: usize, f: usize, seed: u64, slots: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1ead);
    let mut sc = Scenario::new(protocol, n, f, rng.gen_range(1..=n));
    sc.name = format!("leaderless-{protocol}-{n}-{seed}");
    sc.seed = seed;
    sc.slots = slots;
    sc.delay.preset = Preset::Partial;
    sc.delay.gst = TimeSpec::int(rng.gen_range(0..=6));
    let silent = pick_parties(&mut rng, n, f.saturating_sub(1));
    sc.adversary = silent
        .iter()
        .map(|&p| AdversarySpec { party: p, behavior: BehaviorKind::Silent, second: None, reveal_to: Vec::new() })
        .collect();
    let mut order = sc.honest();
    order.shuffle(&mut rng);
    sc.suspension = Some(SuspensionSpec {
        start: TimeSpec::int(rng.gen_range(0..=4)),
        window: TimeSpec::int(rng.gen_range(1..=3)),
        order: Some(order),
    });
    sc
}

/// Post-GST censorship properties of one audited run.
pub fn censorship_properties(sc: &Scenario, audit: &[AuditRecord]) -> Vec<Violation> {
    let byz = sc.byzantine();
    let mut out = Vec::new();
    let post: Vec<&AuditRecord> = audit.iter().filter(|a| a.post_gst).collect();
    let censored = post.iter().filter(|a| a.censored).count();
    if censored > sc.f {
        out.push(Violation {
            property: "censorship_bound".into(),
            party: None,
            detail: format!("{censored} censored post-GST slots exceed f = {}", sc.f),
        });
    }
    for a in &post {
        if let Some(d) = a.demoted.filter(|d| !byz.contains(d)) {
            out.push(Violation {
                property: "demotion_byzantine".into(),
                party: Some(d),
                detail: format!("slot {} demoted honest party {d}", a.slot),
            });
        }
    }
    let last = post.iter().filter(|a| a.demoted.is_some()).map(|a| a.slot).max().unwrap_or(0);
    for a in post.iter().filter(|a| a.slot > last && a.censored) {
        out.push(Violation {
            property: "inclusive_after_demotion".into(),
            party: None,
            detail: format!("slot {} after the last demotion misses an honest input", a.slot),
        });
    }
    if (audit.len() as u64) < sc.slots {
        out.push(Violation { property: "termination".into(), party: None, detail: "unfinished slots".into() });
    }
    out
}

struct RunResult {
    seed: u64,
    fuzzed: bool,
    violations: Vec<Violation>,
    censored: usize,
    scenario: Scenario,
}

fn plan(cfg: &SuiteConfig) -> Vec<Scenario> {
    let protocols = cfg.protocols.clone().unwrap_or_else(|| cfg.suite.protocols());
    (0..cfg.runs)
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let protocol = protocols[i % protocols.len()];
            let n = cfg.ns[(i / protocols.len()) % cfg.ns.len()];
            let f = cfg.f.unwrap_or_else(|| max_f(protocol, n)).min(max_f(protocol, n));
            match cfg.suite {
                Suite::Censorship => censorship_scenario(n, f, seed, cfg.slots),
                Suite::Leaderless => leaderless_scenario(protocol, n, f, seed, cfg.slots),
                Suite::Soundness => {
                    let mut sc = fuzz_scenario(protocol, n, f, seed, cfg.slots);
                    for a in &mut sc.adversary {
                        a.behavior = BehaviorKind::Doctor;
                    }
                    if sc.adversary.is_empty() && f > 0 {
                        sc.adversary.push(AdversarySpec {
                            party: (seed as usize) % n,
                            behavior: BehaviorKind::Doctor,
                            second: None,
                            reveal_to: Vec::new(),
                        });
                    }
                    sc
                }
                _ => fuzz_scenario(protocol, n, f, seed, cfg.slots),
            }
        })
        .collect()
}

fn execute(suite: Suite, sc: &Scenario) -> RunResult {
    let o = Outcome::of(sc.clone()).expect("generated scenarios are valid");
    let mut violations = o.violations.clone();
    let mut censored = 0;
    if suite == Suite::Censorship {
        violations.extend(censorship_properties(sc, &o.audit));
        censored = o.censored_slots().len();
    }
    let fuzzed = sc.delay.preset == Preset::Partial && sc.delay.fuzz && sc.delay.gst.0 > crate::sim::t(0);
    RunResult { seed: sc.seed, fuzzed, violations, censored, scenario: sc.clone() }
}

/// Properties listed in a suite report even when never violated.
fn baseline(suite: Suite) -> Vec<&'static str> {
    match suite {
        Suite::Censorship => {
            vec!["censorship_bound", "demotion_byzantine", "inclusive_after_demotion", "termination", "slot_agreement"]
        }
        Suite::Agreement => vec!["agreement", "upper_bound", "validity", "termination", "skip_conservative"],
        Suite::Slots => vec!["slot_agreement", "commit_agreement", "commit_integrity", "termination"],
        Suite::Graded => vec!["graded_agreement", "graded_consistency", "graded_validity", "graded_termination"],
        Suite::Safety => vec!["upper_bound", "validity", "consistency", "availability", "agreement", "termination"],
        s => s.properties().map(<[_]>::to_vec).unwrap_or_default(),
    }
}

/// Runs a suite.
pub fn run_suite(cfg: &SuiteConfig, exec: Exec) -> SuiteReport {
    let scenarios = plan(cfg);
    let suite = cfg.suite;
    let results = match exec {
        Exec::Parallel => par_map(&scenarios, |sc| execute(suite, sc)),
        Exec::Sequential => seq_map(&scenarios, |sc| execute(suite, sc)),
    };
    let filter = suite.properties();
    let mut properties: BTreeMap<String, usize> = baseline(suite).into_iter().map(|p| (p.to_string(), 0)).collect();
    let mut first_failure = None;
    let mut max_censored = 0;
    for r in &results {
        max_censored = max_censored.max(r.censored);
        for v in &r.violations {
            if filter.is_some_and(|f| !f.contains(&v.property.as_str())) {
                continue;
            }
            *properties.entry(v.property.clone()).or_default() += 1;
            if first_failure.is_none() {
                first_failure =
                    Some(Failure { seed: r.seed, violation: v.clone(), scenario: r.scenario.to_toml() });
            }
        }
    }
    SuiteReport {
        suite,
        runs: results.len(),
        fuzzed: results.iter().filter(|r| r.fuzzed).count(),
        properties,
        max_censored,
        first_failure,
    }
}
