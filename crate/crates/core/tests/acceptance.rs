//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::oracle::oracle_lsp;
use prefix_consensus::compact::equivalence::{random_trial, run_trial};
use prefix_consensus::crypto::{MacScheme, Verifier};
use prefix_consensus::pc::{Codec, OutputKind};
use prefix_consensus::prefix::{longest_supported_prefix, PrefixVector, Value};
use prefix_consensus::runner::Outcome;
use prefix_consensus::scenario::{AdversarySpec, BehaviorKind, Protocol, Scenario};
use prefix_consensus::sim::{Report, Time};
use prefix_consensus::suites::{run_suite, Exec, Suite, SuiteConfig, SuiteReport};
use prefix_consensus::sweep::sweep;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

type Criterion = (&'static str, fn() -> Verdict);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn int(x: i64) -> Time {
    Time::from_integer(x)
}

/// Times of one output kind at every honest party, or an error when a
/// party lacks it.
fn times(o: &Outcome, want: impl Fn(&Report) -> bool) -> Result<Vec<Time>, String> {
    o.setup
        .sc
        .honest()
        .into_iter()
        .map(|p| o.sim.of(p).find(|s| want(&s.report)).map(|s| s.time).ok_or(format!("party {p} has no output")))
        .collect()
}

fn pc_kind(k: OutputKind) -> impl Fn(&Report) -> bool {
    move |r| matches!(r, Report::Pc(o) if o.kind == k)
}

fn all_at(ts: &[Time], x: Time, what: &str) -> Result<(), String> {
    ensure(ts.iter().all(|&t| t == x), || format!("{what}: {ts:?} != {x}"))
}

fn all_by(ts: &[Time], x: Time, what: &str) -> Result<(), String> {
    ensure(ts.iter().all(|&t| t <= x), || format!("{what}: {ts:?} > {x}"))
}

fn clean(o: &Outcome) -> Result<(), String> {
    ensure(o.violations.is_empty(), || format!("{}: {:?}", o.setup.sc.protocol, o.violations[0]))
}

fn timed(o: impl FnOnce() -> Outcome, budget: Duration) -> Result<Outcome, String> {
    let start = Instant::now();
    let out = o();
    let took = start.elapsed();
    ensure(took < budget, || format!("run took {took:?}"))?;
    Ok(out)
}

fn criterion_1() -> Verdict {
    let second = Duration::from_secs(1);
    for (n, f) in [(4, 1), (7, 2)] {
        let o = timed(|| Outcome::of(Scenario::new(Protocol::Pc3, n, f, 4)).unwrap(), second)?;
        clean(&o)?;
        all_at(&times(&o, pc_kind(OutputKind::Low))?, int(3), "pc3 low")?;
        all_at(&times(&o, pc_kind(OutputKind::High))?, int(3), "pc3 high")?;
        let o = timed(|| Outcome::of(Scenario::new(Protocol::PcOpt, n, f, 4)).unwrap(), second)?;
        clean(&o)?;
        all_at(&times(&o, pc_kind(OutputKind::Opt))?, int(2), "pc_opt opt")?;
        all_by(&times(&o, pc_kind(OutputKind::Low))?, int(4), "pc_opt low")?;
        all_by(&times(&o, pc_kind(OutputKind::High))?, int(4), "pc_opt high")?;
    }
    let o = timed(|| Outcome::of(Scenario::new(Protocol::Pc5f1, 6, 1, 4)).unwrap(), second)?;
    clean(&o)?;
    all_at(&times(&o, pc_kind(OutputKind::Low))?, int(2), "pc_5f1 low")?;
    all_at(&times(&o, pc_kind(OutputKind::High))?, int(2), "pc_5f1 high")?;
    Ok("pc3 at 3, pc_opt opt at 2 and low/high by 4 (n=4,7); pc_5f1 at 2 (n=6)".into())
}

fn spc_high(r: &Report) -> bool {
    matches!(r, Report::Spc { kind: OutputKind::High, .. })
}

fn criterion_2() -> Verdict {
    let mut worst = Vec::new();
    for (n, f) in [(4usize, 1usize), (7, 2)] {
        let o = Outcome::of(Scenario::new(Protocol::Spc, n, f, n)).unwrap();
        clean(&o)?;
        all_at(&times(&o, spc_high)?, int(7), "fault-free high")?;
        let mut sc = Scenario::new(Protocol::Spc, n, f, n);
        sc.adversary.push(AdversarySpec { party: 0, behavior: BehaviorKind::Silent, second: None, reveal_to: Vec::new() });
        ensure(sc.delay.delta_cap.0 == int(2), || "Δ must be 2δ".into())?;
        let bound = int(2 * (f as i64 + 1) * 2 + 3 * (f as i64 + 2));
        let o = Outcome::of(sc).unwrap();
        clean(&o)?;
        let ts = times(&o, spc_high)?;
        all_by(&ts, bound, "silent first-ranked high")?;
        worst.push(format!("n={n}: {} <= {bound}", ts.iter().max().unwrap()));
    }
    Ok(format!("fault-free high at 7; silent first-ranked {}", worst.join(", ")))
}

fn criterion_3() -> Verdict {
    for (n, f) in [(4, 1), (7, 2)] {
        let mut sc = Scenario::new(Protocol::Msc, n, f, n);
        sc.slots = 2;
        let o = Outcome::of(sc).unwrap();
        clean(&o)?;
        for p in o.setup.sc.honest() {
            let commits: Vec<Time> =
                o.sim.of(p).filter(|s| matches!(s.report, Report::Commit { slot: 1, .. })).map(|s| s.time).collect();
            ensure(commits.len() == n, || format!("party {p} committed {} slot-1 inputs", commits.len()))?;
            all_at(&commits, int(4), "slot-1 commit")?;
        }
        all_at(&times(&o, |r| matches!(r, Report::SlotStart { slot: 2 }))?, int(8), "slot-2 start")?;
    }
    Ok("slot 1 commits every input at 4, slot 2 starts at 8 (n=4,7)".into())
}

fn suite(cfg: &SuiteConfig) -> Result<SuiteReport, String> {
    let r = run_suite(cfg, Exec::Parallel);
    match &r.first_failure {
        None => Ok(r),
        Some(f) => Err(format!("{}: seed {} {:?}", cfg.suite.name(), f.seed, f.violation)),
    }
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut safety = SuiteConfig::new(Suite::Safety, 11_000);
    safety.seed = 1;
    let s = suite(&safety)?;
    let mut sound = SuiteConfig::new(Suite::Soundness, 1000);
    sound.seed = 1 << 32;
    let d = suite(&sound)?;
    let mut slots = SuiteConfig::new(Suite::Slots, 1000);
    slots.seed = 2 << 32;
    let m = suite(&slots)?;
    let took = start.elapsed();
    ensure(s.fuzzed >= 10_000, || format!("only {} fuzzed schedules", s.fuzzed))?;
    ensure(took < Duration::from_secs(300), || format!("took {took:?}"))?;
    Ok(format!(
        "{} safety runs ({} fuzzed pre-GST), {} doctored-proof runs, {} multi-slot runs, 0 violations, {:.1}s",
        s.runs,
        s.fuzzed,
        d.runs,
        m.runs,
        took.as_secs_f64()
    ))
}

fn criterion_5() -> Verdict {
    let mut notes = Vec::new();
    for (n, f) in [(4, 1), (7, 2)] {
        let mut cfg = SuiteConfig::new(Suite::Censorship, 10);
        cfg.ns = vec![n];
        cfg.f = Some(f);
        cfg.slots = 100;
        cfg.seed = 500 + n as u64;
        let r = suite(&cfg)?;
        ensure(r.max_censored <= f, || format!("n={n}: {} censored slots", r.max_censored))?;
        notes.push(format!("(n={n}, f={f}) max censored {}", r.max_censored));
    }
    Ok(format!("{} over 10 runs x 100 post-GST slots each; demotions name Byzantine parties", notes.join(", ")))
}

fn criterion_6() -> Verdict {
    let mut cfg = SuiteConfig::new(Suite::Leaderless, 200);
    cfg.seed = 900;
    cfg.slots = 3;
    let r = suite(&cfg)?;
    Ok(format!("{} runs (spc, msc; n=4,7), every honest party output or committed", r.runs))
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc7);
    for i in 0..500 {
        let n = rng.gen_range(1..=7);
        let set: Vec<PrefixVector> = (0..n)
            .map(|_| {
                let len = rng.gen_range(0..=5);
                PrefixVector((0..len).map(|_| Value::new([b'a' + rng.gen_range(0..3u8)])).collect())
            })
            .collect();
        let k = rng.gen_range(1..=n);
        let got = longest_supported_prefix(&set, k).map_err(|e| e.to_string())?;
        ensure(got == oracle_lsp(&set, k), || format!("set {i} differs from subset enumeration"))?;
    }
    for t in 0..500u64 {
        let (n, f) = if t % 2 == 0 { (4, 1) } else { (7, 2) };
        let trial = random_trial(&mut rng, n, f, 1 + (t as usize) % 6);
        let ver = Verifier::new(Arc::new(MacScheme::new(n, t)));
        let out = run_trial(&trial, &ver, &mut rng).map_err(|e| format!("trial {t}: {e}"))?;
        ensure(out.plain == out.compact, || format!("trial {t}: compact and plain certify differently"))?;
    }
    Ok("500 sets match subset enumeration; 500 vote multisets certify identically".into())
}

fn criterion_8() -> Verdict {
    let msgs = sweep(&Scenario::new(Protocol::Pc3, 4, 1, 1), &[4, 7, 10, 13, 16, 19, 22, 25, 28, 31], false)
        .map_err(|e| e.to_string())?;
    let me = msgs.message_exponent.ok_or("no fit")?.exponent;
    let mut plain = Scenario::new(Protocol::Pc3, 4, 1, 4);
    let pb = sweep(&plain, &[4, 7, 10], true).map_err(|e| e.to_string())?.byte_exponent.ok_or("no fit")?.exponent;
    plain.codec = Codec::Compact;
    let cb = sweep(&plain, &[4, 7, 10], true).map_err(|e| e.to_string())?.byte_exponent.ok_or("no fit")?.exponent;
    let line = format!("messages {me:.2} (n=4..31), bytes plain {pb:.2}, compact {cb:.2} (n=4,7,10, L=n)");
    ensure((me - 2.0).abs() <= 0.2 && (pb - 4.0).abs() <= 0.5 && (cb - 3.0).abs() <= 0.5, || line.clone())?;
    Ok(line)
}

fn criterion_9() -> Verdict {
    for (n, f) in [(4, 1), (7, 2)] {
        let o = Outcome::of(Scenario::new(Protocol::Graded, n, f, 1)).unwrap();
        clean(&o)?;
        all_at(&times(&o, |r| matches!(r, Report::Graded(_)))?, int(3), "graded output")?;
    }
    let mut cfg = SuiteConfig::new(Suite::Graded, 1000);
    cfg.seed = 77;
    let r = suite(&cfg)?;
    let mixed = common::reverse::check_instances(200, 0x9e9e)?;
    Ok(format!(
        "graded at 3 delays; {} fuzzed adversarial runs clean; 200 reverse-reduction instances ({mixed} with low != high)",
        r.runs
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("round exactness", criterion_1),
        ("strong PC latency", criterion_2),
        ("multi-slot latency", criterion_3),
        ("safety suites", criterion_4),
        ("censorship resistance", criterion_5),
        ("leaderless termination", criterion_6),
        ("oracle equivalences", criterion_7),
        ("complexity trends", criterion_8),
        ("graded consensus", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
