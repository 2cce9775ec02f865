//! Prefix Consensus rebuilt from one graded instance per index, checked
//! against the Consistent PC properties.

use prefix_consensus::derived::{pc_from_graded, GradedOutput};
use prefix_consensus::prefix::{PrefixVector, Value};
use prefix_consensus::runner::Outcome;
use prefix_consensus::scenario::{AdversarySpec, BehaviorKind, Preset, Protocol, Scenario, TimeSpec};
use prefix_consensus::sim::{t, Report};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::oracle_mcp;

fn prefix_of(a: &PrefixVector, b: &PrefixVector) -> bool {
    a.len() <= b.len() && a.0[..] == b.0[..a.len()]
}

/// Random instance: inputs share a random prefix and then diverge.
fn instance(rng: &mut ChaCha8Rng) -> (usize, usize, Vec<Vec<String>>) {
    let (n, f) = if rng.gen_bool(0.5) { (4, 1) } else { (7, 2) };
    let l = rng.gen_range(1..=4);
    let inputs = (0..n)
        .map(|_| {
            let keep = if rng.gen_bool(0.5) { l } else { rng.gen_range(0..=l) };
            (0..l).map(|k| if k < keep { format!("v{k}") } else { format!("w{}", rng.gen_range(0..2)) }).collect()
        })
        .collect();
    (n, f, inputs)
}

/// Runs `count` random instances under fuzzed schedules with equivocating
/// and silent parties. Returns how many separated low from high, or the
/// first failed property.
pub fn check_instances(count: u64, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mixed = 0;
    for i in 0..count {
        let (n, f, inputs) = instance(&mut rng);
        let l = inputs[0].len();
        let byz: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).take(f).collect();
        let gst = rng.gen_range(0..=8);
        let mut grades: Vec<Vec<GradedOutput>> = vec![Vec::new(); n];
        for k in 0..l {
            let mut sc = Scenario::new(Protocol::Graded, n, f, 1);
            sc.seed = i * 31 + k as u64;
            sc.inputs.values = Some(inputs.iter().map(|v| v[k].clone()).collect());
            sc.delay.preset = Preset::Partial;
            sc.delay.gst = TimeSpec(t(gst));
            for (j, &p) in byz.iter().enumerate() {
                let behavior = if j % 2 == 0 { BehaviorKind::Equivocate } else { BehaviorKind::Silent };
                sc.adversary.push(AdversarySpec { party: p, behavior, second: None, reveal_to: Vec::new() });
            }
            let o = Outcome::of(sc).map_err(|e| e.to_string())?;
            if let Some(v) = o.violations.first() {
                return Err(format!("instance {i} index {k}: {v:?}"));
            }
            for p in o.setup.sc.honest() {
                let g = o.sim.of(p).find_map(|s| match &s.report {
                    Report::Graded(x) => Some(x.clone()),
                    _ => None,
                });
                grades[p].push(g.ok_or(format!("instance {i}: party {p} has no graded output"))?);
            }
        }
        let honest: Vec<usize> = (0..n).filter(|p| !byz.contains(p)).collect();
        let vector = |p: usize| PrefixVector(inputs[p].iter().map(Value::new).collect());
        let outs: Vec<(PrefixVector, PrefixVector)> = honest.iter().map(|&p| pc_from_graded(&grades[p])).collect();
        let floor = oracle_mcp(&honest.iter().map(|&p| vector(p)).collect::<Vec<_>>());
        for (lo_a, hi_a) in &outs {
            if !prefix_of(&floor, lo_a) {
                return Err(format!("instance {i}: validity"));
            }
            for (_, hi_b) in &outs {
                if !prefix_of(lo_a, hi_b) {
                    return Err(format!("instance {i}: upper bound"));
                }
                if !prefix_of(hi_a, hi_b) && !prefix_of(hi_b, hi_a) {
                    return Err(format!("instance {i}: consistency"));
                }
            }
        }
        if honest.iter().all(|&p| inputs[p] == inputs[honest[0]]) && outs.iter().any(|(lo, _)| *lo != vector(honest[0])) {
            return Err(format!("instance {i}: unanimous inputs not output"));
        }
        if outs.iter().any(|(lo, hi)| lo != hi) {
            mixed += 1;
        }
    }
    Ok(mixed)
}
