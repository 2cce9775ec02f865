//! Multi-slot consensus: slot latency, commit logs, censorship and demotion.

use prefix_consensus::runner::{slot_digests, Outcome};
use prefix_consensus::scenario::{AdversarySpec, BehaviorKind, Protocol, Scenario};
use prefix_consensus::sim::{Report, Time};
use prefix_consensus::suites::{censorship_properties, censorship_scenario, leaderless_scenario};
use proptest::prelude::*;

fn adversary(party: usize, behavior: BehaviorKind, reveal_to: Vec<usize>) -> AdversarySpec {
    AdversarySpec { party, behavior, second: None, reveal_to }
}

fn msc(n: usize, f: usize, slots: u64) -> Scenario {
    let mut sc = Scenario::new(Protocol::Msc, n, f, n);
    sc.slots = slots;
    sc
}

/// Commit log `(slot, origin)` of one party, in commit order.
fn log(o: &Outcome, party: usize) -> Vec<(u64, usize)> {
    o.sim
        .of(party)
        .filter_map(|s| match s.report {
            Report::Commit { slot, origin, .. } => Some((slot, origin)),
            _ => None,
        })
        .collect()
}

#[test]
fn slot_one_commits_at_four_and_slot_two_starts_at_eight() {
    for (n, f) in [(4, 1), (7, 2)] {
        let o = Outcome::of(msc(n, f, 3)).unwrap();
        assert!(o.violations.is_empty(), "{:?}", o.violations);
        for p in 0..n {
            let commits: Vec<Time> = o
                .sim
                .of(p)
                .filter(|s| matches!(s.report, Report::Commit { slot: 1, .. }))
                .map(|s| s.time)
                .collect();
            assert_eq!(commits.len(), n, "party {p} commits every slot-1 input");
            assert!(commits.iter().all(|&x| x == Time::from_integer(4)));
            let starts: Vec<(u64, Time)> = o
                .sim
                .of(p)
                .filter_map(|s| match s.report {
                    Report::SlotStart { slot } => Some((slot, s.time)),
                    _ => None,
                })
                .collect();
            assert!(starts.contains(&(2, Time::from_integer(8))), "party {p}: {starts:?}");
            assert!(starts.contains(&(3, Time::from_integer(16))), "party {p}: {starts:?}");
        }
    }
}

#[test]
fn commit_logs_are_identical() {
    let mut sc = msc(7, 2, 4);
    sc.adversary.push(adversary(5, BehaviorKind::Equivocate, Vec::new()));
    sc.adversary.push(adversary(6, BehaviorKind::Silent, Vec::new()));
    let o = Outcome::of(sc).unwrap();
    assert!(o.violations.is_empty(), "{:?}", o.violations);
    let first = log(&o, 0);
    assert!(!first.is_empty());
    for p in 1..5 {
        assert_eq!(log(&o, p), first, "party {p}");
    }
}

#[test]
fn committed_digests_are_proposals() {
    let o = Outcome::of(msc(4, 1, 2)).unwrap();
    for slot in 1..=2 {
        let known = slot_digests(&o.setup.sc, slot);
        for s in o.sim.of(0) {
            if let Report::Commit { slot: c, origin, digest, .. } = &s.report {
                if *c == slot {
                    assert!(known.contains(&(*origin, *digest)));
                }
            }
        }
    }
}

#[test]
fn censors_at_seven_demote_a_byzantine_party_once() {
    let mut sc = msc(7, 2, 6);
    sc.adversary.push(adversary(0, BehaviorKind::Censor, vec![2]));
    sc.adversary.push(adversary(1, BehaviorKind::Censor, vec![2]));
    let o = Outcome::of(sc.clone()).unwrap();
    assert!(o.violations.is_empty(), "{:?}", o.violations);
    let a = &o.audit;
    assert_eq!(a.len(), 6);
    assert!(a[0].censored);
    assert_eq!(a[0].high_len, 1);
    assert_eq!(a[0].demoted, Some(1));
    for r in &a[1..] {
        assert!(!r.censored, "slot {}", r.slot);
        assert_eq!(r.rank, vec![0, 2, 3, 4, 5, 6, 1]);
        assert_eq!(r.high_len, 6);
    }
    assert_eq!(o.censored_slots(), vec![1]);
    assert!(censorship_properties(&sc, a).is_empty());
}

#[test]
fn equivocator_at_four_is_demoted_after_one_slot() {
    let mut sc = msc(4, 1, 5);
    sc.adversary.push(adversary(0, BehaviorKind::Equivocate, Vec::new()));
    let o = Outcome::of(sc).unwrap();
    assert!(o.violations.is_empty(), "{:?}", o.violations);
    assert_eq!(o.censored_slots(), vec![1]);
    assert_eq!(o.audit[0].demoted, Some(0));
    assert!(o.audit[1..].iter().all(|r| r.rank == vec![1, 2, 3, 0] && !r.censored));
}

#[test]
fn body_hiding_censor_at_four_cannot_censor() {
    let mut sc = msc(4, 1, 5);
    sc.adversary.push(adversary(0, BehaviorKind::Censor, vec![1]));
    let o = Outcome::of(sc).unwrap();
    assert!(o.violations.is_empty(), "{:?}", o.violations);
    assert!(o.censored_slots().is_empty());
}

#[test]
fn withheld_bodies_are_fetched() {
    let mut sc = msc(4, 1, 3);
    sc.adversary.push(adversary(2, BehaviorKind::WithholdBody, vec![1]));
    let o = Outcome::of(sc).unwrap();
    assert!(o.violations.is_empty(), "{:?}", o.violations);
    for p in [0, 1, 3] {
        for slot in 1..=3 {
            let honest: Vec<usize> = log(&o, p).into_iter().filter(|c| c.0 == slot).map(|c| c.1).collect();
            for h in [0, 1, 3] {
                assert!(honest.contains(&h), "party {p} slot {slot} misses {h}");
            }
        }
    }
}

#[test]
fn suspension_with_silent_parties_keeps_committing() {
    for seed in 0..10 {
        let sc = leaderless_scenario(Protocol::Msc, 7, 2, seed, 3);
        let o = Outcome::of(sc).unwrap();
        assert!(o.violations.is_empty(), "seed {seed}: {:?}", o.violations);
        assert_eq!(o.audit.len(), 3, "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn censorship_bound_holds(seed in any::<u64>(), big in any::<bool>()) {
        let (n, f) = if big { (7, 2) } else { (4, 1) };
        let sc = censorship_scenario(n, f, seed, 12);
        let o = Outcome::of(sc.clone()).unwrap();
        prop_assert!(o.violations.is_empty(), "{:?}", o.violations);
        prop_assert!(o.censored_slots().len() <= f);
        let bad = censorship_properties(&sc, &o.audit);
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }
}
