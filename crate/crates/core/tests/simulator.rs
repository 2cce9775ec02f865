//! Network model, suspension schedule and run-level model soundness.

use prefix_consensus::runner::Outcome;
use prefix_consensus::scenario::{parse, LinkSpec, Protocol, Scenario, TimeSpec};
use prefix_consensus::sim::{t, DelayPolicy, Suspension, Time};
use prefix_consensus::suites::{fuzz_scenario, leaderless_scenario, max_f};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn time() -> impl Strategy<Value = Time> {
    (0i64..400, 1i64..=8).prop_map(|(a, b)| Time::new(a, b))
}

proptest! {
    #[test]
    fn delays_respect_the_deadline(seed in any::<u64>(), gst in time(), now in time(), cap in 1i64..4, slow in any::<bool>()) {
        let mut p = DelayPolicy::partial(gst, t(cap));
        if slow {
            p.slow_links.push((0, 1));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = p.draw(&mut rng, 0, 1, now);
        prop_assert!(d > t(0));
        prop_assert!(now + d <= p.deadline(now));
        if now >= gst {
            prop_assert!(d <= t(cap));
        }
        if slow && now < gst {
            prop_assert_eq!(now + d, gst + t(cap));
        }
    }

    #[test]
    fn one_party_suspended_per_window(start in 0i64..10, window in 1i64..4, now in time(), len in 1usize..6) {
        let s = Suspension { start: t(start), window: t(window), order: (0..len).collect() };
        match s.at(now) {
            None => prop_assert!(now < t(start)),
            Some((p, end)) => {
                prop_assert!(p < len);
                prop_assert!(end > now && end - now <= t(window));
                // Every instant of the same window names the same party.
                let mid = end - Time::new(window, 2);
                prop_assert_eq!(s.at(mid).map(|x| x.0), Some(p));
            }
        }
    }
}

#[test]
fn synchronized_preset_is_exactly_delta() {
    let p = DelayPolicy::synchronized(t(1));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for now in 0..20 {
        assert_eq!(p.draw(&mut rng, 2, 3, t(now)), t(1));
    }
}

#[test]
fn suspension_rotates_through_the_order() {
    let s = Suspension { start: t(2), window: t(3), order: vec![4, 0, 5] };
    assert_eq!(s.at(t(1)), None);
    assert_eq!(s.at(t(2)), Some((4, t(5))));
    assert_eq!(s.at(Time::new(49, 10)), Some((4, t(5))));
    assert_eq!(s.at(t(5)), Some((0, t(8))));
    assert_eq!(s.at(t(11)), Some((4, t(14))));
}

#[test]
fn post_gst_delays_never_exceed_the_bound() {
    for seed in 0..60 {
        for n in [4, 7] {
            let p = [Protocol::Pc3, Protocol::Spc, Protocol::Msc][seed as usize % 3];
            let sc = fuzz_scenario(p, n, max_f(p, n), seed, 2);
            let cap = sc.delay.delta_cap.0;
            let o = Outcome::of(sc).unwrap();
            assert!(o.sim.max_post_gst_delay <= cap, "seed {seed}: {}", o.sim.max_post_gst_delay);
        }
    }
}

#[test]
fn suspensions_cover_each_window_once() {
    for seed in 0..20 {
        let sc = leaderless_scenario(Protocol::Msc, 7, 2, seed, 3);
        let s = sc.suspension.clone().unwrap();
        let o = Outcome::of(sc).unwrap();
        assert!(!o.sim.suspensions.is_empty());
        let mut windows: Vec<Time> = o.sim.suspensions.iter().map(|&(_, at)| at).collect();
        let len = windows.len();
        windows.dedup();
        assert_eq!(windows.len(), len, "seed {seed}: two suspensions in one window");
        for &(p, at) in &o.sim.suspensions {
            assert!(!o.setup.sc.byzantine().contains(&p));
            assert!(at >= s.start.0);
        }
    }
}

#[test]
fn fractional_link_delays_are_exact() {
    let mut sc = Scenario::new(Protocol::Pc3, 4, 1, 2);
    for from in 0..4 {
        for to in 0..4 {
            if from != to {
                sc.delay.links.push(LinkSpec { from, to, delay: TimeSpec(Time::new(6, 5)) });
            }
        }
    }
    let o = Outcome::of(sc).unwrap();
    assert_eq!(o.latency()["high"].first, "18/5");
    assert_eq!(o.latency()["high"].last, "18/5");
}

#[test]
fn fractional_times_parse_from_strings() {
    let sc = parse("schema = 1\nprotocol = \"pc3\"\nn = 4\nf = 1\n[delay]\npreset = \"partial\"\ngst = \"7/2\"\n").unwrap();
    assert_eq!(sc.delay.gst.0, Time::new(7, 2));
}

#[test]
fn silent_parties_send_nothing() {
    let mut sc = Scenario::new(Protocol::Pc3, 4, 1, 2);
    sc.adversary.push(prefix_consensus::scenario::AdversarySpec {
        party: 2,
        behavior: prefix_consensus::scenario::BehaviorKind::Silent,
        second: None,
        reveal_to: Vec::new(),
    });
    sc.output.transcript = true;
    let o = Outcome::of(sc).unwrap();
    assert!(o.sim.transcript.unwrap().iter().all(|r| r.sender != 2));
    assert!(o.violations.is_empty());
}
