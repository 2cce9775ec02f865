//! PC family: certification examples against a brute-force oracle, engine
//! round structure, safety properties under random schedules, and predicates.

mod common;

use std::sync::Arc;

use common::{config, drive, verifier};
use prefix_consensus::crypto::{MsgKind, Signature, Verifier};
use prefix_consensus::pc::certify::{qc1_values, qc2_mcp_mce, qc3_low_high, qc3_opt, CertifyError};
use prefix_consensus::pc::verify::{predicate_high, predicate_low};
use prefix_consensus::pc::{
    Codec, ConfigError, Instance, Memo, OutputKind, PcConfig, PcMsg, Proof, Qc, Qc2, Qc3, Variant, Vote1, Vote2, Vote3,
};
use prefix_consensus::prefix::{consistent, is_prefix, PrefixVector};
use prefix_consensus::wire::{sign_bytes, Decode, Encode};
use proptest::prelude::*;

fn pv(s: &str) -> PrefixVector {
    PrefixVector(s.chars().map(|c| c.to_string().as_str().into()).collect())
}

// ---- oracle ---------------------------------------------------------------

fn oracle_mcp(set: &[PrefixVector]) -> PrefixVector {
    let mut k = 0;
    while set.iter().all(|v| v.len() > k && v.0[k] == set[0].0[k]) {
        k += 1;
    }
    set[0].prefix(k)
}

fn oracle_mce(set: &[PrefixVector]) -> Option<PrefixVector> {
    let longest = set.iter().max_by_key(|v| v.len())?;
    set.iter().all(|v| v.0[..] == longest.0[..v.len()]).then(|| longest.clone())
}

/// Longest mcp over all size-`k` subsets, by bitmask enumeration.
fn oracle_support(set: &[PrefixVector], k: usize) -> PrefixVector {
    let mut best: Option<PrefixVector> = None;
    for mask in 0u32..(1 << set.len()) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let sub: Vec<PrefixVector> = (0..set.len()).filter(|i| mask >> i & 1 == 1).map(|i| set[i].clone()).collect();
        let m = oracle_mcp(&sub);
        if best.as_ref().is_none_or(|b| m.len() > b.len()) {
            best = Some(m);
        }
    }
    best.unwrap()
}

// ---- certificate builders -------------------------------------------------

fn sig(ver: &Verifier, cfg: &PcConfig, kind: MsgKind, who: usize, v: &PrefixVector) -> Signature {
    ver.keyring(who).sign(&cfg.tag(kind), &sign_bytes(&v.0))
}

fn qc3_of(ver: &Verifier, cfg: &PcConfig, vals: &[PrefixVector]) -> Qc3 {
    let votes = vals
        .iter()
        .enumerate()
        .map(|(i, v)| {
            Arc::new(Vote3 {
                value: v.clone(),
                sig: sig(ver, cfg, MsgKind::Vote3, i, v),
                qc1: None,
                qc2: Arc::new(Qc::new(Vec::new())),
                memo: Memo::default(),
            })
        })
        .collect();
    Qc::new(votes)
}

fn qc2_of(ver: &Verifier, cfg: &PcConfig, vals: &[PrefixVector]) -> Qc2 {
    let votes = vals
        .iter()
        .enumerate()
        .map(|(i, v)| {
            Arc::new(Vote2 {
                value: v.clone(),
                sig: sig(ver, cfg, MsgKind::Vote2, i, v),
                qc1: Arc::new(Qc::new(Vec::new())),
                memo: Memo::default(),
            })
        })
        .collect();
    Qc::new(votes)
}

// ---- certification examples -------------------------------------------------

#[test]
fn qc1_examples_match_oracle() {
    let votes = [pv("ab"), pv("ab"), pv("ac")];
    let refs: Vec<&PrefixVector> = votes.iter().collect();
    let c = qc1_values(&refs, 2).unwrap();
    assert_eq!(c.x, oracle_support(&votes, 2));
    assert_eq!(c.x, pv("ab"));
    assert_eq!(c.y, oracle_mcp(&votes));
    assert_eq!(c.y, pv("a"));

    let fast = [pv("ab"), pv("ab"), pv("ab"), pv("ab"), pv("ac")];
    let refs: Vec<&PrefixVector> = fast.iter().collect();
    let c = qc1_values(&refs, 4).unwrap();
    assert_eq!(c.x, oracle_support(&fast, 4));
    assert_eq!(c.x, pv("ab"));
}

#[test]
fn qc2_and_qc3_examples_match_oracle() {
    let ver = verifier(6);
    let fast = config(6, 1, 4, Variant::Fast5f1, Codec::Plain);
    let vals = [pv("a"), pv("ab"), pv("ab")];
    let (lo, hi) = qc2_mcp_mce(&qc2_of(&ver, &fast, &vals)).unwrap();
    assert_eq!((lo.clone(), Some(hi.clone())), (oracle_mcp(&vals), oracle_mce(&vals)));
    assert_eq!((lo, hi), (pv("a"), pv("ab")));

    let three = config(4, 1, 4, Variant::ThreeRound, Codec::Plain);
    let (lo, hi) = qc3_low_high(&qc3_of(&ver, &three, &vals)).unwrap();
    assert_eq!((lo, hi), (pv("a"), pv("ab")));

    let opt = config(4, 1, 4, Variant::Optimistic, Codec::Plain);
    let z = [pv("ab"), pv("abc")];
    assert_eq!(qc3_opt(&qc3_of(&ver, &opt, &z)).unwrap(), (pv("ab"), Some(pv("abc"))));
    let z = [pv("ab"), pv("ac"), pv("a")];
    assert_eq!(oracle_mce(&z), None);
    assert_eq!(qc3_opt(&qc3_of(&ver, &opt, &z)).unwrap(), (pv("a"), None));
}

#[test]
fn conflicting_qc3_is_a_fault() {
    let ver = verifier(4);
    let cfg = config(4, 1, 4, Variant::ThreeRound, Codec::Plain);
    let q = qc3_of(&ver, &cfg, &[pv("ab"), pv("ac"), pv("a")]);
    assert_eq!(qc3_low_high(&q), Err(CertifyError::MceUndefined));
}

#[test]
fn config_checks_resilience() {
    let i = Instance::standalone();
    assert!(PcConfig::new(4, 1, 3, Variant::ThreeRound, Codec::Plain, i).is_ok());
    assert!(matches!(
        PcConfig::new(3, 1, 3, Variant::ThreeRound, Codec::Plain, i),
        Err(ConfigError::Resilience { need: 4, .. })
    ));
    assert!(matches!(
        PcConfig::new(5, 1, 3, Variant::Fast5f1, Codec::Plain, i),
        Err(ConfigError::Resilience { need: 6, .. })
    ));
    assert_eq!(PcConfig::new(4, 1, 3, Variant::Optimistic, Codec::Compact, i), Err(ConfigError::CompactVariant));
    assert_eq!(PcConfig::new(4, 1, 0, Variant::ThreeRound, Codec::Plain, i), Err(ConfigError::ZeroCapacity));
}

// ---- engine round structure ----------------------------------------------------

fn same_inputs(n: usize, v: &PrefixVector) -> Vec<Option<PrefixVector>> {
    vec![Some(v.clone()); n]
}

#[test]
fn three_round_fault_free_outputs_after_third_quorum() {
    for (n, f) in [(4, 1), (7, 2)] {
        for codec in [Codec::Plain, Codec::Compact] {
            let cfg = config(n, f, 3, Variant::ThreeRound, codec);
            let v = pv("abc");
            let run = drive(cfg, &verifier(n), &same_inputs(n, &v), None);
            assert!(run.faults.is_empty());
            assert_eq!(run.messages, 3 * n * (n - 1));
            for p in 0..n {
                assert_eq!(run.outputs[p].len(), 2);
                assert_eq!(run.get(p, OutputKind::Low).unwrap().value, v);
                assert_eq!(run.get(p, OutputKind::High).unwrap().value, v);
                assert_eq!(run.depth[p], vec![3, 3]);
            }
        }
    }
}

#[test]
fn optimistic_fault_free_emits_opt_after_second_quorum() {
    let n = 4;
    let cfg = config(n, 1, 3, Variant::Optimistic, Codec::Plain);
    let short = pv("ab");
    let run = drive(cfg, &verifier(n), &same_inputs(n, &short), None);
    assert_eq!(run.messages, 4 * n * (n - 1));
    for p in 0..n {
        let kinds: Vec<_> = run.outputs[p].iter().map(|o| o.kind).collect();
        assert_eq!(kinds, vec![OutputKind::Opt, OutputKind::High, OutputKind::Low]);
        assert_eq!(run.depth[p], vec![2, 3, 4]);
        assert!(run.outputs[p].iter().all(|o| o.value == short));
    }
    let full = pv("abc");
    let run = drive(cfg, &verifier(n), &same_inputs(n, &full), None);
    for p in 0..n {
        let kinds: Vec<_> = run.outputs[p].iter().map(|o| o.kind).collect();
        assert_eq!(kinds, vec![OutputKind::Opt, OutputKind::Low, OutputKind::High]);
        assert_eq!(run.depth[p], vec![2, 2, 2]);
    }
}

#[test]
fn fast_variant_outputs_after_second_quorum() {
    let n = 6;
    let cfg = config(n, 1, 3, Variant::Fast5f1, Codec::Plain);
    let v = pv("abc");
    let run = drive(cfg, &verifier(n), &same_inputs(n, &v), None);
    assert_eq!(run.messages, 2 * n * (n - 1));
    for p in 0..n {
        assert_eq!(run.depth[p], vec![2, 2]);
        assert!(run.outputs[p].iter().all(|o| o.value == v));
    }
}

#[test]
fn duplicate_and_spoofed_votes_are_dropped() {
    let n = 4;
    let ver = verifier(n);
    let cfg = config(n, 1, 2, Variant::ThreeRound, Codec::Plain);
    let mut e = prefix_consensus::pc::PcEngine::new(cfg, ver.keyring(0));
    let v = pv("ab");
    let vote = Arc::new(Vote1 { value: v.clone(), sig: sig(&ver, &cfg, MsgKind::Vote1, 1, &v), memo: Memo::default() });
    assert!(e.on_message(1, PcMsg::Vote1(vote.clone())).is_empty());
    assert!(e.on_message(1, PcMsg::Vote1(vote.clone())).is_empty());
    assert!(e.on_message(2, PcMsg::Vote1(vote)).is_empty());
    assert_eq!(e.round1_values(), vec![v]);
    assert_eq!(e.dropped(), 1);
    assert!(e.input(pv("abc")).is_err());
}

// ---- properties under random schedules -------------------------------------

fn check_properties(cfg: PcConfig, ver: &Verifier, inputs: &[Option<PrefixVector>], seed: u64) {
    let run = drive(cfg, ver, inputs, Some(seed));
    assert!(run.faults.is_empty(), "{:?}", run.faults);
    let honest: Vec<usize> = (0..cfg.n).filter(|&i| inputs[i].is_some()).collect();
    let honest_in: Vec<PrefixVector> = honest.iter().map(|&i| inputs[i].clone().unwrap()).collect();
    let base = oracle_mcp(&honest_in);
    let get = |p: usize, k| run.get(p, k).map(|o| o.value.clone()).expect("output");
    for &i in &honest {
        let (lo, hi) = (get(i, OutputKind::Low), get(i, OutputKind::High));
        assert!(is_prefix(&base, &lo), "validity");
        for &j in &honest {
            assert!(is_prefix(&lo, &get(j, OutputKind::High)), "upper bound");
            assert!(consistent(&hi, &get(j, OutputKind::High)), "consistency");
        }
        for out in [&lo, &hi] {
            for k in 0..out.len() {
                assert!(honest_in.iter().any(|h| h.0.get(k) == Some(&out.0[k])), "availability");
            }
        }
        if cfg.variant == Variant::Optimistic {
            let opt = get(i, OutputKind::Opt);
            assert!(is_prefix(&opt, &lo), "optimistic prefix");
            if honest.len() == cfg.n {
                assert!(is_prefix(&base, &opt), "optimistic validity");
            }
        }
        for o in &run.outputs[i] {
            match o.kind {
                OutputKind::Low => assert!(predicate_low(&cfg, ver, &o.value, &o.proof)),
                OutputKind::High => assert!(predicate_high(&cfg, ver, &o.value, &o.proof)),
                OutputKind::Opt => {}
            }
        }
    }
}

fn vec_strategy(l: usize) -> impl Strategy<Value = PrefixVector> {
    proptest::collection::vec(prop_oneof![Just("a"), Just("b")], 0..=l)
        .prop_map(|s| PrefixVector::of(&s))
}

fn setup_strategy() -> impl Strategy<Value = (usize, usize, Variant, Codec)> {
    prop_oneof![
        Just((4, 1, Variant::ThreeRound, Codec::Plain)),
        Just((4, 1, Variant::ThreeRound, Codec::Compact)),
        Just((4, 1, Variant::Optimistic, Codec::Plain)),
        Just((7, 2, Variant::ThreeRound, Codec::Plain)),
        Just((7, 2, Variant::ThreeRound, Codec::Compact)),
        Just((7, 2, Variant::Optimistic, Codec::Plain)),
        Just((6, 1, Variant::Fast5f1, Codec::Plain)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn safety_under_random_schedules(
        (n, f, variant, codec) in setup_strategy(),
        raw in proptest::collection::vec(vec_strategy(4), 7),
        silent in 0usize..=2,
        seed in any::<u64>(),
    ) {
        let cfg = config(n, f, 4, variant, codec);
        let silent = silent.min(f);
        let inputs: Vec<Option<PrefixVector>> =
            (0..n).map(|i| if i < silent { None } else { Some(raw[i].clone()) }).collect();
        check_properties(cfg, &verifier(n), &inputs, seed);
    }
}

// ---- predicates ------------------------------------------------------------

fn diverse_run(codec: Codec) -> (PcConfig, Verifier, common::Run) {
    let n = 4;
    let cfg = config(n, 1, 3, Variant::ThreeRound, codec);
    let ver = verifier(n);
    let inputs = vec![Some(pv("abc")), Some(pv("abc")), Some(pv("ab")), Some(pv("a"))];
    let run = (0..500)
        .map(|seed| drive(cfg, &ver, &inputs, Some(seed)))
        .find(|r| r.get(0, OutputKind::Low).unwrap().value != r.get(0, OutputKind::High).unwrap().value)
        .expect("some schedule separates low and high");
    (cfg, ver, run)
}

#[test]
fn predicates_accept_outputs_and_reject_swaps() {
    for codec in [Codec::Plain, Codec::Compact] {
        let (cfg, ver, run) = diverse_run(codec);
        let lo = run.get(0, OutputKind::Low).unwrap();
        let hi = run.get(0, OutputKind::High).unwrap();
        assert!(predicate_low(&cfg, &ver, &lo.value, &lo.proof));
        assert!(predicate_high(&cfg, &ver, &hi.value, &hi.proof));
        assert!(!predicate_low(&cfg, &ver, &hi.value, &lo.proof));
        assert!(!predicate_high(&cfg, &ver, &lo.value, &hi.proof));
        let other = cfg.with_inst(Instance { family: 1, slot: 9, view: 0 });
        assert!(!predicate_low(&other, &ver, &lo.value, &lo.proof));
    }
}

#[test]
fn predicates_reject_corrupted_signature() {
    let (cfg, ver, run) = diverse_run(Codec::Plain);
    let lo = run.get(0, OutputKind::Low).unwrap();
    let Proof::Qc3(q) = &lo.proof else { panic!("3-round proof is a QC3") };
    let mut q = (**q).clone();
    let mut v = (*q.votes[0]).clone();
    let mut bytes = v.sig.bytes.to_vec();
    bytes[0] ^= 1;
    v.sig.bytes = bytes.into();
    q.votes[0] = Arc::new(v);
    assert!(!predicate_low(&cfg, &ver, &lo.value, &Proof::Qc3(Arc::new(q))));
}

#[test]
fn predicates_reject_corrupted_compact_blob() {
    let (cfg, ver, run) = diverse_run(Codec::Compact);
    let lo = run.get(0, OutputKind::Low).unwrap();
    let Proof::Compact(q) = &lo.proof else { panic!("compact proof") };
    let mut q = (**q).clone();
    q.blob[3] ^= 0x40;
    assert!(!predicate_low(&cfg, &ver, &lo.value, &Proof::Compact(Arc::new(q))));
}

#[test]
fn optimistic_predicates_accept_each_stage() {
    let n = 4;
    let ver = verifier(n);
    let cfg = config(n, 1, 3, Variant::Optimistic, Codec::Plain);
    let full = drive(cfg, &ver, &same_inputs(n, &pv("abc")), None);
    let o = full.get(1, OutputKind::Low).unwrap();
    assert_eq!(o.proof.stage(), "qc2");
    assert!(predicate_low(&cfg, &ver, &o.value, &o.proof));
    let short = drive(cfg, &ver, &same_inputs(n, &pv("ab")), None);
    let hi = short.get(1, OutputKind::High).unwrap();
    let lo = short.get(1, OutputKind::Low).unwrap();
    assert_eq!((hi.proof.stage(), lo.proof.stage()), ("qc3", "qc4"));
    assert!(predicate_high(&cfg, &ver, &hi.value, &hi.proof));
    assert!(!predicate_low(&cfg, &ver, &hi.value, &hi.proof));
    assert!(predicate_low(&cfg, &ver, &lo.value, &lo.proof));
    // A short QC2 certifies nothing.
    let opt = short.get(1, OutputKind::Opt).unwrap();
    assert!(!predicate_low(&cfg, &ver, &opt.value, &opt.proof));
}

// ---- codec round trips ------------------------------------------------------

#[test]
fn messages_and_proofs_round_trip() {
    for (variant, codec) in [
        (Variant::ThreeRound, Codec::Plain),
        (Variant::ThreeRound, Codec::Compact),
        (Variant::Optimistic, Codec::Plain),
    ] {
        let n = 4;
        let cfg = config(n, 1, 3, variant, codec);
        let inputs = vec![Some(pv("abc")), Some(pv("ab")), Some(pv("abc")), Some(pv("b"))];
        let run = drive(cfg, &verifier(n), &inputs, Some(3));
        for o in run.outputs.iter().flatten() {
            let b = o.proof.to_bytes();
            assert_eq!(Proof::from_bytes(&b).unwrap(), o.proof);
            assert_eq!(b.len(), o.proof.encoded_len());
            let mut cut = b.clone();
            cut.pop();
            assert!(Proof::from_bytes(&cut).is_err());
        }
    }
}
