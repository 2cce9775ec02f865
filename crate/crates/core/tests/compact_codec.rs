//! Compact codec: equivalence with plain certification, verification
//! rejections, sizes and round trips.

use std::sync::Arc;

use prefix_consensus::compact::equivalence::{random_trial, run_trial, Certified, Trial};
use prefix_consensus::compact::{
    build_qc1, build_qc2, build_qc3, make_vote1, make_vote2, verify_qc1, verify_qc2, verify_qc3, CVote1, CVote2,
    CVote3, CompactQc2, Qc2Proof, Reject, Trunc,
};
use prefix_consensus::crypto::{Ed25519Scheme, MacScheme, MsgKind, Verifier};
use prefix_consensus::pc::{Codec, Instance, Memo, PcConfig, PcMsg, Variant};
use prefix_consensus::prefix::{PrefixVector, Value};
use prefix_consensus::wire::{sign_bytes, Decode, Encode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pv(s: &str) -> PrefixVector {
    PrefixVector(s.chars().map(|c| c.to_string().as_str().into()).collect())
}

fn setup(n: usize, f: usize, l: usize) -> (PcConfig, Verifier) {
    let cfg = PcConfig::new(n, f, l, Variant::ThreeRound, Codec::Compact, Instance::standalone()).unwrap();
    (cfg, Verifier::new(Arc::new(MacScheme::new(n, 11))))
}

fn votes1(cfg: &PcConfig, ver: &Verifier, inputs: &[&str]) -> Vec<Arc<CVote1>> {
    inputs.iter().enumerate().map(|(i, s)| Arc::new(make_vote1(cfg, &ver.keyring(i), pv(s)))).collect()
}

fn votes2(cfg: &PcConfig, ver: &Verifier, qc1s: &[Arc<prefix_consensus::compact::CompactQc1>]) -> Vec<Arc<CVote2>> {
    qc1s.iter().enumerate().map(|(i, q)| Arc::new(make_vote2(cfg, &ver.keyring(i), q.clone()))).collect()
}

#[test]
fn equivalence_over_500_random_vote_multisets() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut mismatches = 0;
    let mut distinct_lows = 0;
    for t in 0..500 {
        let (n, f) = if t % 2 == 0 { (4, 1) } else { (7, 2) };
        let l = 1 + t % 6;
        let trial = random_trial(&mut rng, n, f, l);
        let ver = Verifier::new(Arc::new(MacScheme::new(n, t as u64)));
        let out = run_trial(&trial, &ver, &mut rng).unwrap_or_else(|e| panic!("trial {t}: {e}"));
        assert_eq!(out.plain.len(), 3 * n);
        if out.plain != out.compact {
            mismatches += 1;
        }
        distinct_lows += out.plain.iter().filter(|c| matches!(c, Certified::Qc3(a, b) if a != b)).count();
    }
    assert_eq!(mismatches, 0);
    assert!(distinct_lows > 0, "trials should exercise low != high");
}

#[test]
fn unanimous_and_truncated_votes_certify_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ver = Verifier::new(Arc::new(MacScheme::new(4, 1)));
    let same = Trial { n: 4, f: 1, l: 3, inputs: vec![pv("abc"); 4] };
    let out = run_trial(&same, &ver, &mut rng).unwrap();
    assert_eq!(out.plain, out.compact);
    assert!(out.compact.iter().all(|c| match c {
        Certified::Qc1(x) | Certified::Qc2(x) => *x == pv("abc"),
        Certified::Qc3(a, b) => *a == pv("abc") && *b == pv("abc"),
    }));
    let cut = Trial { n: 4, f: 1, l: 3, inputs: vec![pv("ab"), pv("ab"), pv("abc"), pv("a")] };
    for _ in 0..20 {
        let out = run_trial(&cut, &ver, &mut rng).unwrap();
        assert_eq!(out.plain, out.compact);
    }
}

#[test]
fn qc1_verification_examples() {
    let (cfg, ver) = setup(4, 1, 3);
    let v = votes1(&cfg, &ver, &["ab", "ab", "ac", "b"]);
    let qc = build_qc1(&cfg, &v[..3]).unwrap();
    assert_eq!(qc.x, pv("ab"));
    assert_eq!(verify_qc1(&qc, &cfg, &ver), Ok(()));

    let mut shorter = qc.clone();
    shorter.x = pv("a");
    assert!(verify_qc1(&shorter, &cfg, &ver).is_err());

    let mut oob = qc.clone();
    oob.entries[2].1 = Trunc::Diverge { at: 4, next: Value::from("c") };
    assert_eq!(verify_qc1(&oob, &cfg, &ver), Err(Reject::Truncation(2)));

    let mut dup = qc.clone();
    dup.entries[1].0 = 0;
    assert_eq!(verify_qc1(&dup, &cfg, &ver), Err(Reject::Signer(0)));

    let mut small = qc.clone();
    small.entries.pop();
    assert_eq!(verify_qc1(&small, &cfg, &ver), Err(Reject::QuorumSize { want: 3, got: 2 }));
}

#[test]
fn qc2_verification_examples() {
    let (cfg, ver) = setup(4, 1, 3);
    let v1 = votes1(&cfg, &ver, &["abc", "abc", "abc", "abc"]);
    let q = Arc::new(build_qc1(&cfg, &v1[..3]).unwrap());
    let v2 = votes2(&cfg, &ver, &[q.clone(), q.clone(), q.clone()]);
    let full = build_qc2(&cfg, &v2);
    assert!(matches!(full.proof, Qc2Proof::Full(_)));
    assert_eq!(full.xp, pv("abc"));
    assert_eq!(verify_qc2(&full, &cfg, &ver), Ok(()));

    // Two QC1s certifying diverging values.
    let v1 = votes1(&cfg, &ver, &["ab", "ab", "ac", "ac"]);
    let qa = Arc::new(build_qc1(&cfg, &[v1[0].clone(), v1[1].clone(), v1[2].clone()]).unwrap());
    let qb = Arc::new(build_qc1(&cfg, &[v1[2].clone(), v1[3].clone(), v1[0].clone()]).unwrap());
    assert_eq!((qa.x.clone(), qb.x.clone()), (pv("ab"), pv("ac")));
    let v2 = votes2(&cfg, &ver, &[qa.clone(), qb, qa]);
    let split = build_qc2(&cfg, &v2);
    assert!(matches!(split.proof, Qc2Proof::Split(_)));
    assert_eq!(split.xp, pv("a"));
    assert_eq!(verify_qc2(&split, &cfg, &ver), Ok(()));

    let mut same_next = split.clone();
    if let Qc2Proof::Split(w) = &mut same_next.proof {
        w[1] = w[0].clone();
        w[1].party = 2;
    }
    assert_eq!(verify_qc2(&same_next, &cfg, &ver), Err(Reject::Witness));

    // A full-length proof for a short common prefix fails the multi-signature.
    let mut wrong_branch = split.clone();
    wrong_branch.proof = Qc2Proof::Full(v2[0].qc1.clone());
    assert!(verify_qc2(&wrong_branch, &cfg, &ver).is_err());

    let mut longer = split.clone();
    longer.xp = pv("ab");
    assert!(verify_qc2(&longer, &cfg, &ver).is_err());
}

fn split_qc3(cfg: &PcConfig, ver: &Verifier) -> prefix_consensus::compact::CompactQc3 {
    let v1 = votes1(cfg, ver, &["ab", "ab", "ac", "ac"]);
    let qa = Arc::new(build_qc1(cfg, &[v1[0].clone(), v1[1].clone(), v1[2].clone()]).unwrap());
    let qb = Arc::new(build_qc1(cfg, &[v1[2].clone(), v1[3].clone(), v1[0].clone()]).unwrap());
    let v2 = votes2(cfg, ver, &[qa.clone(), qa.clone(), qa, qb]);
    let q2 = [build_qc2(cfg, &v2[..3]), build_qc2(cfg, &v2[1..]), build_qc2(cfg, &v2[..3])];
    let v3: Vec<Arc<CVote3>> = q2
        .into_iter()
        .enumerate()
        .map(|(i, q)| {
            let sig = ver.keyring(i).sign(&cfg.tag(MsgKind::Vote3), &sign_bytes(&q.xp.0));
            Arc::new(CVote3 { xp: q.xp.clone(), sig, qc2: Arc::new(q), memo: Memo::default() })
        })
        .collect();
    build_qc3(&v3).unwrap()
}

#[test]
fn qc3_verification_examples() {
    let (cfg, ver) = setup(4, 1, 3);
    let qc = split_qc3(&cfg, &ver);
    assert_eq!((qc.low.clone(), qc.high.clone()), (pv("a"), pv("ab")));
    assert_eq!(verify_qc3(&qc, &cfg, &ver), Ok((pv("a"), pv("ab"))));

    let mut not_min = qc.clone();
    not_min.low = pv("ab");
    not_min.qc2_low = not_min.qc2_high.clone();
    assert_eq!(verify_qc3(&not_min, &cfg, &ver), Err(Reject::Span));

    let mut swapped = qc.clone();
    std::mem::swap(&mut swapped.low, &mut swapped.high);
    assert!(verify_qc3(&swapped, &cfg, &ver).is_err());
}

#[test]
fn vote1_size_matches_accounting() {
    let l = 8;
    let (cfg, ver) = setup(4, 1, l);
    let v = make_vote1(&cfg, &ver.keyring(0), pv("abcdefgh"));
    let (c, kappa) = (1, ver.sig_len());
    // Per element: tag and length bytes; per signature: a length byte; one
    // signature on the empty prefix; signer and two count varints.
    let header = 2 * l + (l + 1) + kappa + 3;
    assert_eq!(v.encoded_len(), c * l + kappa * l + header);

    let ed = Verifier::new(Arc::new(Ed25519Scheme::new(4, 1)));
    let v = make_vote1(&cfg, &ed.keyring(0), pv("abcdefgh"));
    assert_eq!(v.encoded_len(), c * l + 64 * l + 2 * l + (l + 1) + 64 + 3);
}

#[test]
fn compact_messages_round_trip_and_detect_tampering() {
    let (cfg, ver) = setup(4, 1, 3);
    let qc3 = split_qc3(&cfg, &ver);
    let q2: &CompactQc2 = &qc3.qc2_low;
    let b = q2.to_bytes();
    let back = CompactQc2::from_bytes(&b).unwrap();
    assert_eq!(&back, q2);
    assert_eq!(verify_qc2(&back, &cfg, &ver), Ok(()));

    let mut bad = back.clone();
    bad.blob[0] ^= 0x01;
    let flipped = CompactQc2::from_bytes(&bad.to_bytes()).unwrap();
    assert!(verify_qc2(&flipped, &cfg, &ver).is_err());

    let v1 = votes1(&cfg, &ver, &["abc"]);
    let msg = PcMsg::CVote1(v1[0].clone());
    assert_eq!(PcMsg::from_bytes(&msg.to_bytes()).unwrap(), msg);
    let qc1 = Arc::new(build_qc1(&cfg, &votes1(&cfg, &ver, &["abc", "abc", "ab"])).unwrap());
    let v2 = PcMsg::CVote2(Arc::new(make_vote2(&cfg, &ver.keyring(0), qc1)));
    assert_eq!(PcMsg::from_bytes(&v2.to_bytes()).unwrap(), v2);
    let b3 = qc3.to_bytes();
    assert_eq!(prefix_consensus::compact::CompactQc3::from_bytes(&b3).unwrap(), qc3);

    let mut cut = b3;
    cut.truncate(cut.len() - 3);
    let e = prefix_consensus::compact::CompactQc3::from_bytes(&cut).unwrap_err();
    assert_eq!(e.path, "blob");
}
