//! Brute-force oracles for the prefix algebra.

use prefix_consensus::prefix::PrefixVector;

/// Longest x that prefixes every member, found by testing every prefix of
/// the first member from the longest down.
pub fn oracle_mcp(set: &[PrefixVector]) -> PrefixVector {
    let first = &set[0];
    for len in (0..=first.len()).rev() {
        let cand = PrefixVector(first.0[..len].to_vec());
        if set.iter().all(|v| v.0.len() >= len && v.0[..len] == cand.0[..]) {
            return cand;
        }
    }
    unreachable!()
}

/// Shortest x extending every member, searched over every prefix of every
/// member.
pub fn oracle_mce(set: &[PrefixVector]) -> Option<PrefixVector> {
    let mut cands: Vec<PrefixVector> = Vec::new();
    for v in set {
        for len in 0..=v.len() {
            cands.push(PrefixVector(v.0[..len].to_vec()));
        }
    }
    cands.sort_by_key(|c| c.len());
    cands.into_iter().find(|c| set.iter().all(|v| v.len() <= c.len() && c.0[..v.len()] == v.0[..]))
}

/// Maximum over every size-k subset of its mcp, ties broken by the
/// lexicographically smallest vector.
pub fn oracle_lsp(set: &[PrefixVector], k: usize) -> PrefixVector {
    let n = set.len();
    let mut best: Option<PrefixVector> = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let sub: Vec<PrefixVector> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| set[i].clone()).collect();
        let m = oracle_mcp(&sub);
        best = match best {
            None => Some(m),
            Some(b) if m.len() > b.len() || (m.len() == b.len() && m < b) => Some(m),
            Some(b) => Some(b),
        };
    }
    best.unwrap()
}
