//! Prefix-vector algebra: prefix relations, maximum common prefix, minimum
//! common extension, and the trie that finds the longest prefix supported by
//! at least `k` vectors of a multiset.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Precondition violations of the vector-set operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrefixError {
    #[error("operation requires a non-empty vector set")]
    EmptySet,
    #[error("support threshold {k} exceeds set size {len}")]
    SupportTooLarge { k: usize, len: usize },
    #[error("support threshold must be positive")]
    ZeroSupport,
}

/// An opaque vector element. `Bot` is a reserved sentinel that never equals
/// an application value.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bot,
    Data(Arc<[u8]>),
}

impl Value {
    pub fn new(bytes: impl AsRef<[u8]>) -> Self {
        Value::Data(Arc::from(bytes.as_ref()))
    }

    pub fn is_bot(&self) -> bool {
        matches!(self, Value::Bot)
    }

    pub fn bytes(&self) -> Option<&[u8]> {
        match self {
            Value::Bot => None,
            Value::Data(b) => Some(b),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bot => write!(f, "⊥"),
            Value::Data(b) if b.iter().all(|c| c.is_ascii_graphic()) && b.len() <= 16 => {
                write!(f, "{}", String::from_utf8_lossy(b))
            }
            Value::Data(b) if b.len() > 8 => write!(f, "{}..", hex::encode(&b[..4])),
            Value::Data(b) => write!(f, "{}", hex::encode(b)),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::new(s.as_bytes())
    }
}

/// An ordered sequence of values.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PrefixVector(pub Vec<Value>);

impl fmt::Debug for PrefixVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl PrefixVector {
    pub fn empty() -> Self {
        PrefixVector(Vec::new())
    }

    /// Builds a vector of single-symbol string values, e.g. `of(&["a", "b"])`.
    pub fn of(items: &[&str]) -> Self {
        PrefixVector(items.iter().map(|s| Value::from(*s)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Value] {
        &self.0
    }

    /// The first `k` elements (or the whole vector if shorter).
    pub fn prefix(&self, k: usize) -> PrefixVector {
        PrefixVector(self.0[..k.min(self.0.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &PrefixVector) -> bool {
        is_prefix(self, other)
    }

    /// Pads with `Bot` up to length `l`.
    pub fn padded(&self, l: usize) -> Vec<Value> {
        let mut out = self.0.clone();
        while out.len() < l {
            out.push(Value::Bot);
        }
        out
    }

    /// Logical vector of a padded sequence: trailing `Bot` entries removed.
    pub fn from_padded(items: &[Value]) -> PrefixVector {
        let mut end = items.len();
        while end > 0 && items[end - 1].is_bot() {
            end -= 1;
        }
        PrefixVector(items[..end].to_vec())
    }
}

impl From<Vec<Value>> for PrefixVector {
    fn from(v: Vec<Value>) -> Self {
        PrefixVector(v)
    }
}

/// True iff `y` is a prefix of `x`.
pub fn is_prefix(y: &PrefixVector, x: &PrefixVector) -> bool {
    y.len() <= x.len() && y.0.iter().zip(x.0.iter()).all(|(a, b)| a == b)
}

/// True iff one of the two vectors is a prefix of the other.
pub fn consistent(x: &PrefixVector, y: &PrefixVector) -> bool {
    is_prefix(x, y) || is_prefix(y, x)
}

/// Length of the longest common prefix of two element sequences.
pub fn common_len(a: &[Value], b: &[Value]) -> usize {
    a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count()
}

/// Maximum common prefix of a non-empty set.
pub fn mcp<'a, I>(set: I) -> Result<PrefixVector, PrefixError>
where
    I: IntoIterator<Item = &'a PrefixVector>,
{
    let mut it = set.into_iter();
    let first = it.next().ok_or(PrefixError::EmptySet)?;
    let mut len = first.len();
    for v in it {
        len = common_len(&first.0[..len], &v.0);
    }
    Ok(first.prefix(len))
}

/// Minimum common extension of a non-empty set; `None` when two members
/// conflict.
pub fn mce<'a, I>(set: I) -> Result<Option<PrefixVector>, PrefixError>
where
    I: IntoIterator<Item = &'a PrefixVector>,
{
    let mut it = set.into_iter();
    let mut longest = it.next().ok_or(PrefixError::EmptySet)?;
    for v in it {
        if !consistent(longest, v) {
            return Ok(None);
        }
        if v.len() > longest.len() {
            longest = v;
        }
    }
    Ok(Some(longest.clone()))
}

/// True iff every pair in the set is consistent.
pub fn pairwise_consistent<'a, I>(set: I) -> bool
where
    I: IntoIterator<Item = &'a PrefixVector>,
{
    matches!(mce(set), Ok(Some(_)) | Err(_))
}

struct Node {
    children: HashMap<Value, usize>,
    count: usize,
}

/// A trie over a vector multiset where every node counts how many inserted
/// vectors pass through it.
pub struct SupportTrie {
    nodes: Vec<Node>,
}

impl Default for SupportTrie {
    fn default() -> Self {
        Self::new()
    }
}

impl SupportTrie {
    pub fn new() -> Self {
        SupportTrie { nodes: vec![Node { children: HashMap::new(), count: 0 }] }
    }

    pub fn insert(&mut self, v: &PrefixVector) {
        let mut cur = 0;
        self.nodes[0].count += 1;
        for val in &v.0 {
            let next = match self.nodes[cur].children.get(val) {
                Some(&i) => i,
                None => {
                    let i = self.nodes.len();
                    self.nodes.push(Node { children: HashMap::new(), count: 0 });
                    self.nodes[cur].children.insert(val.clone(), i);
                    i
                }
            };
            self.nodes[next].count += 1;
            cur = next;
        }
    }

    /// Support of a given prefix (number of inserted vectors extending it).
    pub fn support(&self, p: &PrefixVector) -> usize {
        let mut cur = 0;
        for val in &p.0 {
            match self.nodes[cur].children.get(val) {
                Some(&i) => cur = i,
                None => return 0,
            }
        }
        self.nodes[cur].count
    }

    /// Deepest prefix whose support is at least `k`. Among equally deep
    /// candidates the lexicographically smallest is returned; when `k` is a
    /// strict majority of the inserted vectors the candidate is unique.
    pub fn deepest_with_support(&self, k: usize) -> PrefixVector {
        let mut best: Vec<Value> = Vec::new();
        let mut path: Vec<Value> = Vec::new();
        let mut tie = false;
        self.walk(0, k, &mut path, &mut best, &mut tie);
        debug_assert!(!(tie && 2 * k > self.nodes[0].count), "majority-supported prefix not unique");
        PrefixVector(best)
    }

    fn walk(&self, node: usize, k: usize, path: &mut Vec<Value>, best: &mut Vec<Value>, tie: &mut bool) {
        if path.len() > best.len() {
            *best = path.clone();
            *tie = false;
        } else if path.len() == best.len() && *path != *best {
            *tie = true;
            if *path < *best {
                *best = path.clone();
            }
        }
        for (val, &child) in &self.nodes[node].children {
            if self.nodes[child].count >= k {
                path.push(val.clone());
                self.walk(child, k, path, best, tie);
                path.pop();
            }
        }
    }
}

/// The deepest prefix extended by at least `k` members of the multiset,
/// equal to the longest `mcp` over all size-`k` subsets.
pub fn longest_supported_prefix<'a, I>(set: I, k: usize) -> Result<PrefixVector, PrefixError>
where
    I: IntoIterator<Item = &'a PrefixVector>,
{
    let mut trie = SupportTrie::new();
    let mut len = 0;
    for v in set {
        trie.insert(v);
        len += 1;
    }
    if len == 0 {
        return Err(PrefixError::EmptySet);
    }
    if k > len {
        return Err(PrefixError::SupportTooLarge { k, len });
    }
    if k == 0 {
        return Err(PrefixError::ZeroSupport);
    }
    Ok(trie.deepest_with_support(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(items: &[&str]) -> PrefixVector {
        PrefixVector::of(items)
    }

    #[test]
    fn prefix_relations() {
        assert!(is_prefix(&v(&[]), &v(&["a", "b"])));
        assert!(is_prefix(&v(&["a", "b"]), &v(&["a", "b"])));
        assert!(!is_prefix(&v(&["a", "c"]), &v(&["a", "b", "d"])));
        assert!(consistent(&v(&["a"]), &v(&["a", "b"])));
        assert!(!consistent(&v(&["a", "b"]), &v(&["a", "c"])));
        assert!(consistent(&v(&[]), &v(&[])));
    }

    #[test]
    fn mcp_and_mce_examples() {
        assert_eq!(mcp(&[v(&["1", "2", "3"]), v(&["1", "2", "4"])]).unwrap(), v(&["1", "2"]));
        assert_eq!(mcp(&[v(&["x"])]).unwrap(), v(&["x"]));
        assert_eq!(mcp(&[v(&["1"]), v(&["2"]), v(&["1"])]).unwrap(), v(&[]));
        assert_eq!(mce(&[v(&["1"]), v(&["1", "2"]), v(&["1", "2", "3"])]).unwrap(), Some(v(&["1", "2", "3"])));
        assert_eq!(mce(&[v(&["1"]), v(&["2"])]).unwrap(), None);
        assert_eq!(mce(&[v(&["a", "b"])]).unwrap(), Some(v(&["a", "b"])));
        let empty: [PrefixVector; 0] = [];
        assert_eq!(mcp(&empty), Err(PrefixError::EmptySet));
        assert_eq!(mce(&empty), Err(PrefixError::EmptySet));
    }

    #[test]
    fn supported_prefix_examples() {
        let s = [v(&["a", "b"]), v(&["a", "b"]), v(&["a", "c"])];
        assert_eq!(longest_supported_prefix(&s, 2).unwrap(), v(&["a", "b"]));
        let s = [v(&["a"]), v(&["a"]), v(&["a"])];
        assert_eq!(longest_supported_prefix(&s, 3).unwrap(), v(&["a"]));
        let s = [v(&["a"]), v(&["b"]), v(&["c"])];
        assert_eq!(longest_supported_prefix(&s, 2).unwrap(), v(&[]));
        assert_eq!(
            longest_supported_prefix(&s, 4),
            Err(PrefixError::SupportTooLarge { k: 4, len: 3 })
        );
    }

    #[test]
    fn padding_round_trip() {
        let x = v(&["a", "b"]);
        let p = x.padded(4);
        assert_eq!(p.len(), 4);
        assert!(p[2].is_bot() && p[3].is_bot());
        assert_eq!(PrefixVector::from_padded(&p), x);
    }
}
