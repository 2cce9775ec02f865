//! Signing, aggregate signatures with compressed message descriptors, and
//! hashing with a distinguished digest for the empty proposal.
//!
//! Two interchangeable backends implement [`Scheme`]: a keyed-MAC test scheme
//! (HMAC-SHA256 with a verifier-side key registry) and Ed25519. A party only
//! ever holds a [`Keyring`] bound to its own identity, so Byzantine code in
//! the simulator cannot produce signatures for other parties.

use std::fmt;
use std::sync::Arc;

use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};
use hmac::{Hmac, Mac};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Index of a party in `[0, n)`.
pub type PartyId = usize;

/// Hash output width in bytes.
pub const DIGEST_LEN: usize = 32;

/// Errors raised by signing and aggregation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("no key for party {0}")]
    UnknownParty(PartyId),
    #[error("signature by party {signer} does not verify")]
    InvalidSignature { signer: PartyId },
    #[error("party {0} appears twice in an aggregate")]
    DuplicateSigner(PartyId),
    #[error("aggregate needs at least one entry")]
    EmptyAggregate,
}

/// Enumerated message kinds that can carry a signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum MsgKind {
    Vote1 = 1,
    Vote2 = 2,
    Vote3 = 3,
    Vote4 = 4,
    NewView = 5,
    EmptyView = 6,
    NewCommit = 7,
    Proposal = 8,
}

/// Domain separation prefix for every signed byte string: message kind plus
/// instance identifier (protocol family, slot, view).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DomainTag {
    pub kind: MsgKind,
    pub family: u8,
    pub slot: u64,
    pub view: u64,
}

impl DomainTag {
    pub fn new(kind: MsgKind, family: u8, slot: u64, view: u64) -> Self {
        DomainTag { kind, family, slot, view }
    }

    /// Same instance, different message kind.
    pub fn with_kind(self, kind: MsgKind) -> Self {
        DomainTag { kind, ..self }
    }

    /// Fixed-width encoding prepended to the signed message.
    pub fn to_bytes(&self) -> [u8; 22] {
        let mut out = [0u8; 22];
        out[..4].copy_from_slice(b"PCv1");
        out[4] = self.kind as u8;
        out[5] = self.family;
        out[6..14].copy_from_slice(&self.slot.to_be_bytes());
        out[14..22].copy_from_slice(&self.view.to_be_bytes());
        out
    }

    fn tagged(&self, msg: &[u8]) -> Vec<u8> {
        let mut v = Vec::with_capacity(22 + msg.len());
        v.extend_from_slice(&self.to_bytes());
        v.extend_from_slice(msg);
        v
    }
}

/// A signature by one party.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    pub signer: PartyId,
    pub bytes: Arc<[u8]>,
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sig[{}:{}]", self.signer, hex::encode(&self.bytes[..4.min(self.bytes.len())]))
    }
}

/// A signature backend holding the key material of all parties.
pub trait Scheme: Send + Sync {
    /// Backend name as used in scenario files.
    fn name(&self) -> &'static str;
    /// Signature size κ_s in bytes.
    fn sig_len(&self) -> usize;
    /// Number of parties with keys.
    fn parties(&self) -> usize;
    fn sign_raw(&self, party: PartyId, msg: &[u8]) -> Result<Vec<u8>, CryptoError>;
    fn verify_raw(&self, party: PartyId, msg: &[u8], sig: &[u8]) -> bool;
}

/// Hash size κ_h in bytes.
pub fn hash_len() -> usize {
    DIGEST_LEN
}

type HmacSha256 = Hmac<Sha256>;

/// Deterministic keyed-MAC test scheme. Keys are derived from a seed and the
/// verifier holds every key.
pub struct MacScheme {
    keys: Vec<[u8; 32]>,
}

impl MacScheme {
    pub fn new(n: usize, seed: u64) -> Self {
        let keys = (0..n)
            .map(|i| {
                let mut h = Sha256::new();
                h.update(b"mac-key");
                h.update(seed.to_be_bytes());
                h.update((i as u64).to_be_bytes());
                h.finalize().into()
            })
            .collect();
        MacScheme { keys }
    }

    fn mac(&self, party: PartyId, msg: &[u8]) -> Option<HmacSha256> {
        let key = self.keys.get(party)?;
        let mut m = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
        m.update(msg);
        Some(m)
    }
}

impl Scheme for MacScheme {
    fn name(&self) -> &'static str {
        "mac"
    }

    fn sig_len(&self) -> usize {
        32
    }

    fn parties(&self) -> usize {
        self.keys.len()
    }

    fn sign_raw(&self, party: PartyId, msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let m = self.mac(party, msg).ok_or(CryptoError::UnknownParty(party))?;
        Ok(m.finalize().into_bytes().to_vec())
    }

    fn verify_raw(&self, party: PartyId, msg: &[u8], sig: &[u8]) -> bool {
        match self.mac(party, msg) {
            Some(m) => m.verify_slice(sig).is_ok(),
            None => false,
        }
    }
}

/// Ed25519 backend with seed-derived keys.
pub struct Ed25519Scheme {
    signing: Vec<SigningKey>,
    verifying: Vec<VerifyingKey>,
}

impl Ed25519Scheme {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x0ed2_5519);
        let signing: Vec<SigningKey> = (0..n).map(|_| SigningKey::from_bytes(&rng.gen())).collect();
        let verifying = signing.iter().map(|k| k.verifying_key()).collect();
        Ed25519Scheme { signing, verifying }
    }
}

impl Scheme for Ed25519Scheme {
    fn name(&self) -> &'static str {
        "ed25519"
    }

    fn sig_len(&self) -> usize {
        64
    }

    fn parties(&self) -> usize {
        self.signing.len()
    }

    fn sign_raw(&self, party: PartyId, msg: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let key = self.signing.get(party).ok_or(CryptoError::UnknownParty(party))?;
        Ok(key.sign(msg).to_bytes().to_vec())
    }

    fn verify_raw(&self, party: PartyId, msg: &[u8], sig: &[u8]) -> bool {
        let Some(key) = self.verifying.get(party) else { return false };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(sig) else { return false };
        key.verify(msg, &sig).is_ok()
    }
}

/// Builds a backend by name.
pub fn scheme_by_name(name: &str, n: usize, seed: u64) -> Option<Arc<dyn Scheme>> {
    match name {
        "mac" => Some(Arc::new(MacScheme::new(n, seed))),
        "ed25519" => Some(Arc::new(Ed25519Scheme::new(n, seed))),
        _ => None,
    }
}

/// Public verification handle shared by all parties.
#[derive(Clone)]
pub struct Verifier {
    scheme: Arc<dyn Scheme>,
}

impl fmt::Debug for Verifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Verifier({})", self.scheme.name())
    }
}

impl Verifier {
    pub fn new(scheme: Arc<dyn Scheme>) -> Self {
        Verifier { scheme }
    }

    pub fn sig_len(&self) -> usize {
        self.scheme.sig_len()
    }

    pub fn parties(&self) -> usize {
        self.scheme.parties()
    }

    pub fn scheme_name(&self) -> &'static str {
        self.scheme.name()
    }

    /// Checks `sig` on `msg` under `tag` for its claimed signer.
    pub fn verify(&self, tag: &DomainTag, msg: &[u8], sig: &Signature) -> bool {
        self.scheme.verify_raw(sig.signer, &tag.tagged(msg), &sig.bytes)
    }

    /// Signing handle for one party.
    pub fn keyring(&self, id: PartyId) -> Keyring {
        Keyring { id, scheme: self.scheme.clone() }
    }
}

/// A party's private signing handle; it can only sign as `id`.
#[derive(Clone)]
pub struct Keyring {
    id: PartyId,
    scheme: Arc<dyn Scheme>,
}

impl fmt::Debug for Keyring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Keyring({})", self.id)
    }
}

impl Keyring {
    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn verifier(&self) -> Verifier {
        Verifier { scheme: self.scheme.clone() }
    }

    pub fn sign(&self, tag: &DomainTag, msg: &[u8]) -> Signature {
        let bytes = self.scheme.sign_raw(self.id, &tag.tagged(msg)).expect("keyring id has a key");
        Signature { signer: self.id, bytes: bytes.into() }
    }
}

/// Aggregate of signatures under one domain tag. Messages are stored as a
/// shared byte prefix plus one suffix per signer, so identical messages cost
/// a single stored copy.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AggregateSignature {
    pub common: Vec<u8>,
    /// `(signer, suffix)` sorted by signer.
    pub entries: Vec<(PartyId, Vec<u8>)>,
    /// Concatenated signatures in entry order.
    pub blob: Vec<u8>,
}

impl fmt::Debug for AggregateSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let signers: Vec<PartyId> = self.entries.iter().map(|e| e.0).collect();
        write!(f, "agg{signers:?}")
    }
}

impl AggregateSignature {
    /// Aggregates individually valid signatures; each entry is
    /// `(signer, message, signature)`.
    pub fn aggregate(
        verifier: &Verifier,
        tag: &DomainTag,
        entries: &[(PartyId, Vec<u8>, Signature)],
    ) -> Result<Self, CryptoError> {
        if entries.is_empty() {
            return Err(CryptoError::EmptyAggregate);
        }
        let mut sorted: Vec<&(PartyId, Vec<u8>, Signature)> = entries.iter().collect();
        sorted.sort_by_key(|e| e.0);
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(CryptoError::DuplicateSigner(w[0].0));
            }
        }
        for (p, m, s) in &sorted {
            if s.signer != *p || !verifier.verify(tag, m, s) {
                return Err(CryptoError::InvalidSignature { signer: *p });
            }
        }
        let first = &sorted[0].1;
        let mut common_len = first.len();
        for (_, m, _) in &sorted[1..] {
            common_len = first[..common_len].iter().zip(m.iter()).take_while(|(a, b)| a == b).count();
        }
        let common = first[..common_len].to_vec();
        let mut blob = Vec::with_capacity(sorted.len() * verifier.sig_len());
        let entries = sorted
            .iter()
            .map(|(p, m, s)| {
                blob.extend_from_slice(&s.bytes);
                (*p, m[common_len..].to_vec())
            })
            .collect();
        Ok(AggregateSignature { common, entries, blob })
    }

    pub fn signers(&self) -> impl Iterator<Item = PartyId> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reconstructed `(signer, message)` pairs.
    pub fn messages(&self) -> Vec<(PartyId, Vec<u8>)> {
        self.entries
            .iter()
            .map(|(p, suf)| {
                let mut m = self.common.clone();
                m.extend_from_slice(suf);
                (*p, m)
            })
            .collect()
    }

    /// Number of distinct reconstructed messages.
    pub fn distinct_messages(&self) -> usize {
        let mut s: Vec<&Vec<u8>> = self.entries.iter().map(|e| &e.1).collect();
        s.sort();
        s.dedup();
        s.len()
    }

    /// Verifies every signer on its reconstructed message; rejects unsorted
    /// or repeated signers and a blob of the wrong size.
    pub fn verify(&self, verifier: &Verifier, tag: &DomainTag) -> bool {
        let k = verifier.sig_len();
        if self.entries.is_empty() || self.blob.len() != k * self.entries.len() {
            return false;
        }
        if self.entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return false;
        }
        let mut msg = self.common.clone();
        for (i, (p, suf)) in self.entries.iter().enumerate() {
            msg.truncate(self.common.len());
            msg.extend_from_slice(suf);
            let sig = Signature { signer: *p, bytes: self.blob[i * k..(i + 1) * k].into() };
            if !verifier.verify(tag, &msg, &sig) {
                return false;
            }
        }
        true
    }
}

/// Fixed-width hash output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == hbot() {
            write!(f, "H⊥")
        } else {
            write!(f, "#{}", hex::encode(&self.0[..4]))
        }
    }
}

/// Hash of an optional byte string; `None` stands for ⊥.
pub fn hash(obj: Option<&[u8]>) -> Digest {
    let mut h = Sha256::new();
    match obj {
        None => h.update([0u8]),
        Some(b) => {
            h.update([1u8]);
            h.update(b);
        }
    }
    Digest(h.finalize().into())
}

/// The distinguished digest H(⊥).
pub fn hbot() -> Digest {
    hash(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(kind: MsgKind) -> DomainTag {
        DomainTag::new(kind, 1, 0, 7)
    }

    #[test]
    fn distinct_tags_encode_distinctly() {
        let a = DomainTag::new(MsgKind::Vote1, 1, 2, 3);
        assert_ne!(a.to_bytes(), a.with_kind(MsgKind::Vote2).to_bytes());
        assert_ne!(a.to_bytes(), DomainTag::new(MsgKind::Vote1, 1, 3, 2).to_bytes());
    }

    #[test]
    fn hbot_differs_from_empty_bytes() {
        assert_ne!(hbot(), hash(Some(&[])));
        assert_eq!(hash(Some(b"x")), hash(Some(b"x")));
    }

    #[test]
    fn aggregate_rejects_bad_input() {
        let v = Verifier::new(Arc::new(MacScheme::new(3, 0)));
        let t = tag(MsgKind::Vote1);
        let s0 = v.keyring(0).sign(&t, b"m");
        assert_eq!(
            AggregateSignature::aggregate(&v, &t, &[(0, b"n".to_vec(), s0.clone())]),
            Err(CryptoError::InvalidSignature { signer: 0 })
        );
        assert_eq!(
            AggregateSignature::aggregate(&v, &t, &[(0, b"m".to_vec(), s0.clone()), (0, b"m".to_vec(), s0)]),
            Err(CryptoError::DuplicateSigner(0))
        );
        assert_eq!(AggregateSignature::aggregate(&v, &t, &[]), Err(CryptoError::EmptyAggregate));
    }
}
