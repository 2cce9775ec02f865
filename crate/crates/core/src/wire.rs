//! Self-describing binary framing: LEB128 varints, length-prefixed fields and
//! one tag byte per message kind. Decoding reports the path of the field that
//! failed. The byte layout is documented in `docs/wire-format.md`.

use std::sync::Arc;

use thiserror::Error;

use crate::crypto::{AggregateSignature, Digest, Signature, DIGEST_LEN};
use crate::prefix::{PrefixVector, Value};

/// Byte sink used by encoders; a counting sink measures sizes without
/// allocating.
pub trait Sink {
    fn put(&mut self, bytes: &[u8]);

    fn put_u8(&mut self, b: u8) {
        self.put(&[b]);
    }

    fn put_varint(&mut self, mut v: u64) {
        loop {
            let byte = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                self.put_u8(byte);
                return;
            }
            self.put_u8(byte | 0x80);
        }
    }

    fn put_len_bytes(&mut self, b: &[u8]) {
        self.put_varint(b.len() as u64);
        self.put(b);
    }
}

impl Sink for Vec<u8> {
    fn put(&mut self, bytes: &[u8]) {
        self.extend_from_slice(bytes);
    }
}

/// Counts bytes instead of storing them.
#[derive(Debug, Default, Clone, Copy)]
pub struct Counter(pub usize);

impl Sink for Counter {
    fn put(&mut self, bytes: &[u8]) {
        self.0 += bytes.len();
    }

    fn put_u8(&mut self, _b: u8) {
        self.0 += 1;
    }
}

/// Number of bytes in the varint encoding of `v`.
pub fn varint_len(v: u64) -> usize {
    let bits = 64 - v.leading_zeros() as usize;
    bits.max(1).div_ceil(7)
}

/// What went wrong while decoding.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeErrorKind {
    #[error("unexpected end of input")]
    Truncated,
    #[error("varint overflows 64 bits")]
    VarintOverflow,
    #[error("unknown tag byte {0:#04x}")]
    BadTag(u8),
    #[error("{0}")]
    Invalid(&'static str),
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

/// Decode failure with the dotted path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("decode error at `{path}`: {kind}")]
pub struct DecodeError {
    pub path: String,
    pub kind: DecodeErrorKind,
}

/// Cursor over an input buffer that tracks the current field path.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: Vec<String>,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0, path: Vec::new() }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn err(&self, kind: DecodeErrorKind) -> DecodeError {
        let mut path = String::new();
        for seg in &self.path {
            if !path.is_empty() && !seg.starts_with('[') {
                path.push('.');
            }
            path.push_str(seg);
        }
        if path.is_empty() {
            path.push('$');
        }
        DecodeError { path, kind }
    }

    /// Decodes a named sub-field.
    pub fn field<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> Result<T, DecodeError>,
    ) -> Result<T, DecodeError> {
        self.path.push(name.to_string());
        let out = f(self)?;
        self.path.pop();
        Ok(out)
    }

    /// Decodes a varint-counted list, naming items by index.
    pub fn list<T>(
        &mut self,
        name: &str,
        mut f: impl FnMut(&mut Self) -> Result<T, DecodeError>,
    ) -> Result<Vec<T>, DecodeError> {
        self.path.push(name.to_string());
        let n = self.varint()? as usize;
        if n > self.remaining() {
            return Err(self.err(DecodeErrorKind::Truncated));
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            self.path.push(format!("[{i}]"));
            out.push(f(self)?);
            self.path.pop();
        }
        self.path.pop();
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        let b = *self.buf.get(self.pos).ok_or_else(|| self.err(DecodeErrorKind::Truncated))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn varint(&mut self) -> Result<u64, DecodeError> {
        let mut out = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.u8()?;
            let low = (b & 0x7f) as u64;
            if shift == 63 && low > 1 {
                return Err(self.err(DecodeErrorKind::VarintOverflow));
            }
            out |= low << shift;
            if b & 0x80 == 0 {
                return Ok(out);
            }
        }
        Err(self.err(DecodeErrorKind::VarintOverflow))
    }

    pub fn usize(&mut self) -> Result<usize, DecodeError> {
        Ok(self.varint()? as usize)
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if n > self.remaining() {
            return Err(self.err(DecodeErrorKind::Truncated));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn len_bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let n = self.usize()?;
        self.bytes(n)
    }

    pub fn finish(&self) -> Result<(), DecodeError> {
        match self.remaining() {
            0 => Ok(()),
            k => Err(self.err(DecodeErrorKind::Trailing(k))),
        }
    }
}

/// Types with a binary encoding.
pub trait Encode {
    fn encode<S: Sink>(&self, s: &mut S);

    fn encoded_len(&self) -> usize {
        let mut c = Counter(0);
        self.encode(&mut c);
        c.0
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.encode(&mut v);
        v
    }
}

/// Types that decode from their [`Encode`] form.
pub trait Decode: Sized {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError>;

    fn from_bytes(b: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(b);
        let v = Self::decode(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}

impl<T: Encode> Encode for Arc<T> {
    fn encode<S: Sink>(&self, s: &mut S) {
        (**self).encode(s)
    }
}

impl<T: Decode> Decode for Arc<T> {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        T::decode(r).map(Arc::new)
    }
}

/// Writes a varint-counted list.
pub fn put_list<S: Sink, T: Encode>(s: &mut S, items: &[T]) {
    s.put_varint(items.len() as u64);
    for it in items {
        it.encode(s);
    }
}

impl Encode for Value {
    fn encode<S: Sink>(&self, s: &mut S) {
        match self {
            Value::Bot => s.put_u8(0),
            Value::Data(b) => {
                s.put_u8(1);
                s.put_len_bytes(b);
            }
        }
    }
}

impl Decode for Value {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(Value::Bot),
            1 => Ok(Value::new(r.len_bytes()?)),
            t => Err(r.err(DecodeErrorKind::BadTag(t))),
        }
    }
}

impl Encode for PrefixVector {
    fn encode<S: Sink>(&self, s: &mut S) {
        put_list(s, &self.0);
    }
}

impl Decode for PrefixVector {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.list("elems", Value::decode).map(PrefixVector)
    }
}

/// Bytes a vector signature covers: element encodings concatenated without a
/// count, so the signed bytes of a prefix are a byte prefix of the signed
/// bytes of the whole vector.
pub fn sign_bytes(elems: &[Value]) -> Vec<u8> {
    let mut out = Vec::new();
    for e in elems {
        e.encode(&mut out);
    }
    out
}

impl Encode for Signature {
    fn encode<S: Sink>(&self, s: &mut S) {
        s.put_varint(self.signer as u64);
        s.put_len_bytes(&self.bytes);
    }
}

impl Decode for Signature {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let signer = r.field("signer", |r| r.usize())?;
        let bytes = r.field("bytes", |r| r.len_bytes())?;
        Ok(Signature { signer, bytes: bytes.into() })
    }
}

impl Encode for Digest {
    fn encode<S: Sink>(&self, s: &mut S) {
        s.put(&self.0);
    }
}

impl Decode for Digest {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let b = r.bytes(DIGEST_LEN)?;
        let mut d = [0u8; DIGEST_LEN];
        d.copy_from_slice(b);
        Ok(Digest(d))
    }
}

impl Encode for AggregateSignature {
    fn encode<S: Sink>(&self, s: &mut S) {
        s.put_len_bytes(&self.common);
        s.put_varint(self.entries.len() as u64);
        for (p, suf) in &self.entries {
            s.put_varint(*p as u64);
            s.put_len_bytes(suf);
        }
        s.put_len_bytes(&self.blob);
    }
}

impl Decode for AggregateSignature {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let common = r.field("common", |r| r.len_bytes())?.to_vec();
        let entries = r.list("entries", |r| {
            let p = r.field("signer", |r| r.usize())?;
            let suf = r.field("suffix", |r| r.len_bytes())?.to_vec();
            Ok((p, suf))
        })?;
        let blob = r.field("blob", |r| r.len_bytes())?.to_vec();
        Ok(AggregateSignature { common, entries, blob })
    }
}

/// Decodes a count-free concatenation of element encodings.
pub fn decode_concat(bytes: &[u8]) -> Result<Vec<Value>, DecodeError> {
    let mut r = Reader::new(bytes);
    let mut out = Vec::new();
    while r.remaining() > 0 {
        out.push(Value::decode(&mut r)?);
    }
    Ok(out)
}
