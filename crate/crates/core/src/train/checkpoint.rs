//! Binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "STYL" | version: u8 = 1 | count: u32
//! count x ( name_len: u16 | name: utf-8 | rank: u8 | dims: rank x u32 | data: f32 x prod(dims) )
//! checksum: u64   FNV-1a over every preceding byte
//! ```

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::collections::BTreeMap;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"STYL";
pub const FORMAT_VERSION: u8 = 1;

/// 64-bit FNV-1a.
#[derive(Clone, Copy, Debug)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

impl Fnv1a {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;

    pub fn new() -> Self {
        Self(Self::OFFSET)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(Self::PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }

    pub fn hash(bytes: &[u8]) -> u64 {
        let mut h = Self::new();
        h.update(bytes);
        h.finish()
    }
}

/// Serialises named tensors in the order given.
pub fn encode_tensors<'a>(tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Result<Vec<u8>> {
    let tensors: Vec<_> = tensors.into_iter().collect();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(FORMAT_VERSION);
    let count = u32::try_from(tensors.len()).map_err(|_| Error::Format("too many tensors".into()))?;
    buf.extend_from_slice(&count.to_le_bytes());
    for (name, t) in tensors {
        let len = u16::try_from(name.len()).map_err(|_| Error::Format(format!("tensor name too long: {name}")))?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        let rank = u8::try_from(t.rank()).map_err(|_| Error::Format(format!("rank too large for {name}")))?;
        buf.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension too large for {name}")))?;
            buf.extend_from_slice(&d.to_le_bytes());
        }
        buf.reserve(t.numel() * 4);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = Fnv1a::hash(&buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    Ok(buf)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &dyn Fn() -> String) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!("truncated {}", what()))),
        }
    }

    fn u8(&mut self, what: &dyn Fn() -> String) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &dyn Fn() -> String) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &dyn Fn() -> String) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

/// Parses a container, returning tensors in file order. The header is
/// checked before anything is sized from the file's contents.
pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    if bytes.len() < 5 {
        return Err(Error::Format("truncated header".into()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {} (expected {FORMAT_VERSION})",
            bytes[4]
        )));
    }
    if bytes.len() < 4 + 1 + 4 + 8 {
        return Err(Error::Format("truncated header".into()));
    }
    let body = &bytes[..bytes.len() - 8];
    let mut c = Cursor { buf: body, pos: 5 };
    let count = c.u32(&|| "tensor count".into())?;
    let mut out = Vec::new();
    for i in 0..count {
        let idx = || format!("tensor #{i}");
        let len = c.u16(&|| format!("name length of {}", idx()))? as usize;
        let raw = c.take(len, &|| format!("name of {}", idx()))?;
        let name =
            String::from_utf8(raw.to_vec()).map_err(|_| Error::Format(format!("{} has a non-utf-8 name", idx())))?;
        let what = || format!("tensor {name}");
        let rank = c.u8(&|| format!("rank of {}", what()))? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u32(&|| format!("dims of {}", what()))? as usize);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |a, d| a.checked_mul(*d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format(format!("{} has an overflowing shape", what())))?;
        let payload = c.take(numel, &|| format!("payload of {}", what()))?;
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        let t = Tensor::new(&shape, data).map_err(|e| Error::Format(format!("{}: {e}", what())))?;
        out.push((name, t));
    }
    if c.pos != body.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes before checksum",
            body.len() - c.pos
        )));
    }
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"));
    if stored != Fnv1a::hash(body) {
        return Err(Error::Format("checksum mismatch".into()));
    }
    Ok(out)
}

pub fn write_tensors<'a>(path: &Path, tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Result<()> {
    std::fs::write(path, encode_tensors(tensors)?)?;
    Ok(())
}

/// Reads a container into a name-keyed map; duplicate names are rejected.
pub fn read_tensors(path: &Path) -> Result<BTreeMap<String, Tensor>> {
    let bytes = std::fs::read(path)?;
    let mut map = BTreeMap::new();
    for (name, t) in decode_tensors(&bytes)? {
        if map.insert(name.clone(), t).is_some() {
            return Err(Error::Format(format!("duplicate tensor {name}")));
        }
    }
    Ok(map)
}
