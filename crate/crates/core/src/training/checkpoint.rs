//! Named-tensor checkpoint files.
//!
//! Layout, all integers little-endian: magic `AEGG`, `u32` version, `u32`
//! tensor count, then per tensor a `u16` name length, the UTF-8 name, a `u8`
//! rank, `rank` × `u32` dims and the `f32` data.

use std::collections::HashSet;
use std::path::Path;

use crate::error::CheckpointError;

pub const MAGIC: &[u8; 4] = b"AEGG";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

/// Insertion-ordered collection of named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    tensors: Vec<NamedTensor>,
    names: HashSet<String>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Result<(), CheckpointError> {
        let name = name.into();
        if dims.iter().product::<usize>() != data.len() {
            return Err(CheckpointError::Mismatch {
                name,
                detail: format!("dims {dims:?} do not match {} values", data.len()),
            });
        }
        if name.len() > u16::MAX as usize || dims.len() > u8::MAX as usize {
            return Err(CheckpointError::Malformed(format!("tensor `{name}` name or rank too long")));
        }
        if !self.names.insert(name.clone()) {
            return Err(CheckpointError::DuplicateName(name));
        }
        self.tensors.push(NamedTensor { name, dims, data });
        Ok(())
    }

    pub fn tensors(&self) -> &[NamedTensor] {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn get(&self, name: &str) -> Result<&NamedTensor, CheckpointError> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| CheckpointError::Missing(name.to_string()))
    }

    /// Data of `name`, checked to hold exactly `len` values.
    pub fn data(&self, name: &str, len: usize) -> Result<&[f32], CheckpointError> {
        let t = self.get(name)?;
        if t.data.len() != len {
            return Err(CheckpointError::Mismatch {
                name: name.to_string(),
                detail: format!("expected {len} values, found {}", t.data.len()),
            });
        }
        Ok(&t.data)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.dims.len() as u8);
            for d in &t.dims {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: VERSION,
            });
        }
        let count = r.u32("tensor count")?;
        let mut ckpt = Checkpoint::new();
        for _ in 0..count {
            let len = u16::from_le_bytes(r.take(2, "name length")?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = r.take(1, "rank")?[0] as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32("dims")? as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |a, d| a.checked_mul(*d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| CheckpointError::Malformed(format!("tensor `{name}` is too large")))?;
            let raw = r.take(n, "tensor data")?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            ckpt.insert(name, dims, data)?;
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Malformed(format!(
                "{} trailing bytes after the last tensor",
                bytes.len() - r.pos
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        // Write then rename so a crash never leaves a half-written checkpoint.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.encode())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::decode(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or(CheckpointError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// A `u64` as four exactly representable 16-bit words.
pub fn u64_to_words(v: u64) -> Vec<f32> {
    (0..4).map(|i| ((v >> (16 * i)) & 0xffff) as f32).collect()
}

pub fn words_to_u64(words: &[f32]) -> Option<u64> {
    if words.len() != 4 {
        return None;
    }
    words.iter().enumerate().try_fold(0u64, |acc, (i, w)| {
        (w.fract() == 0.0 && (0.0..65536.0).contains(w)).then(|| acc | ((*w as u64) << (16 * i)))
    })
}

/// UTF-8 text as one byte per value.
pub fn text_to_values(s: &str) -> Vec<f32> {
    s.bytes().map(f32::from).collect()
}

pub fn values_to_text(v: &[f32]) -> Option<String> {
    let bytes: Option<Vec<u8>> = v
        .iter()
        .map(|x| (x.fract() == 0.0 && (0.0..256.0).contains(x)).then_some(*x as u8))
        .collect();
    String::from_utf8(bytes?).ok()
}
