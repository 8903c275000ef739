//! Binary checkpoint format.
//!
//! ```text
//! "TFNC" | version: u32 | param count: u32
//! per parameter: name len: u32 | name (UTF-8) | ndim: u32 | dims: u32 × ndim
//!                | values: f32 × prod(dims)
//! then zero or more sections: tag: [u8; 4] | payload len: u64 | payload
//! ```
//!
//! All integers and floats are little-endian. Parsing followed by writing
//! reproduces the input bytes exactly.

use std::path::Path;

use super::{KernelError, ParamStore, Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"TFNC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StoredParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub tag: [u8; 4],
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub params: Vec<StoredParam>,
    pub sections: Vec<Section>,
}

impl Checkpoint {
    pub fn from_store<S: Scalar>(store: &ParamStore<S>) -> Self {
        Self {
            params: store
                .iter()
                .map(|p| StoredParam {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    values: p.value.data().iter().map(|v| v.as_f64() as f32).collect(),
                })
                .collect(),
            sections: Vec::new(),
        }
    }

    /// Rebuilds a parameter store. Gradients start at zero.
    pub fn to_store<S: Scalar>(&self) -> Result<ParamStore<S>, KernelError> {
        let mut store = ParamStore::new();
        for p in &self.params {
            let data = p.values.iter().map(|&v| S::lit(v as f64)).collect();
            store.add(p.name.clone(), Tensor::from_vec(&p.shape, data)?)?;
        }
        Ok(store)
    }

    /// Copies stored values into an existing store, checking names and
    /// shapes one by one.
    pub fn load_into<S: Scalar>(&self, store: &mut ParamStore<S>) -> Result<(), KernelError> {
        if self.params.len() != store.len() {
            return Err(KernelError::Checkpoint(format!(
                "checkpoint has {} parameters, model has {}",
                self.params.len(),
                store.len()
            )));
        }
        for (stored, buf) in self.params.iter().zip(store.iter_mut()) {
            if stored.name != buf.name || stored.shape != buf.value.shape() {
                return Err(KernelError::Checkpoint(format!(
                    "parameter mismatch: checkpoint {} {:?}, model {} {:?}",
                    stored.name,
                    stored.shape,
                    buf.name,
                    buf.value.shape()
                )));
            }
            for (dst, &src) in buf.value.data_mut().iter_mut().zip(&stored.values) {
                *dst = S::lit(src as f64);
            }
        }
        Ok(())
    }

    pub fn section(&self, tag: &[u8; 4]) -> Option<&Section> {
        self.sections.iter().find(|s| &s.tag == tag)
    }

    pub fn set_section(&mut self, tag: [u8; 4], payload: Vec<u8>) {
        match self.sections.iter_mut().find(|s| s.tag == tag) {
            Some(s) => s.payload = payload,
            None => self.sections.push(Section { tag, payload }),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
            for &d in &p.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &p.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for s in &self.sections {
            out.extend_from_slice(&s.tag);
            out.extend_from_slice(&(s.payload.len() as u64).to_le_bytes());
            out.extend_from_slice(&s.payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KernelError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(KernelError::Checkpoint("bad magic, not a TFNC file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(KernelError::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let count = r.u32()? as usize;
        let mut params = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| KernelError::Checkpoint("parameter name is not UTF-8".into()))?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or_else(|| {
                KernelError::Checkpoint(format!("parameter {name} is too large"))
            })?)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            params.push(StoredParam {
                name,
                shape,
                values,
            });
        }
        let mut sections = Vec::new();
        while r.pos < bytes.len() {
            let tag: [u8; 4] = r.take(4)?.try_into().expect("four bytes");
            let len = usize::try_from(r.u64()?)
                .map_err(|_| KernelError::Checkpoint("section too large".into()))?;
            sections.push(Section {
                tag,
                payload: r.take(len)?.to_vec(),
            });
        }
        Ok(Self { params, sections })
    }

    pub fn save(&self, path: &Path) -> Result<(), KernelError> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| KernelError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, KernelError> {
        let bytes = std::fs::read(path)
            .map_err(|e| KernelError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

/// Cursor over a byte slice with truncation errors.
pub(crate) struct Reader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], KernelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| KernelError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32, KernelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    pub fn u64(&mut self) -> Result<u64, KernelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    pub fn f64(&mut self) -> Result<f64, KernelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
