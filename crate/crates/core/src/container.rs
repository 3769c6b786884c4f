//! Binary container for named tensors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "T2NCKPT\0"
//! version      u32
//! header_len   u64
//! header       header_len bytes of UTF-8 JSON:
//!              {"version", "kind", "dtype": "f64le", "meta", "tensors": [{"name","rows","cols"}]}
//! payload      rows*cols f64 values per tensor, in header order
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::nn::Tensor2D;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"T2NCKPT\0";
pub const VERSION: u32 = 1;
const DTYPE: &str = "f64le";

#[derive(Serialize, Deserialize)]
struct TensorSpec {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    kind: String,
    dtype: String,
    meta: serde_json::Value,
    tensors: Vec<TensorSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<(String, Tensor2D)>,
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<container>", e)
}

impl Container {
    pub fn new(kind: &str, meta: serde_json::Value, tensors: Vec<(String, Tensor2D)>) -> Self {
        Container {
            kind: kind.to_owned(),
            meta,
            tensors,
        }
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "container holds a `{}`, expected a `{kind}`",
                self.kind
            )))
        }
    }

    /// Remove and return the tensor called `name`.
    pub fn take(&mut self, name: &str) -> Result<Tensor2D> {
        let pos = self
            .tensors
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Validation(format!("container has no tensor `{name}`")))?;
        Ok(self.tensors.remove(pos).1)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            version: VERSION,
            kind: self.kind.clone(),
            dtype: DTYPE.into(),
            meta: self.meta.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(n, t)| TensorSpec {
                    name: n.clone(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header)?;
        w.write_all(MAGIC).map_err(io_err)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
        w.write_all(&(header.len() as u64).to_le_bytes()).map_err(io_err)?;
        w.write_all(&header).map_err(io_err)?;
        let mut buf = Vec::new();
        for (_, t) in &self.tensors {
            buf.clear();
            buf.reserve(t.data().len() * 8);
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != MAGIC {
            return Err(Error::Validation("not a checkpoint container (bad magic)".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(io_err)?;
        let version = u32::from_le_bytes(word);
        if version > VERSION {
            return Err(Error::Validation(format!(
                "container version {version} is newer than supported version {VERSION}"
            )));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(io_err)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut header = vec![0u8; len];
        r.read_exact(&mut header).map_err(io_err)?;
        let header: Header = serde_json::from_slice(&header)?;
        if header.dtype != DTYPE {
            return Err(Error::Validation(format!("unsupported dtype `{}`", header.dtype)));
        }
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in header.tensors {
            let n = entry.rows * entry.cols;
            let mut bytes = vec![0u8; n * 8];
            r.read_exact(&mut bytes).map_err(io_err)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((entry.name, Tensor2D::new(entry.rows, entry.cols, data)?));
        }
        Ok(Container {
            kind: header.kind,
            meta: header.meta,
            tensors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_newer_version() {
        let c = Container::new("x", serde_json::Value::Null, vec![]);
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert_eq!(Container::read(buf.as_slice()).unwrap(), c);
        buf[8..12].copy_from_slice(&(VERSION + 1).to_le_bytes());
        let err = Container::read(buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("newer"), "{err}");
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(Container::read(&b"NOPE0000"[..]).is_err());
        let t = Tensor2D::new(1, 2, vec![1.0, 2.0]).unwrap();
        let c = Container::new("x", serde_json::json!({}), vec![("t".into(), t)]);
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(Container::read(buf.as_slice()).is_err());
    }
}
