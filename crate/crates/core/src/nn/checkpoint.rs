//! Self-describing parameter container: a JSON header (free-form metadata
//! plus an index of named arrays) followed by raw little-endian `f64` data.
//!
//! Layout: `b"SMCKPT01"`, `u64` header length, header bytes, array data in
//! index order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SMCKPT01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    arrays: Vec<ArrayEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub meta: serde_json::Value,
    pub arrays: Vec<NamedArray>,
}

impl Container {
    pub fn new(meta: serde_json::Value) -> Self {
        Self {
            meta,
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) {
        self.arrays.push(NamedArray {
            name: name.into(),
            shape,
            values,
        });
    }

    /// Arrays whose names start with `prefix`, in stored order.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a NamedArray> + 'a {
        self.arrays
            .iter()
            .filter(move |a| a.name.starts_with(prefix))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            meta: self.meta.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|a| ArrayEntry {
                    name: a.name.clone(),
                    shape: a.shape.clone(),
                })
                .collect(),
        };
        let bytes = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(bytes.len() as u64).to_le_bytes())?;
        w.write_all(&bytes)?;
        for a in &self.arrays {
            for v in &a.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut header = vec![0u8; len];
        r.read_exact(&mut header)?;
        let header: Header = serde_json::from_slice(&header)?;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        let mut buf = [0u8; 8];
        for entry in header.arrays {
            let n: usize = entry.shape.iter().product();
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut buf)
                    .map_err(|_| Error::Checkpoint(format!("array {} truncated", entry.name)))?;
                values.push(f64::from_le_bytes(buf));
            }
            arrays.push(NamedArray {
                name: entry.name,
                shape: entry.shape,
                values,
            });
        }
        Ok(Self {
            meta: header.meta,
            arrays,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let mut c = Container::new(serde_json::json!({"kind": "test", "epoch": 3}));
        c.push(
            "a.weight",
            vec![2, 2],
            vec![0.1, -0.0, f64::MIN_POSITIVE, 1.0 / 3.0],
        );
        c.push("b", vec![1], vec![1e300]);
        let back = Container::read(c.to_bytes().as_slice()).unwrap();
        assert_eq!(back.meta, c.meta);
        for (x, y) in back.arrays.iter().zip(&c.arrays) {
            assert_eq!(x.name, y.name);
            let xb: Vec<u64> = x.values.iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn rejects_foreign_and_truncated_files() {
        assert!(Container::read(&b"NOTACKPT\0\0\0\0\0\0\0\0"[..]).is_err());
        let mut c = Container::new(serde_json::json!(null));
        c.push("x", vec![4], vec![1.0; 4]);
        let bytes = c.to_bytes();
        assert!(Container::read(&bytes[..bytes.len() - 3]).is_err());
    }
}
