//! Binary container shared by dataset files and weight dumps.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes   "CODESIGN"
//! version  u32       1
//! hdr_len  u64       byte length of the JSON header
//! header   hdr_len   UTF-8 JSON object; its "arrays" member lists {name, len} in payload order
//! payload            each array as `len` consecutive f32 values
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CODESIGN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    len: usize,
}

/// A JSON header followed by named `f32` arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: Value,
    pub arrays: Vec<(String, Vec<f32>)>,
}

impl Container {
    pub fn new(header: Value) -> Self {
        Container { header, arrays: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, data: Vec<f32>) {
        self.arrays.push((name.into(), data));
    }

    pub fn array(&self, name: &str) -> Option<&[f32]> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let Value::Object(mut header) = self.header.clone() else {
            return Err(Error::Format("container header must be a JSON object".into()));
        };
        let entries: Vec<ArrayEntry> = self
            .arrays
            .iter()
            .map(|(name, d)| ArrayEntry { name: name.clone(), len: d.len() })
            .collect();
        header.insert("arrays".into(), serde_json::to_value(entries)?);
        let header_bytes = serde_json::to_vec(&Value::Object(header))?;

        let payload: usize = self.arrays.iter().map(|(_, d)| d.len() * 4).sum();
        let mut out = Vec::with_capacity(20 + header_bytes.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_bytes);
        for (_, data) in &self.arrays {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(Error::Format("missing container magic".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let hdr_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let hdr_end = 20usize
            .checked_add(hdr_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Format("truncated header".into()))?;
        let mut header: Value = serde_json::from_slice(&bytes[20..hdr_end])?;
        let entries: Vec<ArrayEntry> = match header.as_object_mut().and_then(|h| h.remove("arrays")) {
            Some(v) => serde_json::from_value(v)?,
            None => return Err(Error::Format("header lacks an array table".into())),
        };

        let mut cursor = hdr_end;
        let mut arrays = Vec::with_capacity(entries.len());
        for entry in entries {
            let end = entry
                .len
                .checked_mul(4)
                .and_then(|n| cursor.checked_add(n))
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| Error::Format(format!("array `{}` is truncated", entry.name)))?;
            let data = bytes[cursor..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push((entry.name, data));
            cursor = end;
        }
        if cursor != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                bytes.len() - cursor
            )));
        }
        Ok(Container { header, arrays })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
