//! Single-file binary container shared by networks and instances.
//!
//! Layout:
//!
//! ```text
//! [8 bytes]  magic "SPKGEN\0\x01"
//! [8 bytes]  header length H, u64 little-endian
//! [H bytes]  UTF-8 JSON header {format, version, kind, meta, arrays: [{name, shape}]}
//! [...]      each array in header order, f64 little-endian, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SPKGEN\0\x01";
const FORMAT: &str = "spiked-gen";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainerKind {
    Network,
    Wishart,
    WishartCovariance,
    Wigner,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: ContainerKind,
    meta: Value,
    arrays: Vec<ArraySpec>,
}

#[derive(Serialize, Deserialize)]
struct ArraySpec {
    name: String,
    shape: [usize; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: ContainerKind,
    pub meta: Value,
    pub arrays: Vec<(String, Array2<f64>)>,
}

impl Container {
    pub fn new(kind: ContainerKind, meta: Value, arrays: Vec<(String, Array2<f64>)>) -> Self {
        Self { kind, meta, arrays }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            kind: self.kind,
            meta: self.meta.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|(name, a)| ArraySpec {
                    name: name.clone(),
                    shape: [a.nrows(), a.ncols()],
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for (_, a) in &self.arrays {
            // `iter` walks logical row-major order regardless of memory layout.
            for v in a.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        if len > 1 << 30 {
            return Err(Error::Format(format!("implausible header length {len}")));
        }
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(Error::Format(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for spec in header.arrays {
            let [rows, cols] = spec.shape;
            let count = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Format(format!("array {} too large", spec.name)))?;
            let mut bytes = vec![0u8; count * 8];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let a = Array2::from_shape_vec((rows, cols), data)
                .map_err(|e| Error::Format(e.to_string()))?;
            arrays.push((spec.name, a));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after last array".into()));
        }
        Ok(Self {
            kind: header.kind,
            meta: header.meta,
            arrays,
        })
    }

    pub fn expect_kind(&self, kind: ContainerKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "expected a {kind:?} container, found {:?}",
                self.kind
            )))
        }
    }

    pub fn meta_field(&self, key: &str) -> Result<Value> {
        self.meta
            .get(key)
            .cloned()
            .ok_or_else(|| Error::Format(format!("header is missing `{key}`")))
    }

    pub fn take(&mut self, name: &str) -> Result<Array2<f64>> {
        let pos = self
            .arrays
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Format(format!("missing array `{name}`")))?;
        Ok(self.arrays.remove(pos).1)
    }

    pub fn into_matrices(self) -> Vec<Array2<f64>> {
        self.arrays.into_iter().map(|(_, a)| a).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let a = array![[1.0, -0.0, f64::MIN_POSITIVE], [1e300, 0.1, 3.0]];
        let b = a.t().to_owned();
        let c = Container::new(
            ContainerKind::Wigner,
            serde_json::json!({"nu": 0.5}),
            vec![("A".into(), a.clone()), ("B".into(), a.t().to_owned())],
        );
        c.write(&path).unwrap();
        let mut back = Container::read(&path).unwrap();
        assert_eq!(back.kind, ContainerKind::Wigner);
        assert_eq!(back.meta_field("nu").unwrap(), serde_json::json!(0.5));
        let ra = back.take("A").unwrap();
        assert!(ra
            .iter()
            .zip(a.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(back.take("B").unwrap(), b);
        assert!(back.take("A").is_err());
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"not a container at all").unwrap();
        assert!(matches!(Container::read(&path), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        Container::new(
            ContainerKind::Network,
            Value::Null,
            vec![("W".into(), Array2::ones((4, 4)))],
        )
        .write(&path)
        .unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(Container::read(&path).is_err());
    }
}
