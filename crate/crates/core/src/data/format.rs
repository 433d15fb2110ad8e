//! `.fvds` dataset files.
//!
//! Little-endian, no padding:
//!
//! ```text
//! "FVDS"  u32 version=1  u32 n  u32 d  u32 k
//! n*d f32 features, row-major
//! n   u32 labels
//! ```

use std::path::Path;

use ndarray::Array2;

use super::dataset::{FeatureDataset, Split};
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

pub const MAGIC: &[u8; 4] = b"FVDS";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn encode_dataset(ds: &FeatureDataset) -> Result<Vec<u8>> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::domain(format!("{what} {v} exceeds u32")))
    };
    let (n, d) = ds.features.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * (d + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(n, "n")?.to_le_bytes());
    out.extend_from_slice(&to_u32(d, "d")?.to_le_bytes());
    out.extend_from_slice(&to_u32(ds.classes, "k")?.to_le_bytes());
    for x in ds.features.iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for &y in &ds.labels {
        out.extend_from_slice(&to_u32(y, "label")?.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < len {
            return Err(self.err(format!(
                "truncated while reading {what}: need {len} bytes, {} left",
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }
}

pub fn decode_dataset(bytes: &[u8], split: Split) -> Result<FeatureDataset> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        r.pos = 0;
        return Err(r.err("bad magic, expected \"FVDS\""));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        r.pos -= 4;
        return Err(r.err(format!("unsupported version {version}")));
    }
    let n = r.u32("n")? as usize;
    let d = r.u32("d")? as usize;
    let k = r.u32("k")? as usize;
    if n == 0 || d == 0 || k == 0 {
        r.pos -= 12;
        return Err(r.err(format!("empty dimension (n={n}, d={d}, k={k})")));
    }
    let feat_len = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| r.err("feature block size overflows"))?;
    let feat_bytes = r.take(feat_len, "features")?;
    let features: Vec<f32> = feat_bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(i) = features.iter().position(|x| !x.is_finite()) {
        return Err(Error::Format {
            offset: (HEADER_LEN + 4 * i) as u64,
            message: "non-finite feature".into(),
        });
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = r.u32("labels")? as usize;
        if y >= k {
            r.pos -= 4;
            return Err(r.err(format!("label {y} >= k={k}")));
        }
        labels.push(y);
    }
    if r.pos != bytes.len() {
        return Err(r.err(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let features = Array2::from_shape_vec((n, d), features).expect("n*d values");
    FeatureDataset::new(features, labels, k, split)
}

pub fn save_dataset(ds: &FeatureDataset, path: &Path) -> Result<()> {
    atomic_write(path, &encode_dataset(ds)?)
}

pub fn load_dataset(path: &Path, split: Split) -> Result<FeatureDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_dataset(&bytes, split)
}
