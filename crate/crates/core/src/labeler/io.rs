//! `.hlm` model files.
//!
//! Layout, all little-endian: magic, `u32` version, config, training metadata,
//! `u64` parameter count, the parameters as `f32`, then an FNV-1a `u64`
//! checksum of everything before it.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::embed::{stable_hash, AttributeRows};
use super::{LabelerConfig, LabelerModel, TrainingMeta};
use crate::format::FormatType;

pub const MAGIC: &[u8; 8] = b"HILITER\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("reading model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file corrupt at byte {offset}: {reason}")]
    Corrupt { offset: usize, reason: CorruptReason },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorruptReason {
    #[error("not a model file")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("unexpected end of file")]
    Truncated,
    #[error("{0}")]
    Config(String),
    #[error("expected {expected} parameters, header says {found}")]
    ParamCount { expected: u64, found: u64 },
    #[error("non-finite parameter")]
    NonFinite,
    #[error("checksum mismatch")]
    Checksum,
    #[error("trailing bytes after checksum")]
    Trailing,
}

impl LoadError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            LoadError::Corrupt { offset, .. } => Some(*offset),
            LoadError::Io(_) => None,
        }
    }
}

fn checksum(bytes: &[u8]) -> u64 {
    // attribute tag 0xff keeps this distinct from any token hash
    let mut h = stable_hash(0xff, "");
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: CorruptReason) -> LoadError {
        LoadError::Corrupt {
            offset: self.pos,
            reason,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], LoadError> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(CorruptReason::Truncated));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], LoadError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, LoadError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, LoadError> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn usize(&mut self) -> Result<usize, LoadError> {
        Ok(self.u32()? as usize)
    }
    fn u64(&mut self) -> Result<u64, LoadError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64, LoadError> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

impl LabelerModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut w = Writer(Vec::with_capacity(128 + 4 * self.params.len()));
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION as usize);
        w.u8(c.format.index() as u8);
        for v in [c.embed_dim, c.attr_dim, c.n_layers, c.window, c.maxout_pieces, c.n_labels] {
            w.u32(v);
        }
        for r in c.table_rows.as_array() {
            w.u32(r);
        }
        w.u8(c.residual as u8);
        w.u32(c.max_len);
        w.u64(c.seed);
        match &self.meta {
            None => w.u8(0),
            Some(m) => {
                w.u8(1);
                w.u64(m.seed);
                w.u32(m.epochs as usize);
                w.f64(m.learning_rate);
                w.u32(m.batch_size as usize);
                w.u64(m.n_sentences);
            }
        }
        w.u64(self.params.len() as u64);
        for &p in &self.params {
            w.0.extend_from_slice(&(p as f32).to_le_bytes());
        }
        let sum = checksum(&w.0);
        w.u64(sum);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<LabelerModel, LoadError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            r.pos = 0;
            return Err(r.err(CorruptReason::BadMagic));
        }
        let at = r.pos;
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            r.pos = at;
            return Err(r.err(CorruptReason::Version(version)));
        }
        let at = r.pos;
        let format = FormatType::from_index(r.u8()? as usize).ok_or_else(|| LoadError::Corrupt {
            offset: at,
            reason: CorruptReason::Config("unknown format".into()),
        })?;
        let config = LabelerConfig {
            format,
            embed_dim: r.usize()?,
            attr_dim: r.usize()?,
            n_layers: r.usize()?,
            window: r.usize()?,
            maxout_pieces: r.usize()?,
            n_labels: r.usize()?,
            table_rows: AttributeRows {
                norm: r.u32()?,
                prefix: r.u32()?,
                suffix: r.u32()?,
                shape: r.u32()?,
            },
            residual: r.u8()? != 0,
            max_len: r.usize()?,
            seed: r.u64()?,
        };
        if let Err(e) = config.validate() {
            return Err(r.err(CorruptReason::Config(e.0)));
        }
        let meta = match r.u8()? {
            0 => None,
            _ => Some(TrainingMeta {
                seed: r.u64()?,
                epochs: r.u32()?,
                learning_rate: r.f64()?,
                batch_size: r.u32()?,
                n_sentences: r.u64()?,
            }),
        };
        let expected = super::network::Layout::new(&config).total as u64;
        let at = r.pos;
        let count = r.u64()?;
        if count != expected {
            r.pos = at;
            return Err(r.err(CorruptReason::ParamCount { expected, found: count }));
        }
        let mut params = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let at = r.pos;
            let v = f32::from_le_bytes(r.array()?);
            if !v.is_finite() {
                r.pos = at;
                return Err(r.err(CorruptReason::NonFinite));
            }
            params.push(f64::from(v));
        }
        let body_end = r.pos;
        if r.u64()? != checksum(&bytes[..body_end]) {
            r.pos = body_end;
            return Err(r.err(CorruptReason::Checksum));
        }
        if r.pos != bytes.len() {
            return Err(r.err(CorruptReason::Trailing));
        }
        LabelerModel::from_parts(config, params, meta).map_err(|e| LoadError::Corrupt {
            offset: 0,
            reason: CorruptReason::Config(e.0),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LabelerModel, LoadError> {
        LabelerModel::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeler::tests::small_config;

    #[test]
    fn round_trip_is_exact() {
        let m = LabelerModel::new(small_config(11)).unwrap();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        let back = LabelerModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        let toks: Vec<String> = ["a", "b()", "c"].map(String::from).to_vec();
        assert_eq!(back.forward(&toks), m.forward(&toks));
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = LabelerModel::new(small_config(1)).unwrap().to_bytes();
        for cut in [0, 5, 20, bytes.len() / 2, bytes.len() - 1] {
            let err = LabelerModel::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(
                matches!(&err, LoadError::Corrupt { reason: CorruptReason::Truncated | CorruptReason::BadMagic, .. }),
                "{err}"
            );
            assert!(err.offset().unwrap() <= cut);
        }
    }

    #[test]
    fn version_and_checksum() {
        let mut bytes = LabelerModel::new(small_config(1)).unwrap().to_bytes();
        let mut wrong = bytes.clone();
        wrong[8] = 9;
        let err = LabelerModel::from_bytes(&wrong).unwrap_err();
        assert!(matches!(err, LoadError::Corrupt { offset: 8, reason: CorruptReason::Version(9) }));
        let mid = bytes.len() - 20;
        bytes[mid] ^= 1;
        let err = LabelerModel::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, LoadError::Corrupt { reason: CorruptReason::Checksum, .. }));
    }
}
