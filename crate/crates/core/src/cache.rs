//! `SCF1` feature cache files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                                              |
//! |--------------|------------------------------------------------------|
//! | 4            | magic `53 43 46 31` (`"SCF1"`)                        |
//! | 4            | `u32` version, currently 1                           |
//! | 4            | `u32` N, number of vectors                           |
//! | 4            | `u32` d, vector dimension                            |
//! | 4            | `u32` label count (number of classes)                |
//! | 4 * N * d    | `f32` vectors, row-major                             |
//! | 4 * N        | `u32` class label per vector, each `< label count`   |
//! | 4 + L        | `u32` L, then L bytes of UTF-8 JSON metadata         |
//!
//! The JSON object carries the feature schema, the class names and each vector's
//! within-class sample index.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bytes::{put_u32, to_u32, Reader};
use crate::error::{DecodeError, Error, Result};
use crate::dataset::LabeledDataset;
use crate::features::{FeatureExtractor, FeatureSchema};

pub const MAGIC: [u8; 4] = *b"SCF1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache {
    pub schema: FeatureSchema,
    /// `labels.len() x schema.dim`, row-major.
    pub vectors: Vec<f32>,
    pub labels: Vec<u32>,
    pub sample_index: Vec<u32>,
    pub class_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    schema: FeatureSchema,
    class_names: Vec<String>,
    sample_index: Vec<u32>,
}

impl FeatureCache {
    /// Extracts every sample of `ds` (in parallel, order preserved).
    pub fn from_dataset(ds: &LabeledDataset, extractor: &FeatureExtractor<'_>) -> Result<Self> {
        ds.validate()?;
        let images: Vec<&crate::image::Image> = ds.samples.iter().map(|s| &s.image).collect();
        let features = extractor.extract_all(&images)?;
        Ok(FeatureCache {
            schema: *extractor.schema(),
            vectors: features.iter().flat_map(|f| f.values.iter().map(|&v| v as f32)).collect(),
            labels: ds.labels(),
            sample_index: ds.sample_indices(),
            class_names: ds.class_names.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.schema.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.vectors[i * d..(i + 1) * d]
    }

    pub fn rows_f64(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| self.row(i).iter().map(|&v| f64::from(v)).collect())
            .collect()
    }

    fn check(&self) -> std::result::Result<(), DecodeError> {
        let payload = |m: String| Err(DecodeError::Payload(m));
        self.schema.validate().map_err(|e| DecodeError::Header(e.to_string()))?;
        let n = self.labels.len();
        if self.vectors.len() != n * self.dim() {
            return payload(format!("{} values for {n} x {} vectors", self.vectors.len(), self.dim()));
        }
        if self.sample_index.len() != n {
            return payload(format!("{} sample indices for {n} vectors", self.sample_index.len()));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l as usize >= self.class_names.len()) {
            return payload(format!("label {l} out of range for {} classes", self.class_names.len()));
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.check()?;
        let meta = serde_json::to_string(&Metadata {
            schema: self.schema,
            class_names: self.class_names.clone(),
            sample_index: self.sample_index.clone(),
        })
        .map_err(|e| Error::Argument(e.to_string()))?;
        let mut out = Vec::with_capacity(24 + 4 * self.vectors.len() + 4 * self.labels.len() + meta.len());
        out.extend_from_slice(&MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, to_u32(self.len(), "N"));
        put_u32(&mut out, to_u32(self.dim(), "d"));
        put_u32(&mut out, to_u32(self.class_names.len(), "label count"));
        for v in &self.vectors {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in &self.labels {
            put_u32(&mut out, *l);
        }
        put_u32(&mut out, to_u32(meta.len(), "metadata length"));
        out.extend_from_slice(meta.as_bytes());
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(DecodeError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(DecodeError::Version(version));
        }
        let n = r.u32()? as usize;
        let d = r.u32()? as usize;
        let label_count = r.u32()? as usize;
        let count = n
            .checked_mul(d)
            .ok_or_else(|| DecodeError::Header("N * d overflows".into()))?;
        let vectors = r.f32s(count)?;
        let labels = r.u32s(n)?;
        let meta_len = r.u32()? as usize;
        let meta: Metadata = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| DecodeError::Header(format!("metadata: {e}")))?;
        r.finish()?;
        if meta.schema.dim != d {
            return Err(DecodeError::Header(format!("schema dim {} but header d = {d}", meta.schema.dim)));
        }
        if meta.class_names.len() != label_count {
            return Err(DecodeError::Header(format!(
                "{} class names but label count {label_count}",
                meta.class_names.len()
            )));
        }
        let cache = FeatureCache {
            schema: meta.schema,
            vectors,
            labels,
            sample_index: meta.sample_index,
            class_names: meta.class_names,
        };
        cache.check()?;
        Ok(cache)
    }

    /// Writes via a temporary file in the destination directory and renames it into place.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| Error::Dataset {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    // temp files default to 0600; let the umask decide instead
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o666));
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
