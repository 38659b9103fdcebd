//! A trained recognizer (PCA projection plus matcher) and its `SCM1` file format.
//!
//! Layout, all integers little-endian: magic `"SCM1"`, `u32` version (1), `u32` L and L
//! bytes of UTF-8 JSON metadata, then `f64` arrays: PCA mean (d), axes (k x d),
//! eigenvalues (k). A nearest-neighbour model continues with n x k template values, n
//! `u32` labels and n `u32` sample ids; an SVM with, per pair, `u32` class a, `u32`
//! class b and k + 1 weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bytes::{put_f64s, put_u32, to_u32, Reader};
use crate::cache::write_atomic;
use crate::classify::{GalleryIndex, PairClassifier, SvmModel, SvmParams, Template};
use crate::error::{DecodeError, Error, Result};
use crate::features::FeatureSchema;
use crate::pca::PcaModel;

pub const MAGIC: [u8; 4] = *b"SCM1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Nn,
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Nn => "nn",
        })
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(ClassifierKind::Svm),
            "nn" => Ok(ClassifierKind::Nn),
            other => Err(Error::Argument(format!("unknown classifier {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Matcher {
    Nn(GalleryIndex),
    Svm(SvmModel),
}

impl Matcher {
    /// Trains on already-projected vectors. `sample_ids` order the NN tie-break.
    pub fn train(
        kind: ClassifierKind,
        vectors: &[Vec<f64>],
        labels: &[u32],
        sample_ids: &[u32],
        params: &SvmParams,
    ) -> Result<Self> {
        if vectors.len() != labels.len() || labels.len() != sample_ids.len() {
            return Err(Error::dim(vectors.len(), labels.len().min(sample_ids.len())));
        }
        match kind {
            ClassifierKind::Nn => GalleryIndex::new(
                vectors
                    .iter()
                    .zip(labels)
                    .zip(sample_ids)
                    .map(|((v, &label), &sample_id)| Template {
                        vector: v.clone(),
                        label,
                        sample_id,
                    })
                    .collect(),
            )
            .map(Matcher::Nn),
            ClassifierKind::Svm => SvmModel::train(vectors, labels, params).map(Matcher::Svm),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Matcher::Nn(_) => ClassifierKind::Nn,
            Matcher::Svm(_) => ClassifierKind::Svm,
        }
    }

    pub fn predict(&self, z: &[f64]) -> Result<u32> {
        match self {
            Matcher::Nn(g) => g.predict(z).map(|m| m.label),
            Matcher::Svm(s) => s.predict(z).map(|p| p.label),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recognizer {
    pub schema: FeatureSchema,
    pub class_names: Vec<String>,
    /// Truncated to the `k` axes the matcher was trained on.
    pub pca: PcaModel,
    pub matcher: Matcher,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    schema: FeatureSchema,
    class_names: Vec<String>,
    classifier: ClassifierKind,
    d: usize,
    k: usize,
    #[serde(default)]
    templates: usize,
    #[serde(default)]
    classes: Vec<u32>,
    #[serde(default)]
    pairs: usize,
    #[serde(default)]
    c: f64,
    #[serde(default)]
    tol: f64,
}

impl Recognizer {
    pub fn k(&self) -> usize {
        self.pca.max_components()
    }

    pub fn project(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.pca.project(features, self.k())
    }

    pub fn predict(&self, features: &[f64]) -> Result<u32> {
        self.matcher.predict(&self.project(features)?)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let (d, k) = (self.pca.dim(), self.k());
        let mut meta = Metadata {
            schema: self.schema,
            class_names: self.class_names.clone(),
            classifier: self.matcher.kind(),
            d,
            k,
            templates: 0,
            classes: Vec::new(),
            pairs: 0,
            c: 0.0,
            tol: 0.0,
        };
        match &self.matcher {
            Matcher::Nn(g) => meta.templates = g.len(),
            Matcher::Svm(s) => {
                meta.classes = s.classes.clone();
                meta.pairs = s.pairs.len();
                meta.c = s.c;
                meta.tol = s.tol;
            }
        }
        let json = serde_json::to_vec(&meta).map_err(|e| Error::Argument(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, to_u32(json.len(), "metadata length"));
        out.extend_from_slice(&json);
        put_f64s(&mut out, &self.pca.mean);
        for axis in &self.pca.components {
            put_f64s(&mut out, axis);
        }
        put_f64s(&mut out, &self.pca.eigenvalues);
        match &self.matcher {
            Matcher::Nn(g) => {
                for t in g.templates() {
                    put_f64s(&mut out, &t.vector);
                }
                for t in g.templates() {
                    put_u32(&mut out, t.label);
                }
                for t in g.templates() {
                    put_u32(&mut out, t.sample_id);
                }
            }
            Matcher::Svm(s) => {
                for p in &s.pairs {
                    put_u32(&mut out, p.class_a);
                    put_u32(&mut out, p.class_b);
                    put_f64s(&mut out, &p.w);
                }
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, DecodeError> {
        let header = |m: String| DecodeError::Header(m);
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(DecodeError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(DecodeError::Version(version));
        }
        let len = r.u32()? as usize;
        let meta: Metadata = serde_json::from_slice(r.take(len)?).map_err(|e| header(format!("metadata: {e}")))?;
        let (d, k) = (meta.d, meta.k);
        meta.schema.validate().map_err(|e| header(e.to_string()))?;
        if d != meta.schema.dim || k > d {
            return Err(header(format!("d = {d}, k = {k} inconsistent with schema")));
        }
        let mean = r.f64s(d)?;
        let components = (0..k).map(|_| r.f64s(d)).collect::<std::result::Result<Vec<_>, _>>()?;
        let eigenvalues = r.f64s(k)?;
        let n_classes = meta.class_names.len() as u32;
        let matcher = match meta.classifier {
            ClassifierKind::Nn => {
                let n = meta.templates;
                if n == 0 {
                    return Err(header("empty gallery".into()));
                }
                if k == 0 {
                    // zero-width templates occupy no bytes; bound n by what remains
                    if n > r.remaining() / 8 {
                        return Err(DecodeError::Truncated(bytes.len()));
                    }
                }
                let vectors = (0..n).map(|_| r.f64s(k)).collect::<std::result::Result<Vec<_>, _>>()?;
                let labels = r.u32s(n)?;
                let ids = r.u32s(n)?;
                if labels.iter().any(|&l| l >= n_classes) {
                    return Err(DecodeError::Payload("template label out of range".into()));
                }
                let templates = vectors
                    .into_iter()
                    .zip(labels)
                    .zip(ids)
                    .map(|((vector, label), sample_id)| Template { vector, label, sample_id })
                    .collect();
                Matcher::Nn(GalleryIndex::new(templates).map_err(|e| DecodeError::Payload(e.to_string()))?)
            }
            ClassifierKind::Svm => {
                let classes = meta.classes;
                if classes.is_empty() || classes.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(header("class list must be non-empty and strictly ascending".into()));
                }
                if classes.iter().any(|&c| c >= n_classes) {
                    return Err(header("class id out of range".into()));
                }
                let expected = classes.len() * (classes.len() - 1) / 2;
                if meta.pairs != expected {
                    return Err(header(format!("{} pairs for {} classes", meta.pairs, classes.len())));
                }
                let mut pairs = Vec::with_capacity(expected.min(r.remaining() / 8));
                for _ in 0..expected {
                    let class_a = r.u32()?;
                    let class_b = r.u32()?;
                    let w = r.f64s(k + 1)?;
                    if classes.binary_search(&class_a).is_err() || classes.binary_search(&class_b).is_err() {
                        return Err(DecodeError::Payload("pair refers to unknown class".into()));
                    }
                    pairs.push(PairClassifier { class_a, class_b, w });
                }
                Matcher::Svm(SvmModel {
                    classes,
                    pairs,
                    c: meta.c,
                    tol: meta.tol,
                })
            }
        };
        r.finish()?;
        Ok(Recognizer {
            schema: meta.schema,
            class_names: meta.class_names,
            pca: PcaModel {
                mean,
                components,
                eigenvalues,
            },
            matcher,
        })
    }

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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pca::{pca_fit, CovarianceScaling};

    fn toy(kind: ClassifierKind) -> Recognizer {
        let schema = FeatureSchema::new(32, 32, 1, 1, 1).unwrap();
        let data: Vec<Vec<f64>> = (0..9)
            .map(|i| {
                let c = (i % 3) as f64;
                vec![c, c * 2.0 + 0.1 * i as f64, -c, 0.05 * i as f64]
            })
            .collect();
        let labels: Vec<u32> = (0..9).map(|i| i % 3).collect();
        let ids: Vec<u32> = (0..9).collect();
        let pca = pca_fit(&data, CovarianceScaling::Unbiased).unwrap().truncated(3).unwrap();
        let projected: Vec<Vec<f64>> = data.iter().map(|x| pca.project(x, 3).unwrap()).collect();
        let matcher = Matcher::train(kind, &projected, &labels, &ids, &SvmParams::default()).unwrap();
        Recognizer {
            schema,
            class_names: vec!["a".into(), "b".into(), "c".into()],
            pca,
            matcher,
        }
    }

    #[test]
    fn roundtrip_both_kinds() {
        for kind in [ClassifierKind::Nn, ClassifierKind::Svm] {
            let model = toy(kind);
            let back = Recognizer::decode(&model.encode().unwrap()).unwrap();
            assert_eq!(back, model);
            assert_eq!(back.predict(&[1.0, 2.3, -1.0, 0.2]).unwrap(), 1);
        }
    }

    #[test]
    fn rejects_truncation_and_trailing() {
        let bytes = toy(ClassifierKind::Svm).encode().unwrap();
        for cut in [0, 3, 8, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(Recognizer::decode(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut extra = bytes.clone();
        extra.extend_from_slice(&[0; 3]);
        assert_eq!(Recognizer::decode(&extra), Err(DecodeError::Trailing(3)));
    }
}
