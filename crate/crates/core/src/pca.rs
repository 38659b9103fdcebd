//! Principal component analysis of feature vectors.
//!
//! The fit factors the centred `M x d` data matrix directly (Householder QR of its
//! transpose followed by an SVD of the small triangular factor), so the `d x d`
//! covariance is never formed.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Normalization applied to the covariance when reporting eigenvalues. The
/// eigenvectors, and therefore projections, are the same under either choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceScaling {
    /// `C = (1 / (M - 1)) sum z_i z_i^T`: eigenvalues are variances along each axis.
    #[default]
    Unbiased,
    /// `C = sum z_i z_i^T`.
    Unnormalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal principal axes, strongest first.
    pub components: Vec<Vec<f64>>,
    /// Non-increasing, non-negative.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn max_components(&self) -> usize {
        self.components.len()
    }

    /// Keeps only the first `k` axes.
    pub fn truncated(&self, k: usize) -> Result<PcaModel> {
        self.check_k(k)?;
        Ok(PcaModel {
            mean: self.mean.clone(),
            components: self.components[..k].to_vec(),
            eigenvalues: self.eigenvalues[..k].to_vec(),
        })
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k > self.max_components() {
            return Err(Error::Argument(format!(
                "K = {k} exceeds the {} available components",
                self.max_components()
            )));
        }
        Ok(())
    }

    /// `(v_1 . (x - mean), .., v_k . (x - mean))`.
    pub fn project(&self, x: &[f64], k: usize) -> Result<Vec<f64>> {
        self.check_k(k)?;
        if x.len() != self.dim() {
            return Err(Error::dim(self.dim(), x.len()));
        }
        let centred: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self.components[..k]
            .iter()
            .map(|v| v.iter().zip(&centred).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `mean + sum_j z_j v_j`.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_k(z.len())?;
        let mut out = self.mean.clone();
        for (coef, v) in z.iter().zip(&self.components) {
            for (o, a) in out.iter_mut().zip(v) {
                *o += coef * a;
            }
        }
        Ok(out)
    }

    /// Fraction of total eigenvalue mass held by the first `k` axes; 1 for degenerate
    /// (zero-variance) data.
    pub fn retained_variance(&self, k: usize) -> Result<f64> {
        self.check_k(k)?;
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return Ok(1.0);
        }
        Ok((self.eigenvalues[..k].iter().sum::<f64>() / total).min(1.0))
    }
}

/// Fits PCA on `M >= 2` vectors of common dimension `d`, keeping `min(d, M - 1)` axes.
pub fn pca_fit<V: AsRef<[f64]>>(features: &[V], scaling: CovarianceScaling) -> Result<PcaModel> {
    let m = features.len();
    if m < 2 {
        return Err(Error::Argument(format!("PCA needs at least 2 samples, got {m}")));
    }
    let d = features[0].as_ref().len();
    if d == 0 {
        return Err(Error::Argument("PCA on zero-dimensional vectors".into()));
    }
    if let Some(bad) = features.iter().find(|f| f.as_ref().len() != d) {
        return Err(Error::dim(d, bad.as_ref().len()));
    }
    if features.iter().any(|f| f.as_ref().iter().any(|v| !v.is_finite())) {
        return Err(Error::Argument("non-finite feature value".into()));
    }

    let mut mean = vec![0.0; d];
    for f in features {
        for (acc, v) in mean.iter_mut().zip(f.as_ref()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= m as f64;
    }

    // d x M: column i is z_i
    let zt = DMatrix::from_fn(d, m, |r, c| features[c].as_ref()[r] - mean[r]);
    let qr = zt.qr();
    let q = qr.q();
    let r = qr.r();
    let svd = r.svd(true, false);
    let u_small = svd.u.expect("requested U");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let k_max = d.min(m - 1);
    let denom = match scaling {
        CovarianceScaling::Unbiased => (m - 1) as f64,
        CovarianceScaling::Unnormalized => 1.0,
    };
    let mut components = Vec::with_capacity(k_max);
    let mut eigenvalues = Vec::with_capacity(k_max);
    for &idx in order.iter().take(k_max) {
        let axis = &q * u_small.column(idx);
        let mut v: Vec<f64> = axis.iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        // sign convention: largest-magnitude entry positive (first on ties)
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) })
            .0;
        if v[pivot] < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        components.push(v);
        eigenvalues.push((sv[idx] * sv[idx] / denom).max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

pub fn pca_project(model: &PcaModel, x: &[f64], k: usize) -> Result<Vec<f64>> {
    model.project(x, k)
}

pub fn retained_variance(model: &PcaModel, k: usize) -> Result<f64> {
    model.retained_variance(k)
}
