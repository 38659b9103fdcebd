//! Linear soft-margin SVM trained by dual coordinate descent, combined one-vs-one.
//!
//! Each binary problem is
//!
//! ```text
//! min_w  1/2 |w|^2 + C sum_i max(0, 1 - y_i w.x_i)
//! ```
//!
//! with every `x_i` augmented by a trailing constant 1, so the bias is the last weight and
//! is regularized with the rest. The dual `max 1.a - 1/2 a^T Q a, 0 <= a_i <= C` has no
//! equality constraint and is solved one coordinate at a time.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    /// Penalty on margin violations.
    pub c: f64,
    /// Stop once every projected-gradient (KKT) violation is at most this.
    pub tol: f64,
    pub max_passes: usize,
    /// Seeds the coordinate visiting order.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-4,
            max_passes: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    /// Weights followed by the bias.
    pub w: Vec<f64>,
    /// Dual variables, positive examples first, then negative, in input order.
    pub alpha: Vec<f64>,
    pub passes: usize,
    /// Largest projected-gradient magnitude at the returned solution.
    pub max_violation: f64,
    pub converged: bool,
}

impl BinarySolution {
    pub fn decision(&self, x: &[f64]) -> f64 {
        decision(&self.w, x)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `w[..k] . x + w[k]`.
#[inline]
fn decision(w: &[f64], x: &[f64]) -> f64 {
    let k = w.len() - 1;
    dot(&w[..k], x) + w[k]
}

fn lexicographic<V: AsRef<[f64]>>(a: &[V], b: &[V]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        for (x, y) in a.iter().zip(b) {
            let (x, y) = (x.as_ref(), y.as_ref());
            let o = x.len().cmp(&y.len()).then_with(|| {
                x.iter()
                    .zip(y)
                    .map(|(p, q)| p.total_cmp(q))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            });
            if o.is_ne() {
                return o;
            }
        }
        Ordering::Equal
    })
}

/// Projected gradient of the dual at coordinate `i` given `g = y_i w.x_i - 1`.
#[inline]
fn projected(g: f64, alpha: f64, c: f64) -> f64 {
    if alpha <= 0.0 {
        g.min(0.0)
    } else if alpha >= c {
        g.max(0.0)
    } else {
        g
    }
}

fn solve<V: AsRef<[f64]>>(pos: &[V], neg: &[V], params: &SvmParams) -> BinarySolution {
    let k = pos[0].as_ref().len();
    let points: Vec<(&[f64], f64)> = pos
        .iter()
        .map(|x| (x.as_ref(), 1.0))
        .chain(neg.iter().map(|x| (x.as_ref(), -1.0)))
        .collect();
    let n = points.len();
    let c = params.c;
    let qd: Vec<f64> = points.iter().map(|(x, _)| dot(x, x) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; k + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let violation = |w: &[f64], alpha: &[f64]| {
        points
            .iter()
            .zip(alpha)
            .map(|((x, y), &a)| projected(y * decision(w, x) - 1.0, a, c).abs())
            .fold(0.0, f64::max)
    };

    let mut passes = 0;
    let mut converged = false;
    while passes < params.max_passes {
        passes += 1;
        order.shuffle(&mut rng);
        let mut pass_max = 0.0f64;
        for &i in &order {
            let (x, y) = points[i];
            let g = y * decision(&w, x) - 1.0;
            let pg = projected(g, alpha[i], c);
            pass_max = pass_max.max(pg.abs());
            if pg.abs() > 1e-14 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y;
                if step != 0.0 {
                    for (wj, xj) in w[..k].iter_mut().zip(x) {
                        *wj += step * xj;
                    }
                    w[k] += step;
                }
            }
        }
        if pass_max <= params.tol && violation(&w, &alpha) <= params.tol {
            converged = true;
            break;
        }
    }
    let max_violation = violation(&w, &alpha);
    BinarySolution {
        w,
        alpha,
        passes,
        max_violation,
        converged: converged || max_violation <= params.tol,
    }
}

/// Trains a linear soft-margin SVM separating `pos` (+1) from `neg` (-1). The returned
/// weight vector has the bias appended.
///
/// The problem is always solved in a canonical orientation, so swapping `pos` and `neg`
/// yields exactly the negated weights.
pub fn svm_train_binary<V: AsRef<[f64]>>(pos: &[V], neg: &[V], params: &SvmParams) -> Result<BinarySolution> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Argument("both classes need at least one example".into()));
    }
    let positive = |v: f64| v > 0.0 && v.is_finite();
    if !positive(params.c) || !positive(params.tol) {
        return Err(Error::Argument(format!(
            "need C > 0 and tol > 0, got C = {}, tol = {}",
            params.c, params.tol
        )));
    }
    let k = pos[0].as_ref().len();
    for x in pos.iter().chain(neg) {
        let x = x.as_ref();
        if x.len() != k {
            return Err(Error::dim(k, x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite training value".into()));
        }
    }
    if lexicographic(pos, neg) == Ordering::Greater {
        let flipped = solve(neg, pos, params);
        let mut alpha = flipped.alpha[neg.len()..].to_vec();
        alpha.extend_from_slice(&flipped.alpha[..neg.len()]);
        Ok(BinarySolution {
            w: flipped.w.iter().map(|v| -v).collect(),
            alpha,
            ..flipped
        })
    } else {
        Ok(solve(pos, neg, params))
    }
}

/// `1/2 |w|^2 + C sum hinge` for the augmented problem.
pub fn primal_objective<V: AsRef<[f64]>>(w: &[f64], pos: &[V], neg: &[V], c: f64) -> f64 {
    let hinge: f64 = pos
        .iter()
        .map(|x| (1.0 - decision(w, x.as_ref())).max(0.0))
        .chain(neg.iter().map(|x| (1.0 + decision(w, x.as_ref())).max(0.0)))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

/// `sum a - 1/2 a^T Q a` with `Q_ij = y_i y_j (x_i.x_j + 1)`; `alpha` ordered as in
/// [`BinarySolution::alpha`].
pub fn dual_objective<V: AsRef<[f64]>>(alpha: &[f64], pos: &[V], neg: &[V]) -> f64 {
    let points: Vec<(&[f64], f64)> = pos
        .iter()
        .map(|x| (x.as_ref(), 1.0))
        .chain(neg.iter().map(|x| (x.as_ref(), -1.0)))
        .collect();
    let k = points.first().map_or(0, |p| p.0.len());
    let mut w = vec![0.0; k + 1];
    for ((x, y), a) in points.iter().zip(alpha) {
        for (wj, xj) in w[..k].iter_mut().zip(*x) {
            *wj += a * y * xj;
        }
        w[k] += a * y;
    }
    alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairClassifier {
    /// Positive side of the decision function.
    pub class_a: u32,
    pub class_b: u32,
    pub w: Vec<f64>,
}

/// One-vs-one ensemble: one classifier per unordered pair of classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// Sorted ascending.
    pub classes: Vec<u32>,
    /// Ordered by `(class_a, class_b)` with `class_a < class_b`.
    pub pairs: Vec<PairClassifier>,
    pub c: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmPrediction {
    pub label: u32,
    /// Votes per class, aligned with [`SvmModel::classes`].
    pub votes: Vec<u32>,
    /// Decision value per pair, aligned with [`SvmModel::pairs`].
    pub margins: Vec<f64>,
}

impl SvmModel {
    pub fn train<V: AsRef<[f64]> + Sync>(vectors: &[V], labels: &[u32], params: &SvmParams) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::dim(vectors.len(), labels.len()));
        }
        if vectors.is_empty() {
            return Err(Error::Argument("no training data".into()));
        }
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let members: Vec<Vec<&[f64]>> = classes
            .iter()
            .map(|&c| {
                vectors
                    .iter()
                    .zip(labels)
                    .filter(|(_, &l)| l == c)
                    .map(|(v, _)| v.as_ref())
                    .collect()
            })
            .collect();
        let index_pairs: Vec<(usize, usize)> = (0..classes.len())
            .flat_map(|a| (a + 1..classes.len()).map(move |b| (a, b)))
            .collect();
        let pairs = index_pairs
            .par_iter()
            .map(|&(a, b)| {
                let sol = svm_train_binary(&members[a], &members[b], params)?;
                Ok(PairClassifier {
                    class_a: classes[a],
                    class_b: classes[b],
                    w: sol.w,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SvmModel {
            classes,
            pairs,
            c: params.c,
            tol: params.tol,
        })
    }

    pub fn dim(&self) -> Option<usize> {
        self.pairs.first().map(|p| p.w.len() - 1)
    }

    /// Majority vote over pair classifiers. A zero decision value casts no vote. Vote ties
    /// go to the class with the largest summed winning margin, then the lowest class id.
    pub fn predict(&self, query: &[f64]) -> Result<SvmPrediction> {
        if self.classes.is_empty() {
            return Err(Error::Argument("SVM model has no classes".into()));
        }
        if let Some(k) = self.dim() {
            if query.len() != k {
                return Err(Error::dim(k, query.len()));
            }
        }
        let slot = |c: u32| self.classes.binary_search(&c).expect("pair classes are model classes");
        let mut votes = vec![0u32; self.classes.len()];
        let mut strength = vec![0.0f64; self.classes.len()];
        let mut margins = Vec::with_capacity(self.pairs.len());
        for p in &self.pairs {
            let d = decision(&p.w, query);
            margins.push(d);
            let winner = if d > 0.0 {
                slot(p.class_a)
            } else if d < 0.0 {
                slot(p.class_b)
            } else {
                continue;
            };
            votes[winner] += 1;
            strength[winner] += d.abs();
        }
        let best = (0..self.classes.len())
            .max_by(|&a, &b| {
                votes[a]
                    .cmp(&votes[b])
                    .then(strength[a].total_cmp(&strength[b]))
                    .then(b.cmp(&a))
            })
            .expect("at least one class");
        Ok(SvmPrediction {
            label: self.classes[best],
            votes,
            margins,
        })
    }
}

pub fn svm_predict(model: &SvmModel, query: &[f64]) -> Result<SvmPrediction> {
    model.predict(query)
}
