//! Accuracy sweeps over PCA width and training-set size, and per-image latency timing.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::FeatureCache;
use crate::classify::SvmParams;
use crate::dataset::{split_indices, SplitMode, SplitSpec};
use crate::error::{Error, Result};
use crate::features::FeatureExtractor;
use crate::image::Image;
use crate::model::{ClassifierKind, Matcher, Recognizer};
use crate::pca::{pca_fit, CovarianceScaling, PcaModel};

/// Which rows the PCA basis is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcaFitOn {
    #[default]
    Train,
    /// Train and test rows together (transductive).
    All,
}

impl std::fmt::Display for PcaFitOn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            PcaFitOn::Train => "train",
            PcaFitOn::All => "all",
        })
    }
}

impl std::str::FromStr for PcaFitOn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(PcaFitOn::Train),
            "all" => Ok(PcaFitOn::All),
            other => Err(Error::Argument(format!("unknown PCA fit set {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub classifier: ClassifierKind,
    pub pca_fit_on: PcaFitOn,
    pub scaling: CovarianceScaling,
    pub svm: SvmParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            classifier: ClassifierKind::Svm,
            pca_fit_on: PcaFitOn::Train,
            scaling: CovarianceScaling::Unbiased,
            svm: SvmParams::default(),
        }
    }
}

impl ExperimentConfig {
    fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "classifier": self.classifier.to_string(),
            "pca_fit_on": self.pca_fit_on.to_string(),
            "covariance": format!("{:?}", self.scaling).to_lowercase(),
            "c": self.svm.c,
            "tol": self.svm.tol,
            "max_passes": self.svm.max_passes,
            "svm_seed": self.svm.seed,
        })
    }
}

/// One measurement. `accuracy` is `None` when the row's parameter was invalid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub param: usize,
    pub classifier: ClassifierKind,
    pub accuracy: Option<f64>,
    pub seed: u64,
    pub wall_ms: f64,
    pub error: Option<String>,
    /// PCA width actually used, which can be below `param` for small training sets.
    pub k_used: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanRow {
    pub param: usize,
    pub accuracy: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Confusion {
    pub param: usize,
    pub tested: usize,
    pub correct: usize,
    /// `(true class, predicted class, count)`, most frequent first.
    pub errors: Vec<(u32, u32, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: serde_json::Value,
    pub rows: Vec<ReportRow>,
    pub means: Vec<MeanRow>,
    pub confusion: Option<Confusion>,
    pub stage_ms: Vec<(String, f64)>,
}

pub const CSV_HEADER: &str = "param,classifier,accuracy,seed,wall_ms";

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let acc = r.accuracy.map(|a| format!("{a:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{:.3}", r.param, r.classifier, acc, r.seed, r.wall_ms);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.name);
        let _ = writeln!(out, "# config {}", self.config);
        for (stage, ms) in &self.stage_ms {
            let _ = writeln!(out, "# {stage}: {ms:.1} ms");
        }
        let _ = writeln!(out, "{:>8}  {:>10}  {:>4}  {:>10}  {:>8}  {:>10}", "param", "classifier", "k", "accuracy", "seed", "wall_ms");
        for r in &self.rows {
            let acc = r.accuracy.map(|a| format!("{a:.4}")).unwrap_or_else(|| "invalid".into());
            let k = r.k_used.map(|k| k.to_string()).unwrap_or_else(|| "-".into());
            let _ = write!(
                out,
                "{:>8}  {:>10}  {:>4}  {:>10}  {:>8}  {:>10.1}",
                r.param, r.classifier, k, acc, r.seed, r.wall_ms
            );
            match &r.error {
                Some(e) => {
                    let _ = writeln!(out, "  ({e})");
                }
                None => out.push('\n'),
            }
        }
        if !self.means.is_empty() {
            let _ = writeln!(out, "{:>8}  {:>10}  {:>4}", "param", "mean acc", "runs");
            for m in &self.means {
                let _ = writeln!(out, "{:>8}  {:>10.4}  {:>4}", m.param, m.accuracy, m.runs);
            }
        }
        if let Some(c) = &self.confusion {
            let _ = writeln!(out, "confusion at {}: {}/{} correct", c.param, c.correct, c.tested);
            for (t, p, n) in c.errors.iter().take(10) {
                let _ = writeln!(out, "  class {t} -> {p}: {n}");
            }
        }
        out
    }
}

/// Rows of a cache split into train and test sides.
struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn fit_basis(rows: &[Vec<f64>], split: &Split, cfg: &ExperimentConfig) -> Result<PcaModel> {
    match cfg.pca_fit_on {
        PcaFitOn::Train => {
            let train: Vec<&[f64]> = split.train.iter().map(|&i| rows[i].as_slice()).collect();
            pca_fit(&train, cfg.scaling)
        }
        PcaFitOn::All => pca_fit(rows, cfg.scaling),
    }
}

struct Outcome {
    accuracy: f64,
    predictions: Vec<(u32, u32)>,
}

/// Trains on the first `k` coordinates of the projected rows and scores the test side.
fn score(
    projected: &[Vec<f64>],
    labels: &[u32],
    ids: &[u32],
    split: &Split,
    k: usize,
    cfg: &ExperimentConfig,
) -> Result<Outcome> {
    let train: Vec<Vec<f64>> = split.train.iter().map(|&i| projected[i][..k].to_vec()).collect();
    let train_labels: Vec<u32> = split.train.iter().map(|&i| labels[i]).collect();
    let train_ids: Vec<u32> = split.train.iter().map(|&i| ids[i]).collect();
    let matcher = Matcher::train(cfg.classifier, &train, &train_labels, &train_ids, &cfg.svm)?;
    let predictions = split
        .test
        .par_iter()
        .map(|&i| Ok((labels[i], matcher.predict(&projected[i][..k])?)))
        .collect::<Result<Vec<_>>>()?;
    let correct = predictions.iter().filter(|(t, p)| t == p).count();
    Ok(Outcome {
        accuracy: correct as f64 / predictions.len().max(1) as f64,
        predictions,
    })
}

fn confusion(param: usize, predictions: &[(u32, u32)]) -> Confusion {
    let mut counts: std::collections::BTreeMap<(u32, u32), usize> = Default::default();
    for &(t, p) in predictions.iter().filter(|(t, p)| t != p) {
        *counts.entry((t, p)).or_default() += 1;
    }
    let mut errors: Vec<_> = counts.into_iter().map(|((t, p), n)| (t, p, n)).collect();
    errors.sort_by(|a, b| b.2.cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    Confusion {
        param,
        tested: predictions.len(),
        correct: predictions.iter().filter(|(t, p)| t == p).count(),
        errors,
    }
}

fn project_rows(pca: &PcaModel, rows: &[Vec<f64>], k: usize) -> Result<Vec<Vec<f64>>> {
    rows.par_iter().map(|x| pca.project(x, k)).collect()
}

/// Accuracy for each PCA width in `ks` under one fixed split. Rows come back sorted by
/// width; a width above the fitted basis is reported as an invalid row.
pub fn pca_sweep(cache: &FeatureCache, ks: &[usize], spec: &SplitSpec, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let rows = cache.rows_f64();
    let (train, test) = split_indices(&cache.labels, &cache.sample_index, spec)?;
    let split = Split { train, test };

    let t = Instant::now();
    let pca = fit_basis(&rows, &split, cfg)?;
    let fit_ms = ms_since(t);
    let k_max = pca.max_components();

    let mut ks = ks.to_vec();
    ks.sort_unstable();
    let widest = ks.iter().copied().filter(|&k| k >= 1 && k <= k_max).max().unwrap_or(0);
    let t = Instant::now();
    // one projection at the widest valid K; narrower widths are prefixes of it
    let projected = project_rows(&pca, &rows, widest)?;
    let project_ms = ms_since(t);

    let results: Vec<(ReportRow, Option<Outcome>)> = ks
        .par_iter()
        .map(|&k| {
            let t = Instant::now();
            let outcome = if k == 0 || k > k_max {
                Err(Error::Argument(format!("K = {k} outside 1..={k_max}")))
            } else {
                score(&projected, &cache.labels, &cache.sample_index, &split, k, cfg)
            };
            let mut row = ReportRow {
                param: k,
                classifier: cfg.classifier,
                accuracy: None,
                seed: spec.seed,
                wall_ms: ms_since(t),
                error: None,
                k_used: None,
            };
            match outcome {
                Ok(o) => {
                    row.accuracy = Some(o.accuracy);
                    row.k_used = Some(k);
                    (row, Some(o))
                }
                Err(e) => {
                    row.error = Some(e.to_string());
                    (row, None)
                }
            }
        })
        .collect();

    let confusion = results
        .iter()
        .rev()
        .find_map(|(row, o)| o.as_ref().map(|o| confusion(row.param, &o.predictions)));
    let mut config = cfg.echo();
    config["split"] = serde_json::to_value(spec).unwrap_or_default();
    config["schema"] = serde_json::to_value(cache.schema).unwrap_or_default();
    config["k_max"] = k_max.into();
    Ok(ExperimentReport {
        name: "accuracy vs PCA width".into(),
        config,
        rows: results.into_iter().map(|(r, _)| r).collect(),
        means: Vec::new(),
        confusion,
        stage_ms: vec![("pca fit".into(), fit_ms), ("projection".into(), project_ms)],
    })
}

/// Accuracy for each training-set size in `train_counts`, repeated over `seeds` with random
/// per-class selection. The PCA width is `min(k_pca, K_max)` for each split.
pub fn train_count_sweep(
    cache: &FeatureCache,
    train_counts: &[usize],
    seeds: &[u64],
    k_pca: usize,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if seeds.is_empty() {
        return Err(Error::Argument("at least one seed is required".into()));
    }
    if k_pca == 0 {
        return Err(Error::Argument("PCA width must be positive".into()));
    }
    let rows = cache.rows_f64();
    let mut counts = train_counts.to_vec();
    counts.sort_unstable();
    let jobs: Vec<(usize, u64)> = counts.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();

    let run = |n: usize, seed: u64| -> Result<(usize, Outcome)> {
        let spec = SplitSpec {
            train_per_class: n,
            seed,
            mode: SplitMode::RandomK,
        };
        let (train, test) = split_indices(&cache.labels, &cache.sample_index, &spec)?;
        let split = Split { train, test };
        let pca = fit_basis(&rows, &split, cfg)?;
        let k = k_pca.min(pca.max_components());
        if k == 0 {
            return Err(Error::Argument("training side spans no directions".into()));
        }
        let projected = project_rows(&pca, &rows, k)?;
        let outcome = score(&projected, &cache.labels, &cache.sample_index, &split, k, cfg)?;
        Ok((k, outcome))
    };

    let results: Vec<(ReportRow, Option<Outcome>)> = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let t = Instant::now();
            let outcome = run(n, seed);
            let mut row = ReportRow {
                param: n,
                classifier: cfg.classifier,
                accuracy: None,
                seed,
                wall_ms: ms_since(t),
                error: None,
                k_used: None,
            };
            match outcome {
                Ok((k, o)) => {
                    row.accuracy = Some(o.accuracy);
                    row.k_used = Some(k);
                    (row, Some(o))
                }
                Err(e) => {
                    row.error = Some(e.to_string());
                    (row, None)
                }
            }
        })
        .collect();

    let mut means = Vec::new();
    for &n in &counts {
        if means.last().is_some_and(|m: &MeanRow| m.param == n) {
            continue;
        }
        let accs: Vec<f64> = results
            .iter()
            .filter(|(r, _)| r.param == n)
            .filter_map(|(r, _)| r.accuracy)
            .collect();
        if !accs.is_empty() {
            means.push(MeanRow {
                param: n,
                accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
                runs: accs.len(),
            });
        }
    }
    let confusion = results
        .iter()
        .rev()
        .find_map(|(row, o)| o.as_ref().map(|o| confusion(row.param, &o.predictions)));
    let mut config = cfg.echo();
    config["pca_k"] = k_pca.into();
    config["seeds"] = serde_json::to_value(seeds).unwrap_or_default();
    config["schema"] = serde_json::to_value(cache.schema).unwrap_or_default();
    Ok(ExperimentReport {
        name: "accuracy vs training samples per class".into(),
        config,
        rows: results.into_iter().map(|(r, _)| r).collect(),
        means,
        confusion,
        stage_ms: Vec::new(),
    })
}

/// Fits PCA and a matcher on the train side of `spec` and packages them for persistence.
pub fn train_recognizer(cache: &FeatureCache, spec: &SplitSpec, k: usize, cfg: &ExperimentConfig) -> Result<Recognizer> {
    let rows = cache.rows_f64();
    let (train, test) = split_indices(&cache.labels, &cache.sample_index, spec)?;
    let split = Split { train, test };
    let pca = fit_basis(&rows, &split, cfg)?;
    if k == 0 || k > pca.max_components() {
        return Err(Error::Argument(format!("K = {k} outside 1..={}", pca.max_components())));
    }
    let pca = pca.truncated(k)?;
    let projected: Vec<Vec<f64>> = split.train.par_iter().map(|&i| pca.project(&rows[i], k)).collect::<Result<_>>()?;
    let labels: Vec<u32> = split.train.iter().map(|&i| cache.labels[i]).collect();
    let ids: Vec<u32> = split.train.iter().map(|&i| cache.sample_index[i]).collect();
    let matcher = Matcher::train(cfg.classifier, &projected, &labels, &ids, &cfg.svm)?;
    Ok(Recognizer {
        schema: cache.schema,
        class_names: cache.class_names.clone(),
        pca,
        matcher,
    })
}

/// Scores a trained recognizer on the test side of `spec`.
pub fn evaluate(model: &Recognizer, cache: &FeatureCache, spec: &SplitSpec) -> Result<(f64, Confusion)> {
    if model.schema != cache.schema {
        return Err(Error::Argument("model and cache were built with different feature schemas".into()));
    }
    let (_, test) = split_indices(&cache.labels, &cache.sample_index, spec)?;
    let predictions = test
        .par_iter()
        .map(|&i| {
            let x: Vec<f64> = cache.row(i).iter().map(|&v| f64::from(v)).collect();
            Ok((cache.labels[i], model.predict(&x)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let c = confusion(model.k(), &predictions);
    Ok((c.correct as f64 / c.tested.max(1) as f64, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub mean_ms: f64,
    pub median_ms: f64,
}

impl Timing {
    fn of(samples: &mut [f64]) -> Timing {
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let median_ms = match n {
            0 => 0.0,
            _ if n % 2 == 1 => samples[n / 2],
            _ => 0.5 * (samples[n / 2 - 1] + samples[n / 2]),
        };
        Timing {
            mean_ms: samples.iter().sum::<f64>() / n.max(1) as f64,
            median_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub images: usize,
    pub extract: Timing,
    pub project: Timing,
    pub matching: Timing,
    pub total: Timing,
    pub wall_ms: f64,
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("# {} images, {:.1} ms wall\n", self.images, self.wall_ms);
        let _ = writeln!(out, "{:>8}  {:>10}  {:>10}", "stage", "mean_ms", "median_ms");
        for (name, t) in [
            ("extract", self.extract),
            ("project", self.project),
            ("match", self.matching),
            ("total", self.total),
        ] {
            let _ = writeln!(out, "{name:>8}  {:>10.3}  {:>10.3}", t.mean_ms, t.median_ms);
        }
        out
    }
}

/// Times extraction, projection and matching separately for each image, sequentially.
pub fn bench(model: &Recognizer, extractor: &FeatureExtractor<'_>, images: &[&Image]) -> Result<BenchReport> {
    if *extractor.schema() != model.schema {
        return Err(Error::Argument("extractor and model disagree on the feature schema".into()));
    }
    let (mut ext, mut proj, mut mat, mut tot) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let start = Instant::now();
    for image in images {
        let t0 = Instant::now();
        let f = extractor.extract(image)?;
        let t1 = Instant::now();
        let z = model.project(&f.values)?;
        let t2 = Instant::now();
        std::hint::black_box(model.matcher.predict(&z)?);
        let t3 = Instant::now();
        ext.push((t1 - t0).as_secs_f64() * 1e3);
        proj.push((t2 - t1).as_secs_f64() * 1e3);
        mat.push((t3 - t2).as_secs_f64() * 1e3);
        tot.push((t3 - t0).as_secs_f64() * 1e3);
    }
    Ok(BenchReport {
        images: images.len(),
        extract: Timing::of(&mut ext),
        project: Timing::of(&mut proj),
        matching: Timing::of(&mut mat),
        total: Timing::of(&mut tot),
        wall_ms: ms_since(start),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSchema;

    /// Three well-separated classes of four samples in 6 dimensions.
    fn toy_cache() -> FeatureCache {
        let schema = FeatureSchema::new(32, 32, 1, 1, 1).unwrap();
        assert_eq!(schema.dim, 4);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        let mut sample_index = Vec::new();
        for c in 0..3u32 {
            for i in 0..4u32 {
                let jitter = 0.01 * f64::from(i * 7 % 5);
                for d in 0..4 {
                    let centre = if d as u32 == c { 1.0 } else { 0.0 };
                    vectors.push((centre + jitter * (d as f64 - 1.5)) as f32);
                }
                labels.push(c);
                sample_index.push(i);
            }
        }
        FeatureCache {
            schema,
            vectors,
            labels,
            sample_index,
            class_names: vec!["x".into(), "y".into(), "z".into()],
        }
    }

    #[test]
    fn sweep_reports_every_k_and_flags_invalid() {
        let spec = SplitSpec {
            train_per_class: 2,
            seed: 0,
            mode: SplitMode::FirstK,
        };
        let report = pca_sweep(&toy_cache(), &[9, 2, 1, 3], &spec, &ExperimentConfig::default()).unwrap();
        let params: Vec<usize> = report.rows.iter().map(|r| r.param).collect();
        assert_eq!(params, [1, 2, 3, 9]);
        assert!(report.rows[3].accuracy.is_none() && report.rows[3].error.is_some());
        assert_eq!(report.rows[2].accuracy, Some(1.0));
        assert_eq!(report.to_csv().lines().count(), 5);
    }

    #[test]
    fn train_count_means_over_seeds() {
        let cfg = ExperimentConfig {
            classifier: ClassifierKind::Nn,
            ..Default::default()
        };
        let report = train_count_sweep(&toy_cache(), &[1, 3, 2], &[0, 1, 2], 50, &cfg).unwrap();
        assert_eq!(report.rows.len(), 9);
        assert_eq!(report.means.iter().map(|m| m.param).collect::<Vec<_>>(), [1, 2, 3]);
        assert!(report.rows.iter().all(|r| r.k_used.unwrap() < 3 * r.param));
        assert!(report.means.iter().all(|m| m.runs == 3 && (0.0..=1.0).contains(&m.accuracy)));
    }

    #[test]
    fn trained_recognizer_scores_test_side() {
        let cache = toy_cache();
        let spec = SplitSpec {
            train_per_class: 2,
            seed: 0,
            mode: SplitMode::FirstK,
        };
        let model = train_recognizer(&cache, &spec, 2, &ExperimentConfig::default()).unwrap();
        let (acc, c) = evaluate(&model, &cache, &spec).unwrap();
        assert_eq!((acc, c.tested), (1.0, 6));
        assert!(train_recognizer(&cache, &spec, 6, &ExperimentConfig::default()).is_err());
    }

    #[test]
    fn timing_median() {
        assert_eq!(Timing::of(&mut [3.0, 1.0, 2.0]).median_ms, 2.0);
        assert_eq!(Timing::of(&mut [4.0, 1.0, 2.0, 3.0]).median_ms, 2.5);
    }
}
