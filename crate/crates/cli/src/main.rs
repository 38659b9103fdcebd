use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use palmscat::cache::FeatureCache;
use palmscat::classify::SvmParams;
use palmscat::dataset::{export_directory, load_directory, split_indices, synth_generate, LabeledDataset, SplitMode, SplitSpec};
use palmscat::experiment::{self, ExperimentConfig, ExperimentReport, PcaFitOn};
use palmscat::features::{FeatureExtractor, FeatureSchema};
use palmscat::filterbank::{build_filter_bank, FilterBankConfig};
use palmscat::image::Image;
use palmscat::model::{ClassifierKind, Recognizer};
use palmscat::pca::{pca_fit, CovarianceScaling};
use serde_json::json;

#[derive(Parser)]
#[command(name = "palmscat", version, about = "Scattering-feature palmprint recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write every filter of a bank as PGM images and print its frame bounds.
    Filters(FiltersArgs),
    /// Generate a synthetic dataset and export it as `<class>/<sample>.pgm`.
    Synth(SynthArgs),
    /// Extract scattering features from a dataset into an SCF1 cache.
    Extract(ExtractArgs),
    /// Fit PCA on a cache and print the spectrum and retained variance.
    Pca(PcaArgs),
    /// Fit PCA and a classifier on the training split and save the model.
    Train(TrainArgs),
    /// Score a saved model on the test split of a cache.
    Eval(EvalArgs),
    /// Accuracy as a function of the number of PCA features.
    SweepK(SweepKArgs),
    /// Accuracy as a function of the number of training samples per class.
    SweepTrain(SweepTrainArgs),
    /// Per-image latency of extraction, projection and matching.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct BankArgs {
    #[arg(long, default_value_t = 5)]
    scales: usize,
    #[arg(long, default_value_t = 6)]
    orientations: usize,
    /// Block edge length; also the filter grid size.
    #[arg(long, default_value_t = 32)]
    block: usize,
    #[arg(long, default_value_t = 0.8)]
    sigma0: f64,
    #[arg(long, default_value_t = 3.0 * std::f64::consts::FRAC_PI_4)]
    xi0: f64,
    #[arg(long, default_value_t = 0.5)]
    slant: f64,
}

impl BankArgs {
    fn filter_config(&self) -> FilterBankConfig {
        FilterBankConfig {
            scales: self.scales,
            orientations: self.orientations,
            size: self.block,
            sigma0: self.sigma0,
            xi0: self.xi0,
            slant: self.slant,
        }
    }
}

#[derive(Args)]
struct FiltersArgs {
    #[command(flatten)]
    bank: BankArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct SynthSpec {
    /// Number of synthetic classes.
    #[arg(long, default_value_t = 50)]
    classes: usize,
    #[arg(long, default_value_t = 12)]
    per_class: usize,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    spec: SynthSpec,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// Dataset directory laid out as `<class>/<sample>.(pgm|png)`; omit to generate
    /// synthetic data from the synthesis flags instead.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthSpec,
    #[command(flatten)]
    bank: BankArgs,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    FirstK,
    RandomK,
}

#[derive(Args, Clone)]
struct SplitArgs {
    #[arg(long, default_value_t = 6)]
    train_per_class: usize,
    #[arg(long, value_enum, default_value_t = SplitArg::FirstK)]
    split: SplitArg,
    /// Seed for random splits and the SVM visiting order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SplitArgs {
    fn spec(&self) -> SplitSpec {
        SplitSpec {
            train_per_class: self.train_per_class,
            seed: self.seed,
            mode: match self.split {
                SplitArg::FirstK => SplitMode::FirstK,
                SplitArg::RandomK => SplitMode::RandomK,
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Svm,
    Nn,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitOnArg {
    Train,
    All,
}

impl FitOnArg {
    fn core(self) -> PcaFitOn {
        match self {
            FitOnArg::Train => PcaFitOn::Train,
            FitOnArg::All => PcaFitOn::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CovarianceArg {
    Unbiased,
    Unnormalized,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ClassifierArg::Svm)]
    classifier: ClassifierArg,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_passes: usize,
    #[arg(long, value_enum, default_value_t = FitOnArg::Train)]
    pca_fit_on: FitOnArg,
    #[arg(long, value_enum, default_value_t = CovarianceArg::Unbiased)]
    covariance: CovarianceArg,
}

impl ModelArgs {
    fn config(&self, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            classifier: match self.classifier {
                ClassifierArg::Svm => ClassifierKind::Svm,
                ClassifierArg::Nn => ClassifierKind::Nn,
            },
            pca_fit_on: self.pca_fit_on.core(),
            scaling: match self.covariance {
                CovarianceArg::Unbiased => CovarianceScaling::Unbiased,
                CovarianceArg::Unnormalized => CovarianceScaling::Unnormalized,
            },
            svm: SvmParams {
                c: self.c,
                tol: self.tol,
                max_passes: self.max_passes,
                seed,
            },
        }
    }
}

#[derive(Args)]
struct PcaArgs {
    #[arg(long)]
    cache: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, value_enum, default_value_t = FitOnArg::Train)]
    pca_fit_on: FitOnArg,
    /// Number of leading components to list.
    #[arg(long, default_value_t = 20)]
    pca_k: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    cache: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 200)]
    pca_k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    cache: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Args)]
struct SweepKArgs {
    #[arg(long)]
    cache: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated PCA widths.
    #[arg(long, value_delimiter = ',', default_value = "10,25,50,100,150,200")]
    pca_k: Vec<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepTrainArgs {
    #[arg(long)]
    cache: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated training samples per class.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9,10,11")]
    train_counts: Vec<usize>,
    /// Comma-separated split seeds; each count is repeated once per seed.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    /// PCA width, capped per split at what the training side supports.
    #[arg(long, default_value_t = 200)]
    pca_k: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory to draw images from; omit to use synthetic images.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthSpec,
    /// Number of images to time.
    #[arg(long, default_value_t = 20)]
    n: usize,
}

fn load_dataset(input: Option<&Path>, synth: &SynthSpec) -> Result<LabeledDataset> {
    match input {
        Some(dir) => {
            let report = load_directory(dir, synth.size).with_context(|| format!("loading {}", dir.display()))?;
            for r in &report.rejected {
                eprintln!("skipped {}: {}", r.path.display(), r.reason);
            }
            Ok(report.dataset)
        }
        None => Ok(synth_generate(synth.classes, synth.per_class, synth.size, synth.seed)?),
    }
}

fn read_cache(path: &Path) -> Result<FeatureCache> {
    FeatureCache::read(path).with_context(|| format!("reading cache {}", path.display()))
}

fn emit(report: &ExperimentReport, csv: Option<&Path>) -> Result<()> {
    print!("{}", report.to_table());
    if let Some(path) = csv {
        fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn filters(args: FiltersArgs) -> Result<()> {
    let bank = build_filter_bank(args.bank.filter_config())?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let n = bank.dump_filters(&args.out)?;
    let (max, min) = bank.littlewood_paley_report();
    println!("# config {}", serde_json::to_string(bank.config())?);
    println!("wrote {n} filter images to {}", args.out.display());
    println!("littlewood-paley max {max:.6} min over annulus {min:.6}");
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let s = &args.spec;
    let ds = synth_generate(s.classes, s.per_class, s.size, s.seed)?;
    let n = export_directory(&ds, &args.out)?;
    println!("wrote {n} images in {} classes to {}", ds.n_classes(), args.out.display());
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let ds = load_dataset(args.input.as_deref(), &args.synth)?;
    let (rows, cols) = ds.image_shape().context("empty dataset")?;
    if rows != cols {
        bail!("images must be square, got {rows}x{cols}");
    }
    let schema = FeatureSchema::with_filters(rows, args.layers, args.bank.filter_config())?;
    let bank = build_filter_bank(schema.filter_config())?;
    let extractor = FeatureExtractor::new(schema, &bank)?;
    let cache = FeatureCache::from_dataset(&ds, &extractor)?;
    cache.write(&args.out)?;
    println!("# schema {}", serde_json::to_string(&schema)?);
    println!("wrote {} vectors of dimension {} to {}", cache.len(), cache.dim(), args.out.display());
    Ok(())
}

fn pca(args: PcaArgs) -> Result<()> {
    let cache = read_cache(&args.cache)?;
    let rows = cache.rows_f64();
    let spec = args.split.spec();
    let model = match args.pca_fit_on.core() {
        PcaFitOn::All => pca_fit(&rows, CovarianceScaling::Unbiased)?,
        PcaFitOn::Train => {
            let (train, _) = split_indices(&cache.labels, &cache.sample_index, &spec)?;
            let train: Vec<&[f64]> = train.iter().map(|&i| rows[i].as_slice()).collect();
            pca_fit(&train, CovarianceScaling::Unbiased)?
        }
    };
    println!(
        "# config {}",
        json!({"cache": args.cache, "split": spec, "pca_fit_on": args.pca_fit_on.core().to_string(), "dim": cache.dim()})
    );
    println!("K_max {}", model.max_components());
    println!("{:>6}  {:>14}  {:>10}", "k", "eigenvalue", "retained");
    for k in 1..=args.pca_k.min(model.max_components()) {
        println!("{k:>6}  {:>14.6e}  {:>10.6}", model.eigenvalues[k - 1], model.retained_variance(k)?);
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let cache = read_cache(&args.cache)?;
    let spec = args.split.spec();
    let cfg = args.model.config(args.split.seed);
    let model = experiment::train_recognizer(&cache, &spec, args.pca_k, &cfg)?;
    model.write(&args.out)?;
    println!("# config {}", json!({"split": spec, "pca_k": args.pca_k, "classifier": cfg.classifier.to_string(), "pca_fit_on": cfg.pca_fit_on.to_string(), "c": cfg.svm.c, "tol": cfg.svm.tol}));
    println!("wrote {} model with K = {} to {}", model.matcher.kind(), model.k(), args.out.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let model = Recognizer::read(&args.model).with_context(|| format!("reading model {}", args.model.display()))?;
    let cache = read_cache(&args.cache)?;
    let spec = args.split.spec();
    let (accuracy, confusion) = experiment::evaluate(&model, &cache, &spec)?;
    println!("# config {}", json!({"model": args.model, "cache": args.cache, "split": spec, "classifier": model.matcher.kind().to_string(), "k": model.k()}));
    println!("accuracy {accuracy:.4} ({}/{})", confusion.correct, confusion.tested);
    for (t, p, n) in confusion.errors.iter().take(10) {
        println!("  {} -> {}: {n}", model.class_names[*t as usize], model.class_names[*p as usize]);
    }
    Ok(())
}

fn sweep_k(args: SweepKArgs) -> Result<()> {
    let cache = read_cache(&args.cache)?;
    let cfg = args.model.config(args.split.seed);
    let report = experiment::pca_sweep(&cache, &args.pca_k, &args.split.spec(), &cfg)?;
    emit(&report, args.csv.as_deref())
}

fn sweep_train(args: SweepTrainArgs) -> Result<()> {
    let cache = read_cache(&args.cache)?;
    let cfg = args.model.config(0);
    let report = experiment::train_count_sweep(&cache, &args.train_counts, &args.seeds, args.pca_k, &cfg)?;
    emit(&report, args.csv.as_deref())
}

fn bench(args: BenchArgs) -> Result<()> {
    let model = Recognizer::read(&args.model).with_context(|| format!("reading model {}", args.model.display()))?;
    let ds = load_dataset(args.input.as_deref(), &args.synth)?;
    let bank = build_filter_bank(model.schema.filter_config())?;
    let extractor = FeatureExtractor::new(model.schema, &bank)?;
    let images: Vec<&Image> = ds.samples.iter().map(|s| &s.image).cycle().take(args.n).collect();
    if images.is_empty() {
        bail!("no images to time");
    }
    let report = experiment::bench(&model, &extractor, &images)?;
    println!("# config {}", json!({"model": args.model, "classifier": model.matcher.kind().to_string(), "k": model.k(), "schema": model.schema}));
    print!("{}", report.to_table());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Filters(a) => filters(a),
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::Pca(a) => pca(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::SweepK(a) => sweep_k(a),
        Command::SweepTrain(a) => sweep_train(a),
        Command::Bench(a) => bench(a),
    }
}
