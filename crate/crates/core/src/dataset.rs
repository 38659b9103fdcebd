//! Labelled palmprint image sets: directory ingestion, a synthetic texture generator, and
//! per-class train/test splits.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::pgm;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub class: u32,
    /// Position of the sample within its class.
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
    /// Indexed by class id.
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for s in &self.samples {
            counts[s.class as usize] += 1;
        }
        counts
    }

    /// Samples per class when every class has the same count.
    pub fn samples_per_class(&self) -> Option<usize> {
        let counts = self.class_counts();
        let first = *counts.first()?;
        counts.iter().all(|&c| c == first).then_some(first)
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.samples.first().map(|s| (s.image.rows(), s.image.cols()))
    }

    pub fn labels(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.class).collect()
    }

    pub fn sample_indices(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.index).collect()
    }

    fn subset(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: rows.iter().map(|&i| self.samples[i].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Checks the dataset invariants: one shape, non-empty classes, unique indices per class.
    pub fn validate(&self) -> Result<()> {
        let shape = self
            .image_shape()
            .ok_or_else(|| Error::Argument("dataset is empty".into()))?;
        let mut seen = std::collections::HashSet::new();
        for s in &self.samples {
            if (s.image.rows(), s.image.cols()) != shape {
                return Err(Error::dim(format!("{}x{}", shape.0, shape.1), format!("{}x{}", s.image.rows(), s.image.cols())));
            }
            if s.class as usize >= self.n_classes() {
                return Err(Error::Argument(format!("class id {} out of range", s.class)));
            }
            if !seen.insert((s.class, s.index)) {
                return Err(Error::Argument(format!("duplicate sample {} in class {}", s.index, s.class)));
            }
        }
        if let Some(c) = self.class_counts().iter().position(|&n| n == 0) {
            return Err(Error::Argument(format!("class {} has no samples", self.class_names[c])));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// The `k` lowest sample indices of each class train.
    FirstK,
    /// A seeded per-class permutation picks the `k` training samples.
    RandomK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_per_class: usize,
    pub seed: u64,
    pub mode: SplitMode,
}

/// Splits rows, given each row's class and within-class index, into train and test row
/// lists (each ascending). Every class must have more than `train_per_class` rows.
pub fn split_indices(classes: &[u32], indices: &[u32], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if classes.len() != indices.len() {
        return Err(Error::dim(classes.len(), indices.len()));
    }
    let mut by_class: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (row, &c) in classes.iter().enumerate() {
        by_class.entry(c).or_default().push(row);
    }
    let k = spec.train_per_class;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (&class, rows) in &mut by_class {
        if k == 0 || k >= rows.len() {
            return Err(Error::Argument(format!(
                "train_per_class = {k} must lie in 1..{} for class {class}",
                rows.len()
            )));
        }
        rows.sort_by_key(|&r| (indices[r], r));
        if spec.mode == SplitMode::RandomK {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(u64::from(class));
            rows.shuffle(&mut rng);
        }
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(ds: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(&ds.labels(), &ds.sample_indices(), spec)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: LabeledDataset,
    pub rejected: Vec<Rejection>,
}

fn image_ext(path: &Path) -> Option<String> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    matches!(ext.as_str(), "pgm" | "png").then_some(ext)
}

/// Decodes one greyscale PGM or PNG file to `[0, 1]` intensities.
pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let dataset_err = |message: String| Error::Dataset {
        path: path.to_path_buf(),
        message,
    };
    match image_ext(path).as_deref() {
        Some("pgm") => Ok(pgm::decode(&bytes).map_err(|e| dataset_err(e.to_string()))?.to_image()),
        Some("png") => {
            let luma = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
                .map_err(|e| dataset_err(e.to_string()))?
                .to_luma8();
            let (w, h) = luma.dimensions();
            Image::from_u8(h as usize, w as usize, luma.as_raw())
        }
        _ => Err(dataset_err("unsupported image extension".into())),
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Loads `root/<class>/<sample>.(pgm|png)`. Classes are ordered by directory name and
/// samples by file name. Unreadable or wrongly sized files are skipped and reported; a
/// root without class directories or a class left without images is an error.
pub fn load_directory(root: &Path, size: usize) -> Result<LoadReport> {
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if class_dirs.is_empty() {
        return Err(Error::Dataset {
            path: root.to_path_buf(),
            message: "no classes found".into(),
        });
    }
    let mut samples = Vec::new();
    let mut class_names = Vec::new();
    let mut rejected = Vec::new();
    for (class, dir) in class_dirs.iter().enumerate() {
        let files: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| p.is_file() && image_ext(p).is_some())
            .collect();
        let decoded: Vec<(PathBuf, Result<Image>)> = files.into_par_iter().map(|p| {
            let img = read_image(&p);
            (p, img)
        }).collect();
        let mut index = 0u32;
        for (path, img) in decoded {
            match img {
                Ok(img) if img.rows() == size && img.cols() == size => {
                    samples.push(Sample {
                        image: img,
                        class: class as u32,
                        index,
                    });
                    index += 1;
                }
                Ok(img) => rejected.push(Rejection {
                    path,
                    reason: format!("expected {size}x{size}, found {}x{}", img.rows(), img.cols()),
                }),
                Err(e) => rejected.push(Rejection {
                    path,
                    reason: e.to_string(),
                }),
            }
        }
        if index == 0 {
            return Err(Error::Dataset {
                path: dir.clone(),
                message: "class has no usable images".into(),
            });
        }
        class_names.push(dir.file_name().map_or_else(|| class.to_string(), |n| n.to_string_lossy().into_owned()));
    }
    Ok(LoadReport {
        dataset: LabeledDataset { samples, class_names },
        rejected,
    })
}

/// Writes the dataset as `root/<class>/<index>.pgm`, quantized to 8 bits.
pub fn export_directory(ds: &LabeledDataset, root: &Path) -> Result<usize> {
    for s in &ds.samples {
        let dir = root.join(&ds.class_names[s.class as usize]);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(format!("{:03}.pgm", s.index));
        let bytes = pgm::encode(s.image.cols(), s.image.rows(), &s.image.to_u8());
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(ds.samples.len())
}

/// A plane wave with an integer number of cycles across the image, so it tiles seamlessly.
#[derive(Debug, Clone, PartialEq)]
pub struct Grating {
    pub cycles_x: i32,
    pub cycles_y: i32,
    pub amplitude: f64,
    pub phase: f64,
}

/// A dark quadratic Bezier stroke standing in for a palm crease.
#[derive(Debug, Clone, PartialEq)]
pub struct Crease {
    pub control: [(f64, f64); 3],
    pub width: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSignature {
    pub gratings: Vec<Grating>,
    pub creases: Vec<Crease>,
}

impl ClassSignature {
    fn draw(rng: &mut ChaCha8Rng, size: usize) -> Self {
        let n = size as f64;
        let n_gratings = rng.random_range(3..=6);
        let gratings = (0..n_gratings)
            .map(|_| {
                // wavelength between 4 and 20 pixels
                let (cx, cy) = loop {
                    let cx = rng.random_range(-(size as i32) / 4..=size as i32 / 4);
                    let cy = rng.random_range(0..=size as i32 / 4);
                    let wavelength = n / f64::from(cx * cx + cy * cy).sqrt();
                    if (4.0..=20.0).contains(&wavelength) && (cy > 0 || cx > 0) {
                        break (cx, cy);
                    }
                };
                Grating {
                    cycles_x: cx,
                    cycles_y: cy,
                    amplitude: rng.random_range(0.04..0.12),
                    phase: rng.random_range(0.0..2.0 * PI),
                }
            })
            .collect();
        let n_creases = rng.random_range(2..=3);
        let creases = (0..n_creases)
            .map(|_| {
                let mut pt = || (rng.random_range(0.0..n), rng.random_range(0.0..n));
                let control = [pt(), pt(), pt()];
                Crease {
                    control,
                    width: rng.random_range(1.5..3.0),
                    depth: rng.random_range(0.15..0.3),
                }
            })
            .collect();
        ClassSignature { gratings, creases }
    }

    /// Noise-free class template on a `size x size` torus.
    pub fn render(&self, size: usize) -> Image {
        let n = size as f64;
        let mut img = Image::from_fn(size, size, |r, c| {
            0.5 + self
                .gratings
                .iter()
                .map(|g| {
                    let ph = 2.0 * PI * (f64::from(g.cycles_x) * c as f64 + f64::from(g.cycles_y) * r as f64) / n;
                    g.amplitude * (ph + g.phase).cos()
                })
                .sum::<f64>()
        });
        let wrap = |d: f64| d - n * (d / n).round();
        for crease in &self.creases {
            let [p0, p1, p2] = crease.control;
            let pts: Vec<(f64, f64)> = (0..=96)
                .map(|i| {
                    let t = f64::from(i) / 96.0;
                    let u = 1.0 - t;
                    (
                        u * u * p0.0 + 2.0 * u * t * p1.0 + t * t * p2.0,
                        u * u * p0.1 + 2.0 * u * t * p1.1 + t * t * p2.1,
                    )
                })
                .collect();
            let two_w2 = 2.0 * crease.width * crease.width;
            for r in 0..size {
                for c in 0..size {
                    let d2 = pts
                        .iter()
                        .map(|&(x, y)| {
                            let dx = wrap(c as f64 - x);
                            let dy = wrap(r as f64 - y);
                            dx * dx + dy * dy
                        })
                        .fold(f64::INFINITY, f64::min);
                    let v = img.get(r, c) - crease.depth * (-d2 / two_w2).exp();
                    img.set(r, c, v);
                }
            }
        }
        img
    }
}

/// Per-sample perturbations applied to a class template.
pub const SHIFT_RANGE: i32 = 3;
pub const NOISE_SIGMA: f64 = 0.02;
pub const BRIGHTNESS_JITTER: f64 = 0.05;

/// Draws class signatures for a synthetic run; identical arguments give identical output.
pub fn synth_signatures(n_classes: usize, size: usize, seed: u64) -> Vec<ClassSignature> {
    (0..n_classes)
        .map(|class| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2 * class as u64);
            ClassSignature::draw(&mut rng, size)
        })
        .collect()
}

/// Deterministic synthetic palmprint-like dataset. Each class is a fixed mix of oriented
/// gratings and dark creases; each sample is that template circularly shifted by up to
/// `SHIFT_RANGE` pixels per axis, scaled by `1 +- BRIGHTNESS_JITTER`, with Gaussian noise
/// of standard deviation `NOISE_SIGMA`, then clamped to `[0, 1]`.
pub fn synth_generate(n_classes: usize, per_class: usize, size: usize, seed: u64) -> Result<LabeledDataset> {
    if n_classes == 0 || per_class == 0 {
        return Err(Error::Argument("class and sample counts must be positive".into()));
    }
    if !size.is_power_of_two() || size < 8 {
        return Err(Error::Argument(format!("image size {size} must be a power of two >= 8")));
    }
    let signatures = synth_signatures(n_classes, size, seed);
    if !signatures_distinct(&signatures) {
        return Err(Error::Argument(format!("seed {seed} produced colliding class signatures")));
    }
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let per_class_samples: Vec<Vec<Sample>> = signatures
        .par_iter()
        .enumerate()
        .map(|(class, sig)| {
            let template = sig.render(size);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2 * class as u64 + 1);
            (0..per_class)
                .map(|index| {
                    let dr = rng.random_range(-SHIFT_RANGE..=SHIFT_RANGE);
                    let dc = rng.random_range(-SHIFT_RANGE..=SHIFT_RANGE);
                    let gain = 1.0 + rng.random_range(-BRIGHTNESS_JITTER..=BRIGHTNESS_JITTER);
                    let mut img = template.roll(dr as isize, dc as isize);
                    for v in img.data_mut() {
                        *v = (*v * gain + noise.sample(&mut rng)).clamp(0.0, 1.0);
                    }
                    Sample {
                        image: img,
                        class: class as u32,
                        index: index as u32,
                    }
                })
                .collect()
        })
        .collect();
    Ok(LabeledDataset {
        samples: per_class_samples.into_iter().flatten().collect(),
        class_names: (0..n_classes).map(|c| format!("{c:04}")).collect(),
    })
}

pub fn signatures_distinct(signatures: &[ClassSignature]) -> bool {
    signatures
        .iter()
        .enumerate()
        .all(|(i, a)| signatures[i + 1..].iter().all(|b| a != b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_deterministic() {
        let a = synth_generate(3, 4, 32, 17).unwrap();
        let b = synth_generate(3, 4, 32, 17).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(3, 4, 32, 18).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.len(), 12);
        assert_eq!(a.samples_per_class(), Some(4));
        a.validate().unwrap();
        assert!(a.samples.iter().all(|s| s.image.data().iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn signatures_differ_between_classes() {
        let sigs = synth_signatures(50, 128, 1);
        assert!(signatures_distinct(&sigs));
        for s in &sigs {
            assert!((3..=6).contains(&s.gratings.len()));
            assert!((2..=3).contains(&s.creases.len()));
        }
    }

    #[test]
    fn template_tiles_seamlessly() {
        let sig = &synth_signatures(1, 32, 4)[0];
        let img = sig.render(32);
        // a circular shift of the template equals rendering on the shifted torus, so the
        // wrap seam is no rougher than the interior
        let max_step = |f: &dyn Fn(usize) -> (f64, f64)| (0..32).map(|i| { let (a, b) = f(i); (a - b).abs() }).fold(0.0, f64::max);
        let seam = max_step(&|r| (img.get(r, 31), img.get(r, 0)));
        let interior = max_step(&|r| (img.get(r, 15), img.get(r, 16)));
        assert!(seam < 2.5 * interior.max(0.05));
    }

    #[test]
    fn split_modes() {
        let ds = synth_generate(4, 12, 16, 2).unwrap();
        let spec = SplitSpec { train_per_class: 6, seed: 0, mode: SplitMode::FirstK };
        let (train, test) = split(&ds, &spec).unwrap();
        assert_eq!(train.class_counts(), vec![6; 4]);
        assert_eq!(test.class_counts(), vec![6; 4]);
        assert!(train.samples.iter().all(|s| s.index < 6));

        let spec = SplitSpec { train_per_class: 11, seed: 0, mode: SplitMode::RandomK };
        let (_, test) = split(&ds, &spec).unwrap();
        assert_eq!(test.class_counts(), vec![1; 4]);

        for k in [0, 12] {
            let spec = SplitSpec { train_per_class: k, seed: 0, mode: SplitMode::FirstK };
            assert!(split(&ds, &spec).is_err());
        }
    }

    #[test]
    fn random_splits_partition_every_class() {
        let classes: Vec<u32> = (0..60).map(|i| i / 12).collect();
        let indices: Vec<u32> = (0..60).map(|i| i % 12).collect();
        for seed in 0..20 {
            for k in 1..12 {
                let spec = SplitSpec { train_per_class: k, seed, mode: SplitMode::RandomK };
                let (train, test) = split_indices(&classes, &indices, &spec).unwrap();
                let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
                all.sort_unstable();
                assert_eq!(all, (0..60).collect::<Vec<_>>());
                assert_eq!(train.len(), 5 * k);
                assert_eq!(split_indices(&classes, &indices, &spec).unwrap(), (train, test));
            }
        }
    }

    #[test]
    fn load_directory_contract() {
        let root = tempfile::tempdir().unwrap();
        let ds = synth_generate(3, 4, 16, 9).unwrap();
        export_directory(&ds, root.path()).unwrap();
        let report = load_directory(root.path(), 16).unwrap();
        assert_eq!(report.dataset.len(), 12);
        assert_eq!(report.dataset.n_classes(), 3);
        assert!(report.rejected.is_empty());
        for (a, b) in report.dataset.samples.iter().zip(&ds.samples) {
            assert_eq!(a.image.to_u8(), b.image.to_u8());
        }

        // a wrongly sized file is reported and skipped
        let odd = root.path().join("0001").join("zz_small.pgm");
        fs::write(&odd, pgm::encode(8, 8, &[0; 64])).unwrap();
        let garbage = root.path().join("0002").join("broken.pgm");
        fs::write(&garbage, b"P5 16 16 255\n").unwrap();
        let report = load_directory(root.path(), 16).unwrap();
        assert_eq!(report.dataset.len(), 12);
        let paths: Vec<_> = report.rejected.iter().map(|r| r.path.clone()).collect();
        assert_eq!(paths, vec![odd, garbage]);

        let empty = tempfile::tempdir().unwrap();
        let err = load_directory(empty.path(), 16).unwrap_err();
        assert!(err.to_string().contains("no classes found"));

        fs::create_dir(empty.path().join("lonely")).unwrap();
        let err = load_directory(empty.path(), 16).unwrap_err();
        assert!(err.to_string().contains("lonely"));
    }

    #[test]
    fn loads_png() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("a");
        fs::create_dir(&dir).unwrap();
        let pixels: Vec<u8> = (0..64).map(|i| (i * 4) as u8).collect();
        image::GrayImage::from_raw(8, 8, pixels.clone()).unwrap().save(dir.join("x.png")).unwrap();
        let report = load_directory(root.path(), 8).unwrap();
        assert_eq!(report.dataset.samples[0].image.to_u8(), pixels);
    }
}
