//! Translation-invariant scattering transform of a square block.
//!
//! Layer 0 is the low-pass average `f * phi`. A layer-`k` path `(j_1, l_1) .. (j_k, l_k)`
//! produces `|| f * psi_{j_1,l_1} | * .. * psi_{j_k,l_k} | * phi`. Scale indices grow
//! along a path (`j_1 < j_2 < ..`): index 0 is the finest band, so each further wavelet
//! is coarser than the one before it. The modulus envelope of a band carries its energy
//! below that band, and coarser-to-finer paths are skipped as negligible. Layer `k`
//! therefore has `p^k * C(J, k)` paths.
//!
//! Convolutions are circular (products on the DFT grid) and every map is kept at full
//! block resolution.

use std::collections::HashMap;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::filterbank::FilterBank;
use crate::image::Image;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScatteringPath {
    pub scales: Vec<usize>,
    pub orientations: Vec<usize>,
}

impl ScatteringPath {
    pub fn root() -> Self {
        ScatteringPath {
            scales: Vec::new(),
            orientations: Vec::new(),
        }
    }

    pub fn layer(&self) -> usize {
        self.scales.len()
    }

    /// The path with its last step removed; `None` for the root.
    pub fn parent(&self) -> Option<ScatteringPath> {
        let k = self.layer().checked_sub(1)?;
        Some(ScatteringPath {
            scales: self.scales[..k].to_vec(),
            orientations: self.orientations[..k].to_vec(),
        })
    }
}

impl std::fmt::Display for ScatteringPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.scales.is_empty() {
            return f.write_str("()");
        }
        let steps: Vec<String> = self
            .scales
            .iter()
            .zip(&self.orientations)
            .map(|(j, l)| format!("j{j}l{l}"))
            .collect();
        f.write_str(&steps.join("/"))
    }
}

/// `n choose k` for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// `sum_{k=0}^{m} p^k C(J, k)`.
pub fn path_count(scales: usize, orientations: usize, layers: usize) -> usize {
    (0..=layers)
        .map(|k| orientations.pow(k as u32) * binomial(scales, k))
        .sum()
}

/// Strictly increasing `k`-tuples from `0..n`, lexicographic.
fn increasing_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// All `k`-tuples over `0..n`, lexicographic.
fn all_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..k).fold(vec![Vec::new()], |acc, _| {
        acc.into_iter()
            .flat_map(|t| {
                (0..n).map(move |v| {
                    let mut t = t.clone();
                    t.push(v);
                    t
                })
            })
            .collect()
    })
}

/// Every admissible path of layers `0..=layers`, layer-major, then lexicographic in
/// scales and then orientations.
pub fn enumerate_paths(scales: usize, orientations: usize, layers: usize) -> Result<Vec<ScatteringPath>> {
    if layers > scales {
        return Err(Error::Argument(format!(
            "layer count {layers} exceeds scale count {scales}"
        )));
    }
    let mut paths = Vec::with_capacity(path_count(scales, orientations, layers));
    for k in 0..=layers {
        let orients = all_tuples(orientations, k);
        for s in increasing_tuples(scales, k) {
            for o in &orients {
                paths.push(ScatteringPath {
                    scales: s.clone(),
                    orientations: o.clone(),
                });
            }
        }
    }
    Ok(paths)
}

/// Scattering maps of one block, in canonical path order.
#[derive(Debug, Clone)]
pub struct ScatteringMaps {
    pub size: usize,
    pub maps: Vec<(ScatteringPath, Vec<f64>)>,
}

impl ScatteringMaps {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ScatteringPath, &[f64])> {
        self.maps.iter().map(|(p, m)| (p, m.as_slice()))
    }

    /// All maps concatenated in canonical order.
    pub fn flatten(&self) -> Vec<f64> {
        self.maps.iter().flat_map(|(_, m)| m.iter().copied()).collect()
    }
}

/// Reusable scattering operator for one filter bank and depth.
#[derive(Debug, Clone)]
pub struct Scattering<'a> {
    bank: &'a FilterBank,
    layers: usize,
    paths: Vec<ScatteringPath>,
    fft: Fft2,
}

impl<'a> Scattering<'a> {
    pub fn new(bank: &'a FilterBank, layers: usize) -> Result<Self> {
        let paths = enumerate_paths(bank.scales(), bank.orientations(), layers)?;
        let n = bank.size();
        Ok(Scattering {
            bank,
            layers,
            paths,
            fft: Fft2::new(n, n),
        })
    }

    pub fn bank(&self) -> &FilterBank {
        self.bank
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn paths(&self) -> &[ScatteringPath] {
        &self.paths
    }

    pub fn transform(&self, block: &Image) -> Result<ScatteringMaps> {
        let n = self.bank.size();
        if block.rows() != n || block.cols() != n {
            return Err(Error::dim(
                format!("{n}x{n} block"),
                format!("{}x{}", block.rows(), block.cols()),
            ));
        }
        let phi = self.bank.phi();
        let mut scratch = Vec::new();
        let mut buf: Vec<Complex64> = block.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut buf, &mut scratch);

        // spectra of the modulus signals U_p feeding the next layer, keyed by path
        let mut parents: HashMap<ScatteringPath, Vec<Complex64>> = HashMap::new();
        parents.insert(ScatteringPath::root(), buf);

        let mut maps = Vec::with_capacity(self.paths.len());
        let mut work = vec![Complex64::new(0.0, 0.0); n * n];
        for layer in 0..=self.layers {
            let mut next: HashMap<ScatteringPath, Vec<Complex64>> = HashMap::new();
            for path in self.paths.iter().filter(|p| p.layer() == layer) {
                let map = if layer == 0 {
                    let spec = &parents[path];
                    for ((w, s), p) in work.iter_mut().zip(spec).zip(phi) {
                        *w = s * p;
                    }
                    self.fft.inverse(&mut work, &mut scratch);
                    work.iter().map(|v| v.re).collect()
                } else {
                    let parent = path.parent().expect("layer >= 1");
                    let spec = &parents[&parent];
                    let psi = self.bank.psi(path.scales[layer - 1], path.orientations[layer - 1]);
                    for ((w, s), f) in work.iter_mut().zip(spec).zip(psi) {
                        *w = s * f;
                    }
                    self.fft.inverse(&mut work, &mut scratch);
                    for w in work.iter_mut() {
                        *w = Complex64::new(w.norm(), 0.0);
                    }
                    self.fft.forward(&mut work, &mut scratch);
                    if layer < self.layers {
                        next.insert(path.clone(), work.clone());
                    }
                    for (w, p) in work.iter_mut().zip(phi) {
                        *w *= p;
                    }
                    self.fft.inverse(&mut work, &mut scratch);
                    // the exact value is an average of a non-negative signal under a
                    // positive kernel; only rounding can push it below zero
                    work.iter().map(|v| v.re.max(0.0)).collect()
                };
                maps.push((path.clone(), map));
            }
            // layer 0 only reads the root, which layer 1 still needs
            if layer > 0 {
                parents = next;
            }
        }
        Ok(ScatteringMaps { size: n, maps })
    }
}

/// One-shot transform; prefer [`Scattering`] when processing many blocks.
pub fn transform_block(block: &Image, bank: &FilterBank, layers: usize) -> Result<ScatteringMaps> {
    Scattering::new(bank, layers)?.transform(block)
}

/// A row-major `rows x cols` complex grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn from_real(image: &Image) -> Self {
        ComplexGrid {
            rows: image.rows(),
            cols: image.cols(),
            data: image.data().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// Circular convolution of `image` with the filter whose DFT is `filter_hat`.
pub fn circular_convolve(image: &ComplexGrid, filter_hat: &ComplexGrid) -> Result<ComplexGrid> {
    if (image.rows, image.cols) != (filter_hat.rows, filter_hat.cols) {
        return Err(Error::dim(
            format!("{}x{}", image.rows, image.cols),
            format!("{}x{}", filter_hat.rows, filter_hat.cols),
        ));
    }
    if image.data.len() != image.rows * image.cols || filter_hat.data.len() != image.data.len() {
        return Err(Error::dim(image.rows * image.cols, filter_hat.data.len()));
    }
    let fft = Fft2::new(image.rows, image.cols);
    let mut scratch = Vec::new();
    let mut buf = image.data.clone();
    fft.forward(&mut buf, &mut scratch);
    for (b, f) in buf.iter_mut().zip(&filter_hat.data) {
        *b *= f;
    }
    fft.inverse(&mut buf, &mut scratch);
    Ok(ComplexGrid {
        rows: image.rows,
        cols: image.cols,
        data: buf,
    })
}
