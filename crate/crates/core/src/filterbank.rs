//! Frequency-domain Morlet filter bank.
//!
//! Band-pass filters are oriented Morlet wavelets at `scales` dyadic dilations and
//! `orientations` angles in `[0, pi)`, plus a Gaussian low-pass. All filters are sampled
//! directly on the DFT grid of one `size x size` block, with the continuous spectrum
//! periodized over neighbouring `2*pi` cells so that each grid equals the DFT of the
//! sampled, wrapped spatial filter.
//!
//! Scale index `j = 0` is the finest band (centre frequency `xi0`); each step halves the
//! centre frequency and doubles the envelope width.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::pgm;

/// Number of `2*pi` cells summed on each side when periodizing a spectrum.
const PERIODS: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterBankConfig {
    /// Number of dyadic scales `J`.
    pub scales: usize,
    /// Number of orientations `p`, evenly spaced over `[0, pi)`.
    pub orientations: usize,
    /// Edge length of the square grid, a power of two.
    pub size: usize,
    /// Envelope width of the finest wavelet, in pixels.
    pub sigma0: f64,
    /// Centre frequency of the finest wavelet, in radians per pixel.
    pub xi0: f64,
    /// Envelope aspect ratio; the envelope is `1/slant` times longer across the
    /// oscillation than along it.
    pub slant: f64,
}

impl Default for FilterBankConfig {
    fn default() -> Self {
        FilterBankConfig {
            scales: 5,
            orientations: 6,
            size: 32,
            sigma0: 0.8,
            xi0: 3.0 * PI / 4.0,
            slant: 0.5,
        }
    }
}

impl FilterBankConfig {
    pub fn new(scales: usize, orientations: usize, size: usize) -> Self {
        FilterBankConfig {
            scales,
            orientations,
            size,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.scales == 0 {
            return bad("scale count must be at least 1".into());
        }
        if self.orientations == 0 {
            return bad("orientation count must be at least 1".into());
        }
        if !self.size.is_power_of_two() {
            return bad(format!("grid size {} is not a power of two", self.size));
        }
        if self.scales >= usize::BITS as usize || (1usize << self.scales) > self.size {
            return bad(format!(
                "2^{} exceeds grid size {}",
                self.scales, self.size
            ));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad(format!("sigma0 must be positive, got {}", self.sigma0));
        }
        if !(self.xi0 > 0.0 && self.xi0 < PI) {
            return bad(format!("xi0 must lie in (0, pi), got {}", self.xi0));
        }
        if !(self.slant > 0.0 && self.slant <= 1.0) {
            return bad(format!("slant must lie in (0, 1], got {}", self.slant));
        }
        Ok(())
    }

    pub fn orientation_angle(&self, l: usize) -> f64 {
        PI * l as f64 / self.orientations as f64
    }
}

/// Immutable filter bank for one grid size. Filters are stored row-major in DFT order
/// (DC at index 0).
#[derive(Debug, Clone)]
pub struct FilterBank {
    config: FilterBankConfig,
    psi: Vec<Vec<Complex64>>,
    phi: Vec<f64>,
    lp_max: f64,
    lp_min_annulus: f64,
}

#[inline]
fn signed_freq(k: usize, n: usize) -> f64 {
    let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * PI * k / n as f64
}

/// Sums `f` over the grid frequency and its `2*pi` translates.
fn periodized(wx: f64, wy: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for sy in -PERIODS..=PERIODS {
        for sx in -PERIODS..=PERIODS {
            acc += f(wx + 2.0 * PI * f64::from(sx), wy + 2.0 * PI * f64::from(sy));
        }
    }
    acc
}

fn morlet_hat(cfg: &FilterBankConfig, j: usize, l: usize) -> Vec<Complex64> {
    let n = cfg.size;
    let sigma = cfg.sigma0 * (1u64 << j) as f64;
    let xi = cfg.xi0 / (1u64 << j) as f64;
    let theta = cfg.orientation_angle(l);
    let (sin, cos) = theta.sin_cos();
    let slant = cfg.slant;
    let gabor = |xi: f64| {
        move |wx: f64, wy: f64| {
            let u = wx * cos + wy * sin - xi;
            let v = (-wx * sin + wy * cos) / slant;
            (-0.5 * sigma * sigma * (u * u + v * v)).exp()
        }
    };
    let carrier = gabor(xi);
    let envelope = gabor(0.0);
    let kappa = periodized(0.0, 0.0, carrier) / periodized(0.0, 0.0, envelope);
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        let wy = signed_freq(r, n);
        for c in 0..n {
            let wx = signed_freq(c, n);
            let v = periodized(wx, wy, carrier) - kappa * periodized(wx, wy, envelope);
            out.push(Complex64::new(v, 0.0));
        }
    }
    // DC is exactly cancelled by kappa up to rounding; pin it.
    out[0] = Complex64::new(0.0, 0.0);
    out
}

fn gaussian_lowpass(cfg: &FilterBankConfig) -> Vec<f64> {
    let n = cfg.size;
    let sigma = cfg.sigma0 * (1u64 << (cfg.scales - 1)) as f64;
    let g = |wx: f64, wy: f64| (-0.5 * sigma * sigma * (wx * wx + wy * wy)).exp();
    let dc = periodized(0.0, 0.0, g);
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        let wy = signed_freq(r, n);
        for c in 0..n {
            out.push(periodized(signed_freq(c, n), wy, g) / dc);
        }
    }
    out
}

/// `(1/2) * sum_{j,l} (|psi(w)|^2 + |psi(-w)|^2)` on every bin.
fn wavelet_energy(psi: &[Vec<Complex64>], n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n * n];
    for filt in psi {
        for r in 0..n {
            let rn = (n - r) % n;
            for c in 0..n {
                let cn = (n - c) % n;
                acc[r * n + c] += 0.5 * (filt[r * n + c].norm_sqr() + filt[rn * n + cn].norm_sqr());
            }
        }
    }
    acc
}

impl FilterBank {
    pub fn new(config: FilterBankConfig) -> Result<Self> {
        config.validate()?;
        let n = config.size;
        let mut psi: Vec<Vec<Complex64>> = (0..config.scales)
            .flat_map(|j| (0..config.orientations).map(move |l| (j, l)))
            .map(|(j, l)| morlet_hat(&config, j, l))
            .collect();
        let phi = gaussian_lowpass(&config);

        // One common gain for every band-pass filter, chosen so that the Littlewood-Paley
        // sum peaks at exactly 1. The low-pass keeps unit DC gain, where the sum is
        // already 1 because every wavelet vanishes there.
        let energy = wavelet_energy(&psi, n);
        let gain_sq = energy
            .iter()
            .zip(&phi)
            .filter(|(&e, _)| e > 1e-300)
            .map(|(&e, &p)| ((1.0 - p * p).max(0.0)) / e)
            .fold(f64::INFINITY, f64::min);
        let gain = if gain_sq.is_finite() { gain_sq.sqrt() } else { 1.0 };
        for filt in &mut psi {
            for v in filt.iter_mut() {
                *v *= gain;
            }
        }

        let mut bank = FilterBank {
            config,
            psi,
            phi,
            lp_max: 0.0,
            lp_min_annulus: 0.0,
        };
        let (max, min) = bank.measure_littlewood_paley();
        bank.lp_max = max;
        bank.lp_min_annulus = min;
        Ok(bank)
    }

    pub fn config(&self) -> &FilterBankConfig {
        &self.config
    }

    pub fn size(&self) -> usize {
        self.config.size
    }

    pub fn scales(&self) -> usize {
        self.config.scales
    }

    pub fn orientations(&self) -> usize {
        self.config.orientations
    }

    /// Frequency response of the wavelet at scale `j`, orientation `l`.
    pub fn psi(&self, j: usize, l: usize) -> &[Complex64] {
        &self.psi[j * self.config.orientations + l]
    }

    /// Frequency response of the low-pass filter (real and even).
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn band_pass_count(&self) -> usize {
        self.psi.len()
    }

    /// Littlewood-Paley sum `(1/2) sum |psi(w)|^2 + |psi(-w)|^2 + |phi(w)|^2` per bin.
    pub fn littlewood_paley(&self) -> Vec<f64> {
        let mut lp = wavelet_energy(&self.psi, self.config.size);
        for (v, p) in lp.iter_mut().zip(&self.phi) {
            *v += p * p;
        }
        lp
    }

    fn measure_littlewood_paley(&self) -> (f64, f64) {
        let n = self.config.size;
        let lp = self.littlewood_paley();
        let lo = PI / (1u64 << self.config.scales) as f64;
        let hi = 0.75 * PI;
        let mut max = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        for r in 0..n {
            let wy = signed_freq(r, n);
            for c in 0..n {
                let wx = signed_freq(c, n);
                let v = lp[r * n + c];
                max = max.max(v);
                let radius = wx.hypot(wy);
                if radius >= lo && radius <= hi {
                    min = min.min(v);
                }
            }
        }
        (max, min)
    }

    /// Frame bounds recorded at construction: the maximum of the Littlewood-Paley sum over
    /// all bins, and its minimum over the annulus `pi/2^J <= |w| <= 3pi/4`.
    pub fn littlewood_paley_report(&self) -> (f64, f64) {
        (self.lp_max, self.lp_min_annulus)
    }

    /// Spatial-domain wavelet, centred on the grid.
    pub fn psi_spatial(&self, j: usize, l: usize) -> Vec<Complex64> {
        self.spatial(self.psi(j, l).to_vec())
    }

    /// Spatial-domain low-pass, centred on the grid.
    pub fn phi_spatial(&self) -> Vec<f64> {
        let buf = self.phi.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        self.spatial(buf).into_iter().map(|v| v.re).collect()
    }

    fn spatial(&self, mut buf: Vec<Complex64>) -> Vec<Complex64> {
        let n = self.config.size;
        Fft2::new(n, n).inverse(&mut buf, &mut Vec::new());
        let half = n / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                out[((r + half) % n) * n + (c + half) % n] = buf[r * n + c];
            }
        }
        out
    }

    /// Writes every filter as an 8-bit PGM into `dir`: `psi_j{j}_l{l}_re.pgm`,
    /// `psi_j{j}_l{l}_im.pgm` and `phi.pgm`. Each image is scaled by its own peak
    /// amplitude; signed parts map zero to mid-grey. Returns the number of files written.
    pub fn dump_filters(&self, dir: &Path) -> Result<usize> {
        let n = self.config.size;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: String, pixels: Vec<u8>| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, pgm::encode(n, n, &pixels)).map_err(|e| Error::io(&path, e))
        };
        let mut count = 0;
        for j in 0..self.config.scales {
            for l in 0..self.config.orientations {
                let spatial = self.psi_spatial(j, l);
                let re: Vec<f64> = spatial.iter().map(|v| v.re).collect();
                let im: Vec<f64> = spatial.iter().map(|v| v.im).collect();
                write(format!("psi_j{j}_l{l}_re.pgm"), to_grey_signed(&re))?;
                write(format!("psi_j{j}_l{l}_im.pgm"), to_grey_signed(&im))?;
                count += 2;
            }
        }
        let phi = self.phi_spatial();
        let peak = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let pixels = phi
            .iter()
            .map(|v| if peak > 0.0 { (v / peak * 255.0).round().clamp(0.0, 255.0) as u8 } else { 0 })
            .collect();
        write("phi.pgm".into(), pixels)?;
        Ok(count + 1)
    }
}

fn to_grey_signed(values: &[f64]) -> Vec<u8> {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    values
        .iter()
        .map(|v| {
            let unit = if peak > 0.0 { v / peak } else { 0.0 };
            ((unit + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
        })
        .collect()
}

/// Convenience wrapper around [`FilterBank::new`].
pub fn build_filter_bank(config: FilterBankConfig) -> Result<FilterBank> {
    FilterBank::new(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Energy-weighted mean radius of the response, in frequency bins.
    fn peak_radius(bank: &FilterBank, j: usize, l: usize) -> f64 {
        let n = bank.size();
        let filt = bank.psi(j, l);
        let (mut num, mut den) = (0.0, 0.0);
        for r in 0..n {
            for c in 0..n {
                let e = filt[r * n + c].norm_sqr();
                num += e * signed_freq(c, n).hypot(signed_freq(r, n));
                den += e;
            }
        }
        num / den
    }

    #[test]
    fn default_bank_shape() {
        let bank = build_filter_bank(FilterBankConfig::default()).unwrap();
        assert_eq!(bank.band_pass_count(), 30);
        assert_eq!(bank.phi().len(), 32 * 32);
        assert_eq!(bank.phi()[0], 1.0);
    }

    #[test]
    fn single_filter_bank_has_zero_dc() {
        let bank = build_filter_bank(FilterBankConfig::new(1, 1, 8)).unwrap();
        assert_eq!(bank.band_pass_count(), 1);
        let psi = bank.psi(0, 0);
        let max = psi.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(psi[0].norm() <= 1e-6 * max);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(FilterBank::new(FilterBankConfig::new(2, 4, 24)).is_err());
        assert!(FilterBank::new(FilterBankConfig::new(6, 4, 32)).is_err());
        assert!(FilterBank::new(FilterBankConfig::new(0, 4, 32)).is_err());
        assert!(FilterBank::new(FilterBankConfig::new(2, 0, 32)).is_err());
        let mut cfg = FilterBankConfig::default();
        cfg.xi0 = PI;
        assert!(FilterBank::new(cfg).is_err());
        cfg.xi0 = 1.0;
        cfg.slant = 1.5;
        assert!(FilterBank::new(cfg).is_err());
        // 2^J == size is allowed
        assert!(FilterBank::new(FilterBankConfig::new(5, 2, 32)).is_ok());
    }

    #[test]
    fn littlewood_paley_bounds() {
        let bank = build_filter_bank(FilterBankConfig::default()).unwrap();
        let (max, min) = bank.littlewood_paley_report();
        assert!(max <= 1.0 + 1e-6, "lp_max = {max}");
        assert!(min > 0.1, "lp_min_annulus = {min}");

        // independent evaluation of the sum over all 64x64 bins
        let bank = build_filter_bank(FilterBankConfig::new(3, 4, 64)).unwrap();
        let n = 64;
        let mut max = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let mut s = bank.phi()[r * n + c].powi(2);
                for j in 0..3 {
                    for l in 0..4 {
                        let f = bank.psi(j, l);
                        s += 0.5 * f[r * n + c].norm_sqr();
                        s += 0.5 * f[((n - r) % n) * n + (n - c) % n].norm_sqr();
                    }
                }
                max = max.max(s);
            }
        }
        assert!((0.9..=1.0 + 1e-12).contains(&max), "lp max {max}");
        assert!((max - bank.littlewood_paley_report().0).abs() < 1e-12);
    }

    #[test]
    fn fewer_orientations_cover_less() {
        let six = build_filter_bank(FilterBankConfig::default()).unwrap();
        let one = build_filter_bank(FilterBankConfig::new(5, 1, 32)).unwrap();
        assert!(one.littlewood_paley_report().1 < six.littlewood_paley_report().1);
    }

    #[test]
    fn spatial_wavelets_have_zero_mean() {
        let bank = build_filter_bank(FilterBankConfig::default()).unwrap();
        for j in 0..5 {
            for l in 0..6 {
                let s = bank.psi_spatial(j, l);
                let mean = s.iter().sum::<Complex64>() / s.len() as f64;
                let max = s.iter().map(|v| v.norm()).fold(0.0, f64::max);
                assert!(mean.norm() <= 1e-6 * max, "j={j} l={l}");
            }
        }
    }

    #[test]
    fn peak_frequency_halves_per_scale() {
        let bank = build_filter_bank(FilterBankConfig::new(4, 4, 128)).unwrap();
        for j in 0..3 {
            for l in 0..4 {
                let ratio = peak_radius(&bank, j + 1, l) / peak_radius(&bank, j, l);
                assert!((0.45..=0.55).contains(&ratio), "j={j} l={l} ratio={ratio}");
            }
        }
    }

    /// Bilinear sample of a DFT-ordered grid at a fractional, centred frequency index.
    fn sample_centred(grid: &[Complex64], n: usize, fy: f64, fx: f64) -> Complex64 {
        let wrap = |k: isize| k.rem_euclid(n as isize) as usize;
        let (y0, x0) = (fy.floor(), fx.floor());
        let (ty, tx) = (fy - y0, fx - x0);
        let at = |dy: isize, dx: isize| {
            grid[wrap(y0 as isize + dy) * n + wrap(x0 as isize + dx)]
        };
        at(0, 0) * (1.0 - ty) * (1.0 - tx)
            + at(0, 1) * (1.0 - ty) * tx
            + at(1, 0) * ty * (1.0 - tx)
            + at(1, 1) * ty * tx
    }

    /// Relative energy of `psi(j, l) - rotate(psi(j, 0), theta_l)`.
    fn rotation_error(bank: &FilterBank, j: usize, l: usize) -> f64 {
        let n = bank.size();
        let base = bank.psi(j, 0);
        {
            {
                let theta = bank.config().orientation_angle(l);
                let (s, c) = theta.sin_cos();
                let target = bank.psi(j, l);
                let (mut err, mut energy) = (0.0, 0.0);
                for r in 0..n {
                    for col in 0..n {
                        let ky = if r < n / 2 { r as f64 } else { r as f64 - n as f64 };
                        let kx = if col < n / 2 { col as f64 } else { col as f64 - n as f64 };
                        // rotate the query frequency back by theta
                        let bx = c * kx + s * ky;
                        let by = -s * kx + c * ky;
                        let v = sample_centred(base, n, by, bx);
                        let t = target[r * n + col];
                        err += (v - t).norm_sqr();
                        energy += t.norm_sqr();
                    }
                }
                err / energy
            }
        }
    }

    #[test]
    fn orientations_are_rotations_of_the_first() {
        let bank = build_filter_bank(FilterBankConfig::new(4, 6, 32)).unwrap();
        for j in 1..4 {
            for l in 1..6 {
                let e = rotation_error(&bank, j, l);
                assert!(e <= 0.10, "j={j} l={l} rel err {e}");
            }
        }
        // the finest band reaches past Nyquist, so only lattice-preserving turns are exact
        assert!(rotation_error(&bank, 0, 3) < 1e-12);
    }

    #[test]
    fn construction_is_deterministic() {
        let a = build_filter_bank(FilterBankConfig::default()).unwrap();
        let b = build_filter_bank(FilterBankConfig::default()).unwrap();
        for (x, y) in a.psi.iter().flatten().zip(b.psi.iter().flatten()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
        assert_eq!(a.phi, b.phi);
    }

    #[test]
    fn dump_writes_every_filter() {
        let dir = tempfile::tempdir().unwrap();
        let bank = build_filter_bank(FilterBankConfig::default()).unwrap();
        assert_eq!(bank.dump_filters(dir.path()).unwrap(), 61);
        assert!(dir.path().join("psi_j4_l5_im.pgm").exists());

        let small = build_filter_bank(FilterBankConfig::new(1, 1, 8)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(small.dump_filters(dir.path()).unwrap(), 3);

        let bytes = std::fs::read(dir.path().join("phi.pgm")).unwrap();
        let phi = pgm::decode(&bytes).unwrap();
        let n = 8;
        let px = |r: usize, c: usize| phi.samples[r * n + c];
        // centred at n/2: mirror (x, y) -> (n - x, n - y) about the centre
        for r in 1..n {
            for c in 1..n {
                assert_eq!(px(r, c), px(c, r));
                assert_eq!(px(r, c), px(n - r, n - c));
            }
        }
    }

    #[test]
    fn dump_reports_offending_path() {
        let file = tempfile::NamedTempFile::new().unwrap();
        let bank = build_filter_bank(FilterBankConfig::new(1, 1, 8)).unwrap();
        let err = bank.dump_filters(&file.path().join("sub")).unwrap_err();
        assert!(err.to_string().contains(&file.path().display().to_string()));
    }
}
