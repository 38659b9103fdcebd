//! Two-dimensional complex FFT over row-major grids, built from 1-D `rustfft` plans.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse 2-D transforms for a fixed `rows x cols` shape.
///
/// The inverse is normalized by `1 / (rows * cols)`, so `inverse(forward(x)) == x`.
#[derive(Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.run(buf, scratch, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.run(buf, scratch, &self.row_inv, &self.col_inv);
        let scale = 1.0 / self.len() as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    fn run(
        &self,
        buf: &mut [Complex64],
        scratch: &mut Vec<Complex64>,
        row: &Arc<dyn Fft<f64>>,
        col: &Arc<dyn Fft<f64>>,
    ) {
        assert_eq!(buf.len(), self.len(), "buffer does not match FFT shape");
        let need = self
            .len()
            .max(row.get_inplace_scratch_len())
            .max(col.get_inplace_scratch_len());
        if scratch.len() < need {
            scratch.resize(need, Complex64::new(0.0, 0.0));
        }
        row.process_with_scratch(buf, scratch);
        transpose(buf, &mut scratch[..self.len()], self.rows, self.cols);
        col.process_with_scratch(&mut scratch[..self.len()], buf);
        transpose(&scratch[..self.len()], buf, self.cols, self.rows);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft2(x: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
        for u in 0..rows {
            for v in 0..cols {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..rows {
                    for c in 0..cols {
                        let ang = -2.0
                            * std::f64::consts::PI
                            * ((u * r) as f64 / rows as f64 + (v * c) as f64 / cols as f64);
                        acc += x[r * cols + c] * Complex64::from_polar(1.0, ang);
                    }
                }
                out[u * cols + v] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_on_rectangular_grid() {
        let (rows, cols) = (4, 6);
        let x: Vec<Complex64> = (0..rows * cols)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let expected = naive_dft2(&x, rows, cols);
        let fft = Fft2::new(rows, cols);
        let mut buf = x.clone();
        let mut scratch = Vec::new();
        fft.forward(&mut buf, &mut scratch);
        for (a, b) in buf.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-10);
        }
        fft.inverse(&mut buf, &mut scratch);
        for (a, b) in buf.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
