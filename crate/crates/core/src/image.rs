//! Row-major real-valued image grids.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Image {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(rows * cols, data.len()));
        }
        Ok(Image { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Image { rows, cols, data }
    }

    /// Maps 8-bit intensities onto `[0, 1]`.
    pub fn from_u8(rows: usize, cols: usize, pixels: &[u8]) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::dim(rows * cols, pixels.len()));
        }
        Ok(Image {
            rows,
            cols,
            data: pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
        })
    }

    /// Quantizes to 8 bits, clamping to `[0, 1]` first.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Circular shift: output pixel `(r, c)` takes input `(r - dr, c - dc)` modulo the size.
    pub fn roll(&self, dr: isize, dc: isize) -> Image {
        let (rows, cols) = (self.rows as isize, self.cols as isize);
        Image::from_fn(self.rows, self.cols, |r, c| {
            let sr = (r as isize - dr).rem_euclid(rows) as usize;
            let sc = (c as isize - dc).rem_euclid(cols) as usize;
            self.get(sr, sc)
        })
    }

    /// Copy of the `rows x cols` tile whose top-left corner is `(r0, c0)`.
    pub fn crop(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Image {
        Image::from_fn(rows, cols, |r, c| self.get(r0 + r, c0 + c))
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}
