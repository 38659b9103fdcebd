//! Block-wise scattering statistics for whole images.
//!
//! An image is tiled into non-overlapping square blocks in row-major order; each block is
//! scattered and every map contributes its spatial mean and population variance. The
//! resulting vector is laid out block-major, then by canonical path order, then
//! `[mean, variance]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{FilterBank, FilterBankConfig};
use crate::image::Image;
use crate::scattering::{path_count, Scattering, ScatteringMaps};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub image_size: usize,
    pub block_size: usize,
    pub scales: usize,
    pub orientations: usize,
    pub layers: usize,
    pub dim: usize,
    pub sigma0: f64,
    pub xi0: f64,
    pub slant: f64,
}

impl FeatureSchema {
    /// Schema for the given geometry with default wavelet shape parameters.
    pub fn new(image_size: usize, block_size: usize, scales: usize, orientations: usize, layers: usize) -> Result<Self> {
        let defaults = FilterBankConfig::default();
        Self::with_filters(
            image_size,
            layers,
            FilterBankConfig {
                scales,
                orientations,
                size: block_size,
                ..defaults
            },
        )
    }

    pub fn with_filters(image_size: usize, layers: usize, filters: FilterBankConfig) -> Result<Self> {
        let block_size = filters.size;
        if block_size == 0 || image_size == 0 || !image_size.is_multiple_of(block_size) {
            return Err(Error::Config(format!(
                "image size {image_size} is not a multiple of block size {block_size}"
            )));
        }
        if layers > filters.scales {
            return Err(Error::Config(format!(
                "layer count {layers} exceeds scale count {}",
                filters.scales
            )));
        }
        let blocks = (image_size / block_size).pow(2);
        Ok(FeatureSchema {
            image_size,
            block_size,
            scales: filters.scales,
            orientations: filters.orientations,
            layers,
            dim: blocks * 2 * path_count(filters.scales, filters.orientations, layers),
            sigma0: filters.sigma0,
            xi0: filters.xi0,
            slant: filters.slant,
        })
    }

    pub fn filter_config(&self) -> FilterBankConfig {
        FilterBankConfig {
            scales: self.scales,
            orientations: self.orientations,
            size: self.block_size,
            sigma0: self.sigma0,
            xi0: self.xi0,
            slant: self.slant,
        }
    }

    pub fn block_count(&self) -> usize {
        (self.image_size / self.block_size).pow(2)
    }

    pub fn maps_per_block(&self) -> usize {
        path_count(self.scales, self.orientations, self.layers)
    }

    /// Re-derives `dim` from the geometry; a deserialized schema must pass this.
    pub fn validate(&self) -> Result<()> {
        let expected = Self::with_filters(self.image_size, self.layers, self.filter_config())?;
        if expected.dim != self.dim {
            return Err(Error::Config(format!(
                "schema dim {} disagrees with geometry ({})",
                self.dim, expected.dim
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Non-overlapping `block x block` tiles in row-major order.
pub fn split_blocks(image: &Image, block: usize) -> Result<Vec<Image>> {
    if block == 0 || !image.rows().is_multiple_of(block) || !image.cols().is_multiple_of(block) {
        return Err(Error::dim(
            format!("dimensions divisible by {block}"),
            format!("{}x{}", image.rows(), image.cols()),
        ));
    }
    let mut tiles = Vec::with_capacity((image.rows() / block) * (image.cols() / block));
    for r in (0..image.rows()).step_by(block) {
        for c in (0..image.cols()).step_by(block) {
            tiles.push(image.crop(r, c, block, block));
        }
    }
    Ok(tiles)
}

/// Mean and population variance of one map.
pub fn mean_variance(map: &[f64]) -> (f64, f64) {
    let n = map.len() as f64;
    let mean = map.iter().sum::<f64>() / n;
    let var = map.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// `[mean_0, var_0, mean_1, var_1, ..]` over the maps in canonical order.
pub fn map_stats(maps: &ScatteringMaps) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * maps.len());
    for (_, map) in maps.iter() {
        let (m, v) = mean_variance(map);
        out.push(m);
        out.push(v);
    }
    out
}

/// Feature extractor bound to one schema and a matching filter bank.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<'a> {
    schema: FeatureSchema,
    scattering: Scattering<'a>,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(schema: FeatureSchema, bank: &'a FilterBank) -> Result<Self> {
        schema.validate()?;
        if *bank.config() != schema.filter_config() {
            return Err(Error::Config(format!(
                "filter bank {:?} does not match schema {:?}",
                bank.config(),
                schema.filter_config()
            )));
        }
        Ok(FeatureExtractor {
            schema,
            scattering: Scattering::new(bank, schema.layers)?,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn extract(&self, image: &Image) -> Result<FeatureVector> {
        let size = self.schema.image_size;
        if image.rows() != size || image.cols() != size {
            return Err(Error::dim(
                format!("{size}x{size} image"),
                format!("{}x{}", image.rows(), image.cols()),
            ));
        }
        let mut values = Vec::with_capacity(self.schema.dim);
        for tile in split_blocks(image, self.schema.block_size)? {
            values.extend(map_stats(&self.scattering.transform(&tile)?));
        }
        debug_assert_eq!(values.len(), self.schema.dim);
        Ok(FeatureVector { values })
    }

    /// Extracts every image in parallel; output order follows input order.
    pub fn extract_all(&self, images: &[&Image]) -> Result<Vec<FeatureVector>> {
        images.par_iter().map(|img| self.extract(img)).collect()
    }
}

/// One-shot extraction; prefer [`FeatureExtractor`] for batches.
pub fn extract_features(image: &Image, schema: &FeatureSchema, bank: &FilterBank) -> Result<FeatureVector> {
    FeatureExtractor::new(*schema, bank)?.extract(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::build_filter_bank;
    use crate::scattering::{enumerate_paths, transform_block, ScatteringPath};

    #[test]
    fn split_counts_and_roundtrip() {
        let img = Image::from_fn(128, 128, |r, c| (r * 128 + c) as f64);
        assert_eq!(split_blocks(&img, 32).unwrap().len(), 16);

        let one = Image::from_fn(32, 32, |r, c| (r + 2 * c) as f64);
        assert_eq!(split_blocks(&one, 32).unwrap(), vec![one.clone()]);

        let img = Image::from_fn(64, 64, |r, c| (r * 64 + c) as f64);
        let tiles = split_blocks(&img, 32).unwrap();
        assert_eq!(tiles.len(), 4);
        let rebuilt = Image::from_fn(64, 64, |r, c| tiles[(r / 32) * 2 + c / 32].get(r % 32, c % 32));
        assert_eq!(rebuilt, img);

        assert!(split_blocks(&Image::zeros(48, 64), 32).is_err());
    }

    #[test]
    fn stats_closed_forms() {
        let constant = ScatteringMaps {
            size: 4,
            maps: vec![(ScatteringPath::root(), vec![0.3; 16])],
        };
        let s = map_stats(&constant);
        assert!((s[0] - 0.3).abs() < 1e-15 && s[1].abs() < 1e-15);

        let alternating: Vec<f64> = (0..36).map(|i| (i % 2) as f64).collect();
        let (m, v) = mean_variance(&alternating);
        assert_eq!((m, v), (0.5, 0.25));
    }

    #[test]
    fn default_dimensions() {
        let schema = FeatureSchema::new(128, 32, 5, 6, 2).unwrap();
        assert_eq!(schema.dim, 12512);
        assert_eq!(schema.maps_per_block(), 391);

        let bank = build_filter_bank(schema.filter_config()).unwrap();
        let block = Image::from_fn(32, 32, |r, c| ((r * c) % 7) as f64 / 7.0);
        assert_eq!(map_stats(&transform_block(&block, &bank, 2).unwrap()).len(), 782);

        let tiny = FeatureSchema::new(32, 32, 1, 1, 1).unwrap();
        let bank = build_filter_bank(tiny.filter_config()).unwrap();
        let fv = extract_features(&Image::zeros(32, 32), &tiny, &bank).unwrap();
        assert_eq!(fv.dim(), 4);
    }

    #[test]
    fn dim_formula_matches_enumeration() {
        for (image, block) in [(32usize, 16usize), (64, 32), (64, 16)] {
            for scales in 1..=3 {
                for orientations in 1..=4 {
                    for layers in 0..=scales {
                        let s = FeatureSchema::new(image, block, scales, orientations, layers).unwrap();
                        let paths = enumerate_paths(scales, orientations, layers).unwrap().len();
                        assert_eq!(s.dim, (image / block).pow(2) * 2 * paths);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_mismatches() {
        assert!(FeatureSchema::new(100, 32, 5, 6, 2).is_err());
        let schema = FeatureSchema::new(64, 32, 3, 4, 2).unwrap();
        let other = build_filter_bank(FilterBankConfig::new(3, 6, 32)).unwrap();
        assert!(FeatureExtractor::new(schema, &other).is_err());
        let bank = build_filter_bank(schema.filter_config()).unwrap();
        let fx = FeatureExtractor::new(schema, &bank).unwrap();
        assert!(fx.extract(&Image::zeros(32, 32)).is_err());
        let mut broken = schema;
        broken.dim += 1;
        assert!(broken.validate().is_err());
    }

    #[test]
    fn swapping_blocks_swaps_segments() {
        let schema = FeatureSchema::new(64, 32, 3, 4, 2).unwrap();
        let bank = build_filter_bank(schema.filter_config()).unwrap();
        let fx = FeatureExtractor::new(schema, &bank).unwrap();
        let img = Image::from_fn(64, 64, |r, c| ((r * 31 + c * 17) % 23) as f64 / 23.0);
        // swap block 0 (top-left) with block 3 (bottom-right)
        let swapped = Image::from_fn(64, 64, |r, c| img.get((r + 32) % 64, (c + 32) % 64));
        let a = fx.extract(&img).unwrap().values;
        let b = fx.extract(&swapped).unwrap().values;
        let seg = schema.dim / 4;
        for (from, to) in [(0, 3), (3, 0), (1, 2), (2, 1)] {
            assert_eq!(a[from * seg..(from + 1) * seg], b[to * seg..(to + 1) * seg]);
        }
        for (i, v) in a.iter().enumerate() {
            if i % 2 == 1 {
                assert!(*v >= 0.0);
            }
        }
    }
}
