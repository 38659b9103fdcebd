use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub vector: Vec<f64>,
    pub label: u32,
    pub sample_id: u32,
}

/// Enrolled templates matched by Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryIndex {
    templates: Vec<Template>,
    dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnMatch {
    pub label: u32,
    pub distance: f64,
    pub sample_id: u32,
}

impl GalleryIndex {
    pub fn new(templates: Vec<Template>) -> Result<Self> {
        let dim = templates
            .first()
            .map(|t| t.vector.len())
            .ok_or_else(|| Error::Argument("gallery is empty".into()))?;
        if let Some(t) = templates.iter().find(|t| t.vector.len() != dim) {
            return Err(Error::dim(dim, t.vector.len()));
        }
        Ok(GalleryIndex { templates, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    /// Nearest template; equal distances resolve to the lowest sample id.
    pub fn predict(&self, query: &[f64]) -> Result<NnMatch> {
        if query.len() != self.dim {
            return Err(Error::dim(self.dim, query.len()));
        }
        let mut best: Option<(f64, &Template)> = None;
        for t in &self.templates {
            let d2: f64 = t.vector.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            let better = match best {
                None => true,
                Some((bd, bt)) => d2 < bd || (d2 == bd && t.sample_id < bt.sample_id),
            };
            if better {
                best = Some((d2, t));
            }
        }
        let (d2, t) = best.expect("gallery is non-empty");
        Ok(NnMatch {
            label: t.label,
            distance: d2.sqrt(),
            sample_id: t.sample_id,
        })
    }
}

pub fn nn_predict(gallery: &GalleryIndex, query: &[f64]) -> Result<NnMatch> {
    gallery.predict(query)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64], label: u32, id: u32) -> Template {
        Template {
            vector: v.to_vec(),
            label,
            sample_id: id,
        }
    }

    #[test]
    fn exact_and_geometric_matches() {
        let g = GalleryIndex::new(vec![t(&[0.0, 0.0], 0, 0), t(&[10.0, 0.0], 1, 1)]).unwrap();
        let m = g.predict(&[1.0, 0.0]).unwrap();
        assert_eq!((m.label, m.distance, m.sample_id), (0, 1.0, 0));
        let m = g.predict(&[10.0, 0.0]).unwrap();
        assert_eq!((m.label, m.distance), (1, 0.0));
    }

    #[test]
    fn ties_go_to_lowest_sample_id() {
        let g = GalleryIndex::new(vec![t(&[1.0], 7, 5), t(&[-1.0], 3, 2), t(&[1.0], 9, 4)]).unwrap();
        let m = g.predict(&[0.0]).unwrap();
        assert_eq!((m.label, m.sample_id), (3, 2));
    }

    #[test]
    fn errors() {
        assert!(GalleryIndex::new(Vec::new()).is_err());
        assert!(GalleryIndex::new(vec![t(&[1.0], 0, 0), t(&[1.0, 2.0], 0, 1)]).is_err());
        let g = GalleryIndex::new(vec![t(&[1.0], 0, 0)]).unwrap();
        assert!(g.predict(&[1.0, 2.0]).is_err());
    }
}
