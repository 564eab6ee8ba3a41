//! Finite metric spaces and the shared [`Metric`] abstraction.
//!
//! A [`FiniteMetricSpace`] stores a validated dense distance matrix. Large
//! streams are kept as a [`PointCloud`] whose euclidean distances are computed
//! on demand, so the condensation engine never materializes an n x n matrix
//! for the raw stream.

use crate::error::{Error, Result};

/// Relative slack allowed on the triangle inequality, scaled by the largest
/// matrix entry.
pub const TRIANGLE_TOLERANCE: f64 = 1e-9;

/// Anything that can answer pairwise distances over points `0..len()`.
pub trait Metric {
    fn len(&self) -> usize;

    fn dist(&self, i: usize, j: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<M: Metric + ?Sized> Metric for &M {
    fn len(&self) -> usize {
        (**self).len()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        (**self).dist(i, j)
    }
}

/// A point set with a validated, symmetric, zero-diagonal distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    ids: Vec<String>,
    dist: Vec<f64>,
    n: usize,
    label: Option<String>,
}

impl FiniteMetricSpace {
    /// Validates a square matrix and wraps it with index-string point ids.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    row: r,
                    len: row.len(),
                    expected: n,
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(n, flat)
    }

    /// Validates a row-major `n * n` matrix.
    pub fn from_flat(n: usize, dist: Vec<f64>) -> Result<Self> {
        let ids = (0..n).map(|i| i.to_string()).collect();
        Self::with_ids(ids, dist)
    }

    pub fn with_ids(ids: Vec<String>, dist: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if dist.len() != n * n {
            return Err(Error::NotSquare {
                row: 0,
                len: dist.len(),
                expected: n * n,
            });
        }
        check_axioms(n, &dist)?;
        Ok(Self {
            ids,
            dist,
            n,
            label: None,
        })
    }

    /// Materializes any metric into a validated dense space.
    pub fn from_metric<M: Metric>(m: &M) -> Result<Self> {
        let n = m.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = m.dist(i, j);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Self::from_flat(n, dist)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn matrix(&self) -> &[f64] {
        &self.dist
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn max_entry(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Absolute triangle slack for this space.
    pub fn tolerance(&self) -> f64 {
        TRIANGLE_TOLERANCE * self.max_entry()
    }
}

impl Metric for FiniteMetricSpace {
    fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }
}

fn check_axioms(n: usize, d: &[f64]) -> Result<()> {
    for i in 0..n {
        for j in 0..n {
            let v = d[i * n + j];
            if !v.is_finite() {
                return Err(Error::NonFiniteDistance(i, j));
            }
            if v < 0.0 {
                return Err(Error::NegativeDistance(i, j));
            }
        }
    }
    for i in 0..n {
        if d[i * n + i] != 0.0 {
            return Err(Error::NonzeroDiagonal(i));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if d[i * n + j] != d[j * n + i] {
                return Err(Error::AsymmetricDistance(i, j));
            }
        }
    }
    let tol = TRIANGLE_TOLERANCE * d.iter().copied().fold(0.0, f64::max);
    for i in 0..n {
        let row_i = &d[i * n..(i + 1) * n];
        for j in 0..n {
            let dij = row_i[j];
            let row_j = &d[j * n..(j + 1) * n];
            for k in 0..n {
                if row_i[k] > dij + row_j[k] + tol {
                    return Err(Error::TriangleViolation(i, j, k));
                }
            }
        }
    }
    Ok(())
}

/// Validates a square matrix given as rows.
pub fn validate_metric(rows: &[Vec<f64>]) -> Result<FiniteMetricSpace> {
    FiniteMetricSpace::from_rows(rows)
}

/// Largest pairwise distance; 0 for a singleton.
pub fn diameter<M: Metric>(space: &M) -> Result<f64> {
    let n = space.len();
    if n == 0 {
        return Err(Error::EmptySpace);
    }
    let mut best = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.max(space.dist(i, j));
        }
    }
    Ok(best)
}

/// Points in R^dim under the euclidean rule. Distances are computed on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim.max(1),
                got: coords.len(),
            });
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteDistance(pos / dim, pos / dim));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[[f64; 2]]) -> Self {
        Self {
            dim: 2,
            coords: points.iter().flat_map(|p| p.iter().copied()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

impl Metric for PointCloud {
    fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> f64 {
        let a = self.point(i);
        let b = self.point(j);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Evenly sampled line segment: `floor(L/h) + 1` points with `dist(i, j) = |i - j| * h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSpace {
    length: f64,
    resolution: f64,
    n: usize,
}

impl SegmentSpace {
    pub fn new(length: f64, resolution: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite() && resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidSegment { length, resolution });
        }
        // L/h is often a float hair below an integer (6.0 / 0.1); absorb that.
        let steps = (length / resolution + 1e-9).floor() as usize;
        Ok(Self {
            length,
            resolution,
            n: steps + 1,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn to_space(&self) -> FiniteMetricSpace {
        let n = self.n;
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = self.dist(i, j);
            }
        }
        FiniteMetricSpace {
            ids: (0..n).map(|i| i.to_string()).collect(),
            dist,
            n,
            label: None,
        }
        .with_label(format!("segment(L={}, h={})", self.length, self.resolution))
    }
}

impl Metric for SegmentSpace {
    fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> f64 {
        i.abs_diff(j) as f64 * self.resolution
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_and_pair() {
        let s = validate_metric(&[vec![0.0]]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(diameter(&s).unwrap(), 0.0);
        let p = validate_metric(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(diameter(&p).unwrap(), 1.0);
    }

    #[test]
    fn axiom_violations_name_witnesses() {
        let asym = validate_metric(&[vec![0.0, 1.0], vec![2.0, 0.0]]);
        assert_eq!(asym, Err(Error::AsymmetricDistance(0, 1)));
        let neg = validate_metric(&[vec![0.0, -1.0], vec![-1.0, 0.0]]);
        assert_eq!(neg, Err(Error::NegativeDistance(0, 1)));
        let diag = validate_metric(&[vec![0.5, 1.0], vec![1.0, 0.0]]);
        assert_eq!(diag, Err(Error::NonzeroDiagonal(0)));
        let tri = validate_metric(&[
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ]);
        assert_eq!(tri, Err(Error::TriangleViolation(0, 1, 2)));
        let ragged = validate_metric(&[vec![0.0, 1.0], vec![1.0]]);
        assert!(matches!(ragged, Err(Error::NotSquare { row: 1, .. })));
    }

    #[test]
    fn triangle_tolerance_is_relative() {
        let eps = 1e-12;
        let ok = validate_metric(&[
            vec![0.0, 1.0, 2.0 + eps],
            vec![1.0, 0.0, 1.0],
            vec![2.0 + eps, 1.0, 0.0],
        ]);
        assert!(ok.is_ok());
    }

    #[test]
    fn empty_diameter_rejected() {
        let s = FiniteMetricSpace::from_flat(0, vec![]).unwrap();
        assert_eq!(diameter(&s), Err(Error::EmptySpace));
    }

    #[test]
    fn segment_sampling() {
        let seg = SegmentSpace::new(10.0, 0.1).unwrap();
        assert_eq!(seg.len(), 101);
        assert_eq!(diameter(&seg).unwrap(), 10.0);
        assert_eq!(SegmentSpace::new(6.0, 0.1).unwrap().len(), 61);
        let dense = seg.to_space();
        assert!(FiniteMetricSpace::from_flat(dense.len(), dense.matrix().to_vec()).is_ok());
        // translation invariance along the index axis
        assert_eq!(seg.dist(3, 7), seg.dist(50, 54));
    }

    #[test]
    fn point_cloud_matches_dense() {
        let pc = PointCloud::from_points(&[[0.0, 0.0], [3.0, 4.0], [6.0, 8.0]]);
        assert_eq!(pc.dist(0, 1), 5.0);
        let dense = FiniteMetricSpace::from_metric(&pc).unwrap();
        assert_eq!(dense.dist(0, 2), 10.0);
    }
}
