//! Point sets, nearest-generator queries, Voronoi ray casting, and the
//! Gabriel graph.
//!
//! Cells are never constructed explicitly: everything the estimators need
//! is the nearest generator of a query point and the distance from a
//! generator to its cell boundary along a ray.

mod kdtree;

use crate::error::{Error, Result};
use kdtree::KdTree;
use rayon::prelude::*;

/// Tolerance for "is this direction unit length".
const UNIT_NORM_TOL: f64 = 1e-9;

/// An immutable set of m distinct points in R^n with a spatial index.
#[derive(Clone)]
pub struct PointSet {
    coords: Vec<f64>, // row-major, m * n
    m: usize,
    n: usize,
    tree: KdTree,
}

impl std::fmt::Debug for PointSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PointSet")
            .field("points", &self.m)
            .field("dim", &self.n)
            .finish()
    }
}


impl PointSet {
    /// Build from row-major coordinates. Fails on an empty set, a ragged or
    /// zero dimension, non-finite values, or bitwise-duplicate rows.
    pub fn new(coords: Vec<f64>, n: usize) -> Result<PointSet> {
        if n == 0 {
            return Err(Error::ParameterError {
                detail: "points need at least one coordinate".into(),
            });
        }
        if coords.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !coords.len().is_multiple_of(n) {
            return Err(Error::DimensionError {
                expected: n,
                got: coords.len() % n,
            });
        }
        let m = coords.len() / n;
        if let Some(bad) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::ParameterError {
                detail: format!(
                    "non-finite coordinate at row {}, column {}",
                    bad / n,
                    bad % n
                ),
            });
        }
        // Duplicate scan: sort row ids lexicographically, compare neighbors.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            let ra = &coords[a * n..(a + 1) * n];
            let rb = &coords[b * n..(b + 1) * n];
            ra.partial_cmp(rb).unwrap().then(a.cmp(&b))
        });
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            if coords[a * n..(a + 1) * n] == coords[b * n..(b + 1) * n] {
                return Err(Error::DuplicatePoints {
                    first: a.min(b),
                    second: a.max(b),
                });
            }
        }
        let tree = KdTree::build(&coords, m, n);
        Ok(PointSet { coords, m, n, tree })
    }

    /// Build from a list of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<PointSet> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = rows[0].len();
        let mut coords = Vec::with_capacity(rows.len() * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionError {
                    expected: n,
                    got: r.len(),
                });
            }
            coords.extend_from_slice(r);
        }
        PointSet::new(coords, n)
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.n)
    }

    /// Flat row-major view of the coordinates.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionError {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Index of the generator nearest to `x` and the distance to it.
    /// Equidistant ties resolve to the lowest row id.
    pub fn nearest(&self, x: &[f64]) -> Result<(usize, f64)> {
        self.check_dim(x)?;
        let (id, d2) = self.tree.nearest(&self.coords, x);
        Ok((id, d2.sqrt()))
    }

    /// The k nearest generators by distance, ascending.
    pub fn k_nearest(&self, x: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
        self.check_dim(x)?;
        Ok(self
            .tree
            .k_nearest(&self.coords, x, k)
            .into_iter()
            .map(|(i, d2)| (i, d2.sqrt()))
            .collect())
    }

    /// Distance from generator `p` to its Voronoi cell boundary along the
    /// unit direction `dir`; +inf when the cell is unbounded that way.
    ///
    /// For each other generator q, the ray exits q's half-space at
    /// |q - p|^2 / (2 <dir, q - p>); generators with a non-positive
    /// projection never cut the ray.
    pub fn ray_length(&self, p: usize, dir: &[f64]) -> Result<f64> {
        self.check_dim(dir)?;
        assert!(p < self.m, "generator index out of range");
        let norm2: f64 = dir.iter().map(|v| v * v).sum();
        if !norm2.is_finite() || (norm2.sqrt() - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::DegenerateDirection);
        }
        let prow = self.row(p);
        let mut best = f64::INFINITY;
        for q in 0..self.m {
            if q == p {
                continue;
            }
            let qrow = &self.coords[q * self.n..(q + 1) * self.n];
            let mut dot = 0.0;
            let mut d2 = 0.0;
            for j in 0..self.n {
                let diff = qrow[j] - prow[j];
                dot += dir[j] * diff;
                d2 += diff * diff;
            }
            if dot > 0.0 {
                let l = d2 / (2.0 * dot);
                if l < best {
                    best = l;
                }
            }
        }
        Ok(best)
    }
}

/// Fill `out` with a uniformly random unit vector: normalize a standard
/// normal draw, retrying the (measure-zero) case of a negligible norm.
pub(crate) fn random_unit_direction<R: rand::Rng>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm_sq = 0.0;
        for d in out.iter_mut() {
            *d = rng.sample::<f64, _>(rand_distr::StandardNormal);
            norm_sq += *d * *d;
        }
        if norm_sq > 1e-24 {
            let inv = norm_sq.sqrt().recip();
            for d in out.iter_mut() {
                *d *= inv;
            }
            return;
        }
    }
}

/// An undirected edge of the Gabriel graph, with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GabrielEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// The Gabriel graph of a point set: an edge joins p and q exactly when the
/// open ball on the segment's diameter contains no third point. Points at
/// distance exactly d(p, q) / 2 from the midpoint do not remove the edge.
#[derive(Debug, Clone)]
pub struct GabrielGraph {
    edges: Vec<GabrielEdge>,
    vertices: usize,
}

impl GabrielGraph {
    pub fn edges(&self) -> &[GabrielEdge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.length).collect()
    }
}

/// Build the Gabriel graph. Each candidate pair is tested through the
/// nearest non-endpoint neighbor of its midpoint, which decides the open
/// ball test in O(log m) on average.
pub fn gabriel_graph(ps: &PointSet) -> Result<GabrielGraph> {
    let m = ps.len();
    let n = ps.dim();
    let per_a: Vec<Vec<GabrielEdge>> = (0..m)
        .into_par_iter()
        .map(|a| {
            let mut out = Vec::new();
            let arow = ps.row(a);
            let mut mid = vec![0.0; n];
            for b in (a + 1)..m {
                let brow = ps.row(b);
                let mut d2 = 0.0;
                for j in 0..n {
                    let diff = brow[j] - arow[j];
                    d2 += diff * diff;
                    mid[j] = 0.5 * (arow[j] + brow[j]);
                }
                let blocked = ps
                    .tree
                    .k_nearest(&ps.coords, &mid, 3.min(m))
                    .into_iter()
                    .filter(|&(i, _)| i != a && i != b)
                    .any(|(_, r2)| r2 < d2 / 4.0);
                if !blocked {
                    out.push(GabrielEdge {
                        a,
                        b,
                        length: d2.sqrt(),
                    });
                }
            }
            out
        })
        .collect();
    Ok(GabrielGraph {
        edges: per_a.into_iter().flatten().collect(),
        vertices: m,
    })
}
