//! The radial Voronoi density estimator.
//!
//! Each data point owns its Voronoi cell. A query point is scored by the
//! cell it falls in: walk the ray from the owning generator through the
//! query to where it leaves the cell, look up the kernel scale for that ray
//! length, and evaluate the kernel at the query's distance from the
//! generator. The scale is chosen per ray so that every cell carries mass
//! exactly `1/m`, which makes the whole thing a continuous probability
//! density with tunable concentration `alpha`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::beta::BetaTable;
use crate::error::{Error, Result};
use crate::geometry::{gabriel_graph, random_unit_direction, PointSet};
use crate::kernel::{unit_sphere_area, Kernel};
use crate::seeding::derive_seed;

/// Lookup-table resolution used when the caller does not override it.
pub const DEFAULT_TABLE_GRID: usize = 256;

/// Samples drawn per independently seeded chunk, so output is identical
/// for any thread count.
const SAMPLE_BLOCK: usize = 1024;

/// Anything that scores points with a log density.
pub trait DensityModel {
    fn dim(&self) -> usize;
    /// Natural log of the density at `x`. `-inf` is a valid answer: a point
    /// where the model assigns no mass.
    fn log_density(&self, x: &[f64]) -> Result<f64>;
}

/// A fitted radial Voronoi density estimator. Immutable once built.
#[derive(Debug, Clone)]
pub struct RvdeModel {
    points: PointSet,
    table: BetaTable,
    /// ln(alpha * m * area(S^(n-1))): the global normalizer.
    log_norm: f64,
}

impl RvdeModel {
    pub fn fit(points: PointSet, kernel: Kernel, alpha: f64) -> Result<Self> {
        Self::fit_with_table_grid(points, kernel, alpha, DEFAULT_TABLE_GRID)
    }

    pub fn fit_with_table_grid(
        points: PointSet,
        kernel: Kernel,
        alpha: f64,
        grid_size: usize,
    ) -> Result<Self> {
        let n = points.dim();
        let table = BetaTable::build(kernel, n, alpha, grid_size)?;
        let log_norm =
            alpha.ln() + (points.len() as f64).ln() + unit_sphere_area(n).ln();
        Ok(RvdeModel {
            points,
            table,
            log_norm,
        })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn kernel(&self) -> Kernel {
        self.table.kernel()
    }

    pub fn alpha(&self) -> f64 {
        self.table.alpha()
    }

    /// The ray length at which the kernel scale crosses zero; half the
    /// critical generator separation for mode merging.
    pub fn crossing_length(&self) -> f64 {
        self.table.zero_crossing()
    }

    /// The generator owning `x`, the distance to it, and the length of the
    /// ray from the generator through `x` out to the cell boundary.
    fn locate(&self, x: &[f64]) -> Result<(usize, f64, f64)> {
        let (owner, dist) = self.points.nearest(x)?;
        if dist == 0.0 {
            return Ok((owner, 0.0, f64::INFINITY));
        }
        let p = self.points.row(owner);
        let dir: Vec<f64> = x.iter().zip(p).map(|(xi, pi)| (xi - pi) / dist).collect();
        // The query sits on its own ray, so the exit cannot be nearer than
        // the query itself; the max guards roundoff in the exit solve.
        let l = self.points.ray_length(owner, &dir)?.max(dist);
        Ok((owner, dist, l))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// Draw `count` points. Chunked so the result depends only on `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        let n = self.points.dim();
        let blocks = count.div_ceil(SAMPLE_BLOCK);
        let chunks = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let take = SAMPLE_BLOCK.min(count - b * SAMPLE_BLOCK);
                self.sample_block(derive_seed(seed, &[b as u64]), take)
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let mut out = Vec::with_capacity(count * n);
        for c in chunks {
            out.extend_from_slice(&c);
        }
        Ok(out)
    }

    fn sample_block(&self, seed: u64, count: usize) -> Result<Vec<f64>> {
        let n = self.points.dim();
        let m = self.points.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count * n);
        let mut dir = vec![0.0; n];
        for _ in 0..count {
            let owner = rng.gen_range(0..m);
            random_unit_direction(&mut rng, &mut dir);
            let l = self.points.ray_length(owner, &dir)?;
            let u: f64 = rng.gen::<f64>().min(1.0 - 1e-12);
            let t = self.sample_radius(l, u)?;
            let p = self.points.row(owner);
            out.extend(p.iter().zip(&dir).map(|(pi, di)| pi + t * di));
        }
        Ok(out)
    }

    /// Invert the radial mass profile along a ray of length `l` at quantile
    /// `u`: the `t` with `I(beta, t) = u I(beta, l)`.
    fn sample_radius(&self, l: f64, u: f64) -> Result<f64> {
        let n = self.points.dim();
        let kernel = self.table.kernel();
        let beta = self.table.beta(l)?;
        let total = kernel.radial_integral(beta, l, n)?;
        let target = u * total;
        let mut hi = if l.is_finite() {
            l
        } else {
            // Unbounded ray: grow until the bracket holds the quantile.
            // beta is the asymptotic scale here, so mass accumulates on the
            // crossing-length scale and the doubling terminates fast.
            let mut hi = self.table.zero_crossing();
            for _ in 0..4000 {
                if kernel.radial_integral(beta, hi, n)? >= target {
                    break;
                }
                hi *= 2.0;
            }
            hi
        };
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if kernel.radial_integral(beta, mid, n)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Local maxima of the density, classified by the pair structure of the
    /// generators. A generator pair interacts when it is Gabriel-adjacent
    /// with separation under twice the crossing length; the density then
    /// peaks at the pair midpoint instead of at the generators, and at the
    /// critical separation an entire segment of the bisector ray is flat.
    pub fn modes(&self) -> Result<ModeSet> {
        let graph = gabriel_graph(&self.points)?;
        let two_eps = 2.0 * self.table.zero_crossing();
        let tol = 1e-9 * (1.0 + two_eps);
        let m = self.points.len();
        let mut midpoint_modes = Vec::new();
        let mut segment_modes = Vec::new();
        let mut attached = vec![false; m];
        for e in graph.edges() {
            if (e.length - two_eps).abs() <= tol {
                segment_modes.push((e.a, e.b));
            } else if e.length < two_eps {
                midpoint_modes.push((e.a, e.b));
            } else {
                continue;
            }
            attached[e.a] = true;
            attached[e.b] = true;
        }
        let point_modes = (0..m).filter(|i| !attached[*i]).collect();
        Ok(ModeSet {
            point_modes,
            midpoint_modes,
            segment_modes,
        })
    }
}

impl DensityModel for RvdeModel {
    fn dim(&self) -> usize {
        self.points.dim()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        let (_, dist, l) = self.locate(x)?;
        if dist == 0.0 {
            return Ok(-self.log_norm);
        }
        let beta = self.table.beta(l)?;
        Ok(self.table.kernel().log_profile(beta * dist) - self.log_norm)
    }
}

/// Where the fitted density peaks.
///
/// `point_modes` are generator indices whose cells peak at the generator
/// itself. `midpoint_modes` are generator pairs whose shared density peak
/// sits at the pair midpoint. `segment_modes` are pairs at the critical
/// separation where the density is flat along the whole open segment
/// between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSet {
    pub point_modes: Vec<usize>,
    pub midpoint_modes: Vec<(usize, usize)>,
    pub segment_modes: Vec<(usize, usize)>,
}

/// Pick the concentration from the data: take the Gabriel edge lengths,
/// read off the type-7 quantile at rank ratio `(m - 1) / |E|`, call that
/// the critical pair separation, and back out the `alpha` that makes half
/// of it the crossing length.
///
/// The ratio is chosen so that, on data whose Gabriel graph is a tree
/// (`|E| = m - 1`), the quantile is the longest edge and every pair
/// interacts; denser graphs push it down the order statistics.
pub fn select_alpha(points: &PointSet) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::NeedsTwoPoints);
    }
    let graph = gabriel_graph(points)?;
    let mut lengths = graph.edge_lengths();
    lengths.sort_by(|a, b| a.partial_cmp(b).expect("edge lengths are finite"));
    let q = ((points.len() - 1) as f64 / lengths.len() as f64).clamp(0.0, 1.0);
    let two_eps = type7_quantile(&lengths, q);
    let n = points.dim();
    let eps = 0.5 * two_eps;
    Ok(eps.powi(n as i32) / n as f64)
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule:
/// rank `(len - 1) q` split into floor and fractional parts).
fn type7_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let idx = h.floor() as usize;
    let frac = h - idx as f64;
    if idx + 1 < sorted.len() {
        sorted[idx] * (1.0 - frac) + sorted[idx + 1] * frac
    } else {
        sorted[sorted.len() - 1]
    }
}
