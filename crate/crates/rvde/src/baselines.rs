//! Classical density estimators used as comparison points: fixed-bandwidth
//! kernel density estimation, its adaptive per-point variant, and the
//! cell-normalized Voronoi estimator whose cell volumes come from Monte
//! Carlo ray integration. All three share the kernel profiles and the
//! geometry of the main estimator, and all score queries in log space so
//! small densities degrade gracefully instead of flushing to zero.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::DensityModel;
use crate::geometry::{random_unit_direction, PointSet};
use crate::kernel::{unit_sphere_area, Kernel};
use crate::seeding::derive_seed;

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::ParameterError {
            detail: format!("bandwidth must be positive and finite, got {h}"),
        });
    }
    Ok(())
}

/// ln(sum(exp(v))) without overflow; -inf when every term is -inf.
fn log_sum_exp(values: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for v in values {
        if *v > max {
            max = *v;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = 0.0;
    for v in values {
        acc += (v - max).exp();
    }
    max + acc.ln()
}

/// Fixed-bandwidth kernel density estimator with a radially symmetric
/// kernel: the average over data points of `K(|x - p| / h)`, divided by
/// the analytic normalizer `h^n * area(S^(n-1)) * tail_integral(n)`.
#[derive(Debug, Clone)]
pub struct KdeModel {
    points: PointSet,
    kernel: Kernel,
    h: f64,
    /// ln of the full normalizer, m included.
    log_norm: f64,
}

impl KdeModel {
    pub fn fit(points: PointSet, kernel: Kernel, h: f64) -> Result<Self> {
        check_bandwidth(h)?;
        let n = points.dim();
        let tail = kernel.tail_integral(n)?;
        let log_norm = (points.len() as f64).ln()
            + n as f64 * h.ln()
            + unit_sphere_area(n).ln()
            + tail.ln();
        Ok(KdeModel {
            points,
            kernel,
            h,
            log_norm,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }
}

impl DensityModel for KdeModel {
    fn dim(&self) -> usize {
        self.points.dim()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        let terms: Vec<f64> = self
            .points
            .rows()
            .map(|p| self.kernel.log_profile(dist(x, p) / self.h))
            .collect();
        Ok(log_sum_exp(&terms) - self.log_norm)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc.sqrt()
}

/// Per-point bandwidth factors from pilot densities: each factor is
/// `sqrt(g / f_pilot)` with `g` the geometric mean of the pilot densities,
/// so points in dense regions get narrower kernels. Input and output both
/// live in log space until the final exp.
pub(crate) fn lambda_factors(pilot_log: &[f64]) -> (f64, Vec<f64>) {
    let ln_g = pilot_log.iter().sum::<f64>() / pilot_log.len() as f64;
    let factors = pilot_log
        .iter()
        .map(|lf| (0.5 * (ln_g - lf)).exp())
        .collect();
    (ln_g, factors)
}

/// Adaptive kernel density estimator: a pilot pass with the fixed-bandwidth
/// model sets a per-point bandwidth `h * lambda_p`, then the final density
/// averages kernels of those varying widths.
#[derive(Debug, Clone)]
pub struct AdaKdeModel {
    points: PointSet,
    kernel: Kernel,
    h: f64,
    local_h: Vec<f64>,
    ln_g: f64,
    /// ln(m * area(S^(n-1)) * tail_integral(n)); the h^n part is per point.
    log_norm: f64,
}

impl AdaKdeModel {
    pub fn fit(points: PointSet, kernel: Kernel, h: f64) -> Result<Self> {
        let pilot = KdeModel::fit(points, kernel, h)?;
        let pilot_log: Vec<f64> = pilot
            .points
            .rows()
            .map(|p| pilot.log_density(p))
            .collect::<Result<_>>()?;
        // The contract is on the density itself: a pilot value that flushes
        // to zero in linear space would blow the bandwidth factor up to
        // nonsense, so it is an error naming the offending point.
        for (i, lf) in pilot_log.iter().enumerate() {
            if lf.exp() == 0.0 {
                return Err(Error::PilotUnderflow { point: i });
            }
        }
        let (ln_g, factors) = lambda_factors(&pilot_log);
        let local_h = factors.iter().map(|f| h * f).collect();
        let n = pilot.points.dim();
        let log_norm = (pilot.points.len() as f64).ln()
            + unit_sphere_area(n).ln()
            + kernel.tail_integral(n)?.ln();
        Ok(AdaKdeModel {
            points: pilot.points,
            kernel,
            h,
            local_h,
            ln_g,
            log_norm,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn local_bandwidths(&self) -> &[f64] {
        &self.local_h
    }

    pub fn log_geometric_mean(&self) -> f64 {
        self.ln_g
    }
}

impl DensityModel for AdaKdeModel {
    fn dim(&self) -> usize {
        self.points.dim()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        let n = self.points.dim() as f64;
        let terms: Vec<f64> = self
            .points
            .rows()
            .zip(&self.local_h)
            .map(|(p, hp)| self.kernel.log_profile(dist(x, p) / hp) - n * hp.ln())
            .collect();
        Ok(log_sum_exp(&terms) - self.log_norm)
    }
}

/// Voronoi density estimator with a kernel shape: inside the cell of
/// generator `p` the density is `K(|x - p| / h)` divided by the kernel's
/// integral over that cell, so every cell carries mass exactly `1/m`. The
/// per-cell integrals are estimated by Monte Carlo over ray directions,
/// each ray contributing an exact one-dimensional integral. The result is
/// a genuine density but a discontinuous one: the normalizer jumps at every
/// cell boundary.
#[derive(Debug, Clone)]
pub struct CvdeModel {
    points: PointSet,
    kernel: Kernel,
    h: f64,
    mc_samples: usize,
    log_volumes: Vec<f64>,
    seed: u64,
}

impl CvdeModel {
    pub fn fit(
        points: PointSet,
        kernel: Kernel,
        h: f64,
        mc_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        check_bandwidth(h)?;
        if mc_samples == 0 {
            return Err(Error::ParameterError {
                detail: "cell volume estimation needs at least one direction sample".into(),
            });
        }
        let n = points.dim();
        // Fails up front for kernels whose tails cannot normalize an
        // unbounded cell in this dimension.
        kernel.tail_integral(n)?;
        let area = unit_sphere_area(n);
        let beta = 1.0 / h;
        let log_volumes = (0..points.len())
            .into_par_iter()
            .map(|p| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[p as u64]));
                let mut dir = vec![0.0; n];
                let mut acc = 0.0;
                for _ in 0..mc_samples {
                    random_unit_direction(&mut rng, &mut dir);
                    let l = points.ray_length(p, &dir)?;
                    acc += kernel.radial_integral(beta, l, n)?;
                }
                Ok((area * acc / mc_samples as f64).ln())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(CvdeModel {
            points,
            kernel,
            h,
            mc_samples,
            log_volumes,
            seed,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn mc_samples(&self) -> usize {
        self.mc_samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// ln of the estimated kernel integral over cell `i`.
    pub fn log_volume(&self, i: usize) -> f64 {
        self.log_volumes[i]
    }
}

impl DensityModel for CvdeModel {
    fn dim(&self) -> usize {
        self.points.dim()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        let (owner, d) = self.points.nearest(x)?;
        Ok(self.kernel.log_profile(d / self.h)
            - (self.points.len() as f64).ln()
            - self.log_volumes[owner])
    }
}

/// Put the main estimator's concentration parameter on the same axis as
/// the baselines' bandwidth: `alpha = h^n * integral_0^inf K(t) dt`, with
/// the one-dimensional tail integral regardless of `n`. Strictly increasing
/// and continuous in `h`.
pub fn alpha_from_bandwidth(kernel: Kernel, n: usize, h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    let tail1 = kernel.tail_integral(1)?;
    Ok(h.powi(n as i32) * tail1)
}
