//! Per-ray kernel scale.
//!
//! For a ray of length `l` the scale `beta` is pinned down implicitly by
//! requiring the radial mass integral to equal `alpha`:
//!
//!   Int_0^l t^(n-1) K(beta t) dt = alpha.
//!
//! The integral is strictly decreasing and convex in `beta`, diverges toward
//! the domain bound, and vanishes as `beta` grows, so the root exists and is
//! unique. `solve_beta` finds it with a safeguarded Newton iteration and
//! `BetaTable` tabulates the solution over `l` for cheap repeated lookups.

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Residual tolerance for the implicit equation, relative to `max(1, alpha)`.
const SOLVE_TOL: f64 = 1e-10;

/// Iteration budget for the main Newton/bisection loop.
const MAX_ITERS: usize = 200;

/// Relative distance from the asymptote at which the lookup grid stops.
const TABLE_TAIL_GAP: f64 = 1e-12;

#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the check
fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() || !(1e-280..=1e280).contains(&alpha) {
        return Err(Error::ParameterError {
            detail: format!("mass parameter alpha must be in [1e-280, 1e280], got {alpha}"),
        });
    }
    Ok(())
}

/// The ray length at which the solved scale crosses zero: `(n alpha)^(1/n)`.
///
/// Shorter rays force a negative scale (the kernel must grow along the ray
/// to hold `alpha` worth of mass), longer rays a positive one.
pub fn zero_crossing_length(n: usize, alpha: f64) -> Result<f64> {
    crate::kernel::check_dim(n)?;
    check_alpha(alpha)?;
    Ok((n as f64 * alpha).powf(1.0 / n as f64))
}

/// The scale of an infinite ray: `(tail_integral(n) / alpha)^(1/n)`.
///
/// This is the supremum of the solved scale over all ray lengths, approached
/// as `l` grows.
pub fn asymptotic_beta(kernel: Kernel, n: usize, alpha: f64) -> Result<f64> {
    kernel.check_rvde_admissible(n)?;
    check_alpha(alpha)?;
    let tail = kernel.tail_integral(n)?;
    Ok(((tail.ln() - alpha.ln()) / n as f64).exp())
}

/// One Newton update for the implicit equation, in the rearranged form
///
///   beta' = beta + (beta / n) (1 - (l^n K(beta l) - n alpha)
///                                / (l^n K(beta l) - n I(beta))).
///
/// This is algebraically `beta - (I(beta) - alpha) / I'(beta)` with the
/// derivative eliminated through `I'(beta) = (l^n K(beta l) - n I(beta)) / beta`.
/// The result may be non-finite when the tangent is degenerate (for example
/// exactly at `beta = 0`); `solve_beta` falls back to bisection there.
pub fn newton_beta_update(kernel: Kernel, beta: f64, l: f64, n: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !l.is_finite() || l <= 0.0 {
        return Err(Error::ParameterError {
            detail: format!("ray length must be positive and finite, got {l}"),
        });
    }
    let i_val = kernel.radial_integral(beta, l, n)?;
    Ok(newton_from_parts(kernel, beta, l, n, alpha, i_val))
}

/// The update above, reusing an already-computed `I(beta)`.
fn newton_from_parts(kernel: Kernel, beta: f64, l: f64, n: usize, alpha: f64, i_val: f64) -> f64 {
    let nf = n as f64;
    let t = (nf * l.ln() + kernel.log_profile(beta * l)).exp();
    beta + (beta / nf) * (1.0 - (t - nf * alpha) / (t - nf * i_val))
}

/// Solve the implicit equation for the scale of a ray of length `l`.
///
/// Newton steps start from the asymptotic scale and are kept inside a
/// bracket around the root; any step that leaves it, stalls, or goes
/// non-finite is replaced by a bisection step. After the residual meets
/// tolerance, a couple of extra Newton steps squash it further so the
/// returned scale is accurate to near machine precision.
pub fn solve_beta(kernel: Kernel, l: f64, n: usize, alpha: f64) -> Result<f64> {
    kernel.check_rvde_admissible(n)?;
    check_alpha(alpha)?;
    if l.is_nan() || l <= 0.0 {
        return Err(Error::ParameterError {
            detail: format!("ray length must be positive, got {l}"),
        });
    }
    if l == f64::INFINITY {
        return asymptotic_beta(kernel, n, alpha);
    }
    let tol = SOLVE_TOL * alpha.max(1.0);
    let beta_inf = asymptotic_beta(kernel, n, alpha)?;
    let bound = kernel.domain_bound() / l;

    fn record(best: &mut (f64, f64), alpha: f64, b: f64, i_val: f64) -> f64 {
        let r = (i_val - alpha).abs();
        if r < best.1 {
            *best = (b, r);
        }
        r
    }
    let mut best = (f64::NAN, f64::INFINITY);

    // Bracket the root: the integral is decreasing, so `lo` holds it above
    // alpha and `hi` below. The asymptotic scale always sits on the hi side;
    // zero does too when the ray is shorter than the crossing length, in
    // which case probes march toward the domain bound (where the integral
    // diverges) to find a lo.
    let mut hi = beta_inf;
    let mut i_hi = kernel.radial_integral(hi, l, n)?;
    let mut cur = hi;
    let mut i_cur = i_hi;
    if record(&mut best, alpha, hi, i_hi) > tol {
        let i_zero = kernel.radial_integral(0.0, l, n)?;
        record(&mut best, alpha, 0.0, i_zero);
        let mut lo = 0.0;
        if i_zero < alpha {
            hi = 0.0;
            i_hi = i_zero;
            let mut found = false;
            for i in 0..1100 {
                let probe = if bound.is_finite() {
                    bound * (1.0 - (-(i as f64 + 1.0)).exp2())
                } else {
                    -(i as f64).exp2() / l
                };
                let i_probe = kernel.radial_integral(probe, l, n)?;
                record(&mut best, alpha, probe, i_probe);
                if i_probe >= alpha {
                    lo = probe;
                    found = true;
                    break;
                }
                hi = probe;
                i_hi = i_probe;
            }
            if !found {
                return Err(Error::ConvergenceError {
                    best: best.0,
                    residual: best.1,
                });
            }
            cur = hi;
            i_cur = i_hi;
        }

        let mut converged = false;
        for _ in 0..MAX_ITERS {
            if cur > lo && cur < hi {
                if i_cur >= alpha {
                    lo = cur;
                } else {
                    hi = cur;
                }
            }
            let cand = newton_from_parts(kernel, cur, l, n, alpha, i_cur);
            let cand = if cand.is_finite() && cand > lo && cand < hi && cand != cur {
                cand
            } else {
                0.5 * (lo + hi)
            };
            cur = cand;
            i_cur = kernel.radial_integral(cur, l, n)?;
            if record(&mut best, alpha, cur, i_cur) <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::ConvergenceError {
                best: best.0,
                residual: best.1,
            });
        }
    }

    // Polish: the residual already meets tolerance, so each further Newton
    // step roughly squares it. Keep the best point seen.
    for _ in 0..2 {
        let prev_best = best.1;
        let cand = newton_from_parts(kernel, cur, l, n, alpha, i_cur);
        if !cand.is_finite() || cand * l <= kernel.domain_bound() {
            break;
        }
        let i_cand = kernel.radial_integral(cand, l, n)?;
        let r = record(&mut best, alpha, cand, i_cand);
        if r >= prev_best {
            break;
        }
        cur = cand;
        i_cur = i_cand;
    }
    Ok(best.0)
}

/// Monotone lookup table for the solved scale as a function of ray length.
///
/// Nodes are log-spaced in `l` from a hundredth of the zero-crossing length
/// out to where the scale has essentially reached its asymptote, and the
/// values are joined with a monotone piecewise cubic in `ln l`. Queries
/// beyond the grid return the asymptote; queries below it fall back to the
/// direct solver (they are rare: such rays carry almost no mass).
#[derive(Debug, Clone)]
pub struct BetaTable {
    kernel: Kernel,
    n: usize,
    alpha: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
    l_min: f64,
    l_max: f64,
    beta_inf: f64,
    zero_l: f64,
}

impl BetaTable {
    pub fn build(kernel: Kernel, n: usize, alpha: f64, grid_size: usize) -> Result<Self> {
        kernel.check_rvde_admissible(n)?;
        check_alpha(alpha)?;
        if grid_size < 16 {
            return Err(Error::ParameterError {
                detail: format!("scale table needs at least 16 nodes, got {grid_size}"),
            });
        }
        let zero_l = zero_crossing_length(n, alpha)?;
        let beta_inf = asymptotic_beta(kernel, n, alpha)?;
        let l_min = zero_l / 100.0;

        // Double the right edge until the solved scale is within a hair of
        // the asymptote. For heavy polynomial tails this can take the grid
        // out many decades, which the log spacing absorbs.
        let mut l_max = zero_l * 2.0;
        for _ in 0..1000 {
            let b = solve_beta(kernel, l_max, n, alpha)?;
            if b >= beta_inf * (1.0 - TABLE_TAIL_GAP) || l_max > 1e250 {
                break;
            }
            l_max *= 2.0;
        }

        let x0_raw = l_min.ln();
        let x1 = l_max.ln();
        let step = (x1 - x0_raw) / (grid_size - 1) as f64;
        // Snap the lattice so the zero-crossing length is exactly a node.
        // The scale vanishes there, and interpolating across that point
        // would smear a knee-sized error onto queries that must see ~0.
        let zx = zero_l.ln();
        let snap_idx = ((zx - x0_raw) / step).round().max(1.0);
        let x0 = zx - snap_idx * step;
        let mut x = Vec::with_capacity(grid_size);
        let mut y = Vec::with_capacity(grid_size);
        for i in 0..grid_size {
            let xi = if i as f64 == snap_idx {
                zx
            } else {
                x0 + step * i as f64
            };
            let mut yi = solve_beta(kernel, xi.exp(), n, alpha)?;
            if let Some(prev) = y.last() {
                // The exact solution is increasing; clamp out solver noise so
                // interpolation is monotone by construction.
                yi = yi.max(*prev);
            }
            x.push(xi);
            y.push(yi);
        }
        let slope = monotone_slopes(&x, &y);
        let l_min = x[0].exp();
        let l_max = x[grid_size - 1].exp();
        Ok(BetaTable {
            kernel,
            n,
            alpha,
            x,
            y,
            slope,
            l_min,
            l_max,
            beta_inf,
            zero_l,
        })
    }

    /// The tabulated scale for a ray of length `l` (`l = inf` allowed).
    pub fn beta(&self, l: f64) -> Result<f64> {
        if l.is_nan() || l <= 0.0 {
            return Err(Error::ParameterError {
                detail: format!("ray length must be positive, got {l}"),
            });
        }
        if l >= self.l_max {
            return Ok(self.beta_inf);
        }
        if l < self.l_min {
            return solve_beta(self.kernel, l, self.n, self.alpha);
        }
        let xq = l.ln();
        // partition_point returns the first node past xq; the interval
        // index is one less, clamped to the last interval for xq == x1.
        let idx = self.x.partition_point(|v| *v <= xq).clamp(1, self.x.len() - 1) - 1;
        let h = self.x[idx + 1] - self.x[idx];
        let t = ((xq - self.x[idx]) / h).clamp(0.0, 1.0);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(self.y[idx] * h00
            + h * self.slope[idx] * h10
            + self.y[idx + 1] * h01
            + h * self.slope[idx + 1] * h11)
    }

    pub fn asymptote(&self) -> f64 {
        self.beta_inf
    }

    pub fn zero_crossing(&self) -> f64 {
        self.zero_l
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Node slopes for a monotone piecewise cubic through increasing data:
/// harmonic-style interior slopes (zero across any flat or non-increasing
/// pair), three-point one-sided estimates at the ends, clipped to keep the
/// cubic inside the data's range.
fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let g = x.len();
    let mut delta = Vec::with_capacity(g - 1);
    for i in 0..g - 1 {
        delta.push((y[i + 1] - y[i]) / (x[i + 1] - x[i]));
    }
    let mut m = vec![0.0; g];
    for i in 1..g - 1 {
        let (d0, d1) = (delta[i - 1], delta[i]);
        if d0 > 0.0 && d1 > 0.0 {
            let (lo, hi) = if d0 < d1 { (d0, d1) } else { (d1, d0) };
            m[i] = 3.0 * d0 * d1 / (hi + 2.0 * lo);
        }
    }
    let end_slope = |d_near: f64, d_far: f64, h_near: f64, h_far: f64| -> f64 {
        let est = ((2.0 * h_near + h_far) * d_near - h_near * d_far) / (h_near + h_far);
        if est <= 0.0 {
            0.0
        } else {
            est.min(3.0 * d_near)
        }
    };
    m[0] = end_slope(delta[0], delta[1], x[1] - x[0], x[2] - x[1]);
    m[g - 1] = end_slope(
        delta[g - 2],
        delta[g - 3],
        x[g - 1] - x[g - 2],
        x[g - 2] - x[g - 3],
    );
    m
}
