//! Radial kernel profiles and their integrals.
//!
//! A kernel here is a one-dimensional profile K with K(0) = 1, strictly
//! decreasing where it matters, evaluated at signed arguments down to a
//! lower domain bound A (-1 for the rational family, -inf otherwise).
//! The quantity everything else is built on is the radial integral
//!
//! ```text
//!     I(beta, l, n) = integral_0^l t^(n-1) K(beta t) dt,
//! ```
//!
//! which this module evaluates in closed form, with adaptive quadrature as
//! a fallback for parameter corners where no stable closed form applies.

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{
    gamma_half_int, ln_gamma_half_int, lower_gamma_series_ratio, reg_gamma_p,
};

/// Relative tolerance target for the series evaluations.
const SERIES_EPS: f64 = 1e-17;

/// Above this |beta * l| the all-positive series for the exponential kernel
/// at negative arguments gives way to the integration-by-parts form.
const EXP_NEG_SERIES_MAX: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// K(t) = exp(-t), defined on all of R.
    Exponential,
    /// K(t) = (1 + t)^(-k), defined for t > -1. `k` must be at least 1;
    /// tail integrability in dimension n additionally needs k > n.
    Rational { k: u32 },
    /// K(t) = exp(-t^2 / 2). Supported for the classical estimators only;
    /// it cannot drive the radial bandwidth equation (see
    /// [`Kernel::check_rvde_admissible`]).
    Gaussian,
}

impl Kernel {
    /// Lower end of the profile's domain.
    pub fn domain_bound(self) -> f64 {
        match self {
            Kernel::Rational { .. } => -1.0,
            _ => f64::NEG_INFINITY,
        }
    }

    /// Short name used in CSV output and error messages.
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Exponential => "exponential",
            Kernel::Rational { .. } => "rational",
            Kernel::Gaussian => "gaussian",
        }
    }

    fn validate(self) -> Result<()> {
        if let Kernel::Rational { k } = self {
            if k < 1 {
                return Err(Error::ParameterError {
                    detail: "rational kernel needs k >= 1".into(),
                });
            }
        }
        Ok(())
    }

    /// K(t). Fails with `DomainError` at or below the domain bound.
    pub fn profile(self, t: f64) -> Result<f64> {
        self.validate()?;
        if t <= self.domain_bound() {
            return Err(Error::DomainError {
                detail: format!("profile argument {t} is at or below {}", self.domain_bound()),
            });
        }
        Ok(match self {
            Kernel::Exponential => (-t).exp(),
            Kernel::Rational { k } => (-(k as f64) * t.ln_1p()).exp(),
            Kernel::Gaussian => (-0.5 * t * t).exp(),
        })
    }

    /// ln K(t) without allocation or domain checks beyond a debug assert.
    /// Hot path for density evaluation; callers guarantee t > A.
    pub fn log_profile(self, t: f64) -> f64 {
        debug_assert!(t > self.domain_bound());
        match self {
            Kernel::Exponential => -t,
            Kernel::Rational { k } => -(k as f64) * t.ln_1p(),
            Kernel::Gaussian => -0.5 * t * t,
        }
    }

    /// K'(t).
    pub fn profile_derivative(self, t: f64) -> Result<f64> {
        self.validate()?;
        if t <= self.domain_bound() {
            return Err(Error::DomainError {
                detail: format!("derivative argument {t} is at or below {}", self.domain_bound()),
            });
        }
        Ok(match self {
            Kernel::Exponential => -(-t).exp(),
            Kernel::Rational { k } => {
                let kf = k as f64;
                -kf * (-(kf + 1.0) * t.ln_1p()).exp()
            }
            Kernel::Gaussian => -t * (-0.5 * t * t).exp(),
        })
    }

    /// integral_0^inf t^(n-1) K(t) dt.
    ///
    /// Exponential: Gamma(n). Rational(k): B(n, k - n) for k > n, divergent
    /// otherwise. Gaussian: 2^(n/2 - 1) Gamma(n/2).
    pub fn tail_integral(self, n: usize) -> Result<f64> {
        self.validate()?;
        check_dim(n)?;
        match self {
            Kernel::Exponential => Ok(gamma_half_int(2 * n as u32)),
            Kernel::Rational { k } => {
                if k as usize <= n {
                    Err(Error::NotIntegrable {
                        detail: format!(
                            "rational tail in dimension {n} needs k > {n}, got k = {k}"
                        ),
                    })
                } else {
                    Ok(ln_beta_int(n as u32, k - n as u32).exp())
                }
            }
            Kernel::Gaussian => {
                Ok((2.0f64).powf(n as f64 / 2.0 - 1.0) * gamma_half_int(n as u32))
            }
        }
    }

    /// Whether this kernel can drive the radial bandwidth equation in
    /// dimension n. The profile must keep t^(n-1) K(t) integrable at +inf
    /// but *not* at the lower domain bound, so that every ray length admits
    /// a bandwidth.
    pub fn check_rvde_admissible(self, n: usize) -> Result<()> {
        self.validate()?;
        check_dim(n)?;
        match self {
            Kernel::Exponential => Ok(()),
            Kernel::Rational { k } => {
                if k as usize <= n {
                    Err(Error::NotIntegrable {
                        detail: format!(
                            "rational kernel with k = {k} has a divergent tail in dimension {n}"
                        ),
                    })
                } else {
                    Ok(())
                }
            }
            Kernel::Gaussian => Err(Error::KernelNotAdmissible {
                detail: "the gaussian profile stays integrable at arbitrarily negative \
                         arguments, so short rays admit no bandwidth solution; use the \
                         exponential or rational kernel"
                    .into(),
            }),
        }
    }

    /// I(beta, l, n) = integral_0^l t^(n-1) K(beta t) dt.
    ///
    /// `l` may be +inf when beta > 0 (and the tail is integrable). Negative
    /// beta is accepted down to the domain limit beta * l > A.
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the check
    pub fn radial_integral(self, beta: f64, l: f64, n: usize) -> Result<f64> {
        self.validate()?;
        check_dim(n)?;
        if !(l > 0.0) {
            return Err(Error::ParameterError {
                detail: format!("ray length must be positive, got {l}"),
            });
        }
        if !beta.is_finite() {
            return Err(Error::DomainError {
                detail: format!("bandwidth must be finite, got {beta}"),
            });
        }
        if l == f64::INFINITY {
            if beta <= 0.0 {
                return Err(Error::NotIntegrable {
                    detail: "infinite ray needs a positive bandwidth".into(),
                });
            }
            // integral_0^inf t^(n-1) K(beta t) dt = tail / beta^n.
            let tail = self.tail_integral(n)?;
            return Ok((tail.ln() - n as f64 * beta.ln()).exp());
        }
        let z = beta * l;
        if z <= self.domain_bound() {
            return Err(Error::DomainError {
                detail: format!(
                    "beta * l = {z} is at or below the domain bound {}",
                    self.domain_bound()
                ),
            });
        }
        if z == 0.0 {
            // K identically 1 on [0, l].
            return Ok(powi_f(l, n) / n as f64);
        }
        match self {
            Kernel::Exponential => exp_radial(beta, l, n, z),
            Kernel::Rational { k } => rational_radial(beta, l, n, z, k)
                .map_or_else(|| self.quadrature_radial(beta, l, n), Ok),
            Kernel::Gaussian => Ok(gaussian_radial(beta, l, n, z)),
        }
    }

    /// Adaptive-quadrature evaluation of the radial integral. Used as the
    /// fallback for closed-form corners and as an independent cross-check.
    ///
    /// The integrand can be a sharp spike near t = 0 (large positive beta),
    /// so the interval is pre-split geometrically before adapting, and the
    /// tolerance is re-tied to the value itself in a second pass.
    pub(crate) fn quadrature_radial(self, beta: f64, l: f64, n: usize) -> Result<f64> {
        let f = |t: f64| {
            let x = if n == 1 { 1.0 } else { powi_f(t, n - 1) };
            x * self.log_profile(beta * t).exp()
        };
        // Panels l * 2^-40 .. l in octaves, plus the stub at the origin.
        // Returns the estimate and the accumulated error bound.
        let run = |abs_tol: f64| -> (f64, f64) {
            let mut acc = 0.0;
            let mut achieved = 0.0;
            let mut hi = l;
            let per_panel = abs_tol / 42.0;
            for last in (0..=40).map(|i| i == 40) {
                let lo = if last { 0.0 } else { 0.5 * hi };
                match quad::integrate(f, lo, hi, per_panel) {
                    Ok(v) => acc += v,
                    Err(e) => {
                        acc += e.value;
                        achieved += e.achieved;
                    }
                }
                hi = lo;
            }
            (acc, achieved)
        };
        // Crude magnitude probe on the octave endpoints plus an interior
        // point. An endpoint lands exactly on boundary spikes, and interior
        // peaks of t^(n-1) profile(beta t) are locally flat, so the nearest
        // probe is off by a bounded factor.
        let mut scale = 0.0f64;
        let mut hi = l;
        for _ in 0..41 {
            scale = scale.max(f(hi).abs() * hi).max(f(0.75 * hi).abs() * hi);
            hi *= 0.5;
        }
        // The pilot pass keys the tolerance to the probed scale; the second
        // pass re-ties it to the pilot's own value, which is meaningful even
        // when the pilot missed its tolerance.
        let pilot_tol = 1e-12 * scale.max(1e-290);
        let (pilot, pilot_ach) = run(pilot_tol);
        if !pilot.is_finite() {
            return Err(Error::IntegrationError {
                achieved: f64::INFINITY,
            });
        }
        let final_tol = 1e-12 * pilot.abs().max(1e-290);
        let (value, achieved) = if final_tol < pilot_tol || pilot_ach > final_tol {
            run(final_tol)
        } else {
            (pilot, pilot_ach)
        };
        if value.is_finite() && achieved <= 4e-12 * value.abs().max(1e-290) {
            Ok(value)
        } else {
            Err(Error::IntegrationError { achieved })
        }
    }
}

/// Surface area of the unit sphere in R^n: 2 pi^(n/2) / Gamma(n/2).
///
/// Computed by the two-step recurrence S(n) = 2 pi / (n - 2) * S(n - 2)
/// from S(1) = 2 and S(2) = 2 pi.
pub fn unit_sphere_area(n: usize) -> f64 {
    assert!(n >= 1, "sphere dimension must be at least 1");
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut k = if n % 2 == 1 { 1 } else { 2 };
    let mut s = if n % 2 == 1 { 2.0 } else { two_pi };
    while k < n {
        k += 2;
        s *= two_pi / (k - 2) as f64;
    }
    s
}

pub(crate) fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::ParameterError {
            detail: "dimension must be at least 1".into(),
        });
    }
    if n > 160 {
        // Gamma(n) overflows f64 shortly past this; refuse early.
        return Err(Error::ParameterError {
            detail: format!("dimension {n} exceeds the supported range (<= 160)"),
        });
    }
    Ok(())
}

/// ln B(a, b) for positive integers.
fn ln_beta_int(a: u32, b: u32) -> f64 {
    ln_gamma_half_int(2 * a) + ln_gamma_half_int(2 * b) - ln_gamma_half_int(2 * (a + b))
}

/// x^n for integer n without powf drift.
fn powi_f(x: f64, n: usize) -> f64 {
    x.powi(n as i32)
}

/// Exponential kernel: all branches are stable to full precision.
fn exp_radial(beta: f64, l: f64, n: usize, z: f64) -> Result<f64> {
    let nf = n as f64;
    if z < 0.0 {
        if -z <= EXP_NEG_SERIES_MAX {
            // Sum_j (-z)^j / (j! (n + j)): every term positive.
            let mut c = 1.0;
            let mut sum = 1.0 / nf;
            for j in 0..100_000u32 {
                c *= -z / (j as f64 + 1.0);
                let term = c / (nf + j as f64 + 1.0);
                sum += term;
                if term < sum * SERIES_EPS {
                    break;
                }
            }
            Ok(powi_f(l, n) * sum)
        } else {
            // Integration by parts; terms decrease since |z| > n here.
            let b = -beta; // > 0
            let ebl = (b * l).exp();
            let mut factor = 1.0; // (n-1)! / (n-1-j)!
            let mut sum = 0.0;
            let mut sign = 1.0;
            for j in 0..n {
                if j > 0 {
                    factor *= (n - j) as f64;
                }
                sum += sign * factor * powi_f(l, n - 1 - j) / powi_f(b, j + 1);
                sign = -sign;
            }
            let tail0 = sign * factorial_f(n - 1) / powi_f(b, n);
            Ok(ebl * sum + tail0)
        }
    } else if z < nf + 1.0 {
        // l^n e^{-z} Sum_j z^j / (n (n+1) ... (n+j)).
        Ok(powi_f(l, n) * (-z).exp() * lower_gamma_series_ratio(nf, z))
    } else {
        // Gamma(n) P(n, z) / beta^n, assembled in log space.
        let ln_val = ln_gamma_half_int(2 * n as u32) - nf * beta.ln();
        Ok(ln_val.exp() * reg_gamma_p(nf, z))
    }
}

fn factorial_f(n: usize) -> f64 {
    let mut acc = 1.0;
    for i in 2..=n {
        acc *= i as f64;
    }
    acc
}

/// Rational kernel. Returns None where no stable closed form applies, in
/// which case the caller falls back to quadrature.
fn rational_radial(beta: f64, l: f64, n: usize, z: f64, k: u32) -> Option<f64> {
    let nf = n as f64;
    let kf = k as f64;
    if z < 0.0 {
        let eps = 1.0 + z;
        let m = n - 1;
        // Substituting w = -beta t turns the integral into
        //   (-beta)^{-n} Int_0^{|z|} w^{n-1} (1-w)^{-k} dw,
        // which blows up like eps^{1-k} as eps = 1 + z -> 0.
        if k as usize > n && eps * (2 * m.max(1)) as f64 <= 1.0 {
            // Exact expansion around the blow-up, with the divergent factor
            // pulled out front:
            //   I = (-beta)^{-n} eps^{1-k} (S + (-1)^n B(n, k-n) eps^{k-1}),
            //   S = Sum_{j=0}^{n-1} binom(n-1, j) (-1)^j eps^j / (k-1-j).
            // Term j of S is eps^j binom(n-1, j) relative to term 0, so with
            // eps <= 1/(2(n-1)) the alternating sum cannot cancel by more
            // than a constant factor.
            let mut binom = 1.0;
            let mut epow = 1.0;
            let mut s = 0.0;
            for j in 0..n {
                if j > 0 {
                    binom *= (n - j) as f64 / j as f64;
                    epow *= -eps;
                }
                s += binom * epow / (kf - 1.0 - j as f64);
            }
            let b_complete = ln_beta_int(n as u32, k - n as u32).exp();
            let signed_b = if n % 2 == 1 { -b_complete } else { b_complete };
            let core = s + signed_b * ((kf - 1.0) * eps.ln()).exp();
            return Some((-nf * (-beta).ln() + (1.0 - kf) * eps.ln() + core.ln()).exp());
        }
        // Sum_j binom(k+j-1, j) |z|^j / (n + j): all positive, but the
        // term count scales like k / eps, so cap and let quadrature take
        // the corner cases this and the edge expansion both miss.
        let mut c = 1.0;
        let mut sum = 1.0 / nf;
        for j in 0..600_000u32 {
            c *= -z * (kf + j as f64) / (j as f64 + 1.0);
            let term = c / (nf + j as f64 + 1.0);
            sum += term;
            if term < sum * SERIES_EPS {
                return Some(powi_f(l, n) * sum);
            }
        }
        None
    } else {
        let z_switch = (4.0 * kf).max(32.0);
        if z <= z_switch || k as usize <= n {
            // Pfaff-transformed series: all terms positive, ratio -> w < 1.
            //   I = l^n / n (1+z)^{-k} Sum_j [prod_i (k+i)/(n+1+i)] w^j.
            let w = z / (1.0 + z);
            let mut c = 1.0;
            let mut sum = 1.0;
            for j in 0..2_000_000u32 {
                c *= w * (kf + j as f64) / (nf + 1.0 + j as f64);
                sum += c;
                if c < sum * SERIES_EPS {
                    let ln_pref = nf * l.ln() - nf.ln() - kf * z.ln_1p();
                    return Some(ln_pref.exp() * sum);
                }
            }
            None
        } else {
            // Large z with k > n: complete integral minus the far tail.
            //   I = B(n, k-n) / beta^n
            //       - l^n z^{-k} Sum_j (-1)^j binom(k+j-1, j) z^{-j} / (k-n+j).
            let complete = (ln_beta_int(n as u32, k - n as u32) - nf * beta.ln()).exp();
            let mut c = 1.0;
            let mut sum = 1.0 / (kf - nf);
            for j in 0..10_000u32 {
                c *= -(kf + j as f64) / ((j as f64 + 1.0) * z);
                let term = c / (kf - nf + j as f64 + 1.0);
                sum += term;
                if term.abs() < sum.abs() * SERIES_EPS {
                    break;
                }
            }
            let tail = (nf * l.ln() - kf * z.ln()).exp() * sum;
            Some(complete - tail)
        }
    }
}

/// Gaussian kernel: symmetric in beta, reduces to a half-argument gamma.
fn gaussian_radial(beta: f64, l: f64, n: usize, z: f64) -> f64 {
    let nf = n as f64;
    let x = 0.5 * z * z;
    if x < 0.5 * nf + 1.0 {
        // l^n/2 e^{-x} Sum_j x^j / ((n/2) (n/2+1) ... (n/2+j)).
        powi_f(l, n) * 0.5 * (-x).exp() * lower_gamma_series_ratio(0.5 * nf, x)
    } else {
        // 2^(n/2-1) Gamma(n/2) P(n/2, x) / |beta|^n.
        let ln_val = (0.5 * nf - 1.0) * std::f64::consts::LN_2
            + ln_gamma_half_int(n as u32)
            - nf * beta.abs().ln();
        ln_val.exp() * reg_gamma_p(0.5 * nf, x)
    }
}
