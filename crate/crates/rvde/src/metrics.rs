//! Test-set scoring: average log-likelihood with explicit underflow
//! accounting, and the empirical squared-Hellinger average against a known
//! ground truth. Evaluation parallelizes over test points but reduces
//! sequentially, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::error::Result;
use crate::estimator::DensityModel;
use crate::geometry::PointSet;

/// Mean test log-likelihood plus spread and failure accounting.
///
/// A test point where the model reports zero density (log density of
/// negative infinity) is an underflow: it is counted, and the mean is
/// negative infinity because that is what the arithmetic says. The spread
/// is the population standard deviation over test points, infinite when
/// any point underflowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikSummary {
    pub mean: f64,
    pub std_over_test: f64,
    pub underflows: usize,
}

pub fn evaluate_loglik<M>(model: &M, test: &PointSet) -> Result<LoglikSummary>
where
    M: DensityModel + Sync + ?Sized,
{
    let values: Vec<f64> = test
        .rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|row| model.log_density(row))
        .collect::<Result<_>>()?;
    let underflows = values.iter().filter(|v| **v == f64::NEG_INFINITY).count();
    if underflows > 0 {
        return Ok(LoglikSummary {
            mean: f64::NEG_INFINITY,
            std_over_test: f64::INFINITY,
            underflows,
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(LoglikSummary {
        mean,
        std_over_test: var.sqrt(),
        underflows,
    })
}

/// Average over test points of (sqrt(f) - sqrt(rho))^2 / 2, where `f` is
/// the model density and `rho` the ground truth. A test-set average, not
/// the integral Hellinger distance: no volume element is attached.
pub fn evaluate_hellinger<M, T>(model: &M, truth: T, test: &PointSet) -> Result<f64>
where
    M: DensityModel + Sync + ?Sized,
    T: Fn(&[f64]) -> f64 + Sync,
{
    let terms: Vec<f64> = test
        .rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|row| {
            let f = model.log_density(row)?;
            let rho = truth(row);
            let d = (0.5 * f).exp() - (0.5 * rho).exp();
            Ok(d * d)
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() / (2.0 * terms.len() as f64))
}
