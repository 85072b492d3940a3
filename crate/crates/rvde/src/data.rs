//! Synthetic dataset generators with exact ground-truth densities, CSV
//! ingestion for real data, and seeded train/test splitting. Everything
//! randomized is a pure function of its seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution, Exp1, StandardNormal};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::seeding::derive_seed;
use crate::special::ln_gamma;

/// Offset of the two mixture component means along the first axis.
const MIXTURE_OFFSET: f64 = 0.5;
/// Spread of the tight component, centered at -MIXTURE_OFFSET e1.
const MIXTURE_SIGMA_TIGHT: f64 = 0.1;
/// Spread of the wide component, centered at +MIXTURE_OFFSET e1.
const MIXTURE_SIGMA_WIDE: f64 = 10.0;

const LN_2PI: f64 = 1.8378770664093453;

/// The synthetic families the harness can generate.
///
/// `Dirichlet` points are (n+1)-part compositions with every concentration
/// equal to 1/(n+1), stored with the last part dropped so they carry a
/// proper density on an n-dimensional set. `Mixture` is an equal-weight
/// pair of isotropic Gaussians at -0.5 e1 (spread 0.1) and +0.5 e1
/// (spread 10).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Laplace,
    Dirichlet,
    Mixture,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Laplace => "laplace",
            Family::Dirichlet => "dirichlet",
            Family::Mixture => "mixture",
        }
    }
}

/// A synthetic distribution: a family plus the ambient dimension of the
/// stored points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub family: Family,
    pub n: usize,
}

/// A train/test pair drawn from one distribution with one master seed.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub spec: SyntheticSpec,
    pub train: PointSet,
    pub test: PointSet,
    pub seed: u64,
}

/// Draw independent train and test sets. The two sets use separate
/// derived streams, so resizing one never disturbs the other.
pub fn generate(
    spec: SyntheticSpec,
    m_train: usize,
    m_test: usize,
    seed: u64,
) -> Result<LabeledSample> {
    if m_train == 0 || m_test == 0 {
        return Err(Error::ParameterError {
            detail: "train and test sizes must be at least 1".into(),
        });
    }
    if spec.n == 0 {
        return Err(Error::ParameterError {
            detail: "dimension must be at least 1".into(),
        });
    }
    let train = draw_matrix(spec, m_train, derive_seed(seed, &[0]))?;
    let test = draw_matrix(spec, m_test, derive_seed(seed, &[1]))?;
    Ok(LabeledSample {
        spec,
        train: PointSet::new(train, spec.n)?,
        test: PointSet::new(test, spec.n)?,
        seed,
    })
}

fn draw_matrix(spec: SyntheticSpec, count: usize, stream_seed: u64) -> Result<Vec<f64>> {
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let mut out = Vec::with_capacity(count * n);
    match spec.family {
        Family::Gaussian => {
            for _ in 0..count * n {
                out.push(rng.sample::<f64, _>(StandardNormal));
            }
        }
        Family::Laplace => {
            // Standard Laplace per coordinate: an exponential magnitude
            // with a random sign.
            for _ in 0..count * n {
                let e: f64 = rng.sample(Exp1);
                out.push(if rng.gen_bool(0.5) { e } else { -e });
            }
        }
        Family::Dirichlet => {
            let a = 1.0 / (n + 1) as f64;
            let dir = Dirichlet::new(&vec![a; n + 1]).expect("positive concentration");
            for _ in 0..count {
                let parts = dir.sample(&mut rng);
                out.extend_from_slice(&parts[..n]);
            }
        }
        Family::Mixture => {
            for _ in 0..count {
                let tight = rng.gen_bool(0.5);
                let (mu, sigma) = if tight {
                    (-MIXTURE_OFFSET, MIXTURE_SIGMA_TIGHT)
                } else {
                    (MIXTURE_OFFSET, MIXTURE_SIGMA_WIDE)
                };
                for j in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    let mean = if j == 0 { mu } else { 0.0 };
                    out.push(mean + sigma * z);
                }
            }
        }
    }
    Ok(out)
}

/// Exact log density of the named distribution at `x`; `-inf` outside the
/// support.
pub fn true_log_density(spec: SyntheticSpec, x: &[f64]) -> f64 {
    let n = spec.n;
    debug_assert_eq!(x.len(), n);
    match spec.family {
        Family::Gaussian => {
            let sq: f64 = x.iter().map(|v| v * v).sum();
            -0.5 * sq - 0.5 * n as f64 * LN_2PI
        }
        Family::Laplace => x.iter().map(|v| -v.abs() - std::f64::consts::LN_2).sum(),
        Family::Dirichlet => {
            let a = 1.0 / (n + 1) as f64;
            let mut sum = 0.0;
            let mut log_terms = 0.0;
            for v in x {
                if *v <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                sum += v;
                log_terms += v.ln();
            }
            let rest = 1.0 - sum;
            if rest <= 0.0 {
                return f64::NEG_INFINITY;
            }
            // Concentrations sum to 1, so the normalizer is just the
            // product of the per-part gamma factors.
            (a - 1.0) * (log_terms + rest.ln()) - (n + 1) as f64 * ln_gamma(a)
        }
        Family::Mixture => {
            let mut sq_tight = 0.0;
            let mut sq_wide = 0.0;
            for (j, v) in x.iter().enumerate() {
                let mean = if j == 0 { MIXTURE_OFFSET } else { 0.0 };
                let dt = v + mean;
                let dw = v - mean;
                sq_tight += dt * dt;
                sq_wide += dw * dw;
            }
            let nf = n as f64;
            let lt = -0.5 * sq_tight / (MIXTURE_SIGMA_TIGHT * MIXTURE_SIGMA_TIGHT)
                - nf * MIXTURE_SIGMA_TIGHT.ln();
            let lw = -0.5 * sq_wide / (MIXTURE_SIGMA_WIDE * MIXTURE_SIGMA_WIDE)
                - nf * MIXTURE_SIGMA_WIDE.ln();
            let hi = lt.max(lw);
            hi + ((lt - hi).exp() + (lw - hi).exp()).ln() - std::f64::consts::LN_2
                - 0.5 * nf * LN_2PI
        }
    }
}

/// Load a rectangular numeric CSV into a point set. Comma delimiter, '.'
/// decimals. A first row that fails to parse as numbers is treated as a
/// header and skipped; any later parse failure, ragged row, or non-finite
/// cell is an error carrying its 1-based row number.
pub fn load_csv(path: &Path) -> Result<PointSet> {
    let text = std::fs::read_to_string(path)?;
    let mut width = None;
    let mut rows: Vec<f64> = Vec::new();
    let mut count = 0usize;
    let mut header_skipped = false;
    for (idx, line) in text.lines().enumerate() {
        let row_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let mut parsed = Vec::with_capacity(cells.len());
        // Separates "not a number at all" (a possible header) from a
        // numeric but non-finite cell (always an error).
        let mut unparsable = None;
        let mut non_finite = None;
        for c in &cells {
            match c.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => parsed.push(v),
                Ok(v) => {
                    non_finite = Some(format!("non-finite value {v}"));
                    break;
                }
                Err(_) => {
                    unparsable = Some(format!("cell {:?} is not a number", c.trim()));
                    break;
                }
            }
        }
        if let Some(detail) = non_finite {
            return Err(Error::ParseError { row: row_no, detail });
        }
        if let Some(detail) = unparsable {
            if count == 0 && !header_skipped {
                header_skipped = true;
                continue;
            }
            return Err(Error::ParseError { row: row_no, detail });
        }
        match width {
            None => width = Some(parsed.len()),
            Some(w) if w != parsed.len() => {
                return Err(Error::ParseError {
                    row: row_no,
                    detail: format!("expected {w} columns, got {}", parsed.len()),
                });
            }
            _ => {}
        }
        rows.extend_from_slice(&parsed);
        count += 1;
    }
    let width = width.ok_or(Error::EmptyDataset)?;
    PointSet::new(rows, width)
}

/// Render a point set as plain numeric CSV, one row per point. Floats are
/// written with enough digits to round-trip exactly through `load_csv`.
pub fn points_to_csv(ps: &PointSet) -> String {
    let mut out = String::new();
    for row in ps.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

/// Rescale every column to [0, 1] by its own min and max. Constant columns
/// collapse to 0.
pub fn min_max_normalize(ps: &PointSet) -> Result<PointSet> {
    let n = ps.dim();
    let m = ps.len();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for row in ps.rows() {
        for j in 0..n {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let mut out = Vec::with_capacity(m * n);
    for row in ps.rows() {
        for j in 0..n {
            let span = hi[j] - lo[j];
            out.push(if span > 0.0 { (row[j] - lo[j]) / span } else { 0.0 });
        }
    }
    PointSet::new(out, n)
}

/// Draw two disjoint row subsets of exact sizes, uniformly without
/// replacement. Deterministic per seed; each part keeps its rows in the
/// original relative order.
pub fn sample_rows(
    ps: &PointSet,
    m_train: usize,
    m_test: usize,
    seed: u64,
) -> Result<(PointSet, PointSet)> {
    let m = ps.len();
    if m_train == 0 || m_test == 0 {
        return Err(Error::ParameterError {
            detail: "both row subsets must be non-empty".into(),
        });
    }
    if m_train + m_test > m {
        return Err(Error::ParameterError {
            detail: format!("asked for {m_train} + {m_test} rows but only {m} exist"),
        });
    }
    let mut idx: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut first: Vec<usize> = idx[..m_train].to_vec();
    let mut second: Vec<usize> = idx[m_train..m_train + m_test].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    let n = ps.dim();
    let gather = |ids: &[usize]| {
        let mut out = Vec::with_capacity(ids.len() * n);
        for i in ids {
            out.extend_from_slice(ps.row(*i));
        }
        PointSet::new(out, n)
    };
    Ok((gather(&first)?, gather(&second)?))
}

/// Split rows uniformly without replacement: a `fraction` share (rounded
/// down) goes to the first part, the rest to the second. Deterministic per
/// seed; both parts keep their rows in the original relative order.
pub fn subsample_split(
    ps: &PointSet,
    fraction: f64,
    seed: u64,
) -> Result<(PointSet, PointSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::ParameterError {
            detail: format!("split fraction must lie in (0, 1), got {fraction}"),
        });
    }
    let m = ps.len();
    let k = (fraction * m as f64).floor() as usize;
    if k == 0 || k == m {
        return Err(Error::ParameterError {
            detail: format!("fraction {fraction} of {m} rows leaves an empty part"),
        });
    }
    let mut idx: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut first: Vec<usize> = idx[..k].to_vec();
    let mut second: Vec<usize> = idx[k..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    let n = ps.dim();
    let gather = |ids: &[usize]| {
        let mut out = Vec::with_capacity(ids.len() * n);
        for i in ids {
            out.extend_from_slice(ps.row(*i));
        }
        PointSet::new(out, n)
    };
    Ok((gather(&first)?, gather(&second)?))
}
