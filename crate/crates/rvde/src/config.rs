//! JSON configuration schemas for the command-line harness. Parsing keeps
//! track of where in the document a failure happened and reports it as a
//! JSON pointer, and every schema rejects unknown fields so typos surface
//! instead of silently doing nothing.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{Family, SyntheticSpec};
use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Parse a JSON config, mapping any failure to a pointer into the document.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::ConfigError {
        pointer: path_to_pointer(&e.path().to_string()),
        detail: e.inner().to_string(),
    })
}

/// serde_path_to_error renders paths like `dataset.m_train` or
/// `estimators[2]`; JSON pointers spell those `/dataset/m_train` and
/// `/estimators/2`.
fn path_to_pointer(path: &str) -> String {
    if path == "." {
        return String::new();
    }
    let mut out = String::new();
    for segment in path.split('.') {
        let mut rest = segment;
        while let Some(open) = rest.find('[') {
            let (name, tail) = rest.split_at(open);
            if !name.is_empty() {
                out.push('/');
                out.push_str(name);
            }
            let close = tail.find(']').unwrap_or(tail.len());
            out.push('/');
            out.push_str(&tail[1..close]);
            rest = &tail[(close + 1).min(tail.len())..];
        }
        if !rest.is_empty() {
            out.push('/');
            out.push_str(rest);
        }
    }
    out
}

fn bad(pointer: &str, detail: impl Into<String>) -> Error {
    Error::ConfigError {
        pointer: pointer.into(),
        detail: detail.into(),
    }
}

/// Kernel selection: a family name plus the rational kernel's exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
}

impl KernelSpec {
    pub fn resolve(&self) -> Result<Kernel> {
        match self.family.as_str() {
            "exponential" => match self.k {
                None => Ok(Kernel::Exponential),
                Some(_) => Err(bad("/kernel/k", "k only applies to the rational kernel")),
            },
            "gaussian" => match self.k {
                None => Ok(Kernel::Gaussian),
                Some(_) => Err(bad("/kernel/k", "k only applies to the rational kernel")),
            },
            "rational" => match self.k {
                Some(k) if k >= 1 => Ok(Kernel::Rational { k }),
                Some(_) => Err(bad("/kernel/k", "rational kernel needs k >= 1")),
                None => Err(bad("/kernel/k", "rational kernel needs k")),
            },
            other => Err(bad(
                "/kernel/family",
                format!("unknown kernel family {other:?} (expected exponential, rational, or gaussian)"),
            )),
        }
    }
}

impl From<Kernel> for KernelSpec {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Exponential => KernelSpec {
                family: "exponential".into(),
                k: None,
            },
            Kernel::Gaussian => KernelSpec {
                family: "gaussian".into(),
                k: None,
            },
            Kernel::Rational { k } => KernelSpec {
                family: "rational".into(),
                k: Some(k),
            },
        }
    }
}

/// Data source: one of the synthetic families or a CSV file. Synthetic
/// sources need `n`; CSV sources need `path` and draw disjoint train/test
/// row subsets per run seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub m_train: usize,
    pub m_test: usize,
    /// CSV only: rescale each column to [0, 1] before splitting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
}

impl DatasetSpec {
    pub fn family(&self) -> Result<Option<Family>> {
        match self.dataset.as_str() {
            "gaussian" => Ok(Some(Family::Gaussian)),
            "laplace" => Ok(Some(Family::Laplace)),
            "dirichlet" => Ok(Some(Family::Dirichlet)),
            "mixture" => Ok(Some(Family::Mixture)),
            "csv" => Ok(None),
            other => Err(bad(
                "/dataset/dataset",
                format!("unknown dataset {other:?} (expected gaussian, laplace, dirichlet, mixture, or csv)"),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let family = self.family()?;
        if self.m_train == 0 {
            return Err(bad("/dataset/m_train", "must be at least 1"));
        }
        match family {
            Some(_) => {
                match self.n {
                    None | Some(0) => {
                        return Err(bad("/dataset/n", "synthetic datasets need n >= 1"))
                    }
                    Some(_) => {}
                }
                if self.path.is_some() {
                    return Err(bad("/dataset/path", "path only applies to csv datasets"));
                }
                if self.normalize.is_some() {
                    return Err(bad(
                        "/dataset/normalize",
                        "normalize only applies to csv datasets",
                    ));
                }
            }
            None => {
                if self.path.is_none() {
                    return Err(bad("/dataset/path", "csv datasets need a path"));
                }
                if self.n.is_some() {
                    return Err(bad(
                        "/dataset/n",
                        "csv datasets take their dimension from the file",
                    ));
                }
            }
        }
        Ok(())
    }

    /// The synthetic spec when this is a synthetic source (ground truth is
    /// available exactly for these).
    pub fn synthetic(&self) -> Result<Option<SyntheticSpec>> {
        Ok(self.family()?.map(|family| SyntheticSpec {
            family,
            n: self.n.unwrap_or(0),
        }))
    }

    /// Materialize (train, test) for one run seed. Needs `m_test >= 1`.
    pub fn realize(&self, seed: u64) -> Result<(crate::PointSet, crate::PointSet)> {
        self.validate()?;
        if self.m_test == 0 {
            return Err(bad("/dataset/m_test", "this command needs a test set"));
        }
        match self.synthetic()? {
            Some(spec) => {
                let s = crate::data::generate(spec, self.m_train, self.m_test, seed)?;
                Ok((s.train, s.test))
            }
            None => {
                let ps = self.load_full()?;
                crate::data::sample_rows(&ps, self.m_train, self.m_test, seed)
            }
        }
    }

    /// Materialize only a train set, for commands that score nothing.
    /// Synthetic sources draw the same train stream `realize` would; a CSV
    /// source with `m_train` equal to the file's row count is used whole
    /// and in order.
    pub fn realize_train(&self, seed: u64) -> Result<crate::PointSet> {
        self.validate()?;
        match self.synthetic()? {
            Some(spec) => {
                Ok(crate::data::generate(spec, self.m_train, 1, seed)?.train)
            }
            None => {
                let ps = self.load_full()?;
                if self.m_train == ps.len() {
                    Ok(ps)
                } else {
                    Ok(crate::data::sample_rows(&ps, self.m_train, 1, seed)?.0)
                }
            }
        }
    }

    fn load_full(&self) -> Result<crate::PointSet> {
        let path = std::path::PathBuf::from(self.path.as_deref().unwrap());
        let mut ps = crate::data::load_csv(&path)?;
        if self.normalize.unwrap_or(false) {
            ps = crate::data::min_max_normalize(&ps)?;
        }
        Ok(ps)
    }
}

/// The estimators the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Rvde,
    Kde,
    AdaKde,
    Cvde,
}

impl EstimatorKind {
    pub fn parse(name: &str, pointer: &str) -> Result<Self> {
        match name {
            "rvde" => Ok(EstimatorKind::Rvde),
            "kde" => Ok(EstimatorKind::Kde),
            "adakde" => Ok(EstimatorKind::AdaKde),
            "cvde" => Ok(EstimatorKind::Cvde),
            other => Err(bad(
                pointer,
                format!("unknown estimator {other:?} (expected rvde, kde, adakde, or cvde)"),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Rvde => "rvde",
            EstimatorKind::Kde => "kde",
            EstimatorKind::AdaKde => "adakde",
            EstimatorKind::Cvde => "cvde",
        }
    }
}

/// `gen`: write a synthetic train/test pair as CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// `fit-eval`: fit one estimator on one realized dataset and print its
/// metrics. RVDE takes `alpha` directly or `h` through the bandwidth
/// conversion, and falls back to the data-driven heuristic when both are
/// omitted. The baselines require `h`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitEvalConfig {
    pub dataset: DatasetSpec,
    pub estimator: String,
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hellinger: Option<bool>,
}

impl FitEvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if self.dataset.m_test == 0 {
            return Err(bad("/dataset/m_test", "evaluation needs a test set"));
        }
        self.kernel.resolve()?;
        let kind = EstimatorKind::parse(&self.estimator, "/estimator")?;
        if let Some(h) = self.h {
            if !(h.is_finite() && h > 0.0) {
                return Err(bad("/h", "bandwidth must be positive and finite"));
            }
        }
        if let Some(a) = self.alpha {
            if !(a.is_finite() && a > 0.0) {
                return Err(bad("/alpha", "alpha must be positive and finite"));
            }
        }
        match kind {
            EstimatorKind::Rvde => {
                if self.h.is_some() && self.alpha.is_some() {
                    return Err(bad("/alpha", "give either h or alpha, not both"));
                }
                if self.mc_samples.is_some() {
                    return Err(bad("/mc_samples", "mc_samples only applies to cvde"));
                }
            }
            _ => {
                if self.alpha.is_some() {
                    return Err(bad("/alpha", "alpha only applies to rvde; use h"));
                }
                if self.h.is_none() {
                    return Err(bad("/h", "this estimator needs a bandwidth"));
                }
                if kind != EstimatorKind::Cvde && self.mc_samples.is_some() {
                    return Err(bad("/mc_samples", "mc_samples only applies to cvde"));
                }
            }
        }
        if self.hellinger.unwrap_or(false) && self.dataset.family()?.is_none() {
            return Err(bad(
                "/hellinger",
                "hellinger needs a synthetic dataset with known ground truth",
            ));
        }
        Ok(())
    }
}

/// `sample`: fit the main estimator and draw points from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub dataset: DatasetSpec,
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub count: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.kernel.resolve()?;
        if self.count == 0 {
            return Err(bad("/count", "must draw at least one sample"));
        }
        if self.h.is_some() && self.alpha.is_some() {
            return Err(bad("/alpha", "give either h or alpha, not both"));
        }
        Ok(())
    }
}

/// `modes`: fit the main estimator and classify where its density peaks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesConfig {
    pub dataset: DatasetSpec,
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ModesConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.kernel.resolve()?;
        if self.h.is_some() && self.alpha.is_some() {
            return Err(bad("/alpha", "give either h or alpha, not both"));
        }
        Ok(())
    }
}

/// The bandwidth (or alpha) grid of a sweep: `count` log-spaced values
/// from `min` to `max` inclusive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axis: String,
    pub count: usize,
    pub min: f64,
    pub max: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axis != "h" && self.axis != "alpha" {
            return Err(bad("/grid/axis", "axis must be \"h\" or \"alpha\""));
        }
        if self.count == 0 {
            return Err(bad("/grid/count", "grid needs at least one value"));
        }
        if !(self.min.is_finite() && self.min > 0.0) {
            return Err(bad("/grid/min", "grid values must be positive"));
        }
        if !(self.max.is_finite() && self.max >= self.min) {
            return Err(bad("/grid/max", "max must be finite and at least min"));
        }
        if self.count == 1 && self.max != self.min {
            return Err(bad("/grid/count", "a one-point grid needs min == max"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let (a, b) = (self.min.ln(), self.max.ln());
        (0..self.count)
            .map(|i| {
                // Pin the endpoints so they survive the log round trip.
                if i == 0 {
                    self.min
                } else if i == self.count - 1 {
                    self.max
                } else {
                    (a + (b - a) * i as f64 / (self.count - 1) as f64).exp()
                }
            })
            .collect()
    }
}

/// `sweep`: the full benchmark grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dataset: DatasetSpec,
    pub estimators: Vec<String>,
    pub kernel: KernelSpec,
    pub grid: GridSpec,
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hellinger: Option<bool>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if self.dataset.m_test == 0 {
            return Err(bad("/dataset/m_test", "evaluation needs a test set"));
        }
        self.kernel.resolve()?;
        self.grid.validate()?;
        if self.estimators.is_empty() {
            return Err(bad("/estimators", "need at least one estimator"));
        }
        let mut kinds = Vec::new();
        for (i, name) in self.estimators.iter().enumerate() {
            let kind = EstimatorKind::parse(name, &format!("/estimators/{i}"))?;
            if kinds.contains(&kind) {
                return Err(bad(
                    &format!("/estimators/{i}"),
                    format!("estimator {name:?} listed twice"),
                ));
            }
            kinds.push(kind);
        }
        if self.grid.axis == "alpha" && kinds.iter().any(|k| *k != EstimatorKind::Rvde) {
            return Err(bad(
                "/grid/axis",
                "an alpha grid only makes sense for rvde; the baselines need an h grid",
            ));
        }
        if self.runs == 0 {
            return Err(bad("/runs", "need at least one run"));
        }
        if self.mc_samples == Some(0) {
            return Err(bad("/mc_samples", "cvde needs at least one direction sample"));
        }
        if self.hellinger.unwrap_or(false) && self.dataset.family()?.is_none() {
            return Err(bad(
                "/hellinger",
                "hellinger needs a synthetic dataset with known ground truth",
            ));
        }
        Ok(())
    }

    pub fn kinds(&self) -> Result<Vec<EstimatorKind>> {
        self.estimators
            .iter()
            .enumerate()
            .map(|(i, n)| EstimatorKind::parse(n, &format!("/estimators/{i}")))
            .collect()
    }
}
