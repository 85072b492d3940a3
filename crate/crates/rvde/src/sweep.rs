//! The benchmark driver: fit every requested estimator at every grid value
//! over several seeded runs, score each fit on held-out data, and emit the
//! rows plus per-estimator aggregates. Randomness flows from one master
//! seed through per-run and per-cell derived seeds, so the metric columns
//! are bit-identical no matter how many threads execute the grid.

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use std::time::Instant;

use crate::baselines::{alpha_from_bandwidth, AdaKdeModel, CvdeModel, KdeModel};
use crate::config::{EstimatorKind, SweepConfig};
use crate::data::{true_log_density, SyntheticSpec};
use crate::error::{Error, Result};
use crate::estimator::{select_alpha, DensityModel, RvdeModel};
use crate::geometry::PointSet;
use crate::kernel::Kernel;
use crate::metrics::{evaluate_hellinger, evaluate_loglik};
use crate::seeding::derive_seed;

/// Default direction count for the Monte Carlo cell volumes.
pub const DEFAULT_MC_SAMPLES: usize = 100;

/// Schema tag written as the first line of every results file.
pub const RESULTS_SCHEMA: &str = "# rvde-results v1";

const CSV_HEADER: &str = "estimator,kernel,h,alpha,run,seed,loglik_mean,\
loglik_std_over_test,underflows,hellinger,fit_sec,eval_sec,error";

/// Any of the four estimators, fitted and ready to score points.
pub enum FittedModel {
    Rvde(RvdeModel),
    Kde(KdeModel),
    AdaKde(AdaKdeModel),
    Cvde(CvdeModel),
}

impl DensityModel for FittedModel {
    fn dim(&self) -> usize {
        match self {
            FittedModel::Rvde(m) => m.dim(),
            FittedModel::Kde(m) => m.dim(),
            FittedModel::AdaKde(m) => m.dim(),
            FittedModel::Cvde(m) => m.dim(),
        }
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Rvde(m) => m.log_density(x),
            FittedModel::Kde(m) => m.log_density(x),
            FittedModel::AdaKde(m) => m.log_density(x),
            FittedModel::Cvde(m) => m.log_density(x),
        }
    }
}

/// One (estimator, grid value, run) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Estimator name; the data-driven alpha gets its own "rvde-heuristic"
    /// label so it is distinguishable from the grid rows.
    pub estimator: String,
    pub kernel: String,
    pub h: Option<f64>,
    pub alpha: Option<f64>,
    pub run: usize,
    /// The derived seed that produced this run's data.
    pub seed: u64,
    pub loglik_mean: f64,
    pub loglik_std_over_test: f64,
    pub underflows: usize,
    pub hellinger: Option<f64>,
    pub fit_sec: f64,
    pub eval_sec: f64,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn is_failed(&self) -> bool {
        self.error.is_some()
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse::<f64>().map_err(|_| Error::ParseError {
            row: 0,
            detail: format!("bad float {s:?}"),
        }),
    }
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

/// Serialize rows with the schema tag and header line.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(RESULTS_SCHEMA);
    out.push('\n');
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        // Commas inside error strings would shift the columns.
        let err = r
            .error
            .as_deref()
            .unwrap_or("")
            .replace([',', '\n'], ";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.estimator,
            r.kernel,
            fmt_opt(r.h),
            fmt_opt(r.alpha),
            r.run,
            r.seed,
            fmt_f64(r.loglik_mean),
            fmt_f64(r.loglik_std_over_test),
            r.underflows,
            fmt_opt(r.hellinger),
            fmt_f64(r.fit_sec),
            fmt_f64(r.eval_sec),
            err,
        ));
    }
    out
}

/// Parse a results file back into rows. The inverse of `rows_to_csv` for
/// every value the harness writes: floats round-trip exactly.
pub fn parse_results_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (idx, line) in text.lines().enumerate() {
        let row_no = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != CSV_HEADER {
                return Err(Error::ParseError {
                    row: row_no,
                    detail: "unrecognized results header".into(),
                });
            }
            seen_header = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 13 {
            return Err(Error::ParseError {
                row: row_no,
                detail: format!("expected 13 columns, got {}", cells.len()),
            });
        }
        let int = |s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| Error::ParseError {
                row: row_no,
                detail: format!("bad count {s:?}"),
            })
        };
        rows.push(SweepRow {
            estimator: cells[0].to_string(),
            kernel: cells[1].to_string(),
            h: parse_opt(cells[2])?,
            alpha: parse_opt(cells[3])?,
            run: int(cells[4])?,
            seed: cells[5].parse::<u64>().map_err(|_| Error::ParseError {
                row: row_no,
                detail: format!("bad seed {:?}", cells[5]),
            })?,
            loglik_mean: parse_f64(cells[6])?,
            loglik_std_over_test: parse_f64(cells[7])?,
            underflows: int(cells[8])?,
            hellinger: parse_opt(cells[9])?,
            fit_sec: parse_f64(cells[10])?,
            eval_sec: parse_f64(cells[11])?,
            error: if cells[12].is_empty() {
                None
            } else {
                Some(cells[12].to_string())
            },
        });
    }
    if !seen_header {
        return Err(Error::EmptyDataset);
    }
    Ok(rows)
}

/// A JSON number that survives non-finite values as strings instead of
/// collapsing to null.
pub fn json_num(v: f64) -> Value {
    match serde_json::Number::from_f64(v) {
        Some(n) => Value::Number(n),
        None => Value::String(fmt_f64(v)),
    }
}

fn jnum(v: f64) -> Value {
    json_num(v)
}

fn jopt(v: Option<f64>) -> Value {
    v.map(jnum).unwrap_or(Value::Null)
}

/// Fit one estimator outside the grid machinery, resolving the kernel
/// scale the same way a sweep cell would: the main estimator takes `alpha`
/// directly, converts `h` when that is what was given, and falls back to
/// the data-driven heuristic when neither is set; the baselines require
/// `h`. Returns the model plus the (h, alpha) values actually used.
pub fn fit_single(
    kind: EstimatorKind,
    train: PointSet,
    kernel: Kernel,
    h: Option<f64>,
    alpha: Option<f64>,
    mc_samples: usize,
    seed: u64,
) -> Result<(FittedModel, Option<f64>, Option<f64>)> {
    let need_h = || {
        h.ok_or_else(|| Error::ParameterError {
            detail: format!("{} needs a bandwidth", kind.name()),
        })
    };
    match kind {
        EstimatorKind::Rvde => {
            let a = match (alpha, h) {
                (Some(a), _) => a,
                (None, Some(hv)) => alpha_from_bandwidth(kernel, train.dim(), hv)?,
                (None, None) => select_alpha(&train)?,
            };
            Ok((
                FittedModel::Rvde(RvdeModel::fit(train, kernel, a)?),
                h,
                Some(a),
            ))
        }
        EstimatorKind::Kde => {
            let hv = need_h()?;
            Ok((
                FittedModel::Kde(KdeModel::fit(train, kernel, hv)?),
                Some(hv),
                None,
            ))
        }
        EstimatorKind::AdaKde => {
            let hv = need_h()?;
            Ok((
                FittedModel::AdaKde(AdaKdeModel::fit(train, kernel, hv)?),
                Some(hv),
                None,
            ))
        }
        EstimatorKind::Cvde => {
            let hv = need_h()?;
            Ok((
                FittedModel::Cvde(CvdeModel::fit(train, kernel, hv, mc_samples, seed)?),
                Some(hv),
                None,
            ))
        }
    }
}

/// Collapse rows into per-estimator curves (means and standard deviations
/// across runs at each grid value) and a best row per estimator by mean
/// log-likelihood. Failed rows are left out of the statistics. The output
/// is a deterministic function of the rows, so aggregates can always be
/// recomputed from a results file.
/// Rows for one estimator, grouped by grid value, in first-seen order.
type GridGroups<'a> = Vec<(String, Vec<&'a SweepRow>)>;

pub fn aggregate_rows(rows: &[SweepRow]) -> Value {
    // Group by estimator, then by grid value, preserving first-seen order.
    let mut estimators: Vec<(String, GridGroups)> = Vec::new();
    for row in rows {
        let key = format!("{}|{}", fmt_opt(row.h), fmt_opt(row.alpha));
        let slot = match estimators.iter_mut().find(|(n, _)| *n == row.estimator) {
            Some((_, groups)) => groups,
            None => {
                estimators.push((row.estimator.clone(), Vec::new()));
                &mut estimators.last_mut().unwrap().1
            }
        };
        match slot.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rs)) => rs.push(row),
            None => slot.push((key, vec![row])),
        }
    }

    let mut per_estimator = Map::new();
    for (name, groups) in estimators {
        let mut curve = Vec::new();
        let mut best: Option<(f64, Value)> = None;
        for (_, grouped) in groups {
            let ok: Vec<&&SweepRow> = grouped.iter().filter(|r| !r.is_failed()).collect();
            let failed = grouped.len() - ok.len();
            let first = grouped[0];
            let mut point = Map::new();
            point.insert("h".into(), jopt(first.h));
            point.insert("alpha".into(), jopt(first.alpha));
            point.insert("runs".into(), json!(grouped.len()));
            point.insert("failed_runs".into(), json!(failed));
            if ok.is_empty() {
                point.insert("loglik_mean".into(), Value::Null);
                point.insert("loglik_std".into(), Value::Null);
                curve.push(Value::Object(point));
                continue;
            }
            let lls: Vec<f64> = ok.iter().map(|r| r.loglik_mean).collect();
            let mean = lls.iter().sum::<f64>() / lls.len() as f64;
            let std = if mean.is_finite() {
                (lls.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / lls.len() as f64)
                    .sqrt()
            } else {
                f64::NAN
            };
            point.insert("loglik_mean".into(), jnum(mean));
            point.insert("loglik_std".into(), jnum(std));
            point.insert(
                "underflow_points".into(),
                json!(ok.iter().map(|r| r.underflows).sum::<usize>()),
            );
            if ok.iter().all(|r| r.hellinger.is_some()) {
                let hs: Vec<f64> = ok.iter().map(|r| r.hellinger.unwrap()).collect();
                let hmean = hs.iter().sum::<f64>() / hs.len() as f64;
                let hstd = (hs.iter().map(|v| (v - hmean) * (v - hmean)).sum::<f64>()
                    / hs.len() as f64)
                    .sqrt();
                point.insert("hellinger_mean".into(), jnum(hmean));
                point.insert("hellinger_std".into(), jnum(hstd));
            }
            let point = Value::Object(point);
            let better = match &best {
                None => !mean.is_nan(),
                Some((b, _)) => !mean.is_nan() && mean > *b,
            };
            if better {
                best = Some((mean, point.clone()));
            }
            curve.push(point);
        }
        let mut entry = Map::new();
        entry.insert(
            "best".into(),
            best.map(|(_, p)| p).unwrap_or(Value::Null),
        );
        entry.insert("curve".into(), Value::Array(curve));
        per_estimator.insert(name, Value::Object(entry));
    }
    Value::Object(per_estimator)
}

/// Everything a sweep produces: the raw rows and the aggregate document.
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub aggregates: Value,
}

struct Cell {
    kind: EstimatorKind,
    /// None marks the data-driven alpha row.
    grid_idx: Option<usize>,
    run: usize,
}

/// Execute the whole grid. `master_seed` wins over any seed in the config.
pub fn run_sweep(cfg: &SweepConfig, master_seed: u64) -> Result<SweepOutcome> {
    cfg.validate()?;
    let kinds = cfg.kinds()?;
    let kernel = cfg.kernel.resolve()?;
    let grid = cfg.grid.values();
    let alpha_axis = cfg.grid.axis == "alpha";
    let mc = cfg.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES);
    let want_hellinger = cfg.hellinger.unwrap_or(false);
    let truth = cfg.dataset.synthetic()?;
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let clock = Instant::now();

    // One dataset per run, shared by every estimator in that run.
    let mut datasets = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let data_seed = derive_seed(master_seed, &[run as u64]);
        let (train, test) = cfg.dataset.realize(data_seed)?;
        datasets.push((data_seed, train, test));
    }

    let mut cells = Vec::new();
    for (ki, kind) in kinds.iter().enumerate() {
        let _ = ki;
        for gi in 0..grid.len() {
            for run in 0..cfg.runs {
                cells.push(Cell {
                    kind: *kind,
                    grid_idx: Some(gi),
                    run,
                });
            }
        }
    }
    if kinds.contains(&EstimatorKind::Rvde) {
        for run in 0..cfg.runs {
            cells.push(Cell {
                kind: EstimatorKind::Rvde,
                grid_idx: None,
                run,
            });
        }
    }

    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|cell| {
            let (data_seed, train, test) = &datasets[cell.run];
            run_cell(
                cell, kernel, &grid, alpha_axis, mc, want_hellinger, truth, master_seed,
                *data_seed, train, test,
            )
        })
        .collect();

    let mut aggregates = Map::new();
    aggregates.insert("version".into(), json!(1));
    aggregates.insert(
        "config".into(),
        serde_json::to_value(cfg).unwrap_or(Value::Null),
    );
    aggregates.insert("master_seed".into(), json!(master_seed));
    aggregates.insert("started_unix_ms".into(), json!(started));
    aggregates.insert("wall_sec".into(), jnum(clock.elapsed().as_secs_f64()));
    aggregates.insert("estimators".into(), aggregate_rows(&rows));
    Ok(SweepOutcome {
        rows,
        aggregates: Value::Object(aggregates),
    })
}

/// One-token kernel name for CSV and JSON output (`rational` carries its
/// exponent, e.g. `rational:3`).
pub fn kernel_label(kernel: Kernel) -> String {
    match kernel {
        Kernel::Rational { k } => format!("rational:{k}"),
        other => other.name().to_string(),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cell: &Cell,
    kernel: Kernel,
    grid: &[f64],
    alpha_axis: bool,
    mc: usize,
    want_hellinger: bool,
    truth: Option<SyntheticSpec>,
    master_seed: u64,
    data_seed: u64,
    train: &PointSet,
    test: &PointSet,
) -> SweepRow {
    let estimator_name = match cell.grid_idx {
        None => "rvde-heuristic".to_string(),
        Some(_) => cell.kind.name().to_string(),
    };
    let mut row = SweepRow {
        estimator: estimator_name,
        kernel: kernel_label(kernel),
        h: None,
        alpha: None,
        run: cell.run,
        seed: data_seed,
        loglik_mean: f64::NAN,
        loglik_std_over_test: f64::NAN,
        underflows: 0,
        hellinger: None,
        fit_sec: f64::NAN,
        eval_sec: f64::NAN,
        error: None,
    };

    let fail = |row: &mut SweepRow, e: Error| {
        row.error = Some(e.to_string());
    };

    // Resolve this cell's bandwidth and alpha columns.
    let n = train.dim();
    let fit_start = Instant::now();
    let model = match cell.grid_idx {
        Some(gi) => {
            let v = grid[gi];
            match cell.kind {
                EstimatorKind::Rvde => {
                    let alpha = if alpha_axis {
                        Ok(v)
                    } else {
                        row.h = Some(v);
                        alpha_from_bandwidth(kernel, n, v)
                    };
                    match alpha {
                        Ok(a) => {
                            row.alpha = Some(a);
                            RvdeModel::fit(train.clone(), kernel, a).map(FittedModel::Rvde)
                        }
                        Err(e) => Err(e),
                    }
                }
                EstimatorKind::Kde => {
                    row.h = Some(v);
                    KdeModel::fit(train.clone(), kernel, v).map(FittedModel::Kde)
                }
                EstimatorKind::AdaKde => {
                    row.h = Some(v);
                    AdaKdeModel::fit(train.clone(), kernel, v).map(FittedModel::AdaKde)
                }
                EstimatorKind::Cvde => {
                    row.h = Some(v);
                    let cell_seed =
                        derive_seed(master_seed, &[cell.run as u64, 1 + gi as u64]);
                    CvdeModel::fit(train.clone(), kernel, v, mc, cell_seed)
                        .map(FittedModel::Cvde)
                }
            }
        }
        None => match select_alpha(train) {
            Ok(a) => {
                row.alpha = Some(a);
                RvdeModel::fit(train.clone(), kernel, a).map(FittedModel::Rvde)
            }
            Err(e) => Err(e),
        },
    };
    let model = match model {
        Ok(m) => m,
        Err(e) => {
            fail(&mut row, e);
            return row;
        }
    };
    row.fit_sec = fit_start.elapsed().as_secs_f64();

    let eval_start = Instant::now();
    match evaluate_loglik(&model, test) {
        Ok(s) => {
            row.loglik_mean = s.mean;
            row.loglik_std_over_test = s.std_over_test;
            row.underflows = s.underflows;
        }
        Err(e) => {
            fail(&mut row, e);
            return row;
        }
    }
    row.eval_sec = eval_start.elapsed().as_secs_f64();

    if want_hellinger {
        if let Some(spec) = truth {
            match evaluate_hellinger(&model, |x| true_log_density(spec, x), test) {
                Ok(h) => row.hellinger = Some(h),
                Err(e) => {
                    fail(&mut row, e);
                    return row;
                }
            }
        }
    }
    row
}
