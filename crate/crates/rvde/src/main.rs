//! Command-line driver for the density estimators: generate datasets,
//! fit and score a single estimator, draw samples, classify modes, and
//! run full bandwidth sweeps.
//!
//! Every subcommand reads one JSON config (`--config`), writes any file
//! artifacts under `--out`, and prints a machine-readable JSON summary to
//! stdout. Exit codes: 0 on success, 1 for command-line usage errors,
//! 2 for anything that fails after the command line parsed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use rvde::config::{
    parse_config, EstimatorKind, FitEvalConfig, GenConfig, ModesConfig, SampleConfig,
    SweepConfig,
};
use rvde::sweep::{fit_single, json_num, kernel_label, rows_to_csv, run_sweep, DEFAULT_MC_SAMPLES};
use rvde::{
    alpha_from_bandwidth, derive_seed, evaluate_hellinger, evaluate_loglik, generate,
    points_to_csv, select_alpha, true_log_density, Error, Kernel, PointSet, Result, RvdeModel,
};

#[derive(Parser)]
#[command(
    name = "rvde",
    version,
    about = "Voronoi density estimation benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset and write train/test CSV files.
    Gen(CommonArgs),
    /// Fit one estimator and print its test metrics.
    FitEval(CommonArgs),
    /// Fit the Voronoi estimator and draw samples from it.
    Sample(CommonArgs),
    /// Fit the Voronoi estimator and classify its density modes.
    Modes(CommonArgs),
    /// Run the full estimator-by-bandwidth benchmark grid.
    Sweep(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON config for this subcommand.
    #[arg(long)]
    config: PathBuf,
    /// Directory for file outputs (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Master seed; overrides any seed in the config. Defaults to 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Cap the worker thread count (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Suppress progress output on stderr.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests arrive as "errors" but are not.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let run = match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::FitEval(a) => cmd_fit_eval(a),
        Cmd::Sample(a) => cmd_sample(a),
        Cmd::Modes(a) => cmd_modes(a),
        Cmd::Sweep(a) => cmd_sweep(a),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Read and deserialize the config file, then apply shared flags:
/// thread cap and seed resolution (flag wins over config).
fn setup<T: serde::de::DeserializeOwned>(args: &CommonArgs) -> Result<T> {
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(Error::ParameterError {
                detail: "--threads must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::ParameterError {
                detail: format!("thread pool: {e}"),
            })?;
    }
    let text = fs::read_to_string(&args.config)?;
    parse_config(&text)
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config).unwrap_or(0)
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn print_json(doc: &Value) {
    println!("{}", serde_json::to_string_pretty(doc).expect("valid json"));
}

/// Fit the main estimator with the same scale resolution the sweep uses:
/// explicit alpha, or a bandwidth converted to alpha, or the data-driven
/// heuristic when neither is given.
fn fit_rvde(
    train: PointSet,
    kernel: Kernel,
    h: Option<f64>,
    alpha: Option<f64>,
) -> Result<RvdeModel> {
    let a = match (alpha, h) {
        (Some(a), _) => a,
        (None, Some(hv)) => alpha_from_bandwidth(kernel, train.dim(), hv)?,
        (None, None) => select_alpha(&train)?,
    };
    RvdeModel::fit(train, kernel, a)
}

fn cmd_gen(args: &CommonArgs) -> Result<()> {
    let cfg: GenConfig = setup(args)?;
    cfg.dataset.validate()?;
    let spec = cfg.dataset.synthetic()?.ok_or_else(|| Error::ConfigError {
        pointer: "/dataset/dataset".into(),
        detail: "gen needs a synthetic dataset, not a csv path".into(),
    })?;
    let seed = resolve_seed(args.seed, cfg.seed);
    // Same derivation as a sweep's run 0, so `gen` writes exactly the
    // data that `fit-eval` with the same seed would see.
    let data_seed = derive_seed(seed, &[0]);
    let m_test = cfg.dataset.m_test;
    // The train and test streams are independent, so a placeholder test
    // size leaves the train set untouched when no test set was asked for.
    let sample = generate(spec, cfg.dataset.m_train, m_test.max(1), data_seed)?;
    let train_path = write_out(&args.out, "train.csv", &points_to_csv(&sample.train))?;
    let mut doc = Map::new();
    doc.insert("dataset".into(), Value::String(spec.family.name().into()));
    doc.insert("n".into(), Value::from(spec.n));
    doc.insert("seed".into(), Value::from(seed));
    doc.insert("m_train".into(), Value::from(cfg.dataset.m_train));
    doc.insert("m_test".into(), Value::from(m_test));
    doc.insert(
        "train".into(),
        Value::String(train_path.display().to_string()),
    );
    if m_test > 0 {
        let test_path = write_out(&args.out, "test.csv", &points_to_csv(&sample.test))?;
        doc.insert(
            "test".into(),
            Value::String(test_path.display().to_string()),
        );
    }
    print_json(&Value::Object(doc));
    if !args.quiet {
        eprintln!(
            "gen: wrote {} train rows{} to {}",
            cfg.dataset.m_train,
            if m_test > 0 {
                format!(" and {m_test} test rows")
            } else {
                String::new()
            },
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_fit_eval(args: &CommonArgs) -> Result<()> {
    let cfg: FitEvalConfig = setup(args)?;
    cfg.validate()?;
    let seed = resolve_seed(args.seed, cfg.seed);
    let kind = EstimatorKind::parse(&cfg.estimator, "/estimator")?;
    let kernel = cfg.kernel.resolve()?;
    let (train, test) = cfg.dataset.realize(derive_seed(seed, &[0]))?;
    let (m_train, m_test) = (train.len(), test.len());
    let mc = cfg.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES);
    // Matches the cell seed a sweep would derive at run 0, grid slot 0.
    let cell_seed = derive_seed(seed, &[0, 1]);

    let fit_start = Instant::now();
    let (model, h, alpha) = fit_single(kind, train, kernel, cfg.h, cfg.alpha, mc, cell_seed)?;
    let fit_sec = fit_start.elapsed().as_secs_f64();

    let eval_start = Instant::now();
    let summary = evaluate_loglik(&model, &test)?;
    let eval_sec = eval_start.elapsed().as_secs_f64();

    let hellinger = if cfg.hellinger.unwrap_or(false) {
        let spec = cfg.dataset.synthetic()?.expect("validated synthetic");
        Some(evaluate_hellinger(
            &model,
            |x| true_log_density(spec, x),
            &test,
        )?)
    } else {
        None
    };

    let mut doc = Map::new();
    doc.insert("estimator".into(), Value::String(kind.name().into()));
    doc.insert("kernel".into(), Value::String(kernel_label(kernel)));
    doc.insert("h".into(), h.map(json_num).unwrap_or(Value::Null));
    doc.insert("alpha".into(), alpha.map(json_num).unwrap_or(Value::Null));
    doc.insert("seed".into(), Value::from(seed));
    doc.insert("m_train".into(), Value::from(m_train));
    doc.insert("m_test".into(), Value::from(m_test));
    doc.insert("loglik_mean".into(), json_num(summary.mean));
    doc.insert(
        "loglik_std_over_test".into(),
        json_num(summary.std_over_test),
    );
    doc.insert("underflows".into(), Value::from(summary.underflows));
    doc.insert(
        "hellinger".into(),
        hellinger.map(json_num).unwrap_or(Value::Null),
    );
    doc.insert("fit_sec".into(), json_num(fit_sec));
    doc.insert("eval_sec".into(), json_num(eval_sec));
    print_json(&Value::Object(doc));
    if !args.quiet {
        eprintln!(
            "fit-eval: {} on {} train / {} test points in {:.3}s",
            kind.name(),
            m_train,
            m_test,
            fit_sec + eval_sec
        );
    }
    Ok(())
}

fn cmd_sample(args: &CommonArgs) -> Result<()> {
    let cfg: SampleConfig = setup(args)?;
    cfg.validate()?;
    let seed = resolve_seed(args.seed, cfg.seed);
    let kernel = cfg.kernel.resolve()?;
    let train = cfg.dataset.realize_train(derive_seed(seed, &[0]))?;
    let n = train.dim();
    let model = fit_rvde(train, kernel, cfg.h, cfg.alpha)?;
    // The draw stream is separate from the data stream, mirroring the
    // train/test split of the generators.
    let flat = model.sample(cfg.count, derive_seed(seed, &[1]))?;
    let samples = PointSet::new(flat, n)?;
    let path = write_out(&args.out, "samples.csv", &points_to_csv(&samples))?;

    let mut doc = Map::new();
    doc.insert("count".into(), Value::from(cfg.count));
    doc.insert("n".into(), Value::from(n));
    doc.insert("kernel".into(), Value::String(kernel_label(kernel)));
    doc.insert("alpha".into(), json_num(model.alpha()));
    doc.insert("seed".into(), Value::from(seed));
    doc.insert("samples".into(), Value::String(path.display().to_string()));
    print_json(&Value::Object(doc));
    if !args.quiet {
        eprintln!("sample: wrote {} rows to {}", cfg.count, path.display());
    }
    Ok(())
}

fn cmd_modes(args: &CommonArgs) -> Result<()> {
    let cfg: ModesConfig = setup(args)?;
    cfg.validate()?;
    let seed = resolve_seed(args.seed, cfg.seed);
    let kernel = cfg.kernel.resolve()?;
    let train = cfg.dataset.realize_train(derive_seed(seed, &[0]))?;
    let model = fit_rvde(train, kernel, cfg.h, cfg.alpha)?;
    let modes = model.modes()?;
    let points = model.points();

    let location = |i: usize| Value::Array(points.row(i).iter().map(|&c| json_num(c)).collect());
    let midpoint = |i: usize, j: usize| {
        let mid: Vec<Value> = points
            .row(i)
            .iter()
            .zip(points.row(j))
            .map(|(&a, &b)| json_num(0.5 * (a + b)))
            .collect();
        Value::Array(mid)
    };

    let mut doc = Map::new();
    doc.insert("alpha".into(), json_num(model.alpha()));
    doc.insert("crossing_length".into(), json_num(model.crossing_length()));
    doc.insert(
        "point_modes".into(),
        Value::Array(
            modes
                .point_modes
                .iter()
                .map(|&i| {
                    let mut m = Map::new();
                    m.insert("index".into(), Value::from(i));
                    m.insert("location".into(), location(i));
                    Value::Object(m)
                })
                .collect(),
        ),
    );
    doc.insert(
        "midpoint_modes".into(),
        Value::Array(
            modes
                .midpoint_modes
                .iter()
                .map(|&(i, j)| {
                    let mut m = Map::new();
                    m.insert("pair".into(), Value::Array(vec![i.into(), j.into()]));
                    m.insert("location".into(), midpoint(i, j));
                    Value::Object(m)
                })
                .collect(),
        ),
    );
    doc.insert(
        "segment_modes".into(),
        Value::Array(
            modes
                .segment_modes
                .iter()
                .map(|&(i, j)| {
                    let mut m = Map::new();
                    m.insert("pair".into(), Value::Array(vec![i.into(), j.into()]));
                    m.insert(
                        "endpoints".into(),
                        Value::Array(vec![location(i), location(j)]),
                    );
                    Value::Object(m)
                })
                .collect(),
        ),
    );
    print_json(&Value::Object(doc));
    if !args.quiet {
        eprintln!(
            "modes: {} point / {} midpoint / {} segment",
            modes.point_modes.len(),
            modes.midpoint_modes.len(),
            modes.segment_modes.len()
        );
    }
    Ok(())
}

fn cmd_sweep(args: &CommonArgs) -> Result<()> {
    let cfg: SweepConfig = setup(args)?;
    let seed = resolve_seed(args.seed, cfg.seed);
    if !args.quiet {
        eprintln!(
            "sweep: {} estimators x {} grid values x {} runs",
            cfg.estimators.len(),
            cfg.grid.count,
            cfg.runs
        );
    }
    let outcome = run_sweep(&cfg, seed)?;
    let csv_path = write_out(&args.out, "results.csv", &rows_to_csv(&outcome.rows))?;
    let json_text =
        serde_json::to_string_pretty(&outcome.aggregates).expect("aggregates are valid json");
    let json_path = write_out(&args.out, "aggregates.json", &json_text)?;
    print_json(&outcome.aggregates);
    if !args.quiet {
        eprintln!(
            "sweep: {} rows -> {} ; aggregates -> {}",
            outcome.rows.len(),
            csv_path.display(),
            json_path.display()
        );
    }
    Ok(())
}
