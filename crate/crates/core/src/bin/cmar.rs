use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use cmar::cvar::{cvar_fit, CvarConfig};
use cmar::estimate::{fit, FitConfig, Init, Method};
use cmar::io::{write_atomic, write_json_atomic};
use cmar::json::rows;
use cmar::linalg::projection;
use cmar::model::Dims;
use cmar::montecarlo::{run_monte_carlo, summarize, write_records, McConfig};
use cmar::series::MatrixSeries;
use cmar::simulate::{gen_model, rng_from_seed, simulate_series, ErrorSetting, SimConfig};
use cmar::trading::{backtest, backtest_equal_value, load_ff_panel, BacktestConfig, PanelValues};
use cmar::CmarError;

#[derive(Parser)]
#[command(name = "cmar", version, about = "Cointegrated matrix autoregression toolkit")]
struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a model and simulate a series; writes the series CSV and the true parameters as JSON.
    Simulate(SimulateArgs),
    /// Fit LSE, MLE or the vector baseline to a series CSV.
    Fit(FitArgs),
    /// Run a Monte Carlo grid described by a JSON config.
    Montecarlo(McArgs),
    /// Pairs-trading backtest on a 25-portfolio panel.
    Backtest(BacktestArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// SimConfig JSON; replaces the dimension, length and seed flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    d1: usize,
    #[arg(long, default_value_t = 3)]
    d2: usize,
    #[arg(long, default_value_t = 1)]
    r1: usize,
    #[arg(long, default_value_t = 1)]
    r2: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long = "T", default_value_t = 400)]
    t: usize,
    #[arg(long, default_value = "II")]
    setting: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include a constant term with Frobenius norm `--constant-norm`.
    #[arg(long = "const")]
    constant: bool,
    #[arg(long, default_value_t = 0.8)]
    constant_norm: f64,
    #[arg(long, default_value = "series.csv")]
    out: PathBuf,
    /// Defaults to the series path with extension `truth.json`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lse,
    Mle,
    Cvar,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lse => Method::Lse,
            MethodArg::Mle => Method::Mle,
            MethodArg::Cvar => Method::Cvar,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Series CSV (long or wide layout).
    input: PathBuf,
    #[arg(long, value_enum, default_value = "lse")]
    method: MethodArg,
    /// Cointegration ranks `r1,r2`; the baseline uses `r1*r2`.
    #[arg(long, default_value = "1,1", value_parser = parse_ranks)]
    ranks: (usize, usize),
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long = "const")]
    constant: bool,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Random start with this seed instead of the warm start.
    #[arg(long)]
    random_init: Option<u64>,
    #[arg(long, default_value = "params.json")]
    out: PathBuf,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Benchmark {
    EqualValue,
}

#[derive(Args)]
struct BacktestArgs {
    /// Portfolio panel in the data-library layout, or a dated series CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    start: NaiveDate,
    #[arg(long)]
    end: NaiveDate,
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    #[arg(long, value_enum, default_value = "mle")]
    method: MethodArg,
    #[arg(long, default_value_t = 252)]
    formation_days: usize,
    #[arg(long, default_value_t = 0.0)]
    cost_bps: f64,
    /// Run the equal-value benchmark instead of the spread strategy.
    #[arg(long, value_enum)]
    benchmark: Option<Benchmark>,
    /// The data holds daily returns in percent; compound them into levels.
    #[arg(long)]
    returns: bool,
    #[arg(long, default_value = "trades.csv")]
    out: PathBuf,
}

fn parse_ranks(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.parse().map_err(|_| format!("bad rank {a:?}"))?,
            b.parse().map_err(|_| format!("bad rank {b:?}"))?,
        )),
        _ => Err(format!("expected r1,r2, got {s:?}")),
    }
}

/// Failure with its exit status: 2 for invalid input, 1 at run time.
struct Failure {
    code: u8,
    error: CmarError,
}

fn usage(error: CmarError) -> Failure {
    Failure { code: 2, error }
}

impl From<CmarError> for Failure {
    fn from(error: CmarError) -> Self {
        Failure { code: 1, error }
    }
}

fn error_kind(e: &CmarError) -> &'static str {
    match e {
        CmarError::Shape(_) => "shape",
        CmarError::Singular(_) => "singular",
        CmarError::Numerical(_) => "numerical",
        CmarError::Covariance(_) => "covariance",
        CmarError::Config(_) => "config",
        CmarError::Generation(_) => "generation",
        CmarError::Format(_) => "format",
        CmarError::Io(_) => "io",
        CmarError::Csv(_) => "csv",
        CmarError::Json(_) => "json",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let verbose = cli.verbose;
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, verbose),
        Command::Fit(a) => fit_cmd(a, verbose),
        Command::Montecarlo(a) => montecarlo(a, verbose),
        Command::Backtest(a) => backtest_cmd(a, verbose),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let msg = json!({"error": error_kind(&f.error), "message": f.error.to_string()});
            eprintln!("{msg}");
            ExitCode::from(f.code)
        }
    }
}

fn log(verbose: bool, msg: impl AsRef<str>) {
    if verbose {
        eprintln!("{}", msg.as_ref());
    }
}

fn simulate(a: SimulateArgs, verbose: bool) -> Result<Value, Failure> {
    let cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(e.into()))?;
            serde_json::from_str::<SimConfig>(&text).map_err(|e| usage(e.into()))?
        }
        None => {
            let dims = Dims::new(a.d1, a.d2, a.k, a.r1, a.r2).map_err(usage)?;
            let setting: ErrorSetting = a.setting.parse().map_err(usage)?;
            let mut c = SimConfig::new(dims, a.t, setting, a.seed);
            c.include_constant = a.constant;
            c.constant_norm = a.constant_norm;
            c
        }
    };
    cfg.validate().map_err(usage)?;
    let truth_path = a.truth.clone().unwrap_or_else(|| a.out.with_extension("truth.json"));

    let mut rng = rng_from_seed(cfg.seed);
    let model = gen_model(&cfg, &mut rng)?;
    log(
        verbose,
        format!(
            "model drawn, companion radius below {}",
            cmar::simulate::STABILITY_BOUND
        ),
    );
    let series = simulate_series(&model, cfg.t, &mut rng)?;
    write_atomic(&a.out, |w| series.write_csv(w))?;
    let truth = json!({
        "config": cfg,
        "model": model,
        "unit_roots": model.unit_root_count(cmar::model::UNIT_ROOT_TOL)?,
    });
    write_json_atomic(&truth_path, &truth)?;
    Ok(json!({
        "command": "simulate",
        "series": a.out,
        "truth": truth_path,
        "T": cfg.t,
        "d1": cfg.dims.d1,
        "d2": cfg.dims.d2,
        "seed": cfg.seed,
    }))
}

fn fit_cmd(a: FitArgs, verbose: bool) -> Result<Value, Failure> {
    let series = MatrixSeries::from_csv_path(&a.input).map_err(usage)?;
    let method: Method = a.method.into();
    let mut cfg = FitConfig::new(a.ranks, a.k, a.constant);
    cfg.tol = a.tol;
    cfg.max_iter = a.max_iter;
    if let Some(seed) = a.random_init {
        cfg.init = Init::Random(seed);
    }
    cfg.validate(&series).map_err(usage)?;

    let out = if method == Method::Cvar {
        let cv = CvarConfig::new(a.ranks.0 * a.ranks.1, a.k, a.constant);
        let m = cvar_fit(&series.vectorized(), &cv)?;
        json!({
            "method": method,
            "model": m,
            "projection": rows(&projection(&m.beta)?),
        })
    } else {
        let res = fit(&series, method, &cfg)?;
        log(
            verbose,
            format!("{method}: {} sweeps, converged = {}", res.iterations, res.converged),
        );
        json!({
            "method": method,
            "converged": res.converged,
            "iterations": res.iterations,
            "objective_trace": res.objective_trace,
            "final_objective": res.final_objective(),
            "regularized": res.regularized,
            "covariance_floored": res.covariance_floored,
            "normalization_ok": res.model.check_normalization(1e-10).is_ok(),
            "model": res.model,
            "projections": {
                "p1": rows(&projection(&res.model.beta1)?),
                "p2": rows(&projection(&res.model.beta2)?),
            },
            "sigma1": res.sigma1.as_ref().map(rows),
            "sigma2": res.sigma2.as_ref().map(rows),
        })
    };
    write_json_atomic(&a.out, &out)?;
    let mut summary = json!({"command": "fit", "method": method, "out": a.out});
    for key in ["converged", "iterations", "final_objective"] {
        if let Some(v) = out.get(key) {
            summary[key] = v.clone();
        }
    }
    Ok(summary)
}

fn montecarlo(a: McArgs, verbose: bool) -> Result<Value, Failure> {
    let cfg = McConfig::from_json_path(&a.config).map_err(usage)?;
    log(verbose, format!("{} workers", cmar::montecarlo::worker_count()));
    let records = run_monte_carlo(&cfg)?;
    write_atomic(&a.out, |w| write_records(&records, w))?;
    let cells: Vec<Value> = summarize(&records)
        .iter()
        .map(|c| {
            json!({
                "method": c.method,
                "T": c.t,
                "dims": [c.dims.0, c.dims.1, c.dims.2, c.dims.3],
                "median_proj_err_log": finite_or_null(c.median_proj_err_log),
                "failures": c.failures,
            })
        })
        .collect();
    Ok(json!({
        "command": "montecarlo",
        "out": a.out,
        "records": records.len(),
        "nonconverged": records.iter().filter(|r| !r.converged).count(),
        "cells": cells,
    }))
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn read_panel(path: &Path, returns: bool) -> cmar::Result<(MatrixSeries, usize)> {
    let values = if returns {
        PanelValues::PercentReturns
    } else {
        PanelValues::Levels
    };
    match load_ff_panel(path, values) {
        Ok(p) => Ok((p.series, p.dropped.len())),
        Err(CmarError::Format(_)) if !returns => Ok((MatrixSeries::from_csv_path(path)?, 0)),
        Err(e) => Err(e),
    }
}

fn backtest_cmd(a: BacktestArgs, verbose: bool) -> Result<Value, Failure> {
    let mut cfg = BacktestConfig::new(a.start, a.end, a.s);
    cfg.method = a.method.into();
    cfg.formation_days = a.formation_days;
    cfg.cost_bps = a.cost_bps;
    cfg.validate().map_err(usage)?;
    let (series, dropped) = read_panel(&a.data, a.returns).map_err(usage)?;
    log(verbose, format!("{} dates loaded, {dropped} dropped", series.len()));

    let log_ = if a.benchmark == Some(Benchmark::EqualValue) {
        backtest_equal_value(&series, &cfg)?
    } else {
        backtest(&series, &cfg)?
    };
    write_atomic(&a.out, |w| log_.write_csv(w))?;
    Ok(json!({
        "command": "backtest",
        "strategy": if a.benchmark.is_some() { "equal-value" } else { "spread" },
        "out": a.out,
        "trades": log_.events.len(),
        "cumulative_return": log_.cumulative_return,
        "degenerate_weights": log_.degenerate,
        "no_lookahead": log_.audit_no_lookahead(),
        "dropped_rows": dropped,
    }))
}
