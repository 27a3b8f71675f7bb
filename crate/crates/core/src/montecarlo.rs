//! Replicated simulation experiments comparing the vector baseline with the
//! matrix estimators.
//!
//! For every dimension configuration one model is drawn (or one per
//! replicate with `redraw_per_rep`), every `(T, rep)` pair gets its own path,
//! and every requested method is fitted on that same path.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvar::{cvar_fit, CvarConfig};
use crate::error::{CmarError, Result};
use crate::estimate::{fit, FitConfig, Method};
use crate::metrics::{alpha_error, b_error, cvar_alpha_error, cvar_b_error, cvar_projection_error, projection_error};
use crate::model::{CmarModel, Dims};
use crate::series::MatrixSeries;
use crate::simulate::{gen_model, simulate_series, ErrorSetting, SimConfig};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "CMAR_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dims: Vec<Dims>,
    #[serde(rename = "T")]
    pub t_grid: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    pub methods: Vec<Method>,
    pub error_setting: ErrorSetting,
    #[serde(default)]
    pub include_constant: bool,
    #[serde(default)]
    pub base_seed: u64,
    /// Draw a fresh model for every replicate instead of one per configuration.
    #[serde(default)]
    pub redraw_per_rep: bool,
    /// Store wall-clock fit times; off by default so that output is reproducible.
    #[serde(default)]
    pub record_runtime: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_reps() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    200
}

impl McConfig {
    pub fn new(dims: Vec<Dims>, t_grid: Vec<usize>, methods: Vec<Method>, error_setting: ErrorSetting) -> Self {
        McConfig {
            dims,
            t_grid,
            reps: default_reps(),
            methods,
            error_setting,
            include_constant: false,
            base_seed: 0,
            redraw_per_rep: false,
            record_runtime: false,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: McConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(CmarError::Config("reps must be at least 1".into()));
        }
        if self.dims.is_empty() || self.t_grid.is_empty() || self.methods.is_empty() {
            return Err(CmarError::Config("dims, T and methods must be non-empty".into()));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(CmarError::Config("tol must be positive and max_iter at least 1".into()));
        }
        for d in &self.dims {
            d.validate()?;
            for &t in &self.t_grid {
                if t < d.k + 2 {
                    return Err(CmarError::Config(format!("T = {t} is too short for k = {}", d.k)));
                }
            }
        }
        Ok(())
    }
}

/// One fitted method on one simulated path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub method: Method,
    #[serde(rename = "T")]
    pub t: usize,
    pub d1: usize,
    pub d2: usize,
    pub r1: usize,
    pub r2: usize,
    pub rep: usize,
    pub seed: u64,
    pub proj_err_log: f64,
    pub alpha_err: f64,
    pub b_err: f64,
    pub runtime_ms: f64,
    pub converged: bool,
    pub exact_flag: bool,
}

/// Worker count: `CMAR_THREADS` if set to a positive integer, else all cores.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn model_for(cfg: &McConfig, dims_idx: usize, rep: usize) -> Result<CmarModel> {
    let dims = cfg.dims[dims_idx];
    let seed = if cfg.redraw_per_rep {
        cfg.base_seed.wrapping_add(rep as u64)
    } else {
        cfg.base_seed
    };
    let mut sim = SimConfig::new(dims, dims.k + 2, cfg.error_setting, seed);
    sim.include_constant = cfg.include_constant;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 << 40 | dims_idx as u64);
    gen_model(&sim, &mut rng)
}

fn path_for(model: &CmarModel, cfg: &McConfig, dims_idx: usize, t_idx: usize, seed: u64) -> Result<MatrixSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((dims_idx as u64) << 20 | t_idx as u64);
    simulate_series(model, cfg.t_grid[t_idx], &mut rng)
}

fn evaluate(
    method: Method,
    series: &MatrixSeries,
    truth: &CmarModel,
    cfg: &McConfig,
) -> Result<(f64, f64, f64, bool, bool)> {
    let Dims { k, r1, r2, .. } = truth.dims;
    match method {
        Method::Cvar => {
            let est = cvar_fit(&series.vectorized(), &CvarConfig::new(r1 * r2, k, cfg.include_constant))?;
            let pe = cvar_projection_error(&est.beta, &truth.beta1, &truth.beta2)?;
            Ok((
                pe.value,
                cvar_alpha_error(&est, truth),
                cvar_b_error(&est, truth),
                true,
                pe.exact,
            ))
        }
        Method::Lse | Method::Mle => {
            let mut fc = FitConfig::new((r1, r2), k, cfg.include_constant);
            fc.tol = cfg.tol;
            fc.max_iter = cfg.max_iter;
            let res = fit(series, method, &fc)?;
            let m = &res.model;
            let pe = projection_error(&m.beta1, &truth.beta1, &m.beta2, &truth.beta2)?;
            Ok((
                pe.value,
                alpha_error(m, truth),
                b_error(m, truth),
                res.converged,
                pe.exact,
            ))
        }
    }
}

/// Runs the full grid. Records are sorted by `(dims, T, method, rep)`, so
/// the output does not depend on scheduling.
pub fn run_monte_carlo(cfg: &McConfig) -> Result<Vec<ReplicateRecord>> {
    cfg.validate()?;
    let shared: Vec<Option<CmarModel>> = (0..cfg.dims.len())
        .map(|i| {
            if cfg.redraw_per_rep {
                Ok(None)
            } else {
                model_for(cfg, i, 0).map(Some)
            }
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..cfg.dims.len())
        .flat_map(|d| (0..cfg.t_grid.len()).flat_map(move |t| (0..cfg.reps).map(move |r| (d, t, r))))
        .collect();

    let run_job = |&(di, ti, rep): &(usize, usize, usize)| -> Vec<(usize, ReplicateRecord)> {
        let dims = cfg.dims[di];
        let seed = cfg.base_seed.wrapping_add(rep as u64);
        let t = cfg.t_grid[ti];
        let failed = |method: Method| ReplicateRecord {
            method,
            t,
            d1: dims.d1,
            d2: dims.d2,
            r1: dims.r1,
            r2: dims.r2,
            rep,
            seed,
            proj_err_log: f64::NAN,
            alpha_err: f64::NAN,
            b_err: f64::NAN,
            runtime_ms: 0.0,
            converged: false,
            exact_flag: false,
        };
        let model = match &shared[di] {
            Some(m) => Ok(m.clone()),
            None => model_for(cfg, di, rep),
        };
        let series = model.and_then(|m| path_for(&m, cfg, di, ti, seed).map(|s| (m, s)));
        cfg.methods
            .iter()
            .map(|&method| {
                let rec = match &series {
                    Err(_) => failed(method),
                    Ok((truth, s)) => {
                        let start = Instant::now();
                        match evaluate(method, s, truth, cfg) {
                            Ok((pe, ae, be, converged, exact)) => ReplicateRecord {
                                proj_err_log: pe,
                                alpha_err: ae,
                                b_err: be,
                                runtime_ms: if cfg.record_runtime {
                                    start.elapsed().as_secs_f64() * 1e3
                                } else {
                                    0.0
                                },
                                converged,
                                exact_flag: exact,
                                ..failed(method)
                            },
                            Err(_) => failed(method),
                        }
                    }
                };
                (di, rec)
            })
            .collect()
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| CmarError::Config(format!("thread pool: {e}")))?;
    let mut records: Vec<(usize, ReplicateRecord)> = pool.install(|| jobs.par_iter().flat_map_iter(run_job).collect());
    records.sort_by(|(da, a), (db, b)| (da, a.t, a.method, a.rep).cmp(&(db, b.t, b.method, b.rep)));
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

pub fn write_records<W: Write>(records: &[ReplicateRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records<R: std::io::Read>(r: R) -> Result<Vec<ReplicateRecord>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(CmarError::from))
        .collect()
}

/// Median of the finite values; `NaN` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Medians per `(method, dims, T)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub method: Method,
    pub dims: (usize, usize, usize, usize),
    pub t: usize,
    pub median_proj_err_log: f64,
    pub median_alpha_err: f64,
    pub median_b_err: f64,
    pub failures: usize,
}

type CellKey = (Method, (usize, usize, usize, usize), usize);

pub fn summarize(records: &[ReplicateRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<CellKey> = records
        .iter()
        .map(|r| (r.method, (r.d1, r.d2, r.r1, r.r2), r.t))
        .collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(method, dims, t)| {
            let cell: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.method == method && (r.d1, r.d2, r.r1, r.r2) == dims && r.t == t)
                .collect();
            CellSummary {
                method,
                dims,
                t,
                median_proj_err_log: median(cell.iter().map(|r| r.proj_err_log)),
                median_alpha_err: median(cell.iter().map(|r| r.alpha_err)),
                median_b_err: median(cell.iter().map(|r| r.b_err)),
                failures: cell.iter().filter(|r| !r.proj_err_log.is_finite()).count(),
            }
        })
        .collect()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
