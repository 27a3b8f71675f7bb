//! Small Monte Carlo sweep over T with medians and the fitted convergence rate.

use cmar::montecarlo::{ols_slope, run_monte_carlo, summarize, write_records, McConfig};
use cmar::simulate::ErrorSetting;
use cmar::{Dims, Method};

fn main() -> cmar::Result<()> {
    let grid = vec![250, 500, 1000];
    let mut cfg = McConfig::new(
        vec![Dims::new(3, 3, 1, 1, 1)?],
        grid.clone(),
        vec![Method::Cvar, Method::Lse, Method::Mle],
        ErrorSetting::II,
    );
    cfg.reps = 20;
    cfg.base_seed = 1;
    let records = run_monte_carlo(&cfg)?;
    let cells = summarize(&records);
    for c in &cells {
        println!(
            "{:?} T = {:>4}: median log projection error {:.3}",
            c.method, c.t, c.median_proj_err_log
        );
    }
    let log_t: Vec<f64> = grid.iter().map(|&t| (t as f64).ln()).collect();
    for method in [Method::Lse, Method::Mle] {
        let y: Vec<f64> = grid
            .iter()
            .map(|&t| {
                cells
                    .iter()
                    .find(|c| c.method == method && c.t == t)
                    .unwrap()
                    .median_proj_err_log
            })
            .collect();
        println!("{method:?} slope on log T: {:.2}", ols_slope(&log_t, &y));
    }
    write_records(&records, std::io::stdout().lock())?;
    Ok(())
}
