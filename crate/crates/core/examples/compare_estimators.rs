//! One replicate of the estimator comparison: vector baseline, LSE and MLE on the
//! same path, scored by the distance between estimated and true cointegration spaces.

use cmar::cvar::{cvar_fit, CvarConfig};
use cmar::metrics::{cvar_projection_error, projection_error};
use cmar::simulate::{gen_model, rng_from_seed, simulate_series, ErrorSetting, SimConfig};
use cmar::{fit, Dims, FitConfig, Method};

fn main() -> cmar::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2024);
    let dims = Dims::new(3, 3, 1, 1, 1)?;
    let mut cfg = SimConfig::new(dims, 1000, ErrorSetting::II, seed);
    cfg.include_constant = true;
    let mut rng = rng_from_seed(seed);
    let truth = gen_model(&cfg, &mut rng)?;
    let series = simulate_series(&truth, cfg.t, &mut rng)?;

    let cvar = cvar_fit(&series.vectorized(), &CvarConfig::new(1, 1, true))?;
    let err = cvar_projection_error(&cvar.beta, &truth.beta1, &truth.beta2)?;
    println!("CVAR  log error {:>8.3}", err.value);

    let fit_cfg = FitConfig::new((1, 1), 1, true);
    for method in [Method::Lse, Method::Mle] {
        let res = fit(&series, method, &fit_cfg)?;
        let err = projection_error(&res.model.beta1, &truth.beta1, &res.model.beta2, &truth.beta2)?;
        println!(
            "{:<5} log error {:>8.3}  ({} sweeps)",
            format!("{method:?}").to_uppercase(),
            err.value,
            res.iterations
        );
    }
    Ok(())
}
