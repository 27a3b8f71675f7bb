//! Simulate a 3×3 cointegrated panel and recover its cointegration spaces.

use cmar::metrics::projection_error;
use cmar::simulate::{gen_model, rng_from_seed, simulate_series, ErrorSetting, SimConfig};
use cmar::{fit, Dims, FitConfig, Method};

fn main() -> cmar::Result<()> {
    let dims = Dims::new(3, 3, 1, 1, 1)?;
    let mut cfg = SimConfig::new(dims, 1000, ErrorSetting::II, 7);
    cfg.include_constant = true;
    let mut rng = rng_from_seed(cfg.seed);
    let truth = gen_model(&cfg, &mut rng)?;
    let series = simulate_series(&truth, cfg.t, &mut rng)?;
    println!(
        "simulated T = {} with {} unit roots",
        series.len(),
        truth.unit_root_count(1e-6)?
    );

    let fit_cfg = FitConfig::new((1, 1), 1, true);
    for method in [Method::Lse, Method::Mle] {
        let res = fit(&series, method, &fit_cfg)?;
        let err = projection_error(&res.model.beta1, &truth.beta1, &res.model.beta2, &truth.beta2)?;
        println!(
            "{method:?}: {} sweeps, converged {}, log projection error {:.3}",
            res.iterations, res.converged, err.value
        );
        println!("  β̂₁ = {:.4?}", res.model.beta1.as_slice());
        println!("  β₁  = {:.4?}", truth.beta1.as_slice());
    }
    Ok(())
}
