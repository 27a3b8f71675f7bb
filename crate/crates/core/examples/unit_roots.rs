//! Counts unit roots of generated models and shows the stationary companion spectrum.

use cmar::linalg::{eigenvalues, spectral_radius};
use cmar::simulate::{gen_model, rng_from_seed, ErrorSetting, SimConfig};
use cmar::Dims;

fn main() -> cmar::Result<()> {
    for (d1, d2, k, r1, r2) in [(3, 3, 1, 1, 1), (2, 4, 2, 1, 2), (4, 3, 1, 2, 1)] {
        let dims = Dims::new(d1, d2, k, r1, r2)?;
        let cfg = SimConfig::new(dims, k + 2, ErrorSetting::II, 11);
        let model = gen_model(&cfg, &mut rng_from_seed(cfg.seed))?;
        let companion = model.companion_matrix();
        let mut moduli: Vec<f64> = eigenvalues(&companion)?.iter().map(|z| z.norm()).collect();
        moduli.sort_by(|a, b| b.total_cmp(a));
        println!(
            "d = {d1}×{d2}, k = {k}, r = ({r1}, {r2}): {} unit roots (expected {}), ρ(Φ) = {:.4}, leading |λ| {:.3?}",
            model.unit_root_count(1e-6)?,
            d1 * d2 - r1 * r2,
            spectral_radius(&companion)?,
            &moduli[..moduli.len().min(4)]
        );
    }
    Ok(())
}
