//! Projects an unstructured vector-model coefficient onto the Kronecker family.

use cmar::cvar::nearest_kronecker;
use cmar::linalg::kron;
use cmar::simulate::{rng_from_seed, standard_normal_matrix};

fn main() -> cmar::Result<()> {
    let mut rng = rng_from_seed(5);
    let a1 = standard_normal_matrix(3, 3, &mut rng);
    let a2 = standard_normal_matrix(2, 2, &mut rng);
    let exact = kron(&a2, &a1);
    let noisy = &exact + standard_normal_matrix(6, 6, &mut rng) * 0.05;

    let fit = nearest_kronecker(&noisy, 3, 2)?;
    let approx = kron(&fit.outer, &fit.inner);
    println!("rearranged singular values {:.4?}", fit.singular_values);
    println!("‖Π − Π̃‖_F  = {:.4}", (&noisy - &approx).norm());
    println!("‖Π̃ − A₂⊗A₁‖_F = {:.4}", (&approx - &exact).norm());
    println!("residual from the spectrum = {:.4}", fit.residual_sq().sqrt());
    Ok(())
}
