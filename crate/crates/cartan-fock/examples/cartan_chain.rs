//! The Cartan chain V_{nλ} for sl_3, λ = ρ: dimensions, coassociativity and row sums.

use cartan_fock::numerics::ToleranceProfile;
use cartan_fock::qcore::{weyl_dim, QParam, Weight};
use cartan_fock::sps::{build_chain, row_sum_residuals};

fn main() {
    let tol = ToleranceProfile::default();
    let lambda = Weight::rho(2);
    let chain = build_chain(&lambda, QParam::new(1.4).unwrap(), 4, &tol).unwrap();
    for n in 0..=chain.max_level() {
        println!("n={n}: dim {} (Weyl {})", chain.dim(n), weyl_dim(&lambda.scale(n as i64)).unwrap());
    }
    println!("coassociativity (1,1,2): {:e}", chain.coassociativity_residual(1, 1, 2).unwrap());
    println!("coassociativity (2,1,1): {:e}", chain.coassociativity_residual(2, 1, 1).unwrap());
    println!("Σ S_i S_i* − (1 − P_0) per level: {:?}", row_sum_residuals(&chain));
}
