//! R-matrix and braiding on V⊗V for sl_2 and sl_3: spectrum, intertwining and eigen-relations.

use cartan_fock::braiding::{braid_sigma, eigen_relation_residual, intertwiner_residual};
use cartan_fock::decomp::{highest_vector, lowest_vector};
use cartan_fock::numerics::ToleranceProfile;
use cartan_fock::qcore::QParam;
use cartan_fock::repn::standard_module;

fn main() {
    let tol = ToleranceProfile::default();
    let q = QParam::new(1.5).unwrap();
    let v2 = standard_module(2, q);
    let s = braid_sigma(&v2, &v2).unwrap();
    let mut ev: Vec<f64> = s.matrix.clone().complex_eigenvalues().iter().map(|z| z.re).collect();
    ev.sort_by(f64::total_cmp);
    println!("sl2 σ eigenvalues {ev:.6?}  (q^1/2 = {:.6}, -q^-3/2 = {:.6})", q.pow(0.5), -q.pow(-1.5));
    let v3 = standard_module(3, q);
    let s3 = braid_sigma(&v3, &v3).unwrap();
    println!("sl3 intertwiner residual {:e}", intertwiner_residual(&v3, &v3, &s3.matrix).unwrap());
    let (hw, xi) = highest_vector(&v3, &tol).unwrap();
    let (lw, zeta) = lowest_vector(&v3, &tol).unwrap();
    println!("sl3 eigen-relation residual {:e}", eigen_relation_residual(&v3, &v3, (&hw, &xi), (&lw, &zeta)).unwrap());
}
