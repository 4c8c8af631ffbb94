//! Star-commutation defect B_μ − q^{-(λ,λ)} A_μ σ^{-1} and the [S*, R] commutators along μ = nλ.

use cartan_fock::asympt::{commutator_decay, conjecture_scan, decay_fit, star_commute_defect, vacuum_limits};
use cartan_fock::numerics::ToleranceProfile;
use cartan_fock::qcore::{QParam, Weight};
use cartan_fock::sps::build_chain;

fn main() {
    let q = QParam::new(1.5).unwrap();
    let chain = build_chain(&Weight::fundamental(1, 0), q, 20, &ToleranceProfile::default()).unwrap();
    let table = conjecture_scan(&chain).unwrap();
    let rows = star_commute_defect(&chain, &table).unwrap();
    for r in &rows {
        println!("n={:2} defect {:.3e} (matricized {:.3e}, bound combo {:.3e})", r.n, r.defect_h, r.defect_h_matricized, r.bound_combo_h);
    }
    let fit = decay_fit(&rows.iter().map(|r| (r.n, r.defect_h)).collect::<Vec<_>>(), 1e-13).unwrap().unwrap();
    println!("defect rate {:.4}", fit.t_hat);
    let comm = commutator_decay(&chain);
    println!("[S*, R] rate {:.4}", decay_fit(&comm, 1e-13).unwrap().unwrap().t_hat);
    let v = vacuum_limits(&chain);
    let last = v.last().unwrap();
    println!("vacuum overlap at n={}: {:.6} residual {:.1e}", last.n, last.value, last.residual);
}
