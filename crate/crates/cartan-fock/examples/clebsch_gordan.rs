//! Gelfand-Tsetlin patterns and Clebsch-Gordan coefficients for V_{ω₁}⊗V_μ.

use cartan_fock::gtcg::{cg_grid, gt_enumerate, pattern_count_matches};
use cartan_fock::numerics::ToleranceProfile;
use cartan_fock::qcore::QParam;

fn main() {
    let mu = [2, 1, 0];
    let pats = gt_enumerate(&mu).unwrap();
    println!("μ = {mu:?}: {} patterns, Weyl agrees: {}", pats.len(), pattern_count_matches(&mu).unwrap());
    for p in pats.iter().take(3) {
        println!("  {:?} weight {:?}", p.rows, p.weight());
    }
    let rows = cg_grid(3, 3, QParam::new(1.5).unwrap(), &ToleranceProfile::default()).unwrap();
    for r in &rows {
        println!("μ={:?} i={} closed={:.10} numeric={:.10}", r.mu, r.i, r.closed, r.numeric);
    }
    println!("max |Δ| = {:e}", rows.iter().map(|r| r.delta).fold(0.0, f64::max));
}
