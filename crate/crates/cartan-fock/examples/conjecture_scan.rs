//! Scan a(n), b(n), c(n) along λ = ω₁ for sl_2 and fit the geometric rate.

use cartan_fock::asympt::{conjecture_scan, rate_fit, Column};
use cartan_fock::numerics::ToleranceProfile;
use cartan_fock::qcore::{QParam, Weight};
use cartan_fock::sps::build_chain;

fn main() {
    for qv in [1.0, 1.2, 1.5, 2.0] {
        let chain = build_chain(&Weight::fundamental(1, 0), QParam::new(qv).unwrap(), 18, &ToleranceProfile::default()).unwrap();
        let table = conjecture_scan(&chain).unwrap();
        let fit = rate_fit(&table.column(Column::A), (4, 16)).unwrap();
        println!(
            "q={qv}: a(16)={:.3e}  t̂={:.4} (1/q={:.4})  geometric={}",
            table.row(16).unwrap().a,
            fit.t_hat,
            1.0 / qv,
            fit.geometric
        );
    }
}
