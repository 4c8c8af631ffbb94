//! The quantum symmetric Fock space for λ = ω₁: relation residuals, the exact b(n) and ζ_k.

use cartan_fock::numerics::ToleranceProfile;
use cartan_fock::qcore::{QParam, Weight};
use cartan_fock::qda::{b_chain, b_closed_form, chain_intertwiner, cuntz_pimsner_residual, q_arveson_residuals, zeta_k};
use cartan_fock::sps::build_chain;

fn main() {
    let q = QParam::new(1.5).unwrap();
    for n in [1, 4, 8, 12] {
        let a = q_arveson_residuals(3, n, q);
        let cp = cuntz_pimsner_residual(3, n, q, false);
        println!("n={n:2}: relations {:.1e}/{:.1e}  Cuntz-Pimsner defect {:.3e}", a.off_diagonal, a.diagonal, cp.worst());
    }
    let chain = build_chain(&Weight::fundamental(1, 0), q, 8, &ToleranceProfile::default()).unwrap();
    for n in 1..=6 {
        let ci = chain_intertwiner(&chain, n).unwrap();
        println!(
            "n={n}: b chain {:.12} closed {:.12}  intertwiner residuals {:.1e} {:.1e}",
            b_chain(&chain, n),
            b_closed_form(n, q),
            ci.unitarity_residual,
            ci.intertwining_residual
        );
    }
    println!("ζ_k for m=4: {:?}", (0..=4).map(|k| zeta_k(4, k, q)).collect::<Vec<_>>());
}
