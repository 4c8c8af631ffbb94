//! Decompose V_{ω₁}⊗V_μ for sl_3 and compare with the fusion rule and Weyl dimensions.

use cartan_fock::gtcg::shifted_partition;
use cartan_fock::numerics::ToleranceProfile;
use cartan_fock::qcore::{weyl_dim, QParam, Weight};
use cartan_fock::repn::standard_module;
use cartan_fock::decomp::fusion_multiplicities;
use cartan_fock::sps::build_general;

fn main() {
    let tol = ToleranceProfile::default();
    let q = QParam::new(1.3).unwrap();
    let std = standard_module(3, q);
    for mu in [[1, 0, 0], [2, 1, 0], [3, 1, 0], [2, 2, 0]] {
        let w = Weight::from_partition(&mu).unwrap();
        let vm = build_general(&w, q, &tol).unwrap();
        let mults = fusion_multiplicities(&std, &vm, &tol).unwrap();
        let predicted: Vec<Weight> =
            (0..3).filter_map(|i| shifted_partition(&mu, i)).map(|p| Weight::from_partition(&p).unwrap()).collect();
        println!("μ = {w} (dim {} = Weyl {})", vm.dim(), weyl_dim(&w).unwrap());
        for (nu, m) in &mults {
            println!("  V_{nu} × {m}   predicted: {}", predicted.contains(nu));
        }
    }
}
