//! Compactification defect ‖ψ_{n,n+k}(x_n) − x_{n+k}‖ for gauge-invariant words of length two.

use cartan_fock::asympt::{compactification_defect, decay_fit, length_two_words};
use cartan_fock::numerics::ToleranceProfile;
use cartan_fock::qcore::{QParam, Weight};
use cartan_fock::sps::{build_chain, theta};

fn main() {
    let q = QParam::new(1.5).unwrap();
    let chain = build_chain(&Weight::fundamental(1, 0), q, 16, &ToleranceProfile::default()).unwrap();
    for (name, x) in length_two_words(&chain) {
        let defect = compactification_defect(&chain, &x, 3).unwrap();
        let fit = decay_fit(&defect, 1e-13).unwrap();
        let rate = fit.map(|f| format!("{:.4}", f.t_hat)).unwrap_or_else(|| "exact".into());
        println!("{name:8} n=2: {:.3e}  rate {rate}", defect[2].1);
        let th = theta(&chain, &x);
        println!("         ‖Θ(x)‖ at n=4: {:.6}", th.norm_at(4));
    }
}
