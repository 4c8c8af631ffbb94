//! Build the standard module of U_q(sl_3) and print its structure residuals.

use cartan_fock::qcore::{q_int, QParam};
use cartan_fock::repn::{check_module, contragredient, standard_module, tensor};

fn main() {
    let q = QParam::new(1.5).unwrap();
    println!("[3]_q = {:.6}", q_int(3, q));
    let v = standard_module(3, q);
    for k in 0..v.dim() {
        println!("e_{k}: weight {}", v.weight(k));
    }
    println!("V:     {:?}", check_module(&v, 1e-9));
    println!("V-bar: {:?}", check_module(&contragredient(&v), 1e-9));
    let vv = tensor(&v, &v).unwrap();
    println!("V⊗V:   {:?}", check_module(&vv, 1e-9));
}
