//! Quantum sl_N modules, Cartan subproduct systems and the asymptotics of their Fock spaces.

pub mod asympt;
pub mod braiding;
pub mod cli;
pub mod decomp;
pub mod gtcg;
pub mod numerics;
pub mod qda;
pub mod qcore;
pub mod repn;
pub mod sps;
