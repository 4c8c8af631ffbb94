//! Store a chain in the binary cache format, reload it and confirm a bit-exact round trip.

use cartan_fock::cli::{cache_file_name, chains_bit_equal, load_chain, read_header, store_chain};
use cartan_fock::numerics::ToleranceProfile;
use cartan_fock::qcore::{QParam, Weight};
use cartan_fock::sps::build_chain;

fn main() {
    let q = QParam::new(1.5).unwrap();
    let lambda = Weight::new(vec![1, 1]);
    let chain = build_chain(&lambda, q, 3, &ToleranceProfile::default()).unwrap();
    let dir = std::env::temp_dir().join("cartan-fock-example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(cache_file_name(&lambda, q, 3));
    store_chain(&chain, &path).unwrap();
    let header = read_header(&path).unwrap();
    println!("{} dims {:?}", path.display(), header.dims);
    let back = load_chain(&path, 1e-9).unwrap();
    println!("bit-exact: {}", chains_bit_equal(&chain, &back));
}
