use cartan_fock::asympt::{conjecture_scan, rank_check_from};
use cartan_fock::braiding::braid_sigma;
use cartan_fock::decomp::{
    cartan_projection, fusion_multiplicities, highest_vector, lowest_vector, p_h_projector, p_l_projector, transport,
};
use cartan_fock::gtcg::{cg_closed_form, gt_enumerate, shifted_partition};
use cartan_fock::numerics::{nullspace, operator_norm, projector, singular_values, DenseMatrix, ToleranceProfile};
use cartan_fock::qcore::{pairing, q_int, weyl_dim, QParam, Weight};
use cartan_fock::repn::{check_module, contragredient, standard_module, tensor, ModuleMap};
use cartan_fock::sps::{build_chain, build_general, extremal_commutation_residuals};
use proptest::prelude::*;

fn tol() -> ToleranceProfile {
    ToleranceProfile::default()
}

fn qp(x: f64) -> QParam {
    QParam::new(x).unwrap()
}

fn rank_of(p: &DenseMatrix) -> usize {
    singular_values(p).iter().filter(|&&s| s > 0.5).count()
}

/// Small dominant weights for N = 2, 3.
fn small_weight() -> impl Strategy<Value = Weight> {
    prop_oneof![
        (1i64..=4).prop_map(|a| Weight::new(vec![a])),
        (0i64..=2, 0i64..=2).prop_filter("nonzero", |(a, b)| a + b > 0).prop_map(|(a, b)| Weight::new(vec![a, b])),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn q_int_palindromic(n in -30i64..30, q in 0.2f64..5.0) {
        let a = q_int(n, qp(q));
        let b = q_int(n, qp(1.0 / q));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn pairing_symmetric_positive(c in proptest::collection::vec(-4i64..=4, 1..=4), d in proptest::collection::vec(-4i64..=4, 4)) {
        let a = Weight::new(c.clone());
        let b = Weight::new(d[..c.len()].to_vec());
        prop_assert!((pairing(&a, &b).unwrap() - pairing(&b, &a).unwrap()).abs() <= 1e-12);
        if !a.is_zero() {
            prop_assert!(pairing(&a, &a).unwrap() > 0.0);
        }
    }

    #[test]
    fn weyl_dim_matches_construction(w in small_weight(), q in 1.0f64..2.0) {
        let v = build_general(&w, qp(q), &tol()).unwrap();
        prop_assert_eq!(v.dim(), weyl_dim(&w).unwrap());
        prop_assert!(check_module(&v, 1e-9).passed);
    }

    #[test]
    fn projector_and_nullspace(rows in 2usize..7, cols in 2usize..7, rank in 1usize..4, seed in proptest::collection::vec(-1.0f64..1.0, 100)) {
        let rank = rank.min(rows).min(cols);
        let a = DenseMatrix::from_fn(rows, rank, |r, c| seed[(r * 7 + c) % 100] + if r == c { 2.0 } else { 0.0 });
        let b = DenseMatrix::from_fn(rank, cols, |r, c| seed[(50 + r * 7 + c) % 100] + if r == c { 2.0 } else { 0.0 });
        let m = &a * &b;
        let k = nullspace(&m, &tol()).unwrap();
        prop_assert_eq!(k.ncols(), cols - rank);
        let smax = singular_values(&m)[0];
        for c in 0..k.ncols() {
            prop_assert!((&m * k.column(c)).norm() <= 10.0 * tol().nullspace_rel_tol * smax);
        }
        if k.ncols() > 0 {
            let p = projector(&k, &tol()).unwrap();
            prop_assert!(operator_norm(&(&p * &p - &p)) <= tol().identity_tol);
            prop_assert!(operator_norm(&(&p - p.transpose())) <= tol().identity_tol);
        }
    }

    #[test]
    fn double_dual_isomorphic(w in small_weight(), q in 1.0f64..2.0) {
        let v = build_general(&w, qp(q), &tol()).unwrap();
        let vv = contragredient(&contragredient(&v));
        let (_, a) = highest_vector(&v, &tol()).unwrap();
        let (_, b) = highest_vector(&vv, &tol()).unwrap();
        let t = transport(&v, &a, &vv, &b, &tol()).unwrap();
        for s in singular_values(&t) {
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
        let map = ModuleMap { matrix: t };
        prop_assert!(map.intertwining_residual(&v, &vv) < 1e-9);
    }

    #[test]
    fn tensor_associative(n in 2usize..4, q in 1.0f64..2.0, k in 0usize..2) {
        let s = standard_module(n, qp(q));
        let a = if k == 0 { s.clone() } else { contragredient(&s) };
        let l = tensor(&tensor(&a, &s).unwrap(), &s).unwrap();
        let r = tensor(&a, &tensor(&s, &s).unwrap()).unwrap();
        prop_assert_eq!(l.weights(), r.weights());
        for i in 0..n - 1 {
            for (x, y) in [(l.e(i), r.e(i)), (l.f(i), r.f(i))] {
                let scale = x.amax().max(1.0);
                prop_assert!((x - y).amax() <= 4.0 * f64::EPSILON * scale);
            }
        }
    }

    #[test]
    fn fusion_complete_and_extremal_ranks(l in small_weight(), m in small_weight(), q in 1.0f64..1.8) {
        prop_assume!(l.rank() == m.rank());
        let vl = build_general(&l, qp(q), &tol()).unwrap();
        let vm = build_general(&m, qp(q), &tol()).unwrap();
        prop_assume!(vl.dim() * vm.dim() <= 400);
        let mults = fusion_multiplicities(&vl, &vm, &tol()).unwrap();
        let total: usize = mults.iter().map(|(nu, k)| k * weyl_dim(nu).unwrap()).sum();
        prop_assert_eq!(total, vl.dim() * vm.dim());
        let t = tensor(&vl, &vm).unwrap();
        let count: usize = mults.values().sum();
        prop_assert_eq!(rank_of(&p_h_projector(&t, &tol()).unwrap()), count);
        prop_assert_eq!(rank_of(&p_l_projector(&t, &tol()).unwrap()), count);
        prop_assert_eq!(rank_of(&p_h_projector(&vl, &tol()).unwrap()), 1);
        let f = cartan_projection(&vl, &vm, &tol()).unwrap();
        for i in 0..vl.rank() {
            prop_assert!(operator_norm(&(&f * t.e(i) - t.e(i) * &f)) <= 1e-9 * t.e(i).amax().max(1.0));
        }
        let g = cartan_projection(&vm, &vl, &tol()).unwrap();
        let sig = braid_sigma(&vl, &vm).unwrap().matrix;
        prop_assert!(operator_norm(&(&g * &sig - &sig * &f)) <= 1e-8 * operator_norm(&sig).max(1.0));
    }

    #[test]
    fn chain_structure(w in small_weight(), q in 1.0f64..2.0) {
        let m = if w.rank() == 1 { 6 } else { 3 };
        prop_assume!(weyl_dim(&w.scale(m as i64)).unwrap() <= 400);
        let c = build_chain(&w, qp(q), m, &tol()).unwrap();
        for k in 1..m {
            for l in 1..=(m - k) {
                for n in 1..=(m - k - l) {
                    prop_assert!(c.coassociativity_residual(k, l, n).unwrap() <= 1e-8);
                }
            }
        }
        let (_, lo) = lowest_vector(c.base(), &tol()).unwrap();
        prop_assert!(extremal_commutation_residuals(&c, Some(lo.iamax())).iter().all(|&r| r <= 1e-8));
        let table = conjecture_scan(&c).unwrap();
        let v = table.violations(rank_check_from(&c), c.d());
        prop_assert!(v.is_empty(), "{:?}", v);
    }

    #[test]
    fn cg_envelope_and_monotone(a in 0i64..6, gap in 0i64..6, i0 in 0usize..3, q in 1.0f64..2.0) {
        let mu = vec![a + gap, a, 0];
        prop_assume!(mu[0] > 0 && shifted_partition(&mu, i0).is_some());
        prop_assert_eq!(gt_enumerate(&mu).unwrap().len(), weyl_dim(&Weight::from_partition(&mu).unwrap()).unwrap());
        let v = cg_closed_form(i0, &mu, qp(q)).unwrap();
        prop_assert!(v > 0.0 && v <= qp(q).pow(i0 as f64 / 2.0) + 1e-12);
        let wider: Vec<i64> = vec![mu[0] + 2, mu[1] + 1, 0];
        if shifted_partition(&wider, i0).is_some() {
            prop_assert!(cg_closed_form(i0, &wider, qp(q)).unwrap() >= v - 1e-12);
        }
    }
}
