//! Quantum root vectors, the R-matrix on module pairs and the braiding `σ = Σ∘ℛ`.

use nalgebra::DVector;
use thiserror::Error;

use crate::numerics::{flip_matrix, operator_norm, DenseMatrix};
use crate::qcore::{pairing, positive_roots, q_factorial, QParam, Weight};
use crate::repn::{contragredient, standard_module, tensor, QModule, ReprError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BraidError {
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error("root vector for ({0},{1}) violates its weight shift (residual {2:e})")]
    ConventionMismatch(usize, usize, f64),
    #[error("braiding inverse is ill-conditioned (residual {0:e})")]
    IllConditioned(f64),
}

/// Bracket exponents and ordering used to build the R-matrix.
///
/// `E_{α_{i,j}} = E_{α_{i,j-1}} E_j − q^{e_exponent} E_j E_{α_{i,j-1}}`,
/// `F_{α_{i,j}} = F_j F_{α_{i,j-1}} − q^{f_exponent} F_{α_{i,j-1}} F_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct RootConvention {
    pub e_exponent: i32,
    pub f_exponent: i32,
    pub reversed: bool,
}

/// The convention selected by [`resolve_convention`].
pub const FROZEN_CONVENTION: RootConvention = RootConvention { e_exponent: -1, f_exponent: 1, reversed: false };

/// `E_α`, `F_α` for every positive root `α_i + … + α_j`, keyed by `(i, j)`.
#[derive(Debug, Clone)]
pub struct RootVectorSet {
    pub roots: Vec<(usize, usize)>,
    pub e: Vec<DenseMatrix>,
    pub f: Vec<DenseMatrix>,
}

impl RootVectorSet {
    fn index(&self, root: (usize, usize)) -> usize {
        self.roots.iter().position(|&r| r == root).expect("known root")
    }
    pub fn e_root(&self, root: (usize, usize)) -> &DenseMatrix {
        &self.e[self.index(root)]
    }
    pub fn f_root(&self, root: (usize, usize)) -> &DenseMatrix {
        &self.f[self.index(root)]
    }
}

fn shift_residual(v: &QModule, m: &DenseMatrix, alpha: &Weight) -> f64 {
    let scale = m.amax().max(1e-300);
    let mut worst: f64 = 0.0;
    for a in 0..v.dim() {
        for b in 0..v.dim() {
            if m[(a, b)] != 0.0 && &(v.weight(a) - v.weight(b)) != alpha {
                worst = worst.max(m[(a, b)].abs() / scale);
            }
        }
    }
    worst
}

pub fn root_vectors(v: &QModule, conv: RootConvention) -> Result<RootVectorSet, BraidError> {
    let r = v.rank();
    let q = v.q();
    let (ce, cf) = (q.pow(conv.e_exponent as f64), q.pow(conv.f_exponent as f64));
    let roots = positive_roots(r);
    let mut e: Vec<DenseMatrix> = Vec::with_capacity(roots.len());
    let mut f: Vec<DenseMatrix> = Vec::with_capacity(roots.len());
    for &(i, j) in &roots {
        if i == j {
            e.push(v.e(i).clone());
            f.push(v.f(i).clone());
        } else {
            // (i, j-1) immediately precedes (i, j) in the enumeration
            let (pe, pf) = (e.last().unwrap().clone(), f.last().unwrap().clone());
            e.push(&pe * v.e(j) - v.e(j) * &pe * ce);
            f.push(v.f(j) * &pf - &pf * v.f(j) * cf);
        }
        let alpha = Weight::root(r, i, j);
        let res = shift_residual(v, e.last().unwrap(), &alpha).max(shift_residual(v, f.last().unwrap(), &-&alpha));
        if res > 1e-12 {
            return Err(BraidError::ConventionMismatch(i, j, res));
        }
    }
    Ok(RootVectorSet { roots, e, f })
}

/// Positive roots in the convex order of the reduced word `s₁(s₂s₁)(s₃s₂s₁)…`.
pub fn convex_order(rank: usize) -> Vec<(usize, usize)> {
    let mut word = Vec::new();
    for k in 1..=rank {
        word.extend((0..k).rev());
    }
    let reflect = |s: usize, v: &mut Vec<i64>| {
        let mut c = 2 * v[s];
        if s > 0 {
            c -= v[s - 1];
        }
        if s + 1 < rank {
            c -= v[s + 1];
        }
        v[s] -= c;
    };
    word.iter()
        .enumerate()
        .map(|(k, &ik)| {
            let mut v = vec![0i64; rank];
            v[ik] = 1;
            for &s in word[..k].iter().rev() {
                reflect(s, &mut v);
            }
            let nz: Vec<usize> = (0..rank).filter(|&i| v[i] != 0).collect();
            debug_assert!(nz.iter().all(|&i| v[i] == 1));
            (nz[0], *nz.last().unwrap())
        })
        .collect()
}

/// Finite q-exponential `Σ_k q^{k(k+1)/2} X^k / [k]!` of a nilpotent matrix.
pub fn exp_q(x: &DenseMatrix, q: QParam) -> DenseMatrix {
    let n = x.nrows();
    let mut out = DenseMatrix::identity(n, n);
    let mut p = DenseMatrix::identity(n, n);
    for k in 1..=n as u32 {
        p = &p * x;
        if p.amax() == 0.0 {
            break;
        }
        let kk = k as f64;
        out += &p * (q.pow(kk * (kk + 1.0) / 2.0) / q_factorial(k, q));
    }
    out
}

fn same(v: &QModule, w: &QModule) -> Result<(), BraidError> {
    if v.n() != w.n() || v.q() != w.q() {
        return Err(ReprError::Mismatch(v.n(), w.n(), v.q().value(), w.q().value()).into());
    }
    Ok(())
}

pub fn r_matrix_with(v: &QModule, w: &QModule, conv: RootConvention) -> Result<DenseMatrix, BraidError> {
    same(v, w)?;
    let (dv, dw) = (v.dim(), w.dim());
    let q = v.q();
    if q.is_classical() {
        return Ok(DenseMatrix::identity(dv * dw, dv * dw));
    }
    let mut diag = Vec::with_capacity(dv * dw);
    for a in v.weights() {
        for b in w.weights() {
            diag.push(q.pow(pairing(a, b).expect("same rank")));
        }
    }
    let mut r = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    let rv = root_vectors(v, conv)?;
    let rw = root_vectors(w, conv)?;
    let mut order = convex_order(v.rank());
    if conv.reversed {
        order.reverse();
    }
    let c = 1.0 - q.pow(-2.0);
    for root in order {
        let x = rv.f_root(root).kronecker(rw.e_root(root)) * c;
        r *= exp_q(&x, q);
    }
    Ok(r)
}

/// ℛ on `V⊗W` in the frozen convention.
pub fn r_matrix(v: &QModule, w: &QModule) -> Result<DenseMatrix, BraidError> {
    r_matrix_with(v, w, FROZEN_CONVENTION)
}

/// `σ: V⊗W → W⊗V`.
#[derive(Debug, Clone)]
pub struct BraidingOperator {
    pub dim_v: usize,
    pub dim_w: usize,
    pub matrix: DenseMatrix,
}

pub fn braid_sigma(v: &QModule, w: &QModule) -> Result<BraidingOperator, BraidError> {
    let r = r_matrix(v, w)?;
    Ok(BraidingOperator { dim_v: v.dim(), dim_w: w.dim(), matrix: flip_matrix(v.dim(), w.dim()) * r })
}

/// Inverse of `σ_{V,W}`, as a map `W⊗V → V⊗W`.
pub fn braid_sigma_inverse(w: &QModule, v: &QModule) -> Result<BraidingOperator, BraidError> {
    let s = braid_sigma(v, w)?;
    let n = s.matrix.nrows();
    let inv = s.matrix.clone().lu().try_inverse().ok_or(BraidError::IllConditioned(f64::INFINITY))?;
    let res = operator_norm(&(&s.matrix * &inv - DenseMatrix::identity(n, n)));
    if res > 1e-8 {
        return Err(BraidError::IllConditioned(res));
    }
    Ok(BraidingOperator { dim_v: w.dim(), dim_w: v.dim(), matrix: inv })
}

/// `max ‖σ·Δ(x) − Δ(x)·σ‖` over generators, relative to `‖σ‖·‖Δ(x)‖`.
pub fn intertwiner_residual(v: &QModule, w: &QModule, sigma: &DenseMatrix) -> Result<f64, BraidError> {
    let vw = tensor(v, w)?;
    let wv = tensor(w, v)?;
    let sn = operator_norm(sigma);
    let mut worst: f64 = 0.0;
    for i in 0..v.rank() {
        for (x, y) in [(vw.e(i), wv.e(i)), (vw.f(i), wv.f(i))] {
            let scale = sn * operator_norm(x).max(1.0);
            worst = worst.max(operator_norm(&(sigma * x - y * sigma)) / scale);
        }
        let kx = vw.k_matrix(i);
        let ky = wv.k_matrix(i);
        worst = worst.max(operator_norm(&(sigma * &kx - &ky * sigma)) / (sn * operator_norm(&kx)));
    }
    Ok(worst)
}

/// Intertwiner residuals of a convention on standard test pairs:
/// `V⊗V`, `V⊗V̄` and `(V⊗V)⊗V` for the standard module `V`.
pub fn convention_residual(n: usize, q: QParam, conv: RootConvention) -> Result<f64, BraidError> {
    let s = standard_module(n, q);
    let ss = tensor(&s, &s)?;
    let c = contragredient(&s);
    let mut worst: f64 = 0.0;
    for (a, b) in [(&s, &s), (&s, &c), (&ss, &s)] {
        let sig = flip_matrix(a.dim(), b.dim()) * r_matrix_with(a, b, conv)?;
        worst = worst.max(intertwiner_residual(a, b, &sig)?);
    }
    Ok(worst)
}

/// All bracket conventions whose braiding passes the intertwiner test at `(n, q)`.
pub fn resolve_convention(n: usize, q: QParam, tol: f64) -> Result<Vec<RootConvention>, BraidError> {
    let mut out = Vec::new();
    for e_exponent in [-1, 1] {
        for f_exponent in [-1, 1] {
            for reversed in [false, true] {
                let conv = RootConvention { e_exponent, f_exponent, reversed };
                if convention_residual(n, q, conv)? <= tol {
                    out.push(conv);
                }
            }
        }
    }
    Ok(out)
}

/// Worst of `‖ℛ(ζ⊗ξ) − q^{(wt ζ, wt ξ)}ζ⊗ξ‖` over pairs where `ξ` is the given highest weight
/// vector of `W` and `ζ` runs over the weight basis of `V`, or `ζ` is the given lowest weight
/// vector of `V` and `ξ` runs over the weight basis of `W`.
pub fn eigen_relation_residual(
    v: &QModule,
    w: &QModule,
    highest_w: (&Weight, &DVector<f64>),
    lowest_v: (&Weight, &DVector<f64>),
) -> Result<f64, BraidError> {
    let r = r_matrix(v, w)?;
    let q = v.q();
    let pair = |a: &Weight, b: &Weight| pairing(a, b).map_err(|e| BraidError::Repr(ReprError::Shape(e.to_string())));
    let mut worst: f64 = 0.0;
    let mut check = |x: DVector<f64>, c: f64| {
        worst = worst.max((&r * &x - &x * c).amax());
    };
    for k in 0..v.dim() {
        let mut z = DVector::zeros(v.dim());
        z[k] = 1.0;
        check(z.kronecker(highest_w.1), q.pow(pair(v.weight(k), highest_w.0)?));
    }
    for k in 0..w.dim() {
        let mut x = DVector::zeros(w.dim());
        x[k] = 1.0;
        check(lowest_v.1.kronecker(&x), q.pow(pair(lowest_v.0, w.weight(k))?));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{highest_vector, kron_vec};
    use crate::numerics::ToleranceProfile;

    fn q(x: f64) -> QParam {
        QParam::new(x).unwrap()
    }

    #[test]
    fn orders() {
        assert_eq!(convex_order(1), vec![(0, 0)]);
        assert_eq!(convex_order(2), vec![(0, 0), (0, 1), (1, 1)]);
        let o3 = convex_order(3);
        assert_eq!(o3.len(), 6);
        let mut s = o3.clone();
        s.sort();
        assert_eq!(s, positive_roots(3));
    }

    #[test]
    fn root_vector_values() {
        let v = standard_module(3, q(1.6));
        let rv = root_vectors(&v, FROZEN_CONVENTION).unwrap();
        assert_eq!(rv.e_root((0, 0)), v.e(0));
        let c = rv.e_root((0, 1))[(0, 2)];
        assert!((c.abs() - 1.6).abs() < 1e-14);
    }

    #[test]
    fn sl2_spectrum() {
        let qq = 1.5;
        let v = standard_module(2, q(qq));
        let s = braid_sigma(&v, &v).unwrap();
        let mut ev: Vec<f64> = s.matrix.clone().complex_eigenvalues().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + qq.powf(-1.5)).abs() < 1e-12);
        for e in &ev[1..] {
            assert!((e - qq.sqrt()).abs() < 1e-12);
        }
        let one = standard_module(2, q(1.0));
        assert_eq!(braid_sigma(&one, &one).unwrap().matrix, flip_matrix(2, 2));
    }

    #[test]
    fn frozen_convention_passes() {
        for n in [3, 4] {
            let ok = resolve_convention(n, q(1.5), 1e-10).unwrap();
            assert!(ok.contains(&FROZEN_CONVENTION), "{ok:?}");
            assert!(ok.len() < 8);
        }
        assert!(convention_residual(2, q(2.0), FROZEN_CONVENTION).unwrap() < 1e-12);
    }

    #[test]
    fn highest_weight_eigenvector() {
        let tol = ToleranceProfile::default();
        let v = standard_module(3, q(1.4));
        let c = contragredient(&v);
        let r = r_matrix(&c, &v).unwrap();
        let (lam, xi) = highest_vector(&v, &tol).unwrap();
        for k in 0..c.dim() {
            let mut z = nalgebra::DVector::zeros(c.dim());
            z[k] = 1.0;
            let x = kron_vec(&z, &xi);
            let expect = 1.4f64.powf(pairing(c.weight(k), &lam).unwrap());
            assert!((&r * &x - &x * expect).amax() < 1e-12);
        }
        let inv = braid_sigma_inverse(&v, &c).unwrap();
        let s = braid_sigma(&c, &v).unwrap();
        assert!((&inv.matrix * &s.matrix - DenseMatrix::identity(9, 9)).amax() < 1e-12);
    }
}
