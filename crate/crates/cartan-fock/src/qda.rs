//! The λ = ω₁ system: q-symmetric monomials, closed-form creation operators and
//! their comparison with the generic chain.
//!
//! Monomials `e^d = e_1^{d_1}⋯e_N^{d_N}` of a fixed degree are ordered descending
//! lexicographically, so `e_1^n` is index 0. Variable indices are 0-based.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::decomp::{highest_weight_space, kron_vec};
use crate::numerics::{gram_residual, operator_norm, DenseMatrix};
use crate::qcore::{q_factorial, q_int, QParam, Weight};
use crate::repn::tensor;
use crate::sps::{CartanChain, ChainError};

/// Exponent vectors of degree `degree` in `nv` variables, descending lex.
pub fn monomials(nv: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(nv: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == nv {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            rec(nv, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if nv > 0 {
        rec(nv, degree as u32, &mut Vec::with_capacity(nv), &mut out);
    }
    out
}

fn index_of(ms: &[Vec<u32>]) -> HashMap<&[u32], usize> {
    ms.iter().enumerate().map(|(k, d)| (d.as_slice(), k)).collect()
}

/// `‖e^d‖² = q^{Σ_{i<j}d_id_j} Π[d_i]! / [Σd_i]!`.
pub fn monomial_norm_sq(d: &[u32], q: QParam) -> f64 {
    let mut cross = 0i64;
    let mut acc = 0i64;
    for &x in d {
        cross += acc * x as i64;
        acc += x as i64;
    }
    let num: f64 = d.iter().map(|&x| q_factorial(x, q)).product();
    q.pow(cross as f64) * num / q_factorial(acc as u32, q)
}

/// Column-sparse real matrix; enough structure for the monomial operators.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    pub rows: usize,
    pub cols: usize,
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl SparseOp {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseOp { rows, cols, columns: vec![Vec::new(); cols] }
    }

    pub fn identity(n: usize) -> Self {
        SparseOp { rows: n, cols: n, columns: (0..n).map(|k| vec![(k, 1.0)]).collect() }
    }

    fn push(&mut self, r: usize, c: usize, v: f64) {
        match self.columns[c].iter_mut().find(|(i, _)| *i == r) {
            Some(e) => e.1 += v,
            None => self.columns[c].push((r, v)),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn transpose(&self) -> SparseOp {
        let mut t = SparseOp::zeros(self.cols, self.rows);
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                t.columns[r].push((c, v));
            }
        }
        t
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SparseOp) -> SparseOp {
        assert_eq!(self.cols, other.rows, "sparse shape mismatch");
        let mut out = SparseOp::zeros(self.rows, other.cols);
        for (c, col) in other.columns.iter().enumerate() {
            for &(k, v) in col {
                for &(r, w) in &self.columns[k] {
                    out.push(r, c, v * w);
                }
            }
        }
        out
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &SparseOp) -> SparseOp {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sparse shape mismatch");
        let mut out = self.clone();
        for (col, entries) in other.columns.iter().enumerate() {
            for &(r, v) in entries {
                out.push(r, col, c * v);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.columns.iter().flatten().fold(0.0, |m, &(_, v)| m.max(v.abs()))
    }

    fn is_partial_permutation(&self) -> bool {
        let mut seen = vec![false; self.rows];
        for col in &self.columns {
            let nz: Vec<usize> = col.iter().filter(|(_, v)| *v != 0.0).map(|(r, _)| *r).collect();
            if nz.len() > 1 {
                return false;
            }
            if let Some(&r) = nz.first() {
                if seen[r] {
                    return false;
                }
                seen[r] = true;
            }
        }
        true
    }

    /// Operator norm; exact max entry for weighted partial permutations.
    pub fn norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        if self.is_partial_permutation() {
            self.max_abs()
        } else {
            operator_norm(&self.to_dense())
        }
    }
}

/// `S_i: H_n → H_{n+1}` in the orthonormalized monomial basis.
pub fn creation_sparse(nv: usize, i: usize, n: usize, q: QParam) -> SparseOp {
    let src = monomials(nv, n);
    let dst = monomials(nv, n + 1);
    let idx = index_of(&dst);
    let mut op = SparseOp::zeros(dst.len(), src.len());
    for (c, d) in src.iter().enumerate() {
        let before: u32 = d[..i].iter().sum();
        let mut e = d.clone();
        e[i] += 1;
        // ‖e^{d+ε_i}‖²/‖e^d‖² = q^{n−d_i}[d_i+1]/[n+1]
        let ratio = q.pow((n as u32 - d[i]) as f64) * q_int(d[i] as i64 + 1, q) / q_int(n as i64 + 1, q);
        op.columns[c].push((idx[e.as_slice()], q.pow(-(before as f64)) * ratio.sqrt()));
    }
    op
}

/// `S_i*: H_n → H_{n−1}` from the adjoint formula (not by transposition).
pub fn annihilation_sparse(nv: usize, i: usize, n: usize, q: QParam) -> SparseOp {
    let src = monomials(nv, n);
    if n == 0 {
        return SparseOp::zeros(0, src.len());
    }
    let dst = monomials(nv, n - 1);
    let idx = index_of(&dst);
    let mut op = SparseOp::zeros(dst.len(), src.len());
    for (c, d) in src.iter().enumerate() {
        if d[i] == 0 {
            continue;
        }
        let through: u32 = d[..=i].iter().sum();
        let coef = q.pow((n as u32 - through) as f64) * q_int(d[i] as i64, q) / q_int(n as i64, q);
        let mut e = d.clone();
        e[i] -= 1;
        // ‖e^{d−ε_i}‖²/‖e^d‖² = q^{−(n−d_i)}[n]/[d_i]
        let ratio = q.pow(-((n as u32 - d[i]) as f64)) * q_int(n as i64, q) / q_int(d[i] as i64, q);
        op.columns[c].push((idx[e.as_slice()], coef * ratio.sqrt()));
    }
    op
}

pub fn creation_closed(nv: usize, i: usize, n: usize, q: QParam) -> DenseMatrix {
    creation_sparse(nv, i, n, q).to_dense()
}

pub fn annihilation_closed(nv: usize, i: usize, n: usize, q: QParam) -> DenseMatrix {
    annihilation_sparse(nv, i, n, q).to_dense()
}

/// Operators around level n: `S_i` on `H_{n−1}` and `H_n`, `S_i*` on `H_n` and `H_{n+1}`.
struct Level {
    s_prev: Vec<SparseOp>,
    s_here: Vec<SparseOp>,
    a_here: Vec<SparseOp>,
    a_next: Vec<SparseOp>,
    dim: usize,
}

impl Level {
    fn new(nv: usize, n: usize, q: QParam) -> Self {
        let s_prev = if n == 0 {
            Vec::new()
        } else {
            (0..nv).map(|i| creation_sparse(nv, i, n - 1, q)).collect()
        };
        Level {
            s_prev,
            s_here: (0..nv).map(|i| creation_sparse(nv, i, n, q)).collect(),
            a_here: (0..nv).map(|i| annihilation_sparse(nv, i, n, q)).collect(),
            a_next: (0..nv).map(|i| annihilation_sparse(nv, i, n + 1, q)).collect(),
            dim: monomials(nv, n).len(),
        }
    }

    /// `S_i*S_j` on `H_n`.
    fn star_s(&self, i: usize, j: usize) -> SparseOp {
        self.a_next[i].compose(&self.s_here[j])
    }

    /// `S_jS_i*` on `H_n`.
    fn s_star(&self, j: usize, i: usize) -> SparseOp {
        if self.s_prev.is_empty() {
            return SparseOp::zeros(self.dim, self.dim);
        }
        self.s_prev[j].compose(&self.a_here[i])
    }
}

/// Residuals of the two relations on `H_n` (maxima over index pairs).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ArvesonResiduals {
    pub n: usize,
    pub off_diagonal: f64,
    pub diagonal: f64,
}

pub fn q_arveson_residuals(nv: usize, n: usize, q: QParam) -> ArvesonResiduals {
    let lv = Level::new(nv, n, q);
    let ratio = q_int(n as i64, q) / q_int(n as i64 + 1, q);
    let qq = q.value();
    let mut off: f64 = 0.0;
    let mut diag: f64 = 0.0;
    for i in 0..nv {
        for j in 0..nv {
            if i != j {
                off = off.max(lv.star_s(i, j).axpy(-ratio, &lv.s_star(j, i)).norm());
            }
        }
        let mut r = lv.star_s(i, i).axpy(-qq * ratio, &lv.s_star(i, i));
        for j in i + 1..nv {
            r = r.axpy(-(qq - 1.0 / qq) * ratio, &lv.s_star(j, j));
        }
        r = r.axpy(-q.pow(-(n as f64)) / q_int(n as i64 + 1, q), &SparseOp::identity(lv.dim));
        diag = diag.max(r.norm());
    }
    ArvesonResiduals { n, off_diagonal: off, diagonal: diag }
}

/// Residuals on `H_n` of the defining relations of the quotient algebra.
/// `branch_one` selects the `q ≥ 1` presentation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CuntzPimsnerResiduals {
    pub n: usize,
    pub row_sum: f64,
    pub commutation: f64,
    pub cross: f64,
    pub diagonal: f64,
}

impl CuntzPimsnerResiduals {
    pub fn worst(&self) -> f64 {
        self.row_sum.max(self.commutation).max(self.cross).max(self.diagonal)
    }
}

pub fn cuntz_pimsner_residual(nv: usize, n: usize, q: QParam, branch_one: bool) -> CuntzPimsnerResiduals {
    let lv = Level::new(nv, n, q);
    let qq = q.value();
    let mut row = SparseOp::zeros(lv.dim, lv.dim);
    for i in 0..nv {
        row = row.axpy(1.0, &lv.s_star(i, i));
    }
    let row_sum = row.axpy(-1.0, &SparseOp::identity(lv.dim)).norm();

    let up: Vec<SparseOp> = (0..nv).map(|i| creation_sparse(nv, i, n + 1, q)).collect();
    let mut commutation: f64 = 0.0;
    for i in 0..nv {
        for j in i + 1..nv {
            let sij = up[i].compose(&lv.s_here[j]);
            let sji = up[j].compose(&lv.s_here[i]);
            commutation = commutation.max(sij.axpy(-qq, &sji).norm());
        }
    }

    let c = if branch_one { 1.0 / qq } else { qq };
    let mut cross: f64 = 0.0;
    let mut diagonal: f64 = 0.0;
    for i in 0..nv {
        for j in 0..nv {
            if i != j {
                cross = cross.max(lv.star_s(i, j).axpy(-c, &lv.s_star(j, i)).norm());
            }
        }
        let mut r = lv.star_s(i, i).axpy(-1.0, &lv.s_star(i, i));
        let (range, k) = if branch_one { (i + 1..nv, 1.0 - 1.0 / (qq * qq)) } else { (0..i, 1.0 - qq * qq) };
        for j in range {
            r = r.axpy(-k, &lv.s_star(j, j));
        }
        diagonal = diagonal.max(r.norm());
    }
    CuntzPimsnerResiduals { n, row_sum, commutation, cross, diagonal }
}

fn unit(d: usize, k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(d);
    v[k] = 1.0;
    v
}

/// Chain images `e^d ∈ V_{nω₁}` of all degree-n monomials (unnormalized), one per column.
pub fn chain_monomial_images(chain: &CartanChain, n: usize) -> Result<DenseMatrix, ChainError> {
    if n > chain.max_level() {
        return Err(ChainError::BadLevel(n, chain.max_level()));
    }
    let nv = chain.d();
    let mut prev = DenseMatrix::from_element(1, 1, 1.0);
    let mut prev_ms = monomials(nv, 0);
    for k in 1..=n {
        let ms = monomials(nv, k);
        let idx = index_of(&prev_ms);
        let blocks: Vec<DenseMatrix> = (0..nv).map(|i| chain.creation_block(&unit(nv, i), k - 1)).collect();
        let mut cur = DenseMatrix::zeros(chain.dim(k), ms.len());
        for (c, d) in ms.iter().enumerate() {
            // e^d = S_i e^{d−ε_i} for the first nonzero exponent i
            let i = d.iter().position(|&x| x > 0).expect("positive degree");
            let mut e = d.clone();
            e[i] -= 1;
            let col = &blocks[i] * prev.column(idx[e.as_slice()]);
            cur.set_column(c, &col);
        }
        prev = cur;
        prev_ms = ms;
    }
    Ok(prev)
}

/// The unitary `H_n → V_{nω₁}` and its certificates.
#[derive(Debug, Clone)]
pub struct ChainIntertwiner {
    pub n: usize,
    pub matrix: DenseMatrix,
    /// `max |G − diag(‖e^d‖²)|` for the Gram matrix of chain images.
    pub gram_residual: f64,
    pub unitarity_residual: f64,
    /// `max_i ‖S_i^{chain}U_n − U_{n+1}S_i‖`; zero when level n+1 is unavailable.
    pub intertwining_residual: f64,
}

pub fn chain_intertwiner(chain: &CartanChain, n: usize) -> Result<ChainIntertwiner, ChainError> {
    let nv = chain.d();
    let q = chain.q();
    let img = chain_monomial_images(chain, n)?;
    let ms = monomials(nv, n);
    let norms: Vec<f64> = ms.iter().map(|d| monomial_norm_sq(d, q)).collect();
    let gram = img.transpose() * &img;
    let mut gres: f64 = 0.0;
    for r in 0..gram.nrows() {
        for c in 0..gram.ncols() {
            let target = if r == c { norms[r] } else { 0.0 };
            gres = gres.max((gram[(r, c)] - target).abs());
        }
    }
    let mut u = img;
    for (c, nn) in norms.iter().enumerate() {
        let mut col = u.column_mut(c);
        col /= nn.sqrt();
    }
    let unitarity = if u.nrows() == u.ncols() { gram_residual(&u).max(gram_residual(&u.transpose())) } else { f64::INFINITY };
    let mut inter: f64 = 0.0;
    if n < chain.max_level() {
        let next = chain_intertwiner_matrix(chain, n + 1)?;
        for i in 0..nv {
            let lhs = chain.creation_block(&unit(nv, i), n) * &u;
            let rhs = &next * creation_closed(nv, i, n, q);
            inter = inter.max(operator_norm(&(lhs - rhs)));
        }
    }
    Ok(ChainIntertwiner { n, matrix: u, gram_residual: gres, unitarity_residual: unitarity, intertwining_residual: inter })
}

fn chain_intertwiner_matrix(chain: &CartanChain, n: usize) -> Result<DenseMatrix, ChainError> {
    let q = chain.q();
    let mut u = chain_monomial_images(chain, n)?;
    for (c, d) in monomials(chain.d(), n).iter().enumerate() {
        let mut col = u.column_mut(c);
        col /= monomial_norm_sq(d, q).sqrt();
    }
    Ok(u)
}

/// `q^{−n/2}[n+1]^{−1/2}`: the norm of `S_{e_i}ξ_{nω₁}` for `i ≥ 2`.
pub fn b_closed_form(n: usize, q: QParam) -> f64 {
    q.pow(-(n as f64) / 2.0) / q_int(n as i64 + 1, q).sqrt()
}

/// Chain-model value of `max_{i≥2} ‖S_{e_i}ξ_{nω₁}‖`.
pub fn b_chain(chain: &CartanChain, n: usize) -> f64 {
    let nv = chain.d();
    let x = unit(chain.dim(n), 0);
    (1..nv).map(|i| (chain.creation_block(&unit(nv, i), n) * &x).norm()).fold(0.0, f64::max)
}

/// Coefficient of `e_1^k e_2^{m−k}` in the unit vector `ζ^k` of `H_m`.
pub fn zeta_k(m: u32, k: u32, q: QParam) -> f64 {
    let binom = q_factorial(m, q) / (q_factorial(k, q) * q_factorial(m - k, q));
    q.pow(-((k * (m - k)) as f64) / 2.0) * binom.sqrt()
}

fn weight_of_exponents(d: &[i64]) -> Weight {
    Weight::new(d.windows(2).map(|w| w[0] - w[1]).collect())
}

/// `|(ζ^k⊗e_1^n, ξ^{n,k})|` where `ξ^{n,k}` spans the highest weight vectors of weight
/// `(n+k, m−k, 0, …)` in `V_{mω₁}⊗V_{nω₁}`.
pub fn m_omega_overlap(chain: &CartanChain, m: usize, k: usize, n: usize) -> Result<f64, ChainError> {
    let top = chain.max_level();
    if m > top || n > top || k > m {
        return Err(ChainError::BadLevel(m.max(n), top));
    }
    let nv = chain.d();
    let vm = chain.level(m);
    let vn = chain.level(n);
    let mut part = vec![0i64; nv];
    part[0] = k as i64;
    part[1] = (m - k) as i64;
    let zeta_w = weight_of_exponents(&part);
    let blk = vm.block(&zeta_w).ok_or_else(|| ChainError::BadWeight(zeta_w.clone()))?;
    let zeta = unit(vm.dim(), blk[0]);
    part[0] += n as i64;
    let target = weight_of_exponents(&part);
    let t = tensor(vm, vn)?;
    let hw = highest_weight_space(&t, chain.tol())?;
    let xi = hw.get(&target).ok_or_else(|| ChainError::BadWeight(target.clone()))?;
    let probe = kron_vec(&zeta, &unit(vn.dim(), 0));
    Ok((xi.transpose() * probe).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ToleranceProfile;
    use crate::sps::build_chain;

    fn q(x: f64) -> QParam {
        QParam::new(x).unwrap()
    }

    #[test]
    fn monomial_basics() {
        assert_eq!(monomials(3, 2).len(), 6);
        assert_eq!(monomials(3, 2)[0], vec![2, 0, 0]);
        assert_eq!(monomials(2, 3), vec![vec![3, 0], vec![2, 1], vec![1, 2], vec![0, 3]]);
        assert_eq!(monomials(4, 20).len(), 1771);
        assert!((monomial_norm_sq(&[5, 0, 0], q(1.7)) - 1.0).abs() < 1e-14);
        assert!((monomial_norm_sq(&[1, 1], q(1.0)) - 0.5).abs() < 1e-15);
        assert!((monomial_norm_sq(&[1, 1], q(2.0)) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn creation_and_adjoint() {
        for &qq in &[1.0, 1.5, 0.7] {
            for nv in 2..=4 {
                for n in 0..6 {
                    for i in 0..nv {
                        let s = creation_sparse(nv, i, n, q(qq));
                        assert!(s.columns.iter().all(|c| c.len() == 1));
                        let a = annihilation_sparse(nv, i, n + 1, q(qq));
                        assert!((s.to_dense().transpose() - a.to_dense()).amax() < 1e-12);
                    }
                }
            }
        }
        let s1 = creation_closed(3, 0, 4, q(1.5));
        assert!((s1[(0, 0)] - 1.0).abs() < 1e-15);
        // S_2 e_1 = q^{-1} e_1e_2 with ‖e_1e_2‖ = (q/[2])^{1/2}
        let s2 = creation_closed(2, 1, 1, q(2.0));
        assert!((s2[(1, 0)] - 0.5 * (2.0f64 / 2.5).sqrt()).abs() < 1e-15);
        assert_eq!(annihilation_closed(2, 0, 0, q(2.0)).nrows(), 0);
    }

    #[test]
    fn arveson_relations() {
        for &qq in &[1.0, 1.5, 0.6] {
            for nv in 2..=4 {
                let top = if nv == 4 { 8 } else { 12 };
                for n in 0..=top {
                    let r = q_arveson_residuals(nv, n, q(qq));
                    assert!(r.off_diagonal < 1e-10 && r.diagonal < 1e-10, "{nv} {n} {qq} {r:?}");
                }
            }
        }
        let r0 = q_arveson_residuals(2, 0, q(1.0));
        assert_eq!(r0.diagonal, 0.0);
    }

    #[test]
    fn cuntz_pimsner_decay() {
        let r0 = cuntz_pimsner_residual(3, 0, q(1.5), true);
        assert!((r0.row_sum - 1.0).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for n in 1..10 {
            let r = cuntz_pimsner_residual(3, n, q(1.5), true);
            assert!(r.row_sum < 1e-12 && r.commutation < 1e-12);
            assert!(r.cross.max(r.diagonal) < prev);
            prev = r.cross.max(r.diagonal);
        }
        assert!(prev < 1.5f64.powi(-14));
        for n in 1..10 {
            let r = cuntz_pimsner_residual(2, n, q(1.0), true);
            assert!(r.diagonal <= 2.0 / (n as f64 + 1.0) + 1e-12);
        }
        let low = cuntz_pimsner_residual(3, 9, q(0.6), false);
        assert!(low.worst() < 0.6f64.powi(14));
    }

    #[test]
    fn chain_agrees() {
        for &qq in &[1.0, 1.5] {
            for nv in 2..=3 {
                let c = build_chain(&Weight::fundamental(nv - 1, 0), q(qq), 6, &ToleranceProfile::default()).unwrap();
                let u1 = chain_intertwiner(&c, 1).unwrap();
                assert!((u1.matrix.clone() - DenseMatrix::identity(nv, nv)).amax() < 1e-14);
                for n in 1..=6 {
                    let u = chain_intertwiner(&c, n).unwrap();
                    assert!(u.gram_residual < 1e-10, "{qq} {nv} {n} {}", u.gram_residual);
                    assert!(u.unitarity_residual < 1e-10);
                    assert!(u.intertwining_residual < 1e-10);
                    assert!((b_chain(&c, n.min(5)) - b_closed_form(n.min(5), q(qq))).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zeta_and_overlaps() {
        let qq = q(1.5);
        for m in 1..5u32 {
            for k in 0..=m {
                let c = zeta_k(m, k, qq);
                let ns = monomial_norm_sq(&[k, m - k], qq);
                assert!((c * c * ns - 1.0).abs() < 1e-12);
            }
        }
        let c = build_chain(&Weight::fundamental(1, 0), qq, 9, &ToleranceProfile::default()).unwrap();
        let mut prev = 0.0;
        for n in [2, 5, 8] {
            let o = m_omega_overlap(&c, 2, 1, n).unwrap();
            assert!(o > prev && o <= 1.0 + 1e-12);
            prev = o;
        }
        assert!(prev > 0.99);
        assert!((m_omega_overlap(&c, 2, 2, 4).unwrap() - 1.0).abs() < 1e-12);
    }
}
