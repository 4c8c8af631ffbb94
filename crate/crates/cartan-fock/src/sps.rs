//! Cartan subproduct chains `V_{nλ}`, truncated Fock spaces and their block operators.

use std::collections::BTreeMap;

use nalgebra::DVector;
use thiserror::Error;

use crate::braiding::BraidError;
use crate::decomp::{cartan_isometry, generate_submodule, highest_weight_space, transport, DecompError};
use crate::numerics::{kron_id_left, kron_id_right, operator_norm, polar, DenseMatrix, NumericsError, ToleranceProfile};
use crate::qcore::{pairing, weyl_dim, QParam, Weight};
use crate::repn::{standard_module, tensor, QModule, ReprError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Braid(#[from] BraidError),
    #[error("weight {0} must be dominant and nonzero")]
    BadWeight(Weight),
    #[error("level {0} is outside the chain (max {1})")]
    BadLevel(usize, usize),
}

impl ChainError {
    /// True when the failure is a rank ambiguity from the gap guard.
    pub fn is_ambiguous_rank(&self) -> bool {
        matches!(
            self,
            ChainError::Numerics(NumericsError::AmbiguousRank { .. })
                | ChainError::Decomp(DecompError::Numerics(NumericsError::AmbiguousRank { .. }))
        )
    }
}

fn unit(d: usize, k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(d);
    v[k] = 1.0;
    v
}

/// Builds and caches `V_μ` for dominant μ by peeling fundamental weights.
/// Every module it returns has its highest weight vector at index 0.
pub struct GeneralWeightBuilder {
    n: usize,
    q: QParam,
    tol: ToleranceProfile,
    cache: BTreeMap<Weight, QModule>,
}

impl GeneralWeightBuilder {
    pub fn new(n: usize, q: QParam, tol: ToleranceProfile) -> Self {
        GeneralWeightBuilder { n, q, tol, cache: BTreeMap::new() }
    }

    pub fn tol(&self) -> &ToleranceProfile {
        &self.tol
    }

    pub fn build(&mut self, mu: &Weight) -> Result<QModule, ChainError> {
        if !mu.is_dominant() || mu.rank() != self.n - 1 {
            return Err(ChainError::BadWeight(mu.clone()));
        }
        if let Some(m) = self.cache.get(mu) {
            return Ok(m.clone());
        }
        let r = self.n - 1;
        let module = if mu.is_zero() {
            QModule::trivial(self.n, self.q)
        } else if *mu == Weight::fundamental(r, 0) {
            standard_module(self.n, self.q)
        } else if let Some(k) = (1..r).find(|&k| *mu == Weight::fundamental(r, k)) {
            let std = standard_module(self.n, self.q);
            let prev = self.build(&Weight::fundamental(r, k - 1))?;
            let t = tensor(&std, &prev)?;
            let rep = highest_weight_space(&t, &self.tol)?;
            let seed = rep.get(mu).ok_or(ChainError::BadWeight(mu.clone()))?.column(0).into_owned();
            generate_submodule(&t, &seed, &self.tol)?.0
        } else {
            let cost = |i: usize| -> usize {
                let rest = mu - &Weight::fundamental(r, i);
                weyl_dim(&Weight::fundamental(r, i)).unwrap() * weyl_dim(&rest).unwrap()
            };
            let i = (0..r).filter(|&i| mu.coord(i) > 0).min_by_key(|&i| (cost(i), i)).unwrap();
            let a = self.build(&Weight::fundamental(r, i))?;
            let b = self.build(&(mu - &Weight::fundamental(r, i)))?;
            cartan_isometry(&a, &b, &self.tol)?.0
        };
        self.cache.insert(mu.clone(), module.clone());
        Ok(module)
    }
}

/// Convenience wrapper around a fresh [`GeneralWeightBuilder`].
pub fn build_general(mu: &Weight, q: QParam, tol: &ToleranceProfile) -> Result<QModule, ChainError> {
    GeneralWeightBuilder::new(mu.n(), q, *tol).build(mu)
}

/// The tower `V_{nλ}`, `n = 0..=M`, with left and right structure isometries.
///
/// `left(n)` is `w_n: V_{(n+1)λ} → V_λ⊗V_{nλ}`, `right(n)` is `w′_n: V_{(n+1)λ} → V_{nλ}⊗V_λ`.
/// Basis vector 0 of every level is its phase-fixed highest weight vector.
#[derive(Debug, Clone)]
pub struct CartanChain {
    lambda: Weight,
    q: QParam,
    tol: ToleranceProfile,
    levels: Vec<QModule>,
    left: Vec<DenseMatrix>,
    right: Vec<DenseMatrix>,
}

pub fn build_chain(lambda: &Weight, q: QParam, max_level: usize, tol: &ToleranceProfile) -> Result<CartanChain, ChainError> {
    if !lambda.is_dominant() || lambda.is_zero() || max_level < 1 {
        return Err(ChainError::BadWeight(lambda.clone()));
    }
    let n = lambda.n();
    let base = build_general(lambda, q, tol)?;
    let d = base.dim();
    let mut levels = vec![QModule::trivial(n, q), base.clone()];
    let mut left = vec![DenseMatrix::identity(d, d)];
    let mut right = vec![DenseMatrix::identity(d, d)];
    for k in 1..max_level {
        let prev = &levels[k];
        let t = tensor(&base, prev)?;
        let (next, w) = generate_submodule(&t, &unit(t.dim(), 0), tol)?;
        let t2 = tensor(prev, &base)?;
        let wr = transport(&next, &unit(next.dim(), 0), &t2, &unit(t2.dim(), 0), tol)?;
        left.push(w.matrix);
        right.push(wr);
        levels.push(next);
    }
    Ok(CartanChain { lambda: lambda.clone(), q, tol: *tol, levels, left, right })
}

impl CartanChain {
    /// Assemble a chain from stored parts (used by the cache loader).
    pub fn from_parts(
        lambda: Weight,
        q: QParam,
        tol: ToleranceProfile,
        levels: Vec<QModule>,
        left: Vec<DenseMatrix>,
        right: Vec<DenseMatrix>,
    ) -> Self {
        CartanChain { lambda, q, tol, levels, left, right }
    }

    pub fn lambda(&self) -> &Weight {
        &self.lambda
    }
    pub fn q(&self) -> QParam {
        self.q
    }
    pub fn tol(&self) -> &ToleranceProfile {
        &self.tol
    }
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }
    pub fn level(&self, n: usize) -> &QModule {
        &self.levels[n]
    }
    pub fn levels(&self) -> &[QModule] {
        &self.levels
    }
    pub fn dim(&self, n: usize) -> usize {
        self.levels[n].dim()
    }
    /// `dim V_λ`.
    pub fn d(&self) -> usize {
        self.levels[1].dim()
    }
    pub fn base(&self) -> &QModule {
        &self.levels[1]
    }
    pub fn left(&self, n: usize) -> &DenseMatrix {
        &self.left[n]
    }
    pub fn right(&self, n: usize) -> &DenseMatrix {
        &self.right[n]
    }
    pub fn lefts(&self) -> &[DenseMatrix] {
        &self.left
    }
    pub fn rights(&self) -> &[DenseMatrix] {
        &self.right
    }

    pub fn fock(&self) -> FockSpace {
        FockSpace { dims: self.levels.iter().map(|l| l.dim()).collect() }
    }

    fn raw_pair(&self, k: usize, l: usize) -> DenseMatrix {
        if k == 0 || l == 0 {
            let m = self.dim(k + l);
            return DenseMatrix::identity(m, m);
        }
        if k == 1 {
            return self.left[l].clone();
        }
        let y = kron_id_left(self.d(), &self.raw_pair(k - 1, l), &self.left[k + l - 1]);
        kron_id_right(&self.left[k - 1].transpose(), self.dim(l), &y)
    }

    /// `w_{k,l}: V_{(k+l)λ} → V_{kλ}⊗V_{lλ}`.
    pub fn pair_isometry(&self, k: usize, l: usize) -> Result<DenseMatrix, ChainError> {
        if k + l > self.max_level() {
            return Err(ChainError::BadLevel(k + l, self.max_level()));
        }
        if k == 0 || l == 0 || k == 1 {
            return Ok(self.raw_pair(k, l));
        }
        Ok(polar(&self.raw_pair(k, l)))
    }

    /// `‖(w_{k,l}⊗1)w_{k+l,n} − (1⊗w_{l,n})w_{k,l+n}‖`.
    pub fn coassociativity_residual(&self, k: usize, l: usize, n: usize) -> Result<f64, ChainError> {
        let a = kron_id_right(&self.pair_isometry(k, l)?, self.dim(n), &self.pair_isometry(k + l, n)?);
        let b = kron_id_left(self.dim(k), &self.pair_isometry(l, n)?, &self.pair_isometry(k, l + n)?);
        Ok(operator_norm(&(a - b)))
    }

    /// Level-n block of `S_ξ`: `w_nᵀ(ξ⊗·)`.
    pub fn creation_block(&self, xi: &DVector<f64>, n: usize) -> DenseMatrix {
        let dn = self.dim(n);
        if n >= self.max_level() {
            return DenseMatrix::zeros(0, dn);
        }
        let wt = self.left[n].transpose();
        let mut out = DenseMatrix::zeros(wt.nrows(), dn);
        for (a, &x) in xi.iter().enumerate() {
            if x != 0.0 {
                out += wt.columns(a * dn, dn) * x;
            }
        }
        out
    }

    /// Level-n block of `R_ξ`: `w′_nᵀ(·⊗ξ)`.
    pub fn right_creation_block(&self, xi: &DVector<f64>, n: usize) -> DenseMatrix {
        let dn = self.dim(n);
        let d = self.d();
        if n >= self.max_level() {
            return DenseMatrix::zeros(0, dn);
        }
        let wt = self.right[n].transpose();
        let mut out = DenseMatrix::zeros(wt.nrows(), dn);
        for b in 0..dn {
            for (a, &x) in xi.iter().enumerate() {
                if x != 0.0 {
                    let col = wt.column(b * d + a) * x;
                    let mut dst = out.column_mut(b);
                    dst += col;
                }
            }
        }
        out
    }
}

/// `⊕_{n≤M} V_{nλ}` described by its level dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockSpace {
    pub dims: Vec<usize>,
}

impl FockSpace {
    pub fn max_level(&self) -> usize {
        self.dims.len() - 1
    }
    pub fn dim(&self) -> usize {
        self.dims.iter().sum()
    }
    pub fn offset(&self, n: usize) -> usize {
        self.dims[..n].iter().sum()
    }
    fn target_dim(&self, n: usize, shift: isize) -> usize {
        let t = n as isize + shift;
        if t < 0 || t as usize > self.max_level() {
            0
        } else {
            self.dims[t as usize]
        }
    }
}

/// Operator shifting levels by `shift`; `blocks[n]` maps level n to level n+shift
/// (a matrix with no rows when the target level does not exist).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    pub fock: FockSpace,
    pub shift: isize,
    pub blocks: Vec<DenseMatrix>,
}

impl BlockOperator {
    pub fn zero(fock: &FockSpace, shift: isize) -> Self {
        let blocks = (0..=fock.max_level())
            .map(|n| DenseMatrix::zeros(fock.target_dim(n, shift), fock.dims[n]))
            .collect();
        BlockOperator { fock: fock.clone(), shift, blocks }
    }

    pub fn identity(fock: &FockSpace) -> Self {
        let blocks = fock.dims.iter().map(|&d| DenseMatrix::identity(d, d)).collect();
        BlockOperator { fock: fock.clone(), shift: 0, blocks }
    }

    /// Diagonal operator from per-level blocks.
    pub fn diagonal(fock: &FockSpace, blocks: Vec<DenseMatrix>) -> Self {
        assert_eq!(blocks.len(), fock.dims.len());
        BlockOperator { fock: fock.clone(), shift: 0, blocks }
    }

    pub fn level_projector(fock: &FockSpace, n: usize) -> Self {
        let mut p = Self::zero(fock, 0);
        p.blocks[n] = DenseMatrix::identity(fock.dims[n], fock.dims[n]);
        p
    }

    pub fn block(&self, n: usize) -> &DenseMatrix {
        &self.blocks[n]
    }

    /// `self · other`.
    pub fn compose(&self, other: &BlockOperator) -> BlockOperator {
        let shift = self.shift + other.shift;
        let mut out = Self::zero(&self.fock, shift);
        for n in 0..=self.fock.max_level() {
            let mid = n as isize + other.shift;
            if mid < 0 || mid as usize > self.fock.max_level() {
                continue;
            }
            let b = &self.blocks[mid as usize] * &other.blocks[n];
            if b.nrows() == out.blocks[n].nrows() {
                out.blocks[n] = b;
            }
        }
        out
    }

    pub fn adjoint(&self) -> BlockOperator {
        let mut out = Self::zero(&self.fock, -self.shift);
        for n in 0..=self.fock.max_level() {
            let t = n as isize + self.shift;
            if t >= 0 && (t as usize) <= self.fock.max_level() {
                out.blocks[t as usize] = self.blocks[n].transpose();
            }
        }
        out
    }

    pub fn add(&self, other: &BlockOperator) -> BlockOperator {
        assert_eq!(self.shift, other.shift, "shift mismatch");
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b).collect();
        BlockOperator { fock: self.fock.clone(), shift: self.shift, blocks }
    }

    pub fn scale(&self, c: f64) -> BlockOperator {
        let blocks = self.blocks.iter().map(|a| a * c).collect();
        BlockOperator { fock: self.fock.clone(), shift: self.shift, blocks }
    }

    pub fn sub(&self, other: &BlockOperator) -> BlockOperator {
        self.add(&other.scale(-1.0))
    }

    /// `‖X|_{V_{nλ}}‖`.
    pub fn norm_at(&self, n: usize) -> f64 {
        operator_norm(&self.blocks[n])
    }

    /// Full matrix on the truncated Fock space.
    pub fn to_dense(&self) -> DenseMatrix {
        let dim = self.fock.dim();
        let mut out = DenseMatrix::zeros(dim, dim);
        for n in 0..=self.fock.max_level() {
            let b = &self.blocks[n];
            if b.nrows() == 0 {
                continue;
            }
            let t = (n as isize + self.shift) as usize;
            out.view_mut((self.fock.offset(t), self.fock.offset(n)), b.shape()).copy_from(b);
        }
        out
    }
}

/// `S_ξ`; the top level maps to zero.
pub fn creation(chain: &CartanChain, xi: &DVector<f64>) -> BlockOperator {
    let fock = chain.fock();
    let blocks = (0..=chain.max_level()).map(|n| chain.creation_block(xi, n)).collect();
    BlockOperator { fock, shift: 1, blocks }
}

/// `S_ζ*`.
pub fn annihilation(chain: &CartanChain, zeta: &DVector<f64>) -> BlockOperator {
    creation(chain, zeta).adjoint()
}

/// `R_ξ`.
pub fn right_creation(chain: &CartanChain, xi: &DVector<f64>) -> BlockOperator {
    let fock = chain.fock();
    let blocks = (0..=chain.max_level()).map(|n| chain.right_creation_block(xi, n)).collect();
    BlockOperator { fock, shift: 1, blocks }
}

/// Creation operators for the standard basis of `V_λ`.
pub fn basis_creations(chain: &CartanChain) -> Vec<BlockOperator> {
    (0..chain.d()).map(|i| creation(chain, &unit(chain.d(), i))).collect()
}

pub fn basis_right_creations(chain: &CartanChain) -> Vec<BlockOperator> {
    (0..chain.d()).map(|i| right_creation(chain, &unit(chain.d(), i))).collect()
}

/// Per-level `‖Σ_i S_iS_i* − (1 − e₀)‖` for levels `0..M`.
pub fn row_sum_residuals(chain: &CartanChain) -> Vec<f64> {
    let s = basis_creations(chain);
    let fock = chain.fock();
    let mut acc = BlockOperator::zero(&fock, 0);
    for si in &s {
        acc = acc.add(&si.compose(&si.adjoint()));
    }
    let target = BlockOperator::identity(&fock).sub(&BlockOperator::level_projector(&fock, 0));
    let diff = acc.sub(&target);
    (0..chain.max_level()).map(|n| diff.norm_at(n)).collect()
}

/// Max over levels `< M` of `‖Σ_{|w|=len} S_wS_w* − (1 − Σ_{k<len} e_k)‖`.
pub fn iterated_row_sum_residual(chain: &CartanChain, len: usize) -> f64 {
    let s = basis_creations(chain);
    let fock = chain.fock();
    let mut t = BlockOperator::identity(&fock);
    for _ in 0..len {
        let mut next = BlockOperator::zero(&fock, 0);
        for si in &s {
            next = next.add(&si.compose(&t).compose(&si.adjoint()));
        }
        t = next;
    }
    let mut target = BlockOperator::identity(&fock);
    for k in 0..len.min(fock.max_level() + 1) {
        target = target.sub(&BlockOperator::level_projector(&fock, k));
    }
    let diff = t.sub(&target);
    (0..chain.max_level()).map(|n| diff.norm_at(n)).fold(0.0, f64::max)
}

/// `ψ_{n,n+k}(T) = w_{n,k}ᵀ(T⊗1)w_{n,k}`.
pub fn psi(chain: &CartanChain, n: usize, k: usize, t: &DenseMatrix) -> Result<DenseMatrix, ChainError> {
    let w = chain.pair_isometry(n, k)?;
    Ok(w.transpose() * kron_id_right(t, chain.dim(k), &w))
}

/// `Θ(X) = Σ_i R_i X R_i*` for a level-preserving `X`.
pub fn theta(chain: &CartanChain, x: &BlockOperator) -> BlockOperator {
    assert_eq!(x.shift, 0, "theta needs a level-preserving operator");
    let r = basis_right_creations(chain);
    let mut out = BlockOperator::zero(&x.fock, 0);
    for ri in &r {
        out = out.add(&ri.compose(x).compose(&ri.adjoint()));
    }
    out
}

/// Per-level `max_{ξ,ζ} ‖[S_ξ, R_ζ]‖` over basis vectors, levels `0..M-1`.
pub fn creation_right_commutators(chain: &CartanChain) -> Vec<f64> {
    let s = basis_creations(chain);
    let r = basis_right_creations(chain);
    let mut out = vec![0.0f64; chain.max_level().saturating_sub(1)];
    for si in &s {
        for rj in &r {
            let c = si.compose(rj).sub(&rj.compose(si));
            for (n, o) in out.iter_mut().enumerate() {
                *o = o.max(c.norm_at(n));
            }
        }
    }
    out
}

/// `‖f₂σ − q^{(λ,λ)}f₂‖` on `V_λ⊗V_λ`.
pub fn f2_sigma_residual(chain: &CartanChain, sigma: &DenseMatrix) -> f64 {
    let w = chain.pair_isometry(1, 1).expect("level 2 exists");
    let f2 = &w * w.transpose();
    let c = chain.q().pow(pairing(chain.lambda(), chain.lambda()).unwrap());
    operator_norm(&(&f2 * sigma - &f2 * c))
}

/// Per-level residuals of `S_ζS_ξ = q^{−(λ,λ)}S⁽²⁾σ(ζ⊗ξ)` over basis pairs, levels `0..=M-2`.
pub fn braided_commutation_residuals(chain: &CartanChain, sigma: &DenseMatrix) -> Vec<f64> {
    let d = chain.d();
    let s = basis_creations(chain);
    let c = chain.q().pow(-pairing(chain.lambda(), chain.lambda()).unwrap());
    let top = chain.max_level().saturating_sub(1);
    let mut out = vec![0.0f64; top];
    for n in 0..top {
        let blocks: Vec<DenseMatrix> = s.iter().map(|si| si.blocks[n].clone()).collect();
        let next: Vec<DenseMatrix> = s.iter().map(|si| si.blocks[n + 1].clone()).collect();
        let prod = |a: usize, b: usize| &next[a] * &blocks[b];
        let pairs: Vec<DenseMatrix> = (0..d * d).map(|k| prod(k / d, k % d)).collect();
        for zc in 0..d {
            for xd in 0..d {
                let lhs = &pairs[zc * d + xd];
                let mut rhs = DenseMatrix::zeros(lhs.nrows(), lhs.ncols());
                for k in 0..d * d {
                    let coef = sigma[(k, zc * d + xd)];
                    if coef != 0.0 {
                        rhs += &pairs[k] * (c * coef);
                    }
                }
                out[n] = out[n].max(operator_norm(&(lhs - rhs)));
            }
        }
    }
    out
}

/// Per-level residuals of `S_ζS_ξ = q^{−(λ,λ)+(wt ζ, wt ξ)}S_ξS_ζ` where `ξ` is the highest
/// weight vector or `ζ` the lowest weight vector; `lowest` is the index of a lowest weight
/// basis vector of `V_λ` when one exists.
pub fn extremal_commutation_residuals(chain: &CartanChain, lowest: Option<usize>) -> Vec<f64> {
    let d = chain.d();
    let v = chain.base();
    let s = basis_creations(chain);
    let ll = pairing(chain.lambda(), chain.lambda()).unwrap();
    let mut pairs: Vec<(usize, usize)> = (0..d).map(|z| (z, 0)).collect();
    if let Some(lo) = lowest {
        pairs.extend((0..d).map(|x| (lo, x)));
    }
    let top = chain.max_level().saturating_sub(1);
    let mut out = vec![0.0f64; top];
    for (z, x) in pairs {
        let c = chain.q().pow(-ll + pairing(v.weight(z), v.weight(x)).unwrap());
        let diff = s[z].compose(&s[x]).sub(&s[x].compose(&s[z]).scale(c));
        for (n, o) in out.iter_mut().enumerate() {
            *o = o.max(diff.norm_at(n));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::braiding::braid_sigma;
    use crate::decomp::lowest_vector;
    use crate::numerics::gram_residual;
    use crate::repn::check_module;

    fn q(x: f64) -> QParam {
        QParam::new(x).unwrap()
    }
    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    #[test]
    fn sl2_chain_dims() {
        let c = build_chain(&Weight::new(vec![1]), q(1.5), 6, &tol()).unwrap();
        let dims: Vec<usize> = (0..=6).map(|n| c.dim(n)).collect();
        assert_eq!(dims, vec![1, 2, 3, 4, 5, 6, 7]);
        for n in 0..6 {
            assert!(gram_residual(c.left(n)) < 1e-13);
            assert!(gram_residual(c.right(n)) < 1e-13);
            assert_eq!(c.left(n)[(0, 0)], 1.0);
            assert_eq!(c.right(n)[(0, 0)], 1.0);
        }
        for l in c.levels() {
            assert!(check_module(l, 1e-10).passed);
        }
    }

    #[test]
    fn builder_dims() {
        let mut b = GeneralWeightBuilder::new(3, q(1.3), tol());
        assert_eq!(b.build(&Weight::new(vec![1, 1])).unwrap().dim(), 8);
        assert_eq!(b.build(&Weight::new(vec![2, 1])).unwrap().dim(), 15);
        assert_eq!(b.build(&Weight::zero(2)).unwrap().dim(), 1);
        let mut b4 = GeneralWeightBuilder::new(4, q(1.3), tol());
        for k in 0..3 {
            let m = b4.build(&Weight::fundamental(3, k)).unwrap();
            assert_eq!(m.dim(), [4, 6, 4][k]);
            assert!(check_module(&m, 1e-10).passed);
        }
        assert!(b.build(&Weight::new(vec![1, -1])).is_err());
    }

    #[test]
    fn fock_identities() {
        let c = build_chain(&Weight::new(vec![1, 0]), q(1.4), 5, &tol()).unwrap();
        assert!(row_sum_residuals(&c).iter().all(|&r| r < 1e-12));
        assert!(iterated_row_sum_residual(&c, 2) < 1e-12);
        assert!(iterated_row_sum_residual(&c, 3) < 1e-12);
        let s0 = creation(&c, &unit(3, 0));
        assert!((s0.block(2).column(0) - unit(c.dim(3), 0)).amax() < 1e-14);
        let a0 = annihilation(&c, &unit(3, 0));
        assert_eq!(a0.block(0).nrows(), 0);
        let one = BlockOperator::identity(&c.fock());
        let th = theta(&c, &one);
        for n in 1..=5 {
            assert!((th.block(n) - one.block(n)).amax() < 1e-12);
        }
        assert!(creation_right_commutators(&c).iter().all(|&r| r < 1e-12));
        for (k, l, n) in [(1, 1, 1), (1, 2, 1), (2, 1, 2), (1, 1, 3)] {
            assert!(c.coassociativity_residual(k, l, n).unwrap() < 1e-10);
        }
    }

    #[test]
    fn theta_matches_psi() {
        let c = build_chain(&Weight::new(vec![1]), q(1.5), 6, &tol()).unwrap();
        let s = basis_creations(&c);
        let x = s[1].compose(&s[0].adjoint()).add(&s[0].compose(&s[1].adjoint()));
        let mut th = x.clone();
        for k in 1..=3 {
            th = theta(&c, &th);
            for n in 0..=(6 - k) {
                let p = psi(&c, n, k, x.block(n)).unwrap();
                assert!((p - th.block(n + k)).amax() < 1e-12, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn braided_commutation() {
        for (lam, qq) in [(vec![1], 1.5), (vec![2], 1.3), (vec![1, 0], 1.5)] {
            let c = build_chain(&Weight::new(lam), q(qq), 4, &tol()).unwrap();
            let sig = braid_sigma(c.base(), c.base()).unwrap().matrix;
            assert!(f2_sigma_residual(&c, &sig) < 1e-12);
            assert!(braided_commutation_residuals(&c, &sig).iter().all(|&r| r < 1e-11));
            let (_, lo) = lowest_vector(c.base(), &tol()).unwrap();
            let idx = lo.iamax();
            assert!(extremal_commutation_residuals(&c, Some(idx)).iter().all(|&r| r < 1e-11));
        }
    }
}
