//! Finite-dimensional unitary U_q(sl_N)-modules.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::numerics::{operator_norm, DenseMatrix};
use crate::qcore::{pairing, q_int, QParam, Weight};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReprError {
    #[error("modules have different parameters (N={0}/{1}, q={2}/{3})")]
    Mismatch(usize, usize, f64, f64),
    #[error("bad shape: {0}")]
    Shape(String),
    #[error("non-finite generator entries")]
    NonFinite,
}

/// A generator letter used when evaluating relation words blockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gen {
    E(usize),
    F(usize),
}

/// Unitary module with an orthonormal weight basis. `K_i` is derived from weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QModule {
    n: usize,
    q: QParam,
    weights: Vec<Weight>,
    e: Vec<DenseMatrix>,
    f: Vec<DenseMatrix>,
    blocks: BTreeMap<Weight, Vec<usize>>,
}

impl QModule {
    pub fn new(
        n: usize,
        q: QParam,
        weights: Vec<Weight>,
        e: Vec<DenseMatrix>,
        f: Vec<DenseMatrix>,
    ) -> Result<Self, ReprError> {
        let d = weights.len();
        if n < 2 || e.len() != n - 1 || f.len() != n - 1 {
            return Err(ReprError::Shape(format!("expected {} generators of each kind", n.saturating_sub(1))));
        }
        if weights.iter().any(|w| w.rank() != n - 1) {
            return Err(ReprError::Shape("weight rank does not match N".into()));
        }
        for m in e.iter().chain(&f) {
            if m.shape() != (d, d) {
                return Err(ReprError::Shape(format!("generator is {:?}, module dim {d}", m.shape())));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(ReprError::NonFinite);
            }
        }
        let mut blocks: BTreeMap<Weight, Vec<usize>> = BTreeMap::new();
        for (k, w) in weights.iter().enumerate() {
            blocks.entry(w.clone()).or_default().push(k);
        }
        Ok(QModule { n, q, weights, e, f, blocks })
    }

    pub fn trivial(n: usize, q: QParam) -> Self {
        let z = vec![DenseMatrix::zeros(1, 1); n - 1];
        QModule::new(n, q, vec![Weight::zero(n - 1)], z.clone(), z).expect("trivial module")
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn rank(&self) -> usize {
        self.n - 1
    }
    pub fn q(&self) -> QParam {
        self.q
    }
    pub fn dim(&self) -> usize {
        self.weights.len()
    }
    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }
    pub fn weight(&self, k: usize) -> &Weight {
        &self.weights[k]
    }
    pub fn e(&self, i: usize) -> &DenseMatrix {
        &self.e[i]
    }
    pub fn f(&self, i: usize) -> &DenseMatrix {
        &self.f[i]
    }
    pub fn gen(&self, g: Gen) -> &DenseMatrix {
        match g {
            Gen::E(i) => &self.e[i],
            Gen::F(i) => &self.f[i],
        }
    }
    pub fn blocks(&self) -> &BTreeMap<Weight, Vec<usize>> {
        &self.blocks
    }
    pub fn block(&self, w: &Weight) -> Option<&[usize]> {
        self.blocks.get(w).map(|v| v.as_slice())
    }

    /// Diagonal of `K_i`.
    pub fn k_diag(&self, i: usize) -> Vec<f64> {
        self.weights.iter().map(|w| self.q.pow(w.coord(i) as f64)).collect()
    }

    pub fn k_matrix(&self, i: usize) -> DenseMatrix {
        DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.k_diag(i)))
    }

    pub fn k_inv_matrix(&self, i: usize) -> DenseMatrix {
        let d: Vec<f64> = self.k_diag(i).into_iter().map(|x| 1.0 / x).collect();
        DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
    }

    fn same_params(&self, o: &QModule) -> Result<(), ReprError> {
        if self.n != o.n || self.q != o.q {
            return Err(ReprError::Mismatch(self.n, o.n, self.q.value(), o.q.value()));
        }
        Ok(())
    }

    /// Weight shift of a generator.
    pub fn shift(&self, g: Gen) -> Weight {
        match g {
            Gen::E(i) => Weight::simple_root(self.rank(), i),
            Gen::F(i) => -&Weight::simple_root(self.rank(), i),
        }
    }

    /// Restriction of a generator to the block of weight `from`, with target weight.
    pub fn gen_block(&self, g: Gen, from: &Weight) -> Option<(Weight, DenseMatrix)> {
        let to = from + &self.shift(g);
        let cols = self.block(from)?;
        let rows = self.block(&to)?;
        Some((to, submatrix(self.gen(g), rows, cols)))
    }

    /// Apply the word `letters` (rightmost first) to the block `from`.
    pub fn word_block(&self, letters: &[Gen], from: &Weight) -> Option<(Weight, DenseMatrix)> {
        let cols = self.block(from)?;
        let mut cur = from.clone();
        let mut m = DenseMatrix::identity(cols.len(), cols.len());
        for &g in letters.iter().rev() {
            let (to, b) = self.gen_block(g, &cur)?;
            m = b * m;
            cur = to;
        }
        Some((cur, m))
    }
}

pub fn submatrix(m: &DenseMatrix, rows: &[usize], cols: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

/// Standard N-dimensional module; basis index `j` is `e_{j+1}`.
pub fn standard_module(n: usize, q: QParam) -> QModule {
    assert!(n >= 2, "N must be at least 2");
    let r = n - 1;
    let s = q.pow(0.5);
    let mut e = Vec::with_capacity(r);
    let mut f = Vec::with_capacity(r);
    for i in 0..r {
        let mut ei = DenseMatrix::zeros(n, n);
        ei[(i, i + 1)] = s;
        e.push(ei);
        let mut fi = DenseMatrix::zeros(n, n);
        fi[(i + 1, i)] = 1.0 / s;
        f.push(fi);
    }
    let weights = (0..n)
        .map(|j| {
            let mut c = vec![0; r];
            if j < r {
                c[j] += 1;
            }
            if j > 0 {
                c[j - 1] -= 1;
            }
            Weight::new(c)
        })
        .collect();
    QModule::new(n, q, weights, e, f).expect("standard module")
}

/// Tensor product through the coproduct; index of `v⊗w` is `a·dim W + b`.
pub fn tensor(v: &QModule, w: &QModule) -> Result<QModule, ReprError> {
    v.same_params(w)?;
    let (dv, dw) = (v.dim(), w.dim());
    let mut e = Vec::with_capacity(v.rank());
    let mut f = Vec::with_capacity(v.rank());
    for i in 0..v.rank() {
        e.push(v.e(i).kronecker(&DenseMatrix::identity(dw, dw)) + v.k_matrix(i).kronecker(w.e(i)));
        f.push(v.f(i).kronecker(&w.k_inv_matrix(i)) + DenseMatrix::identity(dv, dv).kronecker(w.f(i)));
    }
    let mut weights = Vec::with_capacity(dv * dw);
    for a in v.weights() {
        for b in w.weights() {
            weights.push(a + b);
        }
    }
    QModule::new(v.n, v.q, weights, e, f)
}

/// Diagonal `q^{(ρ, wt v)}` relating the literal contragredient matrices to a unitary basis.
pub fn contragredient_scale(v: &QModule) -> Vec<f64> {
    let rho = Weight::rho(v.rank());
    v.weights().iter().map(|w| v.q.pow(pairing(&rho, w).expect("same rank"))).collect()
}

/// Contragredient module on the conjugate space, in the basis `b_v = d_v·ē_v`
/// with `d = contragredient_scale(V)`; weights are negated.
pub fn contragredient(v: &QModule) -> QModule {
    let d = contragredient_scale(v);
    let conj = |m: &DenseMatrix| DenseMatrix::from_fn(m.nrows(), m.ncols(), |a, b| -m[(a, b)] * d[b] / d[a]);
    let e = (0..v.rank()).map(|i| conj(v.f(i))).collect();
    let f = (0..v.rank()).map(|i| conj(v.e(i))).collect();
    let weights = v.weights().iter().map(|w| -w).collect();
    QModule::new(v.n, v.q, weights, e, f).expect("contragredient")
}

/// Residuals of the defining structure; each relative to the size of its terms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ModuleReport {
    pub unitarity: f64,
    pub grading: f64,
    pub commutator: f64,
    pub serre: f64,
    pub passed: bool,
}

impl ModuleReport {
    pub fn worst(&self) -> f64 {
        self.unitarity.max(self.grading).max(self.commutator).max(self.serre)
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

/// Sum of `coef·word` on one weight block, as (max |residual|, max |term|).
fn relation_on_block(v: &QModule, terms: &[(f64, Vec<Gen>)], from: &Weight, target: Option<DenseMatrix>) -> (f64, f64) {
    let mut acc: Option<DenseMatrix> = target.clone().map(|t| -t);
    let mut scale = target.map(|t| t.amax()).unwrap_or(0.0);
    for (c, word) in terms {
        if let Some((_, m)) = v.word_block(word, from) {
            let m = m * *c;
            scale = scale.max(m.amax());
            acc = Some(match acc {
                Some(a) => a + m,
                None => m,
            });
        }
    }
    (acc.map(|a| a.amax()).unwrap_or(0.0), scale)
}

pub fn check_module(v: &QModule, tol: f64) -> ModuleReport {
    let r = v.rank();
    let d = v.dim();
    let mut unitarity: f64 = 0.0;
    let mut grading: f64 = 0.0;
    for i in 0..r {
        let k = v.k_diag(i);
        let (e, f) = (v.e(i), v.f(i));
        let scale = e.amax().max(f.amax());
        let alpha = Weight::simple_root(r, i);
        for a in 0..d {
            for b in 0..d {
                unitarity = unitarity.max(rel((e[(b, a)] - f[(a, b)] * k[b]).abs(), scale));
                let up = &v.weights[b] + &alpha;
                if e[(a, b)] != 0.0 && v.weights[a] != up {
                    grading = grading.max(rel(e[(a, b)].abs(), scale));
                }
                if f[(b, a)] != 0.0 && v.weights[a] != up {
                    grading = grading.max(rel(f[(b, a)].abs(), scale));
                }
            }
        }
    }
    let mut commutator: f64 = 0.0;
    let mut serre: f64 = 0.0;
    let q = v.q();
    let two = q_int(2, q);
    for (mu, idx) in v.blocks() {
        for i in 0..r {
            for j in 0..r {
                let terms = vec![(1.0, vec![Gen::E(i), Gen::F(j)]), (-1.0, vec![Gen::F(j), Gen::E(i)])];
                let target = (i == j).then(|| {
                    DenseMatrix::from_diagonal_element(idx.len(), idx.len(), q_int(mu.coord(i), q))
                });
                let (res, sc) = relation_on_block(v, &terms, mu, target);
                commutator = commutator.max(rel(res, sc));
                if i == j {
                    continue;
                }
                let adjacent = i.abs_diff(j) == 1;
                for ctor in [Gen::E as fn(usize) -> Gen, Gen::F as fn(usize) -> Gen] {
                    let (gi, gj) = (ctor(i), ctor(j));
                    let terms = if adjacent {
                        vec![
                            (1.0, vec![gi, gi, gj]),
                            (-two, vec![gi, gj, gi]),
                            (1.0, vec![gj, gi, gi]),
                        ]
                    } else {
                        vec![(1.0, vec![gi, gj]), (-1.0, vec![gj, gi])]
                    };
                    let (res, sc) = relation_on_block(v, &terms, mu, None);
                    serre = serre.max(rel(res, sc));
                }
            }
        }
    }
    let mut rep = ModuleReport { unitarity, grading, commutator, serre, passed: false };
    rep.passed = rep.worst() <= tol;
    rep
}

/// Linear map between modules, expected to intertwine the generators.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleMap {
    pub matrix: DenseMatrix,
}

impl ModuleMap {
    /// Max over generators of `‖T·X_s − X_t·T‖`, relative to `‖T‖·‖X‖`.
    pub fn intertwining_residual(&self, source: &QModule, target: &QModule) -> f64 {
        let t = &self.matrix;
        assert_eq!(t.shape(), (target.dim(), source.dim()), "map shape");
        let tn = operator_norm(t).max(1e-300);
        let mut worst: f64 = 0.0;
        for i in 0..source.rank() {
            for g in [Gen::E(i), Gen::F(i)] {
                let lhs = t * source.gen(g);
                let rhs = target.gen(g) * t;
                let s = operator_norm(source.gen(g)).max(1.0) * tn;
                worst = worst.max(operator_norm(&(lhs - rhs)) / s);
            }
        }
        for a in 0..target.dim() {
            for b in 0..source.dim() {
                if t[(a, b)] != 0.0 && target.weight(a) != source.weight(b) {
                    worst = worst.max(t[(a, b)].abs() / tn);
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::singular_values;

    fn q(x: f64) -> QParam {
        QParam::new(x).unwrap()
    }

    #[test]
    fn standard_action() {
        let v = standard_module(2, q(1.7));
        assert!((v.e(0)[(0, 1)] - 1.7f64.sqrt()).abs() < 1e-15);
        assert_eq!(v.f(0)[(0, 1)], 0.0);
        let v3 = standard_module(3, q(1.7));
        assert_eq!(v3.k_diag(0)[2], 1.0);
        assert_eq!(v3.weight(1).coords(), &[-1, 1]);
        for n in 2..6 {
            for x in [1.0, 0.6, 2.5] {
                assert!(check_module(&standard_module(n, q(x)), 1e-12).passed);
            }
        }
    }

    #[test]
    fn corrupted_module_fails() {
        let v = standard_module(3, q(1.5));
        let mut e = vec![v.e(0).clone(), v.e(1).clone()];
        e[0][(0, 1)] *= 1.1;
        let bad = QModule::new(3, q(1.5), v.weights().to_vec(), e, vec![v.f(0).clone(), v.f(1).clone()]).unwrap();
        assert!(!check_module(&bad, 1e-9).passed);
    }

    #[test]
    fn tensors() {
        let qq = q(1.3);
        let v = standard_module(2, qq);
        let t = tensor(&v, &v).unwrap();
        assert_eq!(t.dim(), 4);
        // Δ(E)(e₁⊗e₂) = q^{3/2} e₁⊗e₁
        assert!((t.e(0)[(0, 1)] - 1.3f64.powf(1.5)).abs() < 1e-14);
        assert_eq!(t.weight(0).coords(), &[2]);
        assert!(check_module(&t, 1e-12).passed);
        let v3 = standard_module(3, qq);
        let t3 = tensor(&tensor(&v3, &v3).unwrap(), &v3).unwrap();
        assert!(check_module(&t3, 1e-12).passed);
        let t3b = tensor(&v3, &tensor(&v3, &v3).unwrap()).unwrap();
        assert_eq!(t3.e(1), t3b.e(1));
        assert!(tensor(&v, &standard_module(2, q(1.4))).is_err());
    }

    #[test]
    fn contragredients_are_unitary() {
        for n in 2..5 {
            let v = standard_module(n, q(1.8));
            let c = contragredient(&v);
            let mut neg: Vec<Weight> = v.weights().iter().map(|w| -w).collect();
            neg.sort();
            let mut got = c.weights().to_vec();
            got.sort();
            assert_eq!(neg, got);
            assert!(check_module(&c, 1e-12).passed, "{:?}", check_module(&c, 1e-12));
            let t = tensor(&v, &c).unwrap();
            assert!(check_module(&t, 1e-12).passed);
            let cc = contragredient(&c);
            assert!(check_module(&cc, 1e-12).passed);
            // weights and generators coincide with V after double dualization
            assert_eq!(cc.weights(), v.weights());
            let map = ModuleMap { matrix: DenseMatrix::identity(n, n) };
            assert!(map.intertwining_residual(&cc, &v) < 1e-12);
            assert!(singular_values(&map.matrix).iter().all(|s| (s - 1.0).abs() < 1e-14));
        }
        let triv = QModule::trivial(3, q(2.0));
        assert_eq!(contragredient(&triv), triv);
    }
}
