//! Highest/lowest-weight extraction, generated submodules, Cartan components and fusion.

use std::collections::BTreeMap;

use nalgebra::DVector;
use thiserror::Error;

use crate::numerics::{nullspace, orthonormalize_with_twin, projector, DenseMatrix, NumericsError, ToleranceProfile};
use crate::qcore::{weyl_dim, QError, Weight};
use crate::repn::{tensor, Gen, ModuleMap, QModule, ReprError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Weight(#[from] QError),
    #[error("seed is not a highest weight vector (residual {0:e})")]
    NotHighestWeight(f64),
    #[error("vector is not homogeneous in weight")]
    NotWeightVector,
    #[error("module is not simple ({0} highest weight vectors)")]
    NotSimple(usize),
    #[error("generated module has dim {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("twin module does not follow the primary closure at weight {0}")]
    TwinMismatch(Weight),
    #[error("multiplicity bound violated at {nu}: m={m}, bound={bound}")]
    BoundViolation { nu: Weight, m: usize, bound: usize },
    #[error("fusion does not account for the whole tensor product ({got} of {expected})")]
    Incomplete { got: usize, expected: usize },
}

/// Extremal vectors grouped by weight; columns are orthonormal, in full coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct HighestWeightReport {
    pub components: Vec<(Weight, DenseMatrix)>,
    pub total: usize,
}

impl HighestWeightReport {
    /// All vectors side by side.
    pub fn onb(&self, dim: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(dim, self.total);
        let mut c = 0;
        for (_, m) in &self.components {
            out.columns_mut(c, m.ncols()).copy_from(m);
            c += m.ncols();
        }
        out
    }

    pub fn multiplicities(&self) -> BTreeMap<Weight, usize> {
        self.components.iter().map(|(w, m)| (w.clone(), m.ncols())).collect()
    }

    pub fn get(&self, w: &Weight) -> Option<&DenseMatrix> {
        self.components.iter().find(|(x, _)| x == w).map(|(_, m)| m)
    }
}

/// Make the first non-negligible coordinate positive.
pub fn fix_sign(v: &mut DVector<f64>) {
    let m = v.amax();
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-12 * m) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
}

fn extreme_space(v: &QModule, raising: bool, tol: &ToleranceProfile) -> Result<HighestWeightReport, DecompError> {
    let mut components = Vec::new();
    let mut total = 0;
    for (mu, idx) in v.blocks() {
        let mut stacked: Vec<DenseMatrix> = Vec::new();
        for i in 0..v.rank() {
            let g = if raising { Gen::E(i) } else { Gen::F(i) };
            if let Some((_, b)) = v.gen_block(g, mu) {
                stacked.push(b);
            }
        }
        let rows: usize = stacked.iter().map(|b| b.nrows()).sum();
        let mut m = DenseMatrix::zeros(rows, idx.len());
        let mut r = 0;
        for b in &stacked {
            m.rows_mut(r, b.nrows()).copy_from(b);
            r += b.nrows();
        }
        let ker = nullspace(&m, tol)?;
        if ker.ncols() == 0 {
            continue;
        }
        let mut full = DenseMatrix::zeros(v.dim(), ker.ncols());
        for c in 0..ker.ncols() {
            let mut col: DVector<f64> = ker.column(c).into_owned();
            fix_sign(&mut col);
            for (a, &k) in idx.iter().enumerate() {
                full[(k, c)] = col[a];
            }
        }
        total += ker.ncols();
        components.push((mu.clone(), full));
    }
    Ok(HighestWeightReport { components, total })
}

/// Joint kernel of all `E_i`, computed per weight block.
pub fn highest_weight_space(v: &QModule, tol: &ToleranceProfile) -> Result<HighestWeightReport, DecompError> {
    extreme_space(v, true, tol)
}

/// Joint kernel of all `F_i`, computed per weight block.
pub fn lowest_weight_space(v: &QModule, tol: &ToleranceProfile) -> Result<HighestWeightReport, DecompError> {
    extreme_space(v, false, tol)
}

pub fn p_h_projector(v: &QModule, tol: &ToleranceProfile) -> Result<DenseMatrix, DecompError> {
    Ok(projector(&highest_weight_space(v, tol)?.onb(v.dim()), tol)?)
}

pub fn p_l_projector(v: &QModule, tol: &ToleranceProfile) -> Result<DenseMatrix, DecompError> {
    Ok(projector(&lowest_weight_space(v, tol)?.onb(v.dim()), tol)?)
}

fn unique_vector(rep: HighestWeightReport) -> Result<(Weight, DVector<f64>), DecompError> {
    if rep.total != 1 {
        return Err(DecompError::NotSimple(rep.total));
    }
    let (w, m) = rep.components.into_iter().next().unwrap();
    Ok((w, m.column(0).into_owned()))
}

/// Highest weight and phase-fixed highest weight vector of a simple module.
pub fn highest_vector(v: &QModule, tol: &ToleranceProfile) -> Result<(Weight, DVector<f64>), DecompError> {
    unique_vector(highest_weight_space(v, tol)?)
}

/// Lowest weight and phase-fixed lowest weight vector of a simple module.
pub fn lowest_vector(v: &QModule, tol: &ToleranceProfile) -> Result<(Weight, DVector<f64>), DecompError> {
    unique_vector(lowest_weight_space(v, tol)?)
}

fn weight_of_vector(v: &QModule, x: &DVector<f64>) -> Result<Weight, DecompError> {
    let m = x.amax();
    if m == 0.0 {
        return Err(DecompError::NotWeightVector);
    }
    let mut found: Option<&Weight> = None;
    for (k, val) in x.iter().enumerate() {
        if val.abs() > 1e-12 * m {
            let w = v.weight(k);
            match found {
                None => found = Some(w),
                Some(f) if f != w => return Err(DecompError::NotWeightVector),
                _ => {}
            }
        }
    }
    Ok(found.unwrap().clone())
}

fn restrict(v: &QModule, x: &DVector<f64>, w: &Weight) -> DenseMatrix {
    let idx = v.block(w).unwrap();
    DenseMatrix::from_fn(idx.len(), 1, |a, _| x[idx[a]])
}

struct Layer {
    weight: Weight,
    primary: DenseMatrix,
    twin: Option<DenseMatrix>,
    offset: usize,
}

/// F-closure of a weight vector, orthonormalized one weight at a time.
/// A twin module receives the same linear combinations, which yields intertwiners.
fn closure(
    v: &QModule,
    seed: &DVector<f64>,
    twin: Option<(&QModule, &DVector<f64>)>,
    tol: &ToleranceProfile,
) -> Result<Vec<Layer>, DecompError> {
    let w0 = weight_of_vector(v, seed)?;
    let nrm = seed.norm();
    let p0 = restrict(v, seed, &w0) / nrm;
    let t0 = match twin {
        Some((t, ts)) => {
            if t.block(&w0).is_none() {
                return Err(DecompError::TwinMismatch(w0));
            }
            Some(restrict(t, ts, &w0) / nrm)
        }
        None => None,
    };
    let mut layers = vec![Layer { weight: w0, primary: p0, twin: t0, offset: 0 }];
    let mut frontier = vec![0usize];
    let mut offset = 1;
    while !frontier.is_empty() {
        let mut cand: BTreeMap<Weight, (Vec<DenseMatrix>, Vec<DenseMatrix>, f64)> = BTreeMap::new();
        for &li in &frontier {
            let layer = &layers[li];
            for i in 0..v.rank() {
                let Some((to, blk)) = v.gen_block(Gen::F(i), &layer.weight) else { continue };
                let entry = cand.entry(to.clone()).or_default();
                entry.2 = entry.2.max(blk.norm());
                entry.0.push(blk * &layer.primary);
                if let (Some((t, _)), Some(tp)) = (twin, layer.twin.as_ref()) {
                    let Some((_, tb)) = t.gen_block(Gen::F(i), &layer.weight) else {
                        return Err(DecompError::TwinMismatch(to));
                    };
                    entry.1.push(tb * tp);
                }
            }
        }
        frontier.clear();
        for (w, (ps, ts, reference)) in cand {
            let p = hcat(&ps);
            let t = twin.map(|_| hcat(&ts));
            let (q, tq) = orthonormalize_with_twin(&p, t.as_ref(), reference, tol)?;
            if q.ncols() == 0 {
                continue;
            }
            let k = q.ncols();
            frontier.push(layers.len());
            layers.push(Layer { weight: w, primary: q, twin: tq, offset });
            offset += k;
        }
    }
    Ok(layers)
}

fn hcat(ms: &[DenseMatrix]) -> DenseMatrix {
    let rows = ms.first().map(|m| m.nrows()).unwrap_or(0);
    let cols = ms.iter().map(|m| m.ncols()).sum();
    let mut out = DenseMatrix::zeros(rows, cols);
    let mut c = 0;
    for m in ms {
        out.columns_mut(c, m.ncols()).copy_from(m);
        c += m.ncols();
    }
    out
}

fn embed(v: &QModule, layers: &[Layer], twin: bool) -> DenseMatrix {
    let k: usize = layers.iter().map(|l| l.primary.ncols()).sum();
    let mut out = DenseMatrix::zeros(v.dim(), k);
    for l in layers {
        let m = if twin { l.twin.as_ref().unwrap() } else { &l.primary };
        let idx = v.block(&l.weight).unwrap();
        for c in 0..m.ncols() {
            for (a, &row) in idx.iter().enumerate() {
                out[(row, l.offset + c)] = m[(a, c)];
            }
        }
    }
    out
}

fn compress(v: &QModule, layers: &[Layer]) -> Result<QModule, DecompError> {
    let k: usize = layers.iter().map(|l| l.primary.ncols()).sum();
    let pos: BTreeMap<&Weight, usize> = layers.iter().enumerate().map(|(i, l)| (&l.weight, i)).collect();
    let mut weights = Vec::with_capacity(k);
    for l in layers {
        for _ in 0..l.primary.ncols() {
            weights.push(l.weight.clone());
        }
    }
    let mut e = vec![DenseMatrix::zeros(k, k); v.rank()];
    let mut f = vec![DenseMatrix::zeros(k, k); v.rank()];
    for l in layers {
        for i in 0..v.rank() {
            for (g, out) in [(Gen::E(i), &mut e[i]), (Gen::F(i), &mut f[i])] {
                let Some((to, blk)) = v.gen_block(g, &l.weight) else { continue };
                let Some(&ti) = pos.get(&to) else { continue };
                let tl = &layers[ti];
                let m = tl.primary.transpose() * blk * &l.primary;
                out.view_mut((tl.offset, l.offset), m.shape()).copy_from(&m);
            }
        }
    }
    Ok(QModule::new(v.n(), v.q(), weights, e, f)?)
}

fn hw_residual(v: &QModule, seed: &DVector<f64>) -> f64 {
    (0..v.rank())
        .map(|i| (v.e(i) * seed).amax() / (v.e(i).amax().max(1.0) * seed.amax().max(1e-300)))
        .fold(0.0, f64::max)
}

/// Submodule generated by a highest weight vector, with its isometric embedding.
/// The normalized seed is basis vector 0 of the result.
pub fn generate_submodule(
    v: &QModule,
    seed: &DVector<f64>,
    tol: &ToleranceProfile,
) -> Result<(QModule, ModuleMap), DecompError> {
    let res = hw_residual(v, seed);
    if res > tol.identity_tol {
        return Err(DecompError::NotHighestWeight(res));
    }
    let layers = closure(v, seed, None, tol)?;
    let w0 = layers[0].weight.clone();
    if !w0.is_dominant() {
        return Err(DecompError::NotHighestWeight(f64::INFINITY));
    }
    let sub = compress(v, &layers)?;
    let expected = weyl_dim(&w0)?;
    if sub.dim() != expected {
        return Err(DecompError::DimensionMismatch { got: sub.dim(), expected });
    }
    Ok((sub, ModuleMap { matrix: embed(v, &layers, false) }))
}

/// Intertwiner `source → target` sending `source_seed` to `target_seed`,
/// where `source` is generated by its seed.
pub fn transport(
    source: &QModule,
    source_seed: &DVector<f64>,
    target: &QModule,
    target_seed: &DVector<f64>,
    tol: &ToleranceProfile,
) -> Result<DenseMatrix, DecompError> {
    let layers = closure(source, source_seed, Some((target, target_seed)), tol)?;
    let b = embed(source, &layers, false);
    if b.ncols() != source.dim() {
        return Err(DecompError::DimensionMismatch { got: b.ncols(), expected: source.dim() });
    }
    let t = embed(target, &layers, true);
    Ok(t * b.transpose())
}

/// The Cartan component of `A⊗B` and its isometric embedding; seed `ξ_A⊗ξ_B` is basis vector 0.
pub fn cartan_isometry(a: &QModule, b: &QModule, tol: &ToleranceProfile) -> Result<(QModule, DenseMatrix), DecompError> {
    let (_, xa) = highest_vector(a, tol)?;
    let (_, xb) = highest_vector(b, tol)?;
    let t = tensor(a, b)?;
    let seed = kron_vec(&xa, &xb);
    let (m, w) = generate_submodule(&t, &seed, tol)?;
    Ok((m, w.matrix))
}

/// Projection `f` onto the Cartan component of `A⊗B`.
pub fn cartan_projection(a: &QModule, b: &QModule, tol: &ToleranceProfile) -> Result<DenseMatrix, DecompError> {
    let (_, w) = cartan_isometry(a, b, tol)?;
    Ok(&w * w.transpose())
}

pub fn kron_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(a.len() * b.len(), |k, _| a[k / b.len()] * b[k % b.len()])
}

/// Dimension of the weight space `wt` of `V`.
pub fn weight_multiplicity(v: &QModule, wt: &Weight) -> usize {
    v.block(wt).map(|b| b.len()).unwrap_or(0)
}

/// `m^ν` for `V_λ⊗V_μ`, checked against completeness and the weight-space bounds.
pub fn fusion_multiplicities(
    vl: &QModule,
    vm: &QModule,
    tol: &ToleranceProfile,
) -> Result<BTreeMap<Weight, usize>, DecompError> {
    let (_, _) = highest_vector(vl, tol)?;
    let (mu, _) = highest_vector(vm, tol)?;
    let t = tensor(vl, vm)?;
    let mults = highest_weight_space(&t, tol)?.multiplicities();
    let mut covered = 0;
    for (nu, &m) in &mults {
        covered += m * weyl_dim(nu)?;
        let bound = weight_multiplicity(vl, &(nu - &mu));
        if m > bound {
            return Err(DecompError::BoundViolation { nu: nu.clone(), m, bound });
        }
        let s: Vec<usize> = (0..nu.rank()).filter(|&i| nu.coord(i) == 0 && mu.coord(i) == 0).collect();
        let sbound = s_invariant_dim(vl, &s, &(nu - &mu), tol)?;
        if m > sbound {
            return Err(DecompError::BoundViolation { nu: nu.clone(), m, bound: sbound });
        }
    }
    if covered != t.dim() {
        return Err(DecompError::Incomplete { got: covered, expected: t.dim() });
    }
    let criterion = vl.weights().iter().all(|w| (0..w.rank()).all(|i| w.coord(i) + mu.coord(i) >= -1));
    if criterion {
        for (lw, idx) in vl.blocks() {
            let nu = lw + &mu;
            if !nu.is_dominant() {
                continue;
            }
            let m = mults.get(&nu).copied().unwrap_or(0);
            if m != idx.len() {
                return Err(DecompError::BoundViolation { nu, m, bound: idx.len() });
            }
        }
    }
    Ok(mults)
}

/// Dimension of the vectors of weight `wt` killed by `E_i`, `F_i` for all `i ∈ s`.
pub fn s_invariant_dim(v: &QModule, s: &[usize], wt: &Weight, tol: &ToleranceProfile) -> Result<usize, DecompError> {
    let Some(idx) = v.block(wt) else { return Ok(0) };
    let mut stacked: Vec<DenseMatrix> = Vec::new();
    for &i in s {
        for g in [Gen::E(i), Gen::F(i)] {
            if let Some((_, b)) = v.gen_block(g, wt) {
                stacked.push(b);
            }
        }
    }
    if stacked.is_empty() {
        return Ok(idx.len());
    }
    let m = vcat(&stacked, idx.len());
    Ok(nullspace(&m, tol)?.ncols())
}

fn vcat(ms: &[DenseMatrix], cols: usize) -> DenseMatrix {
    let rows = ms.iter().map(|m| m.nrows()).sum();
    let mut out = DenseMatrix::zeros(rows, cols);
    let mut r = 0;
    for m in ms {
        out.rows_mut(r, m.nrows()).copy_from(m);
        r += m.nrows();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gram_residual, operator_norm};
    use crate::qcore::QParam;
    use crate::repn::{check_module, contragredient, standard_module};

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }
    fn q(x: f64) -> QParam {
        QParam::new(x).unwrap()
    }

    #[test]
    fn standard_is_simple() {
        let v = standard_module(3, q(1.5));
        let (w, x) = highest_vector(&v, &tol()).unwrap();
        assert_eq!(w, Weight::fundamental(2, 0));
        assert_eq!(x[0], 1.0);
        let (w, _) = lowest_vector(&v, &tol()).unwrap();
        assert_eq!(w.coords(), &[0, -1]);
    }

    #[test]
    fn sl2_square() {
        for x in [1.0, 1.5] {
            let v = standard_module(2, q(x));
            let t = tensor(&v, &v).unwrap();
            let m = highest_weight_space(&t, &tol()).unwrap().multiplicities();
            assert_eq!(m.len(), 2);
            assert_eq!(m[&Weight::new(vec![2])], 1);
            assert_eq!(m[&Weight::new(vec![0])], 1);
            let p = p_h_projector(&t, &tol()).unwrap();
            assert!((p.trace() - 2.0).abs() < 1e-12);
            let seed = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
            let (sub, map) = generate_submodule(&t, &seed, &tol()).unwrap();
            assert_eq!(sub.dim(), 3);
            assert!(check_module(&sub, 1e-12).passed);
            assert!(map.intertwining_residual(&sub, &t) < 1e-12);
            assert!(gram_residual(&map.matrix) < 1e-14);
        }
    }

    #[test]
    fn non_highest_seed_rejected() {
        let v = standard_module(2, q(1.5));
        let t = tensor(&v, &v).unwrap();
        let seed = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(generate_submodule(&t, &seed, &tol()), Err(DecompError::NotHighestWeight(_))));
    }

    #[test]
    fn cartan_components() {
        let v = standard_module(3, q(1.0));
        let f = cartan_projection(&v, &v, &tol()).unwrap();
        assert!((f.trace() - 6.0).abs() < 1e-12);
        let v = standard_module(3, q(1.7));
        let t = tensor(&v, &v).unwrap();
        let f = cartan_projection(&v, &v, &tol()).unwrap();
        assert!((f[(0, 0)] - 1.0).abs() < 1e-14);
        for i in 0..2 {
            assert!(operator_norm(&(&f * t.e(i) - t.e(i) * &f)) < 1e-12);
            assert!(operator_norm(&(&f * t.f(i) - t.f(i) * &f)) < 1e-12);
        }
        let triv = QModule::trivial(3, q(1.7));
        let f0 = cartan_projection(&v, &triv, &tol()).unwrap();
        assert!((f0 - DenseMatrix::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn fusion_rules() {
        let v = standard_module(3, q(1.3));
        let m = fusion_multiplicities(&v, &v, &tol()).unwrap();
        assert_eq!(m.len(), 2);
        let triv = QModule::trivial(3, q(1.3));
        let m = fusion_multiplicities(&triv, &v, &tol()).unwrap();
        assert_eq!(m.into_iter().collect::<Vec<_>>(), vec![(Weight::fundamental(2, 0), 1)]);
    }

    #[test]
    fn invariants_count() {
        let v = standard_module(2, q(1.4));
        let c = contragredient(&v);
        let t = tensor(&v, &c).unwrap();
        let z = Weight::zero(1);
        assert_eq!(s_invariant_dim(&t, &[0], &z, &tol()).unwrap(), 1);
        assert_eq!(s_invariant_dim(&t, &[], &z, &tol()).unwrap(), 2);
        let v3 = standard_module(3, q(1.4));
        assert_eq!(s_invariant_dim(&v3, &[0, 1], &Weight::zero(2), &tol()).unwrap(), 0);
        let m = highest_weight_space(&t, &tol()).unwrap();
        assert_eq!(m.total, 2);
        assert_eq!(lowest_weight_space(&t, &tol()).unwrap().total, 2);
    }
}
