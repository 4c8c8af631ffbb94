//! Dense real linear algebra with certified rank decisions.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type DenseMatrix = DMatrix<f64>;

/// Rank and identity tolerances shared by every decomposition.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ToleranceProfile {
    pub nullspace_rel_tol: f64,
    pub gap_ratio_min: f64,
    pub identity_tol: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        ToleranceProfile { nullspace_rel_tol: 1e-9, gap_ratio_min: 1e3, identity_tol: 1e-9 }
    }
}

impl ToleranceProfile {
    pub fn validate(&self) -> Result<(), NumericsError> {
        let ok = self.nullspace_rel_tol > 0.0
            && self.identity_tol > 0.0
            && self.gap_ratio_min > 1.0
            && self.nullspace_rel_tol.is_finite()
            && self.identity_tol.is_finite()
            && self.gap_ratio_min.is_finite();
        if ok {
            Ok(())
        } else {
            Err(NumericsError::BadTolerance(*self))
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("ambiguous rank: smallest kept singular value {kept:e}, largest dropped {dropped:e} (ratio {ratio:e})")]
    AmbiguousRank { kept: f64, dropped: f64, ratio: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("input is not orthonormal (gram residual {0:e})")]
    NotOrthonormal(f64),
    #[error("invalid tolerance profile {0:?}")]
    BadTolerance(ToleranceProfile),
}

pub fn ensure_finite(m: &DenseMatrix) -> Result<(), NumericsError> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::NonFinite)
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &DenseMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value.
pub fn operator_norm(m: &DenseMatrix) -> f64 {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return 0.0;
    }
    let amax = m.amax();
    if amax == 0.0 {
        return 0.0;
    }
    if r.min(c) <= 48 {
        return singular_values(m)[0];
    }
    // scale first so the Gram matrix cannot under/overflow
    let s = m / amax;
    let g = if r >= c { s.transpose() * &s } else { &s * s.transpose() };
    let top = g.symmetric_eigenvalues().iter().copied().fold(0.0f64, f64::max);
    top.max(0.0).sqrt() * amax
}

/// Number of singular values kept as nonzero, with the spectral-gap certificate.
pub fn certify_rank(sv_desc: &[f64], tol: &ToleranceProfile) -> Result<usize, NumericsError> {
    certify_rank_against(sv_desc, 0.0, tol)
}

/// As [`certify_rank`], with zero decided relative to `max(σ_max, reference)`.
pub fn certify_rank_against(sv_desc: &[f64], reference: f64, tol: &ToleranceProfile) -> Result<usize, NumericsError> {
    let top = sv_desc.first().copied().unwrap_or(0.0).max(reference);
    if top == 0.0 {
        return Ok(0);
    }
    let thresh = tol.nullspace_rel_tol * top;
    let r = sv_desc.iter().take_while(|&&s| s > thresh).count();
    if r < sv_desc.len() {
        let kept = if r == 0 { top } else { sv_desc[r - 1] };
        let dropped = sv_desc[r];
        if dropped > 0.0 && kept / dropped < tol.gap_ratio_min {
            return Err(NumericsError::AmbiguousRank { kept, dropped, ratio: kept / dropped });
        }
    }
    Ok(r)
}

/// Orthonormal basis of the kernel of `m`, as columns.
pub fn nullspace(m: &DenseMatrix, tol: &ToleranceProfile) -> Result<DenseMatrix, NumericsError> {
    ensure_finite(m)?;
    let (r, n) = m.shape();
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    if r == 0 || m.amax() == 0.0 {
        return Ok(DenseMatrix::identity(n, n));
    }
    // thin SVD only yields n right vectors when rows >= cols
    let padded = if r < n {
        let mut p = DenseMatrix::zeros(n, n);
        p.rows_mut(0, r).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let rank = certify_rank(&sv, tol)?;
    let mut out = DenseMatrix::zeros(n, n - rank);
    for (c, &k) in order[rank..].iter().enumerate() {
        out.set_column(c, &vt.row(k).transpose());
    }
    Ok(out)
}

/// Orthonormalize the columns of `v`, dropping dependent ones.
pub fn orthonormalize(v: &DenseMatrix, tol: &ToleranceProfile) -> Result<DenseMatrix, NumericsError> {
    Ok(orthonormalize_with_twin(v, None, 0.0, tol)?.0)
}

/// Pivoted Gram–Schmidt; `twin` columns undergo the same linear combinations as `v`.
/// Vectors are negligible relative to `max(σ_max, reference)`, so a caller can pass the
/// size the inputs would have without cancellation.
pub fn orthonormalize_with_twin(
    v: &DenseMatrix,
    twin: Option<&DenseMatrix>,
    reference: f64,
    tol: &ToleranceProfile,
) -> Result<(DenseMatrix, Option<DenseMatrix>), NumericsError> {
    ensure_finite(v)?;
    let (d, k) = v.shape();
    let td = twin.map(|t| t.nrows()).unwrap_or(0);
    if let Some(t) = twin {
        assert_eq!(t.ncols(), k, "twin column count mismatch");
    }
    let rank = certify_rank_against(&singular_values(v), reference, tol)?;
    let mut res = v.clone();
    let mut tres = twin.cloned();
    let mut q = DenseMatrix::zeros(d, rank);
    let mut tq = DenseMatrix::zeros(td, rank);
    let mut used = vec![false; k];
    let scale = (0..k).map(|j| v.column(j).norm()).fold(reference, f64::max);
    for step in 0..rank {
        let norms: Vec<f64> = (0..k).map(|j| if used[j] { -1.0 } else { res.column(j).norm() }).collect();
        let top = norms.iter().copied().fold(-1.0, f64::max);
        let pick = (0..k).find(|&j| !used[j] && norms[j] >= top * (1.0 - 1e-9)).unwrap();
        used[pick] = true;
        let mut col: DVector<f64> = res.column(pick).into_owned();
        let mut tcol: Option<DVector<f64>> = tres.as_ref().map(|t| t.column(pick).into_owned());
        for s in 0..step {
            let c = q.column(s).dot(&col);
            col.axpy(-c, &q.column(s), 1.0);
            if let Some(tc) = tcol.as_mut() {
                tc.axpy(-c, &tq.column(s), 1.0);
            }
        }
        let nrm = col.norm();
        col /= nrm;
        q.set_column(step, &col);
        if let Some(mut tc) = tcol {
            tc /= nrm;
            tq.set_column(step, &tc);
        }
        for j in 0..k {
            if used[j] {
                continue;
            }
            let c = col.dot(&res.column(j));
            res.column_mut(j).axpy(-c, &col, 1.0);
            if let Some(t) = tres.as_mut() {
                let tc = tq.column(step).into_owned();
                t.column_mut(j).axpy(-c, &tc, 1.0);
            }
        }
    }
    let left = (0..k).filter(|&j| !used[j]).map(|j| res.column(j).norm()).fold(0.0, f64::max);
    if scale > 0.0 && left > tol.nullspace_rel_tol.sqrt() * scale {
        return Err(NumericsError::AmbiguousRank { kept: 0.0, dropped: left, ratio: 0.0 });
    }
    Ok((q, twin.map(|_| tq)))
}

/// `‖QᵀQ − 1‖`.
pub fn gram_residual(q: &DenseMatrix) -> f64 {
    let k = q.ncols();
    operator_norm(&(q.transpose() * q - DenseMatrix::identity(k, k)))
}

/// `QQᵀ` for an orthonormal column set `Q`.
pub fn projector(onb: &DenseMatrix, tol: &ToleranceProfile) -> Result<DenseMatrix, NumericsError> {
    ensure_finite(onb)?;
    let g = gram_residual(onb);
    if g > tol.identity_tol {
        return Err(NumericsError::NotOrthonormal(g));
    }
    Ok(onb * onb.transpose())
}

/// `‖AAᵀ − BBᵀ‖` for orthonormal column sets `A`, `B` in the same space.
pub fn projection_difference_norm(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let ab = a - b * (b.transpose() * a);
    let ba = b - a * (a.transpose() * b);
    operator_norm(&ab).max(operator_norm(&ba))
}

/// Orthogonal polar factor `UVᵀ` of a full-column-rank matrix.
pub fn polar(m: &DenseMatrix) -> DenseMatrix {
    if m.ncols() == 0 || m.nrows() == 0 {
        return m.clone();
    }
    let svd = m.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// `(1_d ⊗ X)·Y`.
pub fn kron_id_left(d: usize, x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    let (xr, xc) = x.shape();
    assert_eq!(y.nrows(), d * xc, "kron_id_left shape");
    let mut out = DenseMatrix::zeros(d * xr, y.ncols());
    for a in 0..d {
        let blk = x * y.rows(a * xc, xc);
        out.rows_mut(a * xr, xr).copy_from(&blk);
    }
    out
}

/// `(X ⊗ 1_d)·Y`.
pub fn kron_id_right(x: &DenseMatrix, d: usize, y: &DenseMatrix) -> DenseMatrix {
    let (xr, xc) = x.shape();
    let yc = y.ncols();
    assert_eq!(y.nrows(), xc * d, "kron_id_right shape");
    let mut flat = DenseMatrix::zeros(xc, d * yc);
    for c in 0..yc {
        for u in 0..xc {
            for b in 0..d {
                flat[(u, c * d + b)] = y[(u * d + b, c)];
            }
        }
    }
    let prod = x * flat;
    let mut out = DenseMatrix::zeros(xr * d, yc);
    for c in 0..yc {
        for v in 0..xr {
            for b in 0..d {
                out[(v * d + b, c)] = prod[(v, c * d + b)];
            }
        }
    }
    out
}

/// Permutation matrix of the flip `V⊗W → W⊗V`.
pub fn flip_matrix(dv: usize, dw: usize) -> DenseMatrix {
    let mut p = DenseMatrix::zeros(dv * dw, dv * dw);
    for i in 0..dv {
        for j in 0..dw {
            p[(j * dv + i, i * dw + j)] = 1.0;
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    #[test]
    fn kernels() {
        assert_eq!(nullspace(&DenseMatrix::zeros(3, 3), &tol()).unwrap().ncols(), 3);
        assert_eq!(nullspace(&DenseMatrix::identity(3, 3), &tol()).unwrap().ncols(), 0);
        let m = DenseMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-15]));
        let k = nullspace(&m, &tol()).unwrap();
        assert_eq!(k.ncols(), 1);
        assert!((k[(1, 0)].abs() - 1.0).abs() < 1e-12);
        let wide = DenseMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = nullspace(&wide, &tol()).unwrap();
        assert_eq!(k.ncols(), 2);
        assert!((wide * &k).amax() < 1e-14);
        assert!(gram_residual(&k) < 1e-14);
    }

    #[test]
    fn gap_guard_trips() {
        let m = DenseMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-8, 1e-10]));
        assert!(matches!(nullspace(&m, &tol()), Err(NumericsError::AmbiguousRank { .. })));
    }

    #[test]
    fn norms() {
        let d = DenseMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        assert!((operator_norm(&d) - 2.0).abs() < 1e-14);
        assert_eq!(operator_norm(&DenseMatrix::zeros(4, 5)), 0.0);
        let u = DVector::from_fn(60, |i, _| (i as f64 + 1.0).sin());
        let v = DVector::from_fn(70, |i, _| (i as f64).cos() + 0.3);
        let m = (&u / u.norm()) * (&v / v.norm()).transpose();
        assert!((operator_norm(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_schmidt() {
        let e = DenseMatrix::identity(3, 3);
        let q = orthonormalize(&e, &tol()).unwrap();
        assert!((q - e).amax() < 1e-15);
        let v = DenseMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(orthonormalize(&v, &tol()).unwrap().ncols(), 1);
        let w = DenseMatrix::from_column_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let q = orthonormalize(&w, &tol()).unwrap();
        assert_eq!(q.ncols(), 2);
        assert!(gram_residual(&q) < 1e-14);
    }

    #[test]
    fn twin_follows_primary() {
        let v = DenseMatrix::from_column_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 2.0, 1.0, 1.0]);
        let a = DenseMatrix::from_fn(4, 3, |i, j| ((i + 2 * j) as f64).sin());
        let t2 = &a * &v;
        let (q, tq) = orthonormalize_with_twin(&v, Some(&t2), 0.0, &tol()).unwrap();
        assert_eq!(q.ncols(), 2);
        assert!((&a * &q - tq.unwrap()).amax() < 1e-12);
        let tiny = DenseMatrix::from_column_slice(2, 1, &[1e-17, 0.0]);
        assert_eq!(orthonormalize_with_twin(&tiny, None, 1.0, &tol()).unwrap().0.ncols(), 0);
        assert_eq!(orthonormalize(&tiny, &tol()).unwrap().ncols(), 1);
    }

    #[test]
    fn projectors() {
        assert_eq!(projector(&DenseMatrix::zeros(3, 0), &tol()).unwrap(), DenseMatrix::zeros(3, 3));
        let p = projector(&DenseMatrix::identity(3, 3), &tol()).unwrap();
        assert_eq!(p, DenseMatrix::identity(3, 3));
        assert!(projector(&DenseMatrix::from_element(2, 1, 1.0), &tol()).is_err());
        let a = DenseMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let s = 0.5f64.sqrt();
        let b = DenseMatrix::from_column_slice(2, 1, &[s, s]);
        let direct = operator_norm(&(&a * a.transpose() - &b * b.transpose()));
        assert!((projection_difference_norm(&a, &b) - direct).abs() < 1e-14);
    }

    #[test]
    fn kron_helpers() {
        let x = DenseMatrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64 - 1.5);
        let y = DenseMatrix::from_fn(12, 2, |i, j| ((i * 7 + j) % 5) as f64);
        let id4 = DenseMatrix::identity(4, 4);
        assert!((kron_id_left(4, &x, &y) - id4.kronecker(&x) * &y).amax() < 1e-12);
        assert!((kron_id_right(&x, 4, &y) - x.kronecker(&id4) * &y).amax() < 1e-12);
        let f = flip_matrix(2, 3);
        let a = DVector::from_vec(vec![1.0, 2.0]);
        let b = DVector::from_vec(vec![3.0, 5.0, 7.0]);
        let ab = DenseMatrix::from_column_slice(2, 1, a.as_slice()).kronecker(&DenseMatrix::from_column_slice(3, 1, b.as_slice()));
        let ba = DenseMatrix::from_column_slice(3, 1, b.as_slice()).kronecker(&DenseMatrix::from_column_slice(2, 1, a.as_slice()));
        assert_eq!(f * ab, ba);
    }
}
