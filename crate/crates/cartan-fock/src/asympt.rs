//! Convergence and defect measurements along a Cartan chain.
//!
//! Every per-level statistic stops two levels below the truncation `M`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::braiding::{braid_sigma, braid_sigma_inverse};
use crate::decomp::{highest_weight_space, lowest_vector, lowest_weight_space};
use crate::numerics::{kron_id_left, kron_id_right, nullspace, operator_norm, DenseMatrix, ToleranceProfile};
use crate::qcore::{is_regular, pairing, Weight};
use crate::repn::{contragredient, contragredient_scale, tensor};
use crate::sps::{creation, psi, BlockOperator, CartanChain, ChainError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("entry at n = {0} is not positive; the series has converged to zero")]
    NonPositive(usize),
    #[error("rate fit needs at least 4 rows, got {0}")]
    InsufficientRows(usize),
    #[error("chain truncated at {0}: no measurable levels")]
    TooShort(usize),
}

impl AsymptError {
    pub fn is_ambiguous_rank(&self) -> bool {
        matches!(self, AsymptError::Chain(c) if c.is_ambiguous_rank())
    }
}

fn unit(d: usize, k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(d);
    v[k] = 1.0;
    v
}

fn chain_err<E: Into<ChainError>>(e: E) -> AsymptError {
    AsymptError::Chain(e.into())
}

/// Last level used by any measurement.
pub fn guard_top(chain: &CartanChain) -> usize {
    chain.max_level().saturating_sub(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a_l: f64,
    pub b_l: f64,
    /// `rank P^h_{λ,nλ}`.
    pub rank_h: usize,
    /// `‖f_{λ,nλ}(P^h_{λ,nλ} − P^h_λ⊗P^h_{nλ})‖`.
    pub cartan_leak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub n_rank: usize,
    pub q: f64,
    pub lambda: Vec<i64>,
    pub max_level: usize,
    pub tol: ToleranceProfile,
    pub rows: Vec<ConvergenceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    A,
    B,
    C,
    AL,
    BL,
}

impl ConvergenceTable {
    pub fn column(&self, col: Column) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .map(|r| {
                let v = match col {
                    Column::A => r.a,
                    Column::B => r.b,
                    Column::C => r.c,
                    Column::AL => r.a_l,
                    Column::BL => r.b_l,
                };
                (r.n, v)
            })
            .collect()
    }

    pub fn row(&self, n: usize) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// Descriptions of every violated table invariant; empty when all hold.
    pub fn violations(&self, stabilized_from: Option<usize>, dim_lambda: usize) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rows {
            for (name, v) in [("a", r.a), ("b", r.b), ("c", r.c), ("a_l", r.a_l), ("b_l", r.b_l)] {
                if !(0.0..=1.0 + 1e-9).contains(&v) {
                    out.push(format!("n={}: {name}={v:e} outside [0,1]", r.n));
                }
            }
            if r.c + 1e-12 < r.a {
                out.push(format!("n={}: c={:e} < a={:e}", r.n, r.c, r.a));
            }
            if r.b > r.c + 1e-7 {
                out.push(format!("n={}: b={:e} > c={:e}", r.n, r.b, r.c));
            }
            if r.cartan_leak > 1e-8 {
                out.push(format!("n={}: Cartan leak {:e}", r.n, r.cartan_leak));
            }
            if let Some(n0) = stabilized_from {
                if r.n >= n0 && r.rank_h != dim_lambda {
                    out.push(format!("n={}: rank {} != dim V_λ = {dim_lambda}", r.n, r.rank_h));
                }
            }
        }
        out
    }
}

/// First level from which `nλ + wt(v)` is dominant for every weight of `V_λ`.
pub fn stabilization_level(chain: &CartanChain) -> usize {
    let l = chain.lambda();
    let mut n0 = 0usize;
    for w in chain.base().weights() {
        for i in 0..l.rank() {
            let li = l.coord(i);
            let wi = w.coord(i);
            if wi < 0 && li > 0 {
                n0 = n0.max(((-wi) as usize).div_ceil(li as usize));
            }
        }
    }
    n0.max(1)
}

fn projector_complement(v: &DVector<f64>) -> DenseMatrix {
    let d = v.len();
    DenseMatrix::identity(d, d) - v * v.transpose()
}

fn kron_mat_vec(a: &DenseMatrix, x: &DVector<f64>) -> DenseMatrix {
    let xm = DenseMatrix::from_column_slice(x.len(), 1, x.as_slice());
    a.kronecker(&xm)
}

struct LevelData {
    q_h: DenseMatrix,
    non_cartan: DenseMatrix,
    q_l: DenseMatrix,
    zeta_n: DVector<f64>,
}

fn level_data(chain: &CartanChain, n: usize) -> Result<LevelData, AsymptError> {
    let v = chain.base();
    let vn = chain.level(n);
    let t = tensor(v, vn).map_err(chain_err)?;
    let tol = chain.tol();
    let hw = highest_weight_space(&t, tol).map_err(chain_err)?;
    let top = chain.lambda().scale(n as i64 + 1);
    let rest: Vec<&DenseMatrix> = hw.components.iter().filter(|(w, _)| *w != top).map(|(_, m)| m).collect();
    let cols: usize = rest.iter().map(|m| m.ncols()).sum();
    let mut non_cartan = DenseMatrix::zeros(t.dim(), cols);
    let mut c = 0;
    for m in rest {
        non_cartan.columns_mut(c, m.ncols()).copy_from(m);
        c += m.ncols();
    }
    let lw = lowest_weight_space(&t, tol).map_err(chain_err)?;
    let (_, zeta_n) = lowest_vector(vn, tol).map_err(chain_err)?;
    Ok(LevelData { q_h: hw.onb(t.dim()), non_cartan, q_l: lw.onb(t.dim()), zeta_n })
}

/// `‖(1−1⊗P_x)Q‖` for the rank-one projection `P_x` onto `x` in the second factor.
fn off_line(d: usize, x: &DVector<f64>, q: &DenseMatrix) -> f64 {
    operator_norm(&kron_id_left(d, &projector_complement(x), q))
}

fn scan_row(chain: &CartanChain, n: usize, xi_l: &DVector<f64>, zeta_l: &DVector<f64>) -> Result<ConvergenceRow, AsymptError> {
    let d = chain.d();
    let dn = chain.dim(n);
    let ld = level_data(chain, n)?;
    let xi_n = unit(dn, 0);
    let a = off_line(d, &xi_n, &ld.q_h);
    let z = kron_mat_vec(&DenseMatrix::identity(d, d), &xi_n);
    let resid = &z - &ld.q_h * (ld.q_h.transpose() * &z);
    let c = a.max(operator_norm(&resid));
    let wt = chain.left(n).transpose();
    let b = operator_norm(&(&wt * kron_mat_vec(&projector_complement(xi_l), &xi_n)));
    let a_l = off_line(d, &ld.zeta_n, &ld.q_l);
    let b_l = operator_norm(&(&wt * kron_mat_vec(&projector_complement(zeta_l), &ld.zeta_n)));
    let cartan_leak = if ld.non_cartan.ncols() == 0 { 0.0 } else { operator_norm(&(&wt * &ld.non_cartan)) };
    Ok(ConvergenceRow { n, a, b, c, a_l, b_l, rank_h: ld.q_h.ncols(), cartan_leak })
}

/// Rows `n = 1..=M−2` of the conjecture quantities.
pub fn conjecture_scan(chain: &CartanChain) -> Result<ConvergenceTable, AsymptError> {
    let top = guard_top(chain);
    if top < 1 {
        return Err(AsymptError::TooShort(chain.max_level()));
    }
    let d = chain.d();
    let xi_l = unit(d, 0);
    let (_, zeta_l) = lowest_vector(chain.base(), chain.tol()).map_err(chain_err)?;
    let rows: Result<Vec<ConvergenceRow>, AsymptError> =
        (1..=top).into_par_iter().map(|n| scan_row(chain, n, &xi_l, &zeta_l)).collect();
    Ok(ConvergenceTable {
        n_rank: chain.lambda().n(),
        q: chain.q().value(),
        lambda: chain.lambda().coords().to_vec(),
        max_level: chain.max_level(),
        tol: *chain.tol(),
        rows: rows?,
    })
}

/// Whether the regular-weight rank assertion applies to this chain.
pub fn rank_check_from(chain: &CartanChain) -> Option<usize> {
    is_regular(chain.lambda()).then(|| stabilization_level(chain))
}

/// Least-squares fit `log v ≈ log C + n log t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub t_hat: f64,
    pub c_hat: f64,
    pub window: (usize, usize),
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    /// RMS residual of the competing power-law fit `log v ≈ α + β log n`.
    pub power_residual: f64,
    /// True when the log-linear model fits better than the power law.
    pub geometric: bool,
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / m).sqrt();
    (slope, icpt, rms)
}

/// Fit over the points with `lo ≤ n ≤ hi`.
pub fn rate_fit(points: &[(usize, f64)], window: (usize, usize)) -> Result<RateFit, AsymptError> {
    let sel: Vec<(usize, f64)> = points.iter().copied().filter(|(n, _)| *n >= window.0 && *n <= window.1).collect();
    if sel.len() < 4 {
        return Err(AsymptError::InsufficientRows(sel.len()));
    }
    if let Some((n, _)) = sel.iter().find(|(_, v)| v.is_nan() || *v <= 0.0) {
        return Err(AsymptError::NonPositive(*n));
    }
    let x: Vec<f64> = sel.iter().map(|(n, _)| *n as f64).collect();
    let y: Vec<f64> = sel.iter().map(|(_, v)| v.ln()).collect();
    let (slope, icpt, residual) = linear_fit(&x, &y);
    let lx: Vec<f64> = x.iter().map(|v| v.max(1.0).ln()).collect();
    let (_, _, power_residual) = linear_fit(&lx, &y);
    Ok(RateFit {
        t_hat: slope.exp(),
        c_hat: icpt.exp(),
        window: (sel[0].0, sel[sel.len() - 1].0),
        residual,
        power_residual,
        geometric: residual < power_residual,
    })
}

/// Fit a decay series after dropping 2 burn-in rows and any tail at the noise floor.
/// `None` means the series is identically negligible.
pub fn decay_fit(points: &[(usize, f64)], floor: f64) -> Result<Option<RateFit>, AsymptError> {
    let start = points.first().map(|p| p.0).unwrap_or(0) + 2;
    let tail: Vec<(usize, f64)> = points.iter().copied().filter(|(n, _)| *n >= start).collect();
    if tail.iter().all(|(_, v)| *v <= floor) {
        return Ok(None);
    }
    let usable: Vec<(usize, f64)> = tail.into_iter().take_while(|(_, v)| *v > floor).collect();
    let end = usable.last().map(|p| p.0).unwrap_or(start);
    rate_fit(&usable, (start, end)).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FEstimate {
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// The same norm over the full orthogonal complement, when computed.
    pub lhs_direct: Option<f64>,
}

/// `‖(f_n⊗1)|_{(V_λ⊗V_{nλ})⊖V_{(n+1)λ}}‖`, read in `V_λ⊗V_{(n−1)λ}⊗V_λ`, on the columns of `y`.
fn f_estimate_lhs(chain: &CartanChain, n: usize, y: &DenseMatrix) -> f64 {
    if y.ncols() == 0 {
        return 0.0;
    }
    let d = chain.d();
    let inner = kron_id_left(d, chain.right(n - 1), y);
    operator_norm(&kron_id_right(&chain.left(n - 1).transpose(), d, &inner))
}

/// Left side via highest weight vectors; right side `a(n) + b(n−1)` from the table.
pub fn f_estimate_check(
    chain: &CartanChain,
    table: &ConvergenceTable,
    n: usize,
    direct: bool,
) -> Result<FEstimate, AsymptError> {
    if n < 2 || n > guard_top(chain) {
        return Err(ChainError::BadLevel(n, chain.max_level()).into());
    }
    let ld = level_data(chain, n)?;
    let lhs = f_estimate_lhs(chain, n, &ld.non_cartan);
    let rhs = table.row(n).ok_or(AsymptError::TooShort(n))?.a + table.row(n - 1).ok_or(AsymptError::TooShort(n))?.b;
    let lhs_direct = if direct {
        let comp = nullspace(&chain.left(n).transpose(), chain.tol()).map_err(chain_err)?;
        Some(f_estimate_lhs(chain, n, &comp))
    } else {
        None
    };
    Ok(FEstimate { n, lhs, rhs, holds: lhs <= rhs + 1e-7, lhs_direct })
}

pub fn f_estimate_scan(chain: &CartanChain, table: &ConvergenceTable, direct: bool) -> Result<Vec<FEstimate>, AsymptError> {
    (2..=guard_top(chain)).into_par_iter().map(|n| f_estimate_check(chain, table, n, direct)).collect()
}

/// Creation blocks `S_{e_i}|_{V_{nλ}}` for every basis vector and level.
fn creation_blocks(chain: &CartanChain) -> Vec<Vec<DenseMatrix>> {
    let d = chain.d();
    (0..=chain.max_level()).map(|n| (0..d).map(|i| chain.creation_block(&unit(d, i), n)).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarCommuteRow {
    pub n: usize,
    /// Max over the orthonormal domain basis of the operator norm.
    pub defect_h: f64,
    /// Matricized norm with Hilbert–Schmidt codomain.
    pub defect_h_matricized: f64,
    pub bound_combo_h: f64,
    pub defect_l: f64,
    pub defect_l_matricized: f64,
    pub bound_combo_l: f64,
}

/// `B_μ − q^{∓(λ,λ)}A_μσ^{∓1}` along `μ = nλ`, for `n = 2..=M−2`.
///
/// The domain `V̄_λ⊗V_λ` uses the unitary basis `b_v⊗e_x` of the contragredient module,
/// where `b_v = d_v ē_v`.
pub fn star_commute_defect(chain: &CartanChain, table: &ConvergenceTable) -> Result<Vec<StarCommuteRow>, AsymptError> {
    let v = chain.base();
    let d = chain.d();
    let vbar = contragredient(v);
    let scale = contragredient_scale(v);
    let sinv = braid_sigma_inverse(&vbar, v).map_err(chain_err)?.matrix;
    let sig = braid_sigma(&vbar, v).map_err(chain_err)?.matrix;
    let ll = pairing(chain.lambda(), chain.lambda()).map_err(|e| chain_err(crate::decomp::DecompError::Weight(e)))?;
    let (ch, cl) = (chain.q().pow(-ll), chain.q().pow(ll));
    let blocks = creation_blocks(chain);
    let top = guard_top(chain);
    (2..=top.max(1))
        .filter(|&n| n <= top)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            let cur = &blocks[n];
            let prev = &blocks[n - 1];
            let dn = chain.dim(n);
            // A(e_x⊗b_v) = d_v S_x S_v*, B(b_v⊗e_x) = d_v S_v* S_x
            let a_ops: Vec<DenseMatrix> =
                (0..d * d).map(|k| (&prev[k / d] * prev[k % d].transpose()) * scale[k % d]).collect();
            let b_ops: Vec<DenseMatrix> =
                (0..d * d).map(|k| (cur[k / d].transpose() * &cur[k % d]) * scale[k / d]).collect();
            let mut out = [(0.0f64, DenseMatrix::zeros(dn * dn, d * d)), (0.0f64, DenseMatrix::zeros(dn * dn, d * d))];
            for (slot, (braid, c)) in [(&sinv, ch), (&sig, cl)].into_iter().enumerate() {
                for k in 0..d * d {
                    let mut diff = b_ops[k].clone();
                    for j in 0..d * d {
                        let coef = braid[(j, k)];
                        if coef != 0.0 {
                            diff -= &a_ops[j] * (c * coef);
                        }
                    }
                    out[slot].0 = out[slot].0.max(operator_norm(&diff));
                    out[slot].1.column_mut(k).copy_from_slice(diff.as_slice());
                }
            }
            let row = |m: usize| table.row(m).ok_or(AsymptError::TooShort(m));
            let (r, rp) = (row(n)?, row(n - 1)?);
            Ok(StarCommuteRow {
                n,
                defect_h: out[0].0,
                defect_h_matricized: operator_norm(&out[0].1),
                bound_combo_h: r.b + rp.b + r.a,
                defect_l: out[1].0,
                defect_l_matricized: operator_norm(&out[1].1),
                bound_combo_l: r.b_l + rp.b_l + r.a_l,
            })
        })
        .collect()
}

/// Per level `n = 0..=M−2`, `max_{ξ,ζ} ‖[S_ξ*, R_ζ]|_{V_{nλ}}‖` over basis vectors.
pub fn commutator_decay(chain: &CartanChain) -> Vec<(usize, f64)> {
    let d = chain.d();
    let top = guard_top(chain);
    let s = creation_blocks(chain);
    let r: Vec<Vec<DenseMatrix>> =
        (0..=chain.max_level()).map(|n| (0..d).map(|i| chain.right_creation_block(&unit(d, i), n)).collect()).collect();
    (0..=top)
        .into_par_iter()
        .map(|n| {
            let mut worst: f64 = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let mut c = s[n][i].transpose() * &r[n][j];
                    if n > 0 {
                        c -= &r[n - 1][j] * s[n - 1][i].transpose();
                    }
                    worst = worst.max(operator_norm(&c));
                }
            }
            (n, worst)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VacuumRow {
    pub n: usize,
    /// `ω_n(S_{ξ_λ}S_{ξ_λ}*)`.
    pub value: f64,
    /// Max over basis pairs of `|ω_n(S_ξS_ζ*) − ⟨ξ,ξ_λ⟩⟨ξ_λ,ζ⟩|`.
    pub residual: f64,
    /// The same for the opposite order `S_ζ*S_ξ`.
    pub residual_reversed: f64,
}

/// `ω_n = ⟨· ξ_{nλ}, ξ_{nλ}⟩` on `S_ξS_ζ*` and `S_ζ*S_ξ`, for `n = 1..=M−2`.
pub fn vacuum_limits(chain: &CartanChain) -> Vec<VacuumRow> {
    let d = chain.d();
    let s = creation_blocks(chain);
    (1..=guard_top(chain))
        .map(|n| {
            let x = unit(chain.dim(n), 0);
            let down: Vec<DVector<f64>> = (0..d).map(|i| s[n - 1][i].transpose() * &x).collect();
            let up: Vec<DVector<f64>> = (0..d).map(|i| &s[n][i] * &x).collect();
            let mut residual: f64 = 0.0;
            let mut reversed: f64 = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let target = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                    residual = residual.max((down[j].dot(&down[i]) - target).abs());
                    reversed = reversed.max((up[i].dot(&up[j]) - target).abs());
                }
            }
            VacuumRow { n, value: down[0].dot(&down[0]), residual, residual_reversed: reversed }
        })
        .collect()
}

/// `sup_{1≤k≤kmax, n+k≤M−2} ‖ψ_{n,n+k}(x_n) − x_{n+k}‖` for `n = 0..=M−3`.
pub fn compactification_defect(chain: &CartanChain, x: &BlockOperator, kmax: usize) -> Result<Vec<(usize, f64)>, AsymptError> {
    assert_eq!(x.shift, 0, "compactification needs a level-preserving operator");
    let top = guard_top(chain);
    (0..top)
        .into_par_iter()
        .map(|n| {
            let mut worst: f64 = 0.0;
            for k in 1..=kmax.min(top - n) {
                let p = psi(chain, n, k, x.block(n))?;
                worst = worst.max(operator_norm(&(p - x.block(n + k))));
            }
            Ok((n, worst))
        })
        .collect()
}

/// Gauge-invariant words of length 2 in basis creation operators, labelled.
pub fn length_two_words(chain: &CartanChain) -> Vec<(String, BlockOperator)> {
    let d = chain.d();
    let s: Vec<BlockOperator> = (0..d).map(|i| creation(chain, &unit(d, i))).collect();
    let mut out = Vec::new();
    for i in 0..d {
        for j in 0..d {
            out.push((format!("S{i}S{j}*"), s[i].compose(&s[j].adjoint())));
            out.push((format!("S{j}*S{i}"), s[j].adjoint().compose(&s[i])));
        }
    }
    out
}

/// `λ` as a weight of the chain, for report headers.
pub fn lambda_label(w: &Weight) -> String {
    w.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(":")
}
