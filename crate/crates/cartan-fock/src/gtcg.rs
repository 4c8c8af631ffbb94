//! Gelfand–Tsetlin patterns and the Clebsch–Gordan coefficients of `V_{ω₁}⊗V_μ`
//! against their highest weight vectors.
//!
//! Weights enter in partition form `(μ_1, …, μ_{N−1}, 0)`; the index `i0` of a basis
//! vector `e_{i0+1}` of `V_{ω₁}` is 0-based.

use nalgebra::DVector;
use thiserror::Error;

use crate::decomp::{highest_weight_space, kron_vec};
use crate::numerics::ToleranceProfile;
use crate::qcore::{q_int, weyl_dim, QError, QParam, Weight};
use crate::repn::{standard_module, tensor};
use crate::sps::{ChainError, GeneralWeightBuilder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CgError {
    #[error(transparent)]
    Weight(#[from] QError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("index {i0} out of range for N = {n}")]
    BadIndex { i0: usize, n: usize },
    #[error("component μ^{i} is not dominant for μ = {mu:?}")]
    MissingComponent { i: usize, mu: Vec<i64> },
    #[error("highest weight space of weight {0} has dimension {1}, expected 1")]
    NotMultiplicityFree(Weight, usize),
}

/// Triangular array; row `a` (0-based) has `N − a` entries, the top row is the partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GTPattern {
    pub rows: Vec<Vec<i64>>,
}

impl GTPattern {
    /// All rows equal to the truncations of `mu`.
    pub fn highest(mu: &[i64]) -> Self {
        GTPattern { rows: (0..mu.len()).map(|a| mu[..mu.len() - a].to_vec()).collect() }
    }

    pub fn is_valid(&self) -> bool {
        self.rows.windows(2).all(|w| {
            let (top, low) = (&w[0], &w[1]);
            low.len() + 1 == top.len() && (0..low.len()).all(|b| top[b] >= low[b] && low[b] >= top[b + 1])
        }) && self.rows.iter().flatten().all(|&x| x >= 0)
    }

    /// Weight in partition coordinates: row sums differences `s_a − s_{a+1}` read bottom up.
    pub fn weight(&self) -> Vec<i64> {
        let sums: Vec<i64> = self.rows.iter().map(|r| r.iter().sum()).collect();
        let n = sums.len();
        (0..n).map(|k| sums[n - 1 - k] - if k == 0 { 0 } else { sums[n - k] }).collect()
    }
}

/// All patterns with top row `mu` (partition form, trailing zero included).
pub fn gt_enumerate(mu: &[i64]) -> Result<Vec<GTPattern>, CgError> {
    Weight::from_partition(mu)?;
    let mut top = mu.to_vec();
    if top.last() != Some(&0) {
        top.push(0);
    }
    fn rec(rows: &mut Vec<Vec<i64>>, out: &mut Vec<GTPattern>) {
        let top = rows.last().unwrap().clone();
        if top.len() == 1 {
            out.push(GTPattern { rows: rows.clone() });
            return;
        }
        let m = top.len() - 1;
        let mut cur = vec![0i64; m];
        fn fill(b: usize, top: &[i64], cur: &mut Vec<i64>, rows: &mut Vec<Vec<i64>>, out: &mut Vec<GTPattern>) {
            if b == cur.len() {
                rows.push(cur.clone());
                rec(rows, out);
                rows.pop();
                return;
            }
            for x in (top[b + 1]..=top[b]).rev() {
                cur[b] = x;
                fill(b + 1, top, cur, rows, out);
            }
        }
        fill(0, &top, &mut cur, rows, out);
    }
    let mut out = Vec::new();
    rec(&mut vec![top], &mut out);
    Ok(out)
}

/// `μ^i` in partition form (1-based `i = i0 + 1`), or `None` when it is not a partition.
pub fn shifted_partition(mu: &[i64], i0: usize) -> Option<Vec<i64>> {
    let n = mu.len();
    let mut p = mu.to_vec();
    if i0 + 1 < n {
        p[i0] += 1;
    } else if i0 + 1 == n {
        for x in p.iter_mut().take(n - 1) {
            *x -= 1;
        }
    } else {
        return None;
    }
    let ok = p.windows(2).all(|w| w[0] >= w[1]) && p.iter().all(|&x| x >= 0) && p[n - 1] == 0;
    ok.then_some(p)
}

/// Closed-form coefficient `(e^i⊗r(μ), r(μ^i))` up to phase, with `i = i0 + 1`.
pub fn cg_closed_form(i0: usize, mu: &[i64], q: QParam) -> Result<f64, CgError> {
    let n = mu.len();
    if i0 >= n {
        return Err(CgError::BadIndex { i0, n });
    }
    let i = i0 as i64 + 1;
    let mi = mu[i0];
    let mut ratio = 1.0;
    for j in 1..i {
        let mj = mu[(j - 1) as usize];
        ratio *= q_int(mj - mi - j + i - 1, q) / q_int(mj - mi - j + i, q);
    }
    Ok(q.pow((i - 1) as f64 / 2.0) * ratio.sqrt())
}

fn unit(d: usize, k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(d);
    v[k] = 1.0;
    v
}

/// `|⟨e_i⊗ξ_μ, ξ^{(i)}⟩|` from the extracted highest weight vector of `V_{μ^i}`.
pub fn cg_numeric_with(builder: &mut GeneralWeightBuilder, i0: usize, mu: &[i64]) -> Result<f64, CgError> {
    let n = mu.len();
    if i0 >= n {
        return Err(CgError::BadIndex { i0, n });
    }
    let shifted = shifted_partition(mu, i0).ok_or(CgError::MissingComponent { i: i0 + 1, mu: mu.to_vec() })?;
    let w = Weight::from_partition(mu)?;
    let target = Weight::from_partition(&shifted)?;
    let vm = builder.build(&w)?;
    let std = standard_module(n, vm.q());
    let t = tensor(&std, &vm).map_err(ChainError::from)?;
    let hw = highest_weight_space(&t, builder.tol()).map_err(ChainError::from)?;
    let xi = hw.get(&target).ok_or(CgError::NotMultiplicityFree(target.clone(), 0))?;
    if xi.ncols() != 1 {
        return Err(CgError::NotMultiplicityFree(target, xi.ncols()));
    }
    let probe = kron_vec(&unit(n, i0), &unit(vm.dim(), 0));
    Ok(xi.column(0).dot(&probe).abs())
}

pub fn cg_numeric(i0: usize, mu: &[i64], q: QParam, tol: &ToleranceProfile) -> Result<f64, CgError> {
    let mut b = GeneralWeightBuilder::new(mu.len(), q, *tol);
    cg_numeric_with(&mut b, i0, mu)
}

/// One row of the verification grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CgRow {
    pub n: usize,
    pub q: f64,
    pub mu: Vec<i64>,
    pub i: usize,
    pub closed: f64,
    pub numeric: f64,
    pub delta: f64,
}

/// All partitions `μ_1 ≥ … ≥ μ_{N−1} ≥ 0 = μ_N` with entries at most `max_entry`.
pub fn partitions(n: usize, max_entry: i64) -> Vec<Vec<i64>> {
    fn rec(left: usize, bound: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if left == 0 {
            let mut p = cur.clone();
            p.push(0);
            out.push(p);
            return;
        }
        for x in 0..=bound {
            cur.push(x);
            rec(left - 1, x, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n - 1, max_entry, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// Closed form against extraction on every `(μ, i)` with `μ^i` dominant and `μ ≠ 0`.
pub fn cg_grid(n: usize, max_entry: i64, q: QParam, tol: &ToleranceProfile) -> Result<Vec<CgRow>, CgError> {
    let mut b = GeneralWeightBuilder::new(n, q, *tol);
    let mut rows = Vec::new();
    for mu in partitions(n, max_entry) {
        if mu.iter().all(|&x| x == 0) {
            continue;
        }
        for i0 in 0..n {
            if shifted_partition(&mu, i0).is_none() {
                continue;
            }
            let closed = cg_closed_form(i0, &mu, q)?;
            let numeric = cg_numeric_with(&mut b, i0, &mu)?;
            rows.push(CgRow { n, q: q.value(), mu: mu.clone(), i: i0 + 1, closed, numeric, delta: (closed - numeric).abs() });
        }
    }
    Ok(rows)
}

/// `dim V_μ` two ways: pattern count and the Weyl formula.
pub fn pattern_count_matches(mu: &[i64]) -> Result<bool, CgError> {
    Ok(gt_enumerate(mu)?.len() == weyl_dim(&Weight::from_partition(mu)?)?)
}
