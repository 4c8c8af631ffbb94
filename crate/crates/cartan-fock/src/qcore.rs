//! q-numbers and the weight lattice of sl_N.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("deformation parameter must be positive and finite, got {0}")]
    BadQ(f64),
    #[error("q-binomial domain violation: k={k} > m={m}")]
    Domain { m: u32, k: u32 },
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("weight {0} is not dominant")]
    NotDominant(Weight),
    #[error("not a partition: {0:?}")]
    BadPartition(Vec<i64>),
    #[error("weyl dimension drifted from an integer: {0}")]
    Drift(f64),
}

/// Deformation parameter q > 0.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QParam(f64);

impl QParam {
    pub fn new(q: f64) -> Result<Self, QError> {
        if q.is_finite() && q > 0.0 {
            Ok(QParam(q))
        } else {
            Err(QError::BadQ(q))
        }
    }

    pub fn classical() -> Self {
        QParam(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_classical(self) -> bool {
        self.0 == 1.0
    }

    /// q raised to a real power.
    pub fn pow(self, e: f64) -> f64 {
        if self.is_classical() {
            1.0
        } else {
            self.0.powf(e)
        }
    }

    pub fn inverse(self) -> Self {
        QParam(1.0 / self.0)
    }
}

impl fmt::Display for QParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The q-integer `[n]_q`; odd in `n`, exactly `n` at q = 1.
pub fn q_int(n: i64, q: QParam) -> f64 {
    if q.is_classical() || n == 0 {
        return n as f64;
    }
    let x = q.0;
    let sign = if n < 0 { -1.0 } else { 1.0 };
    let m = n.unsigned_abs() as i32;
    // ratio form avoids overflow of q^n for very large n
    let num = x.powi(m) - x.powi(-m);
    let den = x - 1.0 / x;
    sign * num / den
}

pub fn q_factorial(n: u32, q: QParam) -> f64 {
    (1..=n as i64).map(|k| q_int(k, q)).product()
}

pub fn q_binomial(m: u32, k: u32, q: QParam) -> Result<f64, QError> {
    if k > m {
        return Err(QError::Domain { m, k });
    }
    let k = k.min(m - k) as i64;
    let m = m as i64;
    let mut out = 1.0;
    for j in 0..k {
        out *= q_int(m - j, q) / q_int(j + 1, q);
    }
    Ok(out)
}

/// Integral weight in fundamental coordinates `λ(1..N-1)`, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Weight {
    coords: Vec<i64>,
}

impl Weight {
    pub fn new(coords: Vec<i64>) -> Self {
        Weight { coords }
    }

    pub fn zero(rank: usize) -> Self {
        Weight { coords: vec![0; rank] }
    }

    /// Fundamental weight ω_{i+1}.
    pub fn fundamental(rank: usize, i: usize) -> Self {
        let mut w = Self::zero(rank);
        w.coords[i] = 1;
        w
    }

    /// Simple root α_{i+1}: row of the Cartan matrix.
    pub fn simple_root(rank: usize, i: usize) -> Self {
        let mut w = Self::zero(rank);
        w.coords[i] = 2;
        if i > 0 {
            w.coords[i - 1] = -1;
        }
        if i + 1 < rank {
            w.coords[i + 1] = -1;
        }
        w
    }

    /// Root α_i + … + α_j (0-based, inclusive).
    pub fn root(rank: usize, i: usize, j: usize) -> Self {
        (i..=j).fold(Self::zero(rank), |acc, k| &acc + &Self::simple_root(rank, k))
    }

    pub fn rho(rank: usize) -> Self {
        Weight { coords: vec![1; rank] }
    }

    /// From partition form `(μ_1, …, μ_{N-1}, 0)`; the trailing zero may be omitted.
    pub fn from_partition(parts: &[i64]) -> Result<Self, QError> {
        let mut p = parts.to_vec();
        if p.last() != Some(&0) {
            p.push(0);
        }
        if p.len() < 2 || p.windows(2).any(|w| w[0] < w[1]) {
            return Err(QError::BadPartition(parts.to_vec()));
        }
        Ok(Weight { coords: p.windows(2).map(|w| w[0] - w[1]).collect() })
    }

    /// Partition form `(μ_1, …, μ_{N-1}, 0)`, length N.
    pub fn to_partition(&self) -> Vec<i64> {
        let r = self.rank();
        let mut out = vec![0; r + 1];
        for i in (0..r).rev() {
            out[i] = out[i + 1] + self.coords[i];
        }
        out
    }

    pub fn rank(&self) -> usize {
        self.coords.len()
    }

    /// N for sl_N.
    pub fn n(&self) -> usize {
        self.coords.len() + 1
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> i64 {
        self.coords[i]
    }

    pub fn is_dominant(&self) -> bool {
        self.coords.iter().all(|&c| c >= 0)
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn scale(&self, k: i64) -> Self {
        Weight { coords: self.coords.iter().map(|c| c * k).collect() }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Add for &Weight {
    type Output = Weight;
    fn add(self, o: &Weight) -> Weight {
        assert_eq!(self.rank(), o.rank(), "weight rank mismatch");
        Weight { coords: self.coords.iter().zip(&o.coords).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Weight {
    type Output = Weight;
    fn sub(self, o: &Weight) -> Weight {
        assert_eq!(self.rank(), o.rank(), "weight rank mismatch");
        Weight { coords: self.coords.iter().zip(&o.coords).map(|(a, b)| a - b).collect() }
    }
}

impl Neg for &Weight {
    type Output = Weight;
    fn neg(self) -> Weight {
        Weight { coords: self.coords.iter().map(|c| -c).collect() }
    }
}

/// Entry (i, j) of the inverse Cartan matrix of A_{N-1}, 0-based.
fn cartan_inverse(n: usize, i: usize, j: usize) -> f64 {
    let (a, b) = ((i + 1) as f64, (j + 1) as f64);
    a.min(b) - a * b / n as f64
}

/// Invariant form `(λ, μ) = λᵀ C⁻¹ μ`.
pub fn pairing(l: &Weight, m: &Weight) -> Result<f64, QError> {
    if l.rank() != m.rank() {
        return Err(QError::RankMismatch(l.rank(), m.rank()));
    }
    let n = l.n();
    let mut s = 0.0;
    for (i, &a) in l.coords.iter().enumerate() {
        if a == 0 {
            continue;
        }
        for (j, &b) in m.coords.iter().enumerate() {
            s += (a * b) as f64 * cartan_inverse(n, i, j);
        }
    }
    Ok(s)
}

pub fn n_of(mu: &Weight) -> Result<i64, QError> {
    if !mu.is_dominant() {
        return Err(QError::NotDominant(mu.clone()));
    }
    Ok(mu.coords.iter().copied().min().unwrap_or(0))
}

pub fn is_regular(l: &Weight) -> bool {
    l.coords.iter().all(|&c| c > 0)
}

/// Positive roots as inclusive 0-based ranges `(i, j)` meaning α_i + … + α_j.
pub fn positive_roots(rank: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..rank {
        for j in i..rank {
            out.push((i, j));
        }
    }
    out
}

/// Weyl dimension formula.
pub fn weyl_dim(mu: &Weight) -> Result<usize, QError> {
    if !mu.is_dominant() {
        return Err(QError::NotDominant(mu.clone()));
    }
    let mut d = 1.0f64;
    for (i, j) in positive_roots(mu.rank()) {
        let num: i64 = (i..=j).map(|k| mu.coords[k] + 1).sum();
        d *= num as f64 / (j - i + 1) as f64;
    }
    let r = d.round();
    if (d - r).abs() > 1e-6 * r.max(1.0) {
        return Err(QError::Drift(d));
    }
    Ok(r as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(x: f64) -> QParam {
        QParam::new(x).unwrap()
    }

    #[test]
    fn q_numbers() {
        assert_eq!(q_int(1, q(2.7)), 1.0);
        assert_eq!(q_int(7, q(1.0)), 7.0);
        assert!((q_int(3, q(2.0)) - 5.25).abs() < 1e-15);
        assert_eq!(q_int(-3, q(2.0)), -q_int(3, q(2.0)));
        assert_eq!(q_factorial(0, q(1.3)), 1.0);
        assert!((q_binomial(2, 1, q(1.5)).unwrap() - (1.5 + 1.0 / 1.5)).abs() < 1e-15);
        assert_eq!(q_binomial(4, 2, q(1.0)).unwrap(), 6.0);
        assert!(q_binomial(2, 3, q(1.0)).is_err());
        assert!(QParam::new(0.0).is_err());
        assert!(QParam::new(f64::NAN).is_err());
    }

    #[test]
    fn pairings() {
        for r in 1..5 {
            for i in 0..r {
                let a = Weight::simple_root(r, i);
                assert!((pairing(&a, &a).unwrap() - 2.0).abs() < 1e-12);
                let l = Weight::new((0..r as i64).map(|k| 3 * k - 2).collect());
                assert!((pairing(&l, &a).unwrap() - l.coord(i) as f64).abs() < 1e-12);
            }
        }
        let w = Weight::fundamental(1, 0);
        assert!((pairing(&w, &w).unwrap() - 0.5).abs() < 1e-15);
        assert!(pairing(&w, &Weight::zero(2)).is_err());
    }

    #[test]
    fn weyl_and_partitions() {
        assert_eq!(weyl_dim(&Weight::zero(3)).unwrap(), 1);
        for r in 1..6 {
            assert_eq!(weyl_dim(&Weight::fundamental(r, 0)).unwrap(), r + 1);
        }
        assert_eq!(weyl_dim(&Weight::new(vec![2])).unwrap(), 3);
        assert_eq!(weyl_dim(&Weight::from_partition(&[2, 1, 0]).unwrap()).unwrap(), 8);
        assert_eq!(weyl_dim(&Weight::new(vec![2, 1])).unwrap(), 15);
        assert_eq!(weyl_dim(&Weight::rho(2).scale(3)).unwrap(), 64);
        let mu = Weight::from_partition(&[4, 2, 0]).unwrap();
        assert_eq!(mu.coords(), &[2, 2]);
        assert_eq!(n_of(&mu).unwrap(), 2);
        assert_eq!(n_of(&Weight::rho(4)).unwrap(), 1);
        assert!(n_of(&Weight::new(vec![1, -1])).is_err());
        assert!(Weight::from_partition(&[1, 2, 0]).is_err());
        assert!(is_regular(&Weight::rho(3)));
        assert!(!is_regular(&Weight::fundamental(2, 0)));
        assert!(is_regular(&Weight::new(vec![3, 1])));
    }
}
