//! Divergences between transition matrices and contraction tooling.
//!
//! All quantities are weighted by a stationary law `pi`: the KL divergence
//! rate, its permutation-deformed variants, total variation and the
//! Frobenius geometry induced by the `l2(pi)` adjoint.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rand::Rng;

use crate::chain::{self, left_apply, right_apply, InvolutionPermutation, ProbabilityVector, StochasticMatrix};
use crate::{rng, Error, Result};

/// A non-negative divergence that may be infinite when absolute continuity fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceValue {
    Finite(f64),
    Infinite,
}

impl DivergenceValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            DivergenceValue::Finite(v) => Some(v),
            DivergenceValue::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, DivergenceValue::Infinite)
    }

    /// The finite value; panics on an infinite divergence.
    pub fn unwrap(self) -> f64 {
        self.finite().expect("divergence is infinite")
    }
}

impl Eq for DivergenceValue {}

impl PartialOrd for DivergenceValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DivergenceValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (DivergenceValue::Finite(a), DivergenceValue::Finite(b)) => a.total_cmp(b),
            (DivergenceValue::Finite(_), DivergenceValue::Infinite) => Ordering::Less,
            (DivergenceValue::Infinite, DivergenceValue::Finite(_)) => Ordering::Greater,
            (DivergenceValue::Infinite, DivergenceValue::Infinite) => Ordering::Equal,
        }
    }
}

impl std::ops::Add for DivergenceValue {
    type Output = DivergenceValue;
    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (DivergenceValue::Finite(a), DivergenceValue::Finite(b)) => DivergenceValue::Finite(a + b),
            _ => DivergenceValue::Infinite,
        }
    }
}

impl std::fmt::Display for DivergenceValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DivergenceValue::Finite(v) => write!(f, "{v}"),
            DivergenceValue::Infinite => write!(f, "inf"),
        }
    }
}

fn check_dims(m: &DMatrix<f64>, n: &DMatrix<f64>, pi: &ProbabilityVector) -> Result<()> {
    let k = pi.len();
    for a in [m, n] {
        if a.nrows() != k || a.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, found: a.nrows().max(a.ncols()) });
        }
    }
    Ok(())
}

/// `D_KL^pi(M || N) = sum_x pi(x) sum_y M(x,y) ln(M(x,y) / N(x,y))`.
pub fn kl_rate(m: &StochasticMatrix, n: &StochasticMatrix, pi: &ProbabilityVector) -> Result<DivergenceValue> {
    kl_rate_raw(m.matrix(), n.matrix(), pi)
}

pub(crate) fn kl_rate_raw(m: &DMatrix<f64>, n: &DMatrix<f64>, pi: &ProbabilityVector) -> Result<DivergenceValue> {
    check_dims(m, n, pi)?;
    let k = pi.len();
    let mut total = 0.0;
    for x in 0..k {
        let mut row = 0.0;
        for y in 0..k {
            let a = m[(x, y)];
            if a <= 0.0 {
                continue;
            }
            let b = n[(x, y)];
            if b == 0.0 {
                return Ok(DivergenceValue::Infinite);
            }
            row += a * (a / b).ln();
        }
        total += pi[x] * row;
    }
    Ok(DivergenceValue::Finite(total.max(0.0)))
}

/// `D_KL^pi(QP || QL)`.
pub fn deformed_kl_left(
    p: &StochasticMatrix,
    l: &StochasticMatrix,
    q: &InvolutionPermutation,
    pi: &ProbabilityVector,
) -> Result<DivergenceValue> {
    check_dims(p.matrix(), l.matrix(), pi)?;
    kl_rate_raw(&left_apply(q, p.matrix()), &left_apply(q, l.matrix()), pi)
}

/// `D_KL^pi(PQ || LQ)`.
pub fn deformed_kl_right(
    p: &StochasticMatrix,
    l: &StochasticMatrix,
    q: &InvolutionPermutation,
    pi: &ProbabilityVector,
) -> Result<DivergenceValue> {
    check_dims(p.matrix(), l.matrix(), pi)?;
    kl_rate_raw(&right_apply(p.matrix(), q), &right_apply(l.matrix(), q), pi)
}

/// `D_TV^pi(M, N) = sum_x pi(x) sum_y |M(x,y) - N(x,y)|`.
pub fn tv_weighted(m: &StochasticMatrix, n: &StochasticMatrix, pi: &ProbabilityVector) -> Result<DivergenceValue> {
    check_dims(m.matrix(), n.matrix(), pi)?;
    let k = pi.len();
    let total: f64 = (0..k)
        .map(|x| pi[x] * (0..k).map(|y| (m.get(x, y) - n.get(x, y)).abs()).sum::<f64>())
        .sum();
    Ok(DivergenceValue::Finite(total))
}

/// `<M, N>_F = Tr(M* N) = sum_{a,b} pi(a)/pi(b) M(a,b) N(a,b)` for arbitrary real matrices.
pub fn frobenius_inner(m: &DMatrix<f64>, n: &DMatrix<f64>, pi: &ProbabilityVector) -> Result<f64> {
    check_dims(m, n, pi)?;
    let k = pi.len();
    let mut s = 0.0;
    for a in 0..k {
        for b in 0..k {
            s += pi[a] / pi[b] * m[(a, b)] * n[(a, b)];
        }
    }
    Ok(s)
}

pub fn frobenius_norm(m: &DMatrix<f64>, pi: &ProbabilityVector) -> Result<f64> {
    Ok(frobenius_inner(m, m, pi)?.max(0.0).sqrt())
}

pub fn frobenius_dist(m: &DMatrix<f64>, n: &DMatrix<f64>, pi: &ProbabilityVector) -> Result<f64> {
    check_dims(m, n, pi)?;
    frobenius_norm(&(m - n), pi)
}

/// Single-pair contraction ratio `D(MP || NP) / D(M || N)`.
pub fn dobrushin_ratio(
    m: &StochasticMatrix,
    n: &StochasticMatrix,
    p: &StochasticMatrix,
    pi: &ProbabilityVector,
) -> Result<f64> {
    let den = kl_rate(m, n, pi)?;
    let den = match den {
        DivergenceValue::Finite(v) if v > 0.0 => v,
        DivergenceValue::Finite(_) => return Err(Error::ZeroDenominator),
        DivergenceValue::Infinite => return Ok(0.0),
    };
    let mp = m.matrix() * p.matrix();
    let np = n.matrix() * p.matrix();
    match kl_rate_raw(&mp, &np, pi)? {
        DivergenceValue::Finite(v) => Ok(v / den),
        DivergenceValue::Infinite => Err(Error::ZeroDenominator),
    }
}

/// Lower bound on the KL-Dobrushin coefficient: the largest ratio over `samples`
/// generated pairs. Pair `k` depends only on `(seed, k)`, so the estimate is
/// non-decreasing in `samples` for a fixed seed.
pub fn dobrushin_lower_bound(p: &StochasticMatrix, pi: &ProbabilityVector, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample pair is required".into()));
    }
    let mut best: f64 = 0.0;
    for k in 0..samples {
        let (m, n) = random_stationary_pair(pi, rng_seed(seed, k as u64))?;
        match dobrushin_ratio(&m, &n, p, pi) {
            Ok(r) => best = best.max(r),
            Err(Error::ZeroDenominator) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

fn rng_seed(seed: u64, k: u64) -> u64 {
    use rand::RngCore;
    rng::substream(seed, k).next_u64()
}

/// Random `pi`-reversible kernel with full support.
///
/// Off-diagonal entries are `c * w(x,y) * pi(y)` for i.i.d. uniform symmetric
/// weights `w`; the scale `c` keeps every row sum below one and the diagonal
/// takes up the remainder.
pub fn random_reversible<R: Rng + ?Sized>(pi: &ProbabilityVector, rng: &mut R) -> StochasticMatrix {
    let n = pi.len();
    let mut w = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in (x + 1)..n {
            let v: f64 = rng.random::<f64>() + 1e-3;
            w[(x, y)] = v;
            w[(y, x)] = v;
        }
    }
    let mut k = DMatrix::from_fn(n, n, |x, y| if x == y { 0.0 } else { w[(x, y)] * pi[y] });
    let max_row = (0..n).map(|x| k.row(x).sum()).fold(0.0, f64::max);
    if max_row > 0.0 {
        let scale = rng.random_range(0.2..1.0) / max_row;
        k *= scale;
    }
    for x in 0..n {
        let off: f64 = k.row(x).sum();
        k[(x, x)] = 1.0 - off;
    }
    StochasticMatrix::from_constructed(k)
}

/// Random `pi`-stationary kernel that is generally not reversible:
/// a mixture of a reversible kernel and a product of two reversible kernels.
pub fn random_stationary<R: Rng + ?Sized>(pi: &ProbabilityVector, rng: &mut R) -> StochasticMatrix {
    let a = random_reversible(pi, rng);
    let b = random_reversible(pi, rng);
    let c = random_reversible(pi, rng);
    let t: f64 = rng.random_range(0.1..0.9);
    a.mix(&b.compose(&c), t)
}

/// Two distinct `pi`-stationary kernels. Even seeds draw reversible kernels,
/// odd seeds draw non-reversible mixtures.
pub fn random_stationary_pair(pi: &ProbabilityVector, seed: u64) -> Result<(StochasticMatrix, StochasticMatrix)> {
    let mut r = rng::from_seed(seed);
    for _ in 0..16 {
        let (m, n) = if seed.is_multiple_of(2) {
            (random_reversible(pi, &mut r), random_reversible(pi, &mut r))
        } else {
            (random_stationary(pi, &mut r), random_stationary(pi, &mut r))
        };
        if m != n {
            return Ok((m, n));
        }
    }
    // Only reachable for a single state, where every kernel is the identity.
    Err(Error::InvalidArgument("cannot draw two distinct kernels on this state space".into()))
}

/// Distance between two matrices in the max norm, used for equality checks.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Whether `M` is `pi`-stationary within the default tolerance.
pub fn is_stationary(m: &StochasticMatrix, pi: &ProbabilityVector) -> bool {
    m.check_stationary(pi, chain::STATIONARY_TOL).is_ok()
}
