//! Spectra, fundamental matrices, asymptotic variances and mixing times.

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;

use crate::chain::{self, ProbabilityVector, StochasticMatrix};
use crate::{Error, Result};

/// Threshold on the smallest eigenvalue below which a kernel is not treated as PSD.
pub const PSD_THRESHOLD: f64 = -1e-10;

/// Real spectrum of a reversible kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Sorted in decreasing order.
    pub eigenvalues: Vec<f64>,
    pub slem: f64,
    pub gap: f64,
    pub t_rel: f64,
    /// Eigentime `sum_{i >= 2} 1 / (1 - lambda_i)`.
    pub t_av: f64,
}

impl SpectrumReport {
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn is_psd(&self) -> bool {
        self.lambda_min() >= PSD_THRESHOLD
    }
}

/// `D^{1/2} M D^{-1/2}` with `D = diag(pi)`.
pub(crate) fn symmetrize(m: &DMatrix<f64>, pi: &ProbabilityVector) -> DMatrix<f64> {
    let n = m.nrows();
    let s = DMatrix::from_fn(n, n, |x, y| (pi[x] / pi[y]).sqrt() * m[(x, y)]);
    (&s + s.transpose()) * 0.5
}

/// Eigen-analysis of a `pi`-reversible kernel via its symmetrisation.
pub fn spectrum(p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<SpectrumReport> {
    chain::require_reversible(p, pi)?;
    let mut ev: Vec<f64> = symmetrize(p.matrix(), pi).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let n = ev.len();
    let lambda2 = if n > 1 { ev[1] } else { 0.0 };
    let slem = if n > 1 { lambda2.max(ev[n - 1].abs()) } else { 0.0 };
    let gap = 1.0 - lambda2;
    let t_rel = if gap > 0.0 { 1.0 / gap } else { f64::INFINITY };
    let t_av = ev.iter().skip(1).map(|l| 1.0 / (1.0 - l)).sum();
    Ok(SpectrumReport { eigenvalues: ev, slem, gap, t_rel, t_av })
}

/// Complex eigenvalues of an arbitrary square matrix, sorted by decreasing
/// real part and then imaginary part.
pub fn general_eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    ev
}

/// `Z(P) = (I - P + Pi)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    pub z: DMatrix<f64>,
}

pub fn fundamental(p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<FundamentalMatrix> {
    p.check_stationary(pi, chain::STATIONARY_TOL)?;
    let n = p.n();
    let big_pi = chain::stationary_matrix(pi).into_matrix();
    let a = DMatrix::<f64>::identity(n, n) - p.matrix() + big_pi;
    let z = a.clone().lu().try_inverse().ok_or(Error::Singular)?;
    let residual = (&z * &a - DMatrix::<f64>::identity(n, n)).amax();
    if !(residual <= 1e-9) {
        return Err(Error::Singular);
    }
    Ok(FundamentalMatrix { z })
}

fn pi_inner(f: &[f64], g: &[f64], pi: &ProbabilityVector) -> f64 {
    f.iter().zip(g).enumerate().map(|(x, (a, b))| pi[x] * a * b).sum()
}

fn asymptotic_variance_with(f: &[f64], z: &DMatrix<f64>, pi: &ProbabilityVector) -> Result<f64> {
    if f.len() != pi.len() {
        return Err(Error::DimensionMismatch { expected: pi.len(), found: f.len() });
    }
    let mean = pi_inner(f, &vec![1.0; f.len()], pi);
    let scale = f.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if mean.abs() > 1e-10 * scale {
        return Err(Error::NotCentered { mean });
    }
    let zf = z * DVector::from_column_slice(f);
    Ok(2.0 * pi_inner(f, zf.as_slice(), pi) - pi_inner(f, f, pi))
}

/// `v(f, P) = 2 <f, Z f>_pi - <f, f>_pi` for a `pi`-centred `f`.
pub fn asymptotic_variance(f: &[f64], p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<f64> {
    let z = fundamental(p, pi)?;
    asymptotic_variance_with(f, &z.z, pi)
}

/// `V(P) = (1 + lambda_2) / (1 - lambda_2)`, the supremum of `v(f, P)` over
/// centred `f` of unit `l2(pi)` norm.
pub fn worst_case_av(p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<f64> {
    let s = spectrum(p, pi)?;
    Ok((1.0 + s.lambda2()) / (1.0 - s.lambda2()))
}

/// Average of `v(f, P)` over centred `f` uniform on the unit sphere of `l2(pi)`:
/// `2 (Tr Z - 1) / (n - 1) - 1`.
///
/// `Z` acts as the identity on constants, so its trace over the centred
/// subspace is `Tr Z - 1`.
pub fn average_case_av(p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<f64> {
    let n = p.n();
    if n < 2 {
        return Err(Error::InvalidArgument("average-case variance needs at least two states".into()));
    }
    let z = fundamental(p, pi)?;
    Ok(2.0 * (z.z.trace() - 1.0) / (n as f64 - 1.0) - 1.0)
}

/// Asymptotic variances of a family of functions together with the
/// worst- and average-case summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticVarianceReport {
    pub per_function: Vec<f64>,
    pub worst_case: f64,
    pub average_case: f64,
}

pub fn variance_report(p: &StochasticMatrix, pi: &ProbabilityVector, fs: &[Vec<f64>]) -> Result<AsymptoticVarianceReport> {
    let z = fundamental(p, pi)?;
    let per_function = fs.iter().map(|f| asymptotic_variance_with(f, &z.z, pi)).collect::<Result<_>>()?;
    Ok(AsymptoticVarianceReport {
        per_function,
        worst_case: worst_case_av(p, pi)?,
        average_case: average_case_av(p, pi)?,
    })
}

/// Compressed sparse rows of a kernel.
struct Csr {
    start: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    fn of(p: &DMatrix<f64>) -> Self {
        let n = p.nrows();
        let mut start = vec![0];
        let mut col = Vec::new();
        let mut val = Vec::new();
        for x in 0..n {
            for y in 0..n {
                let v = p[(x, y)];
                if v != 0.0 {
                    col.push(y);
                    val.push(v);
                }
            }
            start.push(col.len());
        }
        Self { start, col, val }
    }

    /// `out = mu P`.
    fn step(&self, mu: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (x, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for k in self.start[x]..self.start[x + 1] {
                out[self.col[k]] += m * self.val[k];
            }
        }
    }
}

fn tv(mu: &[f64], pi: &ProbabilityVector) -> f64 {
    0.5 * mu.iter().zip(pi.as_slice()).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Default step budget for [`mixing_time`].
pub const DEFAULT_MIX_BUDGET: usize = 1_000_000;

/// Smallest `t` with `max_x ||P^t(x, .) - pi||_TV < eps`, found by evolving
/// every point mass until all of them are within `eps`.
pub fn mixing_time(p: &StochasticMatrix, pi: &ProbabilityVector, eps: f64, max_steps: usize) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let n = p.n();
    if pi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: pi.len() });
    }
    let csr = Csr::of(p.matrix());
    let per_start: Vec<Option<usize>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut mu = vec![0.0; n];
            mu[x] = 1.0;
            let mut next = vec![0.0; n];
            if tv(&mu, pi) < eps {
                return Some(0);
            }
            for t in 1..=max_steps {
                csr.step(&mu, &mut next);
                std::mem::swap(&mut mu, &mut next);
                if tv(&mu, pi) < eps {
                    return Some(t);
                }
            }
            None
        })
        .collect();
    // Distances from a fixed start are non-increasing in t, so the worst
    // start's hitting time is the chain's mixing time.
    per_start
        .into_iter()
        .try_fold(0, |acc, t| t.map(|t| acc.max(t)))
        .ok_or(Error::BudgetExceeded { budget: max_steps })
}

/// Expected hitting times `E_x[tau_y]` for all `x`, with `tau_y` the first
/// time at or after 0 at which the chain is in `y`.
///
/// Solves `(I - P_{-y}) m = 1` by Gaussian elimination arranged so that every
/// operation adds non-negative numbers: the diagonal of the M-matrix is
/// rebuilt from its off-diagonal entries and row sums rather than updated by
/// subtraction. This keeps full relative accuracy when escape probabilities
/// are tiny.
pub fn hitting_times_to(p: &DMatrix<f64>, y: usize) -> Result<Vec<f64>> {
    let n = p.nrows();
    let idx: Vec<usize> = (0..n).filter(|&x| x != y).collect();
    let k = idx.len();
    // c[i][j]: negated off-diagonal of the reduced system; s[i]: row sums.
    let mut c = DMatrix::from_fn(k, k, |i, j| if i == j { 0.0 } else { p[(idx[i], idx[j])] });
    let mut s: Vec<f64> = idx.iter().map(|&x| p[(x, y)]).collect();
    let mut b = vec![1.0; k];
    let mut d = vec![0.0; k];
    for piv in 0..k {
        let dp = s[piv] + ((piv + 1)..k).map(|j| c[(piv, j)]).sum::<f64>();
        if dp <= 0.0 {
            return Err(Error::Reducible { state: idx[piv] });
        }
        d[piv] = dp;
        for i in (piv + 1)..k {
            let cik = c[(i, piv)];
            if cik == 0.0 {
                continue;
            }
            let f = cik / dp;
            for j in (piv + 1)..k {
                if j != i {
                    let v = c[(piv, j)];
                    if v != 0.0 {
                        c[(i, j)] += f * v;
                    }
                }
            }
            s[i] += f * s[piv];
            b[i] += f * b[piv];
        }
    }
    let mut m = vec![0.0; k];
    for piv in (0..k).rev() {
        let acc: f64 = ((piv + 1)..k).map(|j| c[(piv, j)] * m[j]).sum();
        m[piv] = (b[piv] + acc) / d[piv];
    }
    let mut out = vec![0.0; n];
    for (i, &x) in idx.iter().enumerate() {
        out[x] = m[i];
    }
    Ok(out)
}

/// Relaxation time `1 / (1 - lambda_2)` of a reversible kernel, accurate even
/// when the gap is far below machine precision.
///
/// The group inverse `Z - Pi` has eigenvalues `1 / (1 - lambda_i)` on the
/// centred subspace and 0 on constants, so `t_rel` is its top eigenvalue. Its
/// entries `pi(y) (E_pi[tau_y] - E_x[tau_y])` come from hitting times, which
/// are computed without cancellation. Cost is `O(n^4)`, meant for small chains.
pub fn relaxation_time_accurate(p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<f64> {
    chain::require_reversible(p, pi)?;
    let n = p.n();
    if n == 1 {
        return Ok(0.0);
    }
    let mut k = DMatrix::zeros(n, n);
    for y in 0..n {
        let h = hitting_times_to(p.matrix(), y)?;
        let avg: f64 = (0..n).map(|x| pi[x] * h[x]).sum();
        for x in 0..n {
            k[(x, y)] = pi[y] * (avg - h[x]);
        }
    }
    let top = symmetrize(&k, pi).symmetric_eigenvalues().max();
    Ok(top)
}
