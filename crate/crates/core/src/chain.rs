//! Stochastic matrices, distributions and permutations on a finite state space.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::{rng, Error, Result};

/// Default tolerance on row sums of a stochastic matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Default tolerance on `||pi P - pi||_inf`.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Default relative tolerance for deciding that two probabilities are equal.
pub const EQUI_REL_TOL: f64 = 1e-9;

/// A strictly positive probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Validates that every entry is positive and finite and the total is 1 within `tol`.
    pub fn new(entries: Vec<f64>, tol: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        for (i, &p) in entries.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::InvalidDistribution(format!("entry {i} is {p}, expected a positive number")));
            }
        }
        let total: f64 = entries.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Self(entries))
    }

    /// Normalises positive weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect(), 1e-9)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.clone()
    }

    /// True when all entries agree to relative tolerance `rel`.
    pub fn is_uniform(&self, rel: f64) -> bool {
        let u = 1.0 / self.len() as f64;
        self.0.iter().all(|&p| (p - u).abs() <= rel * u)
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A square, entrywise non-negative matrix whose rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(DMatrix<f64>);

impl StochasticMatrix {
    /// Validates `raw` with row-sum tolerance `tol`.
    pub fn new(raw: DMatrix<f64>, tol: f64) -> Result<Self> {
        validate_stochastic(raw, tol)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::NotSquare { rows: n, cols: r.len() });
            }
        }
        let raw = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        validate_stochastic(raw, ROW_SUM_TOL)
    }

    /// Wraps a matrix that is stochastic by construction. Row sums are
    /// still checked, with a looser tolerance that absorbs accumulated rounding.
    pub(crate) fn from_constructed(raw: DMatrix<f64>) -> Self {
        debug_assert!(validate_stochastic(raw.clone(), 1e-9).is_ok());
        Self(raw)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.0.row(i).iter().copied().collect()).collect()
    }

    /// `max_y |(pi P)(y) - pi(y)|`.
    pub fn stationarity_residual(&self, pi: &ProbabilityVector) -> f64 {
        let n = self.n();
        (0..n)
            .map(|y| {
                let s: f64 = (0..n).map(|x| pi[x] * self.0[(x, y)]).sum();
                (s - pi[y]).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn check_stationary(&self, pi: &ProbabilityVector, tol: f64) -> Result<()> {
        if pi.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: pi.len() });
        }
        let residual = self.stationarity_residual(pi);
        if residual > tol {
            return Err(Error::NotStationary { residual });
        }
        Ok(())
    }

    /// Product `self * other`.
    pub fn compose(&self, other: &StochasticMatrix) -> StochasticMatrix {
        StochasticMatrix::from_constructed(&self.0 * &other.0)
    }

    /// Convex combination `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &StochasticMatrix, w: f64) -> StochasticMatrix {
        StochasticMatrix::from_constructed(&self.0 * w + &other.0 * (1.0 - w))
    }
}

/// Checks squareness, non-negativity, finiteness and unit row sums.
pub fn validate_stochastic(raw: DMatrix<f64>, tol: f64) -> Result<StochasticMatrix> {
    if raw.nrows() != raw.ncols() {
        return Err(Error::NotSquare { rows: raw.nrows(), cols: raw.ncols() });
    }
    if raw.nrows() == 0 {
        return Err(Error::NotSquare { rows: 0, cols: 0 });
    }
    for i in 0..raw.nrows() {
        let mut s = 0.0;
        for j in 0..raw.ncols() {
            let v = raw[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: j, value: v });
            }
            s += v;
        }
        if (s - 1.0).abs() > tol {
            return Err(Error::RowSumViolation { row: i, deviation: s - 1.0 });
        }
    }
    Ok(StochasticMatrix(raw))
}

/// The matrix `Pi` whose every row equals `pi`.
pub fn stationary_matrix(pi: &ProbabilityVector) -> StochasticMatrix {
    let n = pi.len();
    StochasticMatrix(DMatrix::from_fn(n, n, |_, j| pi[j]))
}

/// Time reversal `P*(x, y) = pi(y) P(y, x) / pi(x)`.
///
/// Requires `pi P = pi`, which is exactly what makes the result stochastic.
pub fn adjoint(p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<StochasticMatrix> {
    p.check_stationary(pi, STATIONARY_TOL)?;
    Ok(adjoint_unchecked(p.matrix(), pi))
}

pub(crate) fn adjoint_unchecked(p: &DMatrix<f64>, pi: &ProbabilityVector) -> StochasticMatrix {
    let n = p.nrows();
    let mut a = DMatrix::from_fn(n, n, |x, y| pi[y] * p[(y, x)] / pi[x]);
    // Renormalise rows so rounding in pi does not leak into row sums.
    for x in 0..n {
        let s: f64 = a.row(x).sum();
        a.row_mut(x).unscale_mut(s);
    }
    StochasticMatrix(a)
}

/// Outcome of a detailed-balance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReversibilityReport {
    pub reversible: bool,
    pub max_violation: f64,
    pub worst_pair: (usize, usize),
}

/// Largest `|pi(x) P(x,y) - pi(y) P(y,x)|` over pairs, compared against `tol`.
pub fn is_reversible(p: &StochasticMatrix, pi: &ProbabilityVector, tol: f64) -> ReversibilityReport {
    let n = p.n();
    let mut worst = (0, 0);
    let mut max_violation = 0.0;
    for x in 0..n {
        for y in (x + 1)..n {
            let v = (pi[x] * p.get(x, y) - pi[y] * p.get(y, x)).abs();
            if v > max_violation {
                max_violation = v;
                worst = (x, y);
            }
        }
    }
    ReversibilityReport { reversible: max_violation <= tol, max_violation, worst_pair: worst }
}

pub(crate) fn require_reversible(p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<()> {
    if pi.len() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: pi.len() });
    }
    let r = is_reversible(p, pi, STATIONARY_TOL);
    if !r.reversible {
        return Err(Error::NotReversible { violation: r.max_violation });
    }
    Ok(())
}

/// A bijection of `0..n` given by its image table.
pub trait Permutation {
    fn mapping(&self) -> &[usize];
    fn preimage(&self, y: usize) -> usize;

    fn len(&self) -> usize {
        self.mapping().len()
    }

    fn is_empty(&self) -> bool {
        self.mapping().is_empty()
    }

    fn image(&self, x: usize) -> usize {
        self.mapping()[x]
    }

    fn is_identity(&self) -> bool {
        self.mapping().iter().enumerate().all(|(x, &y)| x == y)
    }
}

/// Arbitrary permutation, stored with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralPermutation {
    map: Vec<usize>,
    inverse: Vec<usize>,
}

impl GeneralPermutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let inverse = invert(&map)?;
        Ok(Self { map, inverse })
    }

    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect(), inverse: (0..n).collect() }
    }

    pub fn inverse(&self) -> GeneralPermutation {
        GeneralPermutation { map: self.inverse.clone(), inverse: self.map.clone() }
    }

    /// `(self ∘ other)(x) = self(other(x))`.
    pub fn compose(&self, other: &GeneralPermutation) -> Result<GeneralPermutation> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: other.len() });
        }
        GeneralPermutation::new(other.map.iter().map(|&x| self.map[x]).collect())
    }
}

impl Permutation for GeneralPermutation {
    fn mapping(&self) -> &[usize] {
        &self.map
    }
    fn preimage(&self, y: usize) -> usize {
        self.inverse[y]
    }
}

fn invert(map: &[usize]) -> Result<Vec<usize>> {
    let n = map.len();
    let mut inverse = vec![usize::MAX; n];
    for (x, &y) in map.iter().enumerate() {
        if y >= n {
            return Err(Error::NotBijection { n, detail: format!("image {y} of {x} is out of range") });
        }
        if inverse[y] != usize::MAX {
            return Err(Error::NotBijection { n, detail: format!("{} and {x} both map to {y}", inverse[y]) });
        }
        inverse[y] = x;
    }
    Ok(inverse)
}

/// How equal two stationary probabilities must be for a swap to be admissible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquiMode {
    /// Bitwise equality, for distributions that are equal by construction.
    Exact,
    /// `|pi(x) - pi(y)| <= eps * max(pi(x), pi(y))`.
    Relative(f64),
}

impl Default for EquiMode {
    fn default() -> Self {
        EquiMode::Relative(EQUI_REL_TOL)
    }
}

impl EquiMode {
    pub fn equal(&self, a: f64, b: f64) -> bool {
        match *self {
            EquiMode::Exact => a == b,
            EquiMode::Relative(eps) => (a - b).abs() <= eps * a.max(b),
        }
    }
}

/// An involution `psi` that preserves `pi`, i.e. an element of `Psi(pi)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvolutionPermutation {
    map: Vec<usize>,
}

impl InvolutionPermutation {
    /// Validates `psi ∘ psi = id` and `pi(psi(x)) = pi(x)` under `mode`.
    pub fn new(map: Vec<usize>, pi: &ProbabilityVector, mode: EquiMode) -> Result<Self> {
        if map.len() != pi.len() {
            return Err(Error::DimensionMismatch { expected: pi.len(), found: map.len() });
        }
        let inv = Self::without_distribution(map)?;
        for (x, &y) in inv.map.iter().enumerate() {
            if !mode.equal(pi[x], pi[y]) {
                return Err(Error::NotEquiProbability { x, y, gap: (pi[x] - pi[y]).abs() });
            }
        }
        Ok(inv)
    }

    /// Validates only `psi ∘ psi = id`. Useful where the caller owns the
    /// equi-probability argument, e.g. symmetries of an energy function.
    pub fn without_distribution(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        for (x, &y) in map.iter().enumerate() {
            if y >= n {
                return Err(Error::NotBijection { n, detail: format!("image {y} of {x} is out of range") });
            }
            if map[y] != x {
                return Err(Error::NotInvolution { x, y, back: map[y] });
            }
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    /// The transposition swapping `a` and `b`.
    pub fn transposition(n: usize, a: usize, b: usize, pi: &ProbabilityVector, mode: EquiMode) -> Result<Self> {
        if a >= n || b >= n {
            return Err(Error::InvalidArgument(format!("transposition ({a} {b}) out of range for {n} states")));
        }
        let mut map: Vec<usize> = (0..n).collect();
        map.swap(a, b);
        Self::new(map, pi, mode)
    }

    /// Unordered non-fixed pairs `(x, psi(x))` with `x < psi(x)`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.map.iter().enumerate().filter(|&(x, &y)| x < y).map(|(x, &y)| (x, y)).collect()
    }

    pub fn fixed_points(&self) -> Vec<usize> {
        self.map.iter().enumerate().filter(|&(x, &y)| x == y).map(|(x, _)| x).collect()
    }

    pub fn as_general(&self) -> GeneralPermutation {
        GeneralPermutation { map: self.map.clone(), inverse: self.map.clone() }
    }
}

impl Permutation for InvolutionPermutation {
    fn mapping(&self) -> &[usize] {
        &self.map
    }
    fn preimage(&self, y: usize) -> usize {
        self.map[y]
    }
}

/// Builds an involution from a mapping, see [`InvolutionPermutation::new`].
pub fn involution_from_map(map: Vec<usize>, pi: &ProbabilityVector, mode: EquiMode) -> Result<InvolutionPermutation> {
    InvolutionPermutation::new(map, pi, mode)
}

/// The permutation matrix `Q(x, y) = 1{y = psi(x)}`.
pub fn permutation_matrix<Q: Permutation + ?Sized>(q: &Q) -> StochasticMatrix {
    let n = q.len();
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        m[(x, q.image(x))] = 1.0;
    }
    StochasticMatrix(m)
}

/// `(Q A Q)(x, y) = A(psi(x), psi^{-1}(y))` computed by re-indexing.
pub fn conjugate<Q: Permutation + ?Sized>(a: &DMatrix<f64>, q: &Q) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |x, y| a[(q.image(x), q.preimage(y))])
}

/// `(Q A)(x, y) = A(psi(x), y)`.
pub fn left_apply<Q: Permutation + ?Sized>(q: &Q, a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |x, y| a[(q.image(x), y)])
}

/// `(A Q)(x, y) = A(x, psi^{-1}(y))`.
pub fn right_apply<Q: Permutation + ?Sized>(a: &DMatrix<f64>, q: &Q) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |x, y| a[(x, q.preimage(y))])
}

/// Simple random walk on the path `0..n` with holding probability 1/2 at
/// both ends and no holding in the interior. Its stationary law is uniform.
pub fn birth_death_chain(n: usize) -> Result<StochasticMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("birth-death chain needs at least one state".into()));
    }
    let mut m = DMatrix::zeros(n, n);
    if n == 1 {
        m[(0, 0)] = 1.0;
        return Ok(StochasticMatrix(m));
    }
    for x in 0..n {
        if x > 0 {
            m[(x, x - 1)] = 0.5;
        }
        if x + 1 < n {
            m[(x, x + 1)] = 0.5;
        }
    }
    m[(0, 0)] = 0.5;
    m[(n - 1, n - 1)] = 0.5;
    Ok(StochasticMatrix(m))
}

/// Uniformly random permutation of `0..n` (Fisher-Yates).
pub fn random_permutation(n: usize, seed: u64) -> GeneralPermutation {
    let mut map: Vec<usize> = (0..n).collect();
    map.shuffle(&mut rng::from_seed(seed));
    GeneralPermutation::new(map).expect("shuffle yields a bijection")
}

/// Positive-entry adjacency of `P` as out-neighbour lists.
fn support_lists(p: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = p.nrows();
    (0..n).map(|i| (0..n).filter(|&j| p[(i, j)] > 0.0).collect()).collect()
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].expect("queued states have a level");
        for &v in &adj[u] {
            if level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Checks irreducibility and returns the period of the chain.
pub fn period(p: &StochasticMatrix) -> Result<usize> {
    let adj = support_lists(p.matrix());
    let n = adj.len();
    let fwd = bfs_levels(&adj, 0);
    let mut rev = vec![Vec::new(); n];
    for (u, outs) in adj.iter().enumerate() {
        for &v in outs {
            rev[v].push(u);
        }
    }
    let bwd = bfs_levels(&rev, 0);
    for x in 0..n {
        if fwd[x].is_none() || bwd[x].is_none() {
            return Err(Error::Reducible { state: x });
        }
    }
    let mut g = 0;
    for (u, outs) in adj.iter().enumerate() {
        let lu = fwd[u].expect("irreducible") as i64;
        for &v in outs {
            let lv = fwd[v].expect("irreducible") as i64;
            g = gcd(g, (lu + 1 - lv).unsigned_abs() as usize);
        }
    }
    Ok(g)
}

/// Stationary distribution of an irreducible aperiodic chain.
///
/// Uses the Grassmann-Taksar-Heyman state reduction, which involves no
/// subtractions and therefore keeps full relative accuracy even for tiny
/// probabilities. Zero entries are skipped, so banded chains cost `O(n^2)`.
pub fn stationary_of(p: &StochasticMatrix, tol: f64) -> Result<ProbabilityVector> {
    let per = period(p)?;
    if per != 1 {
        return Err(Error::Periodic { period: per });
    }
    let pi = gth_solve(p.matrix())?;
    let residual = p.stationarity_residual(&pi);
    if residual > tol {
        return Err(Error::NoConvergence { residual });
    }
    Ok(pi)
}

pub(crate) fn gth_solve(p: &DMatrix<f64>) -> Result<ProbabilityVector> {
    let n = p.nrows();
    let mut a = p.clone();
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if s <= 0.0 {
            return Err(Error::Reducible { state: k });
        }
        let nz: Vec<usize> = (0..k).filter(|&j| a[(k, j)] != 0.0).collect();
        for i in 0..k {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            let f = aik / s;
            a[(i, k)] = f;
            for &j in &nz {
                a[(i, j)] += f * a[(k, j)];
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[(i, k)]).sum();
    }
    ProbabilityVector::from_weights(pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p3() -> StochasticMatrix {
        StochasticMatrix::from_rows(&[
            vec![0.5, 1.0 / 3.0, 1.0 / 6.0],
            vec![1.0 / 3.0, 1.0 / 6.0, 0.5],
            vec![1.0 / 6.0, 0.5, 1.0 / 3.0],
        ])
        .unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        let e = StochasticMatrix::from_rows(&[vec![0.6, 0.6], vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(e, Error::RowSumViolation { row: 0, .. }));
        let e = StochasticMatrix::from_rows(&[vec![1.5, -0.5], vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(e, Error::NegativeEntry { row: 0, col: 1, .. }));
        let e = StochasticMatrix::from_rows(&[vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(e, Error::NotSquare { .. }));
    }

    #[test]
    fn distribution_validation() {
        assert!(ProbabilityVector::new(vec![0.5, 0.5], 1e-12).is_ok());
        assert!(ProbabilityVector::new(vec![1.0, 0.0], 1e-12).is_err());
        assert!(ProbabilityVector::new(vec![0.5, 0.6], 1e-12).is_err());
    }

    #[test]
    fn doubly_stochastic_has_uniform_stationary_law() {
        let pi = stationary_of(&p3(), STATIONARY_TOL).unwrap();
        for x in 0..3 {
            assert_abs_diff_eq!(pi[x], 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_state_stationary_law() {
        let p = StochasticMatrix::from_rows(&[vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        let pi = stationary_of(&p, STATIONARY_TOL).unwrap();
        assert_abs_diff_eq!(pi[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(pi[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn reducible_and_periodic_chains_are_rejected() {
        let p = StochasticMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(stationary_of(&p, 1e-10), Err(Error::Reducible { .. })));
        let p = StochasticMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(stationary_of(&p, 1e-10), Err(Error::Periodic { period: 2 })));
    }

    #[test]
    fn involution_validation() {
        let pi = ProbabilityVector::uniform(3);
        assert!(InvolutionPermutation::new(vec![1, 0, 2], &pi, EquiMode::Exact).is_ok());
        assert!(matches!(
            InvolutionPermutation::new(vec![1, 2, 0], &pi, EquiMode::Exact),
            Err(Error::NotInvolution { .. })
        ));
        let skew = ProbabilityVector::new(vec![0.5, 0.3, 0.2], 1e-12).unwrap();
        assert!(matches!(
            InvolutionPermutation::new(vec![1, 0, 2], &skew, EquiMode::default()),
            Err(Error::NotEquiProbability { x: 0, y: 1, .. })
        ));
    }

    #[test]
    fn birth_death_small_cases() {
        assert_eq!(birth_death_chain(1).unwrap().get(0, 0), 1.0);
        let p = birth_death_chain(2).unwrap();
        assert!(p.matrix().iter().all(|&v| v == 0.5));
        let p = birth_death_chain(5).unwrap();
        assert_eq!(p.get(2, 2), 0.0);
        assert_eq!(p.get(4, 4), 0.5);
        let pi = stationary_of(&p, 1e-12).unwrap();
        assert!(pi.is_uniform(1e-12));
    }

    #[test]
    fn reindexing_matches_matrix_products() {
        let p = p3();
        let q = GeneralPermutation::new(vec![2, 0, 1]).unwrap();
        let qm = permutation_matrix(&q).into_matrix();
        let a = p.matrix();
        assert_abs_diff_eq!(conjugate(a, &q), &qm * a * &qm, epsilon = 1e-15);
        assert_abs_diff_eq!(left_apply(&q, a), &qm * a, epsilon = 1e-15);
        assert_abs_diff_eq!(right_apply(a, &q), a * &qm, epsilon = 1e-15);
    }

    #[test]
    fn adjoint_of_symmetric_doubly_stochastic_is_itself() {
        let p = p3();
        let pi = ProbabilityVector::uniform(3);
        assert_abs_diff_eq!(adjoint(&p, &pi).unwrap().matrix(), p.matrix(), epsilon = 1e-15);
    }

    #[test]
    fn random_permutation_is_seeded() {
        assert_eq!(random_permutation(10, 3), random_permutation(10, 3));
        assert_ne!(random_permutation(10, 3), random_permutation(10, 4));
    }
}
