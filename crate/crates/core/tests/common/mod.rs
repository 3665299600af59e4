#![allow(dead_code)]

use nalgebra::DMatrix;
use permproj_core::chain::{EquiMode, InvolutionPermutation, ProbabilityVector, StochasticMatrix};
use permproj_core::divergence;
use permproj_core::rng;
use rand::seq::SliceRandom;
use rand::Rng;

/// A distribution with deliberate ties: states are split into classes that
/// share one weight, so non-trivial equi-probability involutions exist.
pub fn tied_pi(n: usize, seed: u64) -> ProbabilityVector {
    let mut r = rng::from_seed(seed ^ 0xa5a5);
    let n_classes = r.random_range(1..=n.div_ceil(2).max(1));
    let weights: Vec<f64> = (0..n_classes).map(|_| r.random_range(0.5..1.5)).collect();
    let raw: Vec<f64> = (0..n).map(|x| weights[if x < n_classes { x } else { r.random_range(0..n_classes) }]).collect();
    let total: f64 = raw.iter().sum();
    ProbabilityVector::new(raw.iter().map(|w| w / total).collect(), 1e-12).unwrap()
}

/// A random involution pairing states of equal mass.
pub fn random_involution(pi: &ProbabilityVector, seed: u64) -> InvolutionPermutation {
    let n = pi.len();
    let mut r = rng::from_seed(seed ^ 0x5a5a);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let mut map: Vec<usize> = (0..n).collect();
    let mut free = vec![true; n];
    for &x in &order {
        if !free[x] {
            continue;
        }
        free[x] = false;
        let partners: Vec<usize> = (0..n).filter(|&y| free[y] && pi[y] == pi[x]).collect();
        if !partners.is_empty() && r.random_bool(0.8) {
            let y = partners[r.random_range(0..partners.len())];
            free[y] = false;
            map[x] = y;
            map[y] = x;
        }
    }
    InvolutionPermutation::new(map, pi, EquiMode::Exact).unwrap()
}

pub fn reversible(pi: &ProbabilityVector, seed: u64) -> StochasticMatrix {
    divergence::random_reversible(pi, &mut rng::from_seed(seed))
}

pub fn stationary(pi: &ProbabilityVector, seed: u64) -> StochasticMatrix {
    divergence::random_stationary(pi, &mut rng::from_seed(seed))
}

/// Symmetric doubly-stochastic kernel on `n` states with a chosen trace,
/// built as a mixture of permutation matrices of involutions.
pub fn symmetric_uniform(n: usize, seed: u64) -> StochasticMatrix {
    let mut r = rng::from_seed(seed ^ 0x77);
    let mut m = DMatrix::<f64>::zeros(n, n);
    let k = 3 + n;
    let mut total = 0.0;
    for _ in 0..k {
        let w: f64 = r.random_range(0.1..1.0);
        total += w;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        let mut map: Vec<usize> = (0..n).collect();
        for pair in order.chunks(2) {
            if pair.len() == 2 && r.random_bool(0.7) {
                map[pair[0]] = pair[1];
                map[pair[1]] = pair[0];
            }
        }
        for x in 0..n {
            m[(x, map[x])] += w;
        }
    }
    StochasticMatrix::new(m / total, 1e-12).unwrap()
}

pub fn perm_matrix(map: &[usize]) -> DMatrix<f64> {
    let n = map.len();
    DMatrix::from_fn(n, n, |x, y| if map[x] == y { 1.0 } else { 0.0 })
}

/// Entrywise time reversal `pi(y) P(y, x) / pi(x)`.
pub fn adjoint_oracle(p: &DMatrix<f64>, pi: &[f64]) -> DMatrix<f64> {
    let n = p.nrows();
    DMatrix::from_fn(n, n, |x, y| pi[y] * p[(y, x)] / pi[x])
}

/// `(P + Q P* Q) / 2` by explicit matrix products.
pub fn project_oracle(p: &DMatrix<f64>, map: &[usize], pi: &[f64]) -> DMatrix<f64> {
    let q = perm_matrix(map);
    (p + &q * adjoint_oracle(p, pi) * &q) * 0.5
}

/// `sum_x pi(x) sum_y M ln(M / N)` with the `0 ln 0 = 0` convention; `None`
/// for an absolute-continuity violation.
pub fn kl_oracle(m: &DMatrix<f64>, n: &DMatrix<f64>, pi: &[f64]) -> Option<f64> {
    let mut s = 0.0;
    for x in 0..m.nrows() {
        for y in 0..m.ncols() {
            let a = m[(x, y)];
            if a == 0.0 {
                continue;
            }
            let b = n[(x, y)];
            if b == 0.0 {
                return None;
            }
            s += pi[x] * a * (a / b).ln();
        }
    }
    Some(s)
}

pub fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Sorted eigenvalues of a symmetric matrix.
pub fn sym_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Per-row total variation between an empirical transition count table and a kernel.
pub fn max_row_tv(counts: &[Vec<u64>], p: &DMatrix<f64>) -> f64 {
    counts
        .iter()
        .enumerate()
        .map(|(x, row)| {
            let total: u64 = row.iter().sum();
            0.5 * row.iter().enumerate().map(|(y, &c)| (c as f64 / total as f64 - p[(x, y)]).abs()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// The three-point example: `P` and the swap of the first two states.
pub fn three_point() -> (StochasticMatrix, InvolutionPermutation, ProbabilityVector) {
    let p = StochasticMatrix::from_rows(&[
        vec![1.0 / 2.0, 1.0 / 3.0, 1.0 / 6.0],
        vec![1.0 / 3.0, 1.0 / 6.0, 1.0 / 2.0],
        vec![1.0 / 6.0, 1.0 / 2.0, 1.0 / 3.0],
    ])
    .unwrap();
    let pi = ProbabilityVector::uniform(3);
    let q = InvolutionPermutation::new(vec![1, 0, 2], &pi, EquiMode::Exact).unwrap();
    (p, q, pi)
}

/// All involutions of `0..n`, generated by recursive pairing of the smallest free point.
pub fn all_involutions(n: usize) -> Vec<Vec<usize>> {
    fn go(map: &mut Vec<usize>, free: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let Some(x) = free.iter().position(|&f| f) else {
            out.push(map.clone());
            return;
        };
        free[x] = false;
        map[x] = x;
        go(map, free, out);
        for y in (x + 1)..map.len() {
            if free[y] {
                free[y] = false;
                map[x] = y;
                map[y] = x;
                go(map, free, out);
                map[y] = y;
                free[y] = true;
            }
        }
        map[x] = x;
        free[x] = true;
    }
    let mut out = Vec::new();
    go(&mut (0..n).collect(), &mut vec![true; n], &mut out);
    out
}
