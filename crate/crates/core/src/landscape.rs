//! Metropolis-Hastings kernels on energy landscapes, critical heights and
//! Arrhenius-type scaling of relaxation times.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::chain::{self, InvolutionPermutation, ProbabilityVector, StochasticMatrix};
use crate::spectral;
use crate::{Error, Result};

/// Proposal entries above this value count as edges of the support graph.
pub const SUPPORT_THRESHOLD: f64 = 1e-15;

/// Energy function, proposal kernel and inverse temperature.
#[derive(Debug, Clone)]
pub struct Landscape {
    pub hamiltonian: Vec<f64>,
    pub proposal: StochasticMatrix,
    pub beta: f64,
}

impl Landscape {
    pub fn new(hamiltonian: Vec<f64>, proposal: StochasticMatrix, beta: f64) -> Result<Self> {
        if hamiltonian.len() != proposal.n() {
            return Err(Error::DimensionMismatch { expected: proposal.n(), found: hamiltonian.len() });
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be a non-negative number, got {beta}")));
        }
        if let Some(x) = hamiltonian.iter().position(|h| !h.is_finite()) {
            return Err(Error::InvalidArgument(format!("energy of state {x} is not finite")));
        }
        SupportGraph::of(&proposal).check_connected()?;
        Ok(Self { hamiltonian, proposal, beta })
    }

    pub fn gibbs(&self) -> ProbabilityVector {
        gibbs(&self.hamiltonian, self.beta).expect("validated landscape")
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.hamiltonian.clone(), self.proposal.clone(), beta)
    }
}

/// `pi_beta(x) ∝ exp(-beta H(x))`, shifted by `min H` before exponentiating.
pub fn gibbs(h: &[f64], beta: f64) -> Result<ProbabilityVector> {
    if h.is_empty() {
        return Err(Error::InvalidArgument("empty state space".into()));
    }
    let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
    ProbabilityVector::from_weights(h.iter().map(|&e| (-beta * (e - hmin)).exp()).collect())
}

/// `P(x, y) = N(x, y) exp(-beta (H(y) - H(x))_+)` off the diagonal, with the
/// rejected mass kept on the diagonal.
pub fn mh_kernel(landscape: &Landscape) -> StochasticMatrix {
    mh_kernel_from(&landscape.proposal, &landscape.hamiltonian, landscape.beta)
}

pub(crate) fn mh_kernel_from(proposal: &StochasticMatrix, h: &[f64], beta: f64) -> StochasticMatrix {
    let n = proposal.n();
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        let mut off = 0.0;
        for y in 0..n {
            if y == x {
                continue;
            }
            let q = proposal.get(x, y);
            if q == 0.0 {
                continue;
            }
            let rise = (h[y] - h[x]).max(0.0);
            let v = q * (-beta * rise).exp();
            m[(x, y)] = v;
            off += v;
        }
        m[(x, x)] = 1.0 - off;
    }
    StochasticMatrix::from_constructed(m)
}

/// Undirected support graph of a proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportGraph {
    adj: Vec<Vec<usize>>,
}

impl SupportGraph {
    /// Edge `x - y` whenever `N(x, y)` or `N(y, x)` exceeds [`SUPPORT_THRESHOLD`].
    pub fn of(proposal: &StochasticMatrix) -> Self {
        let n = proposal.n();
        let adj = (0..n)
            .map(|x| {
                (0..n)
                    .filter(|&y| {
                        y != x && (proposal.get(x, y) > SUPPORT_THRESHOLD || proposal.get(y, x) > SUPPORT_THRESHOLD)
                    })
                    .collect()
            })
            .collect();
        Self { adj }
    }

    /// Builds a graph from undirected edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!("edge ({a}, {b}) out of range")));
            }
            if a != b && !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        Ok(Self { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbours(&self, x: usize) -> &[usize] {
        &self.adj[x]
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(Error::Disconnected)
        }
    }
}

/// `B(x, y)`: the lowest possible highest energy along support paths from `x` to `y`.
///
/// States are switched on in increasing energy (ties by index). When the
/// state `v` joins two components, every pair across them first becomes
/// connected at elevation `H(v)`.
pub fn bottleneck_matrix(support: &SupportGraph, h: &[f64]) -> Result<DMatrix<f64>> {
    let n = support.n();
    if h.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: h.len() });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| h[a].total_cmp(&h[b]).then(a.cmp(&b)));
    let mut comp: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|x| vec![x]).collect();
    let mut active = vec![false; n];
    let mut out = DMatrix::from_element(n, n, f64::NAN);
    let mut components = 0usize;
    for &v in &order {
        active[v] = true;
        components += 1;
        out[(v, v)] = h[v];
        for &u in support.neighbours(v) {
            if !active[u] {
                continue;
            }
            let (a, b) = (comp[u], comp[v]);
            if a == b {
                continue;
            }
            let (big, small) = if members[a].len() >= members[b].len() { (a, b) } else { (b, a) };
            let moved = std::mem::take(&mut members[small]);
            for &x in &moved {
                for &y in &members[big] {
                    out[(x, y)] = h[v];
                    out[(y, x)] = h[v];
                }
            }
            for &x in &moved {
                comp[x] = big;
            }
            members[big].extend(moved);
            components -= 1;
        }
    }
    if components != 1 {
        return Err(Error::Disconnected);
    }
    Ok(out)
}

/// Bottleneck matrix together with the critical height
/// `max_{x,y} (B(x,y) - H(x) - H(y)) + min_z H(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalHeightReport {
    pub bottleneck: DMatrix<f64>,
    pub height: f64,
}

pub fn critical_height(support: &SupportGraph, h: &[f64]) -> Result<CriticalHeightReport> {
    let b = bottleneck_matrix(support, h)?;
    let n = h.len();
    let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
    let mut best = f64::NEG_INFINITY;
    for x in 0..n {
        for y in 0..n {
            best = best.max(b[(x, y)] - h[x] - h[y]);
        }
    }
    Ok(CriticalHeightReport { bottleneck: b, height: best + hmin })
}

/// Two-well landscape on `{-J, ..., J}` with a local mode at `-J`, a global
/// mode at `J` and a barrier at 0.
#[derive(Debug, Clone)]
pub struct BimodalInstance {
    pub j: usize,
    /// State labels `-J..=J`; index `i` holds label `i - J`.
    pub states: Vec<i64>,
    pub hamiltonian: Vec<f64>,
    /// Nearest-neighbour walk with holding 1/2 at both ends.
    pub proposal: StochasticMatrix,
    /// Swaps `-J` and `J - 1`, which share the energy `-J`.
    pub swap: InvolutionPermutation,
}

impl BimodalInstance {
    pub fn index_of(&self, label: i64) -> usize {
        (label + self.j as i64) as usize
    }

    pub fn landscape(&self, beta: f64) -> Result<Landscape> {
        Landscape::new(self.hamiltonian.clone(), self.proposal.clone(), beta)
    }

    /// The Metropolis-Hastings kernel at `beta` and its Gibbs law.
    pub fn mh(&self, beta: f64) -> Result<(StochasticMatrix, ProbabilityVector)> {
        let l = self.landscape(beta)?;
        Ok((mh_kernel(&l), l.gibbs()))
    }

    /// The projection of the Metropolis-Hastings kernel along the swap.
    pub fn projected(&self, beta: f64) -> Result<(StochasticMatrix, ProbabilityVector)> {
        let (p, pi) = self.mh(beta)?;
        Ok((crate::projection::project(&p, &self.swap, &pi)?, pi))
    }

    /// Proposal `(N + Q N Q) / 2` whose Metropolis kernel is the projection.
    pub fn projected_proposal(&self) -> StochasticMatrix {
        let m = (self.proposal.matrix() + chain::conjugate(self.proposal.matrix(), &self.swap)) * 0.5;
        StochasticMatrix::from_constructed(m)
    }
}

pub fn bimodal_instance(j: usize) -> Result<BimodalInstance> {
    if j == 0 {
        return Err(Error::InvalidArgument("J must be at least 1".into()));
    }
    let ji = j as i64;
    let states: Vec<i64> = (-ji..=ji).collect();
    let hamiltonian: Vec<f64> = states
        .iter()
        .map(|&x| {
            if x < ji - 1 {
                -(x.abs() as f64)
            } else if x == ji - 1 {
                -(ji as f64)
            } else {
                -(ji as f64) - 1.0
            }
        })
        .collect();
    let n = states.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        if i > 0 {
            m[(i, i - 1)] = 0.5;
        }
        if i + 1 < n {
            m[(i, i + 1)] = 0.5;
        }
    }
    m[(0, 0)] = 0.5;
    m[(n - 1, n - 1)] = 0.5;
    let proposal = StochasticMatrix::new(m, chain::ROW_SUM_TOL)?;
    let (a, b) = (0, n - 2);
    if hamiltonian[a] != hamiltonian[b] {
        return Err(Error::NotEquiProbability { x: a, y: b, gap: (hamiltonian[a] - hamiltonian[b]).abs() });
    }
    let mut map: Vec<usize> = (0..n).collect();
    map.swap(a, b);
    let swap = InvolutionPermutation::without_distribution(map)?;
    Ok(BimodalInstance { j, states, hamiltonian, proposal, swap })
}

/// One row of an Arrhenius study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrheniusRow {
    pub beta: f64,
    pub gap: f64,
    pub t_rel: f64,
    pub ln_t_rel: f64,
}

/// Relaxation times along a temperature grid and the fitted slope of
/// `ln t_rel` against `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrheniusStudy {
    pub rows: Vec<ArrheniusRow>,
    pub slope: f64,
}

impl ArrheniusStudy {
    /// CSV with columns `beta,gap,t_rel,ln_t_rel`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta,gap,t_rel,ln_t_rel\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.17e},{:.17e},{:.17e}", r.beta, r.gap, r.t_rel, r.ln_t_rel);
        }
        out
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Evaluates `t_rel` of `builder(beta)` on each grid point.
/// The grid needs at least four strictly increasing values.
pub fn arrhenius_study<F>(builder: F, beta_grid: &[f64]) -> Result<ArrheniusStudy>
where
    F: Fn(f64) -> Result<(StochasticMatrix, ProbabilityVector)>,
{
    if beta_grid.len() < 4 {
        return Err(Error::InvalidArgument("need at least four temperatures".into()));
    }
    if beta_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("temperature grid must be strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(beta_grid.len());
    for &beta in beta_grid {
        let (p, pi) = builder(beta)?;
        let t_rel = spectral::relaxation_time_accurate(&p, &pi)?;
        rows.push(ArrheniusRow { beta, gap: 1.0 / t_rel, t_rel, ln_t_rel: t_rel.ln() });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.beta).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ln_t_rel).collect();
    Ok(ArrheniusStudy { slope: least_squares_slope(&xs, &ys), rows })
}

/// Slope of `ln t_rel` against `beta`, see [`arrhenius_study`].
pub fn arrhenius_slope<F>(builder: F, beta_grid: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> Result<(StochasticMatrix, ProbabilityVector)>,
{
    Ok(arrhenius_study(builder, beta_grid)?.slope)
}
