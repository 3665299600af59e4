//! Permutation projections `P(Q) = (P + Q P* Q) / 2`, their mixtures and
//! cyclic alternating projections.

use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix};

use crate::chain::{
    self, adjoint, conjugate, InvolutionPermutation, Permutation, ProbabilityVector, StochasticMatrix,
};
use crate::divergence::{frobenius_dist, frobenius_norm, kl_rate, DivergenceValue};
use crate::{spectral, Error, Result};

/// `P(Q) = (P + Q P* Q) / 2`.
///
/// With an involution this is the projection onto the `(pi, Q)`-self-adjoint
/// kernels. A general permutation is accepted as well, in which case the
/// result is the same formula with the permutation matrix on both sides.
pub fn project<Q: Permutation + ?Sized>(p: &StochasticMatrix, q: &Q, pi: &ProbabilityVector) -> Result<StochasticMatrix> {
    if q.len() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: q.len() });
    }
    let star = adjoint(p, pi)?;
    let m = (p.matrix() + conjugate(star.matrix(), q)) * 0.5;
    Ok(StochasticMatrix::from_constructed(m))
}

/// Mixture weight in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixWeight(f64);

impl MixWeight {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidMixWeight(alpha));
        }
        Ok(Self(alpha))
    }

    pub fn half() -> Self {
        Self(0.5)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `alpha P + (1 - alpha) Q P Q`.
pub fn project_alpha(p: &StochasticMatrix, q: &InvolutionPermutation, alpha: MixWeight) -> Result<StochasticMatrix> {
    if q.len() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: q.len() });
    }
    let a = alpha.value();
    let m = p.matrix() * a + conjugate(p.matrix(), q) * (1.0 - a);
    Ok(StochasticMatrix::from_constructed(m))
}

/// Ordered involutions applied cyclically.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSchedule {
    involutions: Vec<InvolutionPermutation>,
}

impl ProjectionSchedule {
    pub fn new(involutions: Vec<InvolutionPermutation>) -> Result<Self> {
        let first = involutions.first().ok_or(Error::EmptySchedule)?;
        let n = first.len();
        if let Some(bad) = involutions.iter().find(|q| q.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        Ok(Self { involutions })
    }

    pub fn len(&self) -> usize {
        self.involutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.involutions.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.involutions[0].len()
    }

    pub fn involutions(&self) -> &[InvolutionPermutation] {
        &self.involutions
    }

    /// Checks that every entry preserves `pi`.
    pub fn check_against(&self, pi: &ProbabilityVector) -> Result<()> {
        for q in &self.involutions {
            InvolutionPermutation::new(q.mapping().to_vec(), pi, chain::EquiMode::default())?;
        }
        Ok(())
    }
}

/// Per-iterate diagnostics of an alternating-projection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateStats {
    pub kl_to_pi: f64,
    /// Frobenius distance to the previous iterate (0 for the start).
    pub frob_step: f64,
    pub trace: f64,
    pub slem: f64,
}

/// Result of [`alternating_projections`].
#[derive(Debug, Clone)]
pub struct ProjectionRun {
    pub iterates: Vec<StochasticMatrix>,
    pub stats: Vec<IterateStats>,
    /// `D(R_j || R_{j+1})` for each step.
    pub kl_decrements: Vec<f64>,
    /// `||R_j - R_{j+1}||_F` for each step.
    pub frob_decrements: Vec<f64>,
    pub trace: f64,
    pub converged: bool,
    /// Frobenius distance covered by the last full cycle.
    pub final_step: f64,
}

impl ProjectionRun {
    pub fn limit(&self) -> &StochasticMatrix {
        self.iterates.last().expect("a run holds at least the start")
    }

    /// `|sum_j D(R_j || R_{j+1}) + D(R_N || Pi) - D(R_0 || Pi)|`.
    pub fn telescoping_residual(&self) -> f64 {
        let first = self.stats[0].kl_to_pi;
        let last = self.stats.last().expect("non-empty").kl_to_pi;
        (self.kl_decrements.iter().sum::<f64>() + last - first).abs()
    }

    /// CSV with columns `step,kl_to_pi,frob_step,trace,slem`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,kl_to_pi,frob_step,trace,slem\n");
        for (j, s) in self.stats.iter().enumerate() {
            let _ = writeln!(out, "{j},{:.17e},{:.17e},{:.17e},{:.17e}", s.kl_to_pi, s.frob_step, s.trace, s.slem);
        }
        out
    }
}

/// Default stopping threshold on the Frobenius step over one cycle.
pub const DEFAULT_EPS: f64 = 1e-10;
/// Default cap on full sweeps through the schedule.
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

fn finite(v: DivergenceValue) -> f64 {
    v.finite().unwrap_or(f64::INFINITY)
}

/// Cyclic projections `R_{j+1} = R_j(Q_{j mod m})` started from a reversible `P`.
///
/// Stops once a full cycle moves the iterate by less than `eps` in the
/// Frobenius norm, or after `max_sweeps` cycles.
pub fn alternating_projections(
    p: &StochasticMatrix,
    schedule: &ProjectionSchedule,
    pi: &ProbabilityVector,
    max_sweeps: usize,
    eps: f64,
) -> Result<ProjectionRun> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if schedule.n_states() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: schedule.n_states() });
    }
    chain::require_reversible(p, pi)?;
    let big_pi = chain::stationary_matrix(pi);
    let stats_of = |r: &StochasticMatrix, step: f64| -> Result<IterateStats> {
        Ok(IterateStats {
            kl_to_pi: finite(kl_rate(r, &big_pi, pi)?),
            frob_step: step,
            trace: r.trace(),
            slem: spectral::spectrum(r, pi)?.slem,
        })
    };
    let mut iterates = vec![p.clone()];
    let mut stats = vec![stats_of(p, 0.0)?];
    let mut kl_decrements = Vec::new();
    let mut frob_decrements = Vec::new();
    let mut converged = false;
    let mut final_step = f64::INFINITY;
    for _ in 0..max_sweeps {
        let start = iterates.last().expect("non-empty").clone();
        for q in schedule.involutions() {
            let cur = iterates.last().expect("non-empty");
            let next = project(cur, q, pi)?;
            let step = frobenius_dist(cur.matrix(), next.matrix(), pi)?;
            kl_decrements.push(finite(kl_rate(cur, &next, pi)?));
            frob_decrements.push(step);
            stats.push(stats_of(&next, step)?);
            iterates.push(next);
        }
        final_step = frobenius_dist(start.matrix(), iterates.last().expect("non-empty").matrix(), pi)?;
        if final_step < eps {
            converged = true;
            break;
        }
    }
    Ok(ProjectionRun { iterates, stats, kl_decrements, frob_decrements, trace: p.trace(), converged, final_step })
}

/// Least-squares fit of `R = (a - b) I + b J`, i.e. constant diagonal `a` and
/// constant off-diagonal `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformFit {
    pub a: f64,
    pub b: f64,
    /// Largest entrywise deviation from the fitted form.
    pub residual: f64,
    /// `n b + (a - b) - 1`, zero for a stochastic fit.
    pub row_sum_defect: f64,
}

impl UniformFit {
    /// The weight `n b` on `Pi` in `(n b) Pi + (a - b) I`.
    pub fn nb(&self, n: usize) -> f64 {
        n as f64 * self.b
    }
}

pub fn structure_fit_uniform(r: &StochasticMatrix) -> UniformFit {
    let n = r.n();
    let a = (0..n).map(|x| r.get(x, x)).sum::<f64>() / n as f64;
    let b = if n > 1 {
        let off: f64 = (0..n).flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y))).map(|(x, y)| r.get(x, y)).sum();
        off / (n * (n - 1)) as f64
    } else {
        0.0
    };
    let mut residual: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            let target = if x == y { a } else { b };
            residual = residual.max((r.get(x, y) - target).abs());
        }
    }
    UniformFit { a, b, residual, row_sum_defect: n as f64 * b + (a - b) - 1.0 }
}

/// Conditions under which a single projection can collapse `P` to `Pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedLimitReport {
    pub trace: f64,
    pub trace_one: bool,
    /// Some eigenvalue of `P` is the negative of an eigenvalue of `P*`.
    pub sylvester_overlap: bool,
    /// `min_{i,j} |lambda_i(P) + lambda_j(P*)|`.
    pub min_overlap_gap: f64,
    /// `Tr(P) <= (n + 1) / 2`.
    pub gap_half_condition: bool,
    pub eigenvalues: Vec<Complex<f64>>,
}

pub fn speed_limit_report(p: &StochasticMatrix, pi: &ProbabilityVector, tol: f64) -> Result<SpeedLimitReport> {
    let star = adjoint(p, pi)?;
    let ev = spectral::general_eigenvalues(p.matrix());
    let ev_star = spectral::general_eigenvalues(star.matrix());
    let min_overlap_gap = ev
        .iter()
        .flat_map(|a| ev_star.iter().map(move |b| (a + b).norm()))
        .fold(f64::INFINITY, f64::min);
    let trace = p.trace();
    let n = p.n() as f64;
    Ok(SpeedLimitReport {
        trace,
        trace_one: (trace - 1.0).abs() <= tol,
        sylvester_overlap: min_overlap_gap <= tol,
        min_overlap_gap,
        gap_half_condition: trace <= (n + 1.0) / 2.0,
        eigenvalues: ev,
    })
}

/// Lazy shift `a I + (1 - a) P` with `a = (1 - c) / (n - c)`, `c = Tr(P)`,
/// which brings the trace of a symmetric kernel up to exactly one.
pub fn trace_shift(p: &StochasticMatrix, pi: &ProbabilityVector) -> Result<StochasticMatrix> {
    if pi.len() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: pi.len() });
    }
    if !pi.is_uniform(1e-12) {
        return Err(Error::NotUniform);
    }
    let asymmetry = (p.matrix() - p.matrix().transpose()).amax();
    if asymmetry > 1e-12 {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let c = p.trace();
    if !(0.0..1.0).contains(&c) {
        return Err(Error::TraceOutOfRange { trace: c });
    }
    let n = p.n() as f64;
    let a = (1.0 - c) / (n - c);
    let m = DMatrix::identity(p.n(), p.n()) * a + p.matrix() * (1.0 - a);
    Ok(StochasticMatrix::from_constructed(m))
}

/// Cosines of the Friedrichs angles between the fixed-point subspaces of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceAngle {
    pub alpha_i: Vec<f64>,
    pub alpha: f64,
}

/// Largest state space accepted by [`subspace_angle`].
pub const MAX_ANGLE_STATES: usize = 24;

/// Orbits of the pairs `(x, y)` under simultaneous action of a set of
/// involutions. Returns an orbit id per flattened pair `x * n + y`.
fn pair_orbits(n: usize, qs: &[&InvolutionPermutation]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n * n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for q in qs {
        for x in 0..n {
            for y in 0..n {
                let a = find(&mut parent, x * n + y);
                let b = find(&mut parent, q.image(x) * n + q.image(y));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    (0..n * n).map(|i| find(&mut parent, i)).collect()
}

/// Orthogonal projector (on flattened matrices) onto `{M : Q M Q = M for all Q in qs}`.
///
/// In the coordinates `D^{1/2} M D^{-1/2}`, where the weighted Frobenius
/// product becomes the standard one, such a subspace consists of the matrices
/// constant on pair orbits, and its projector averages over each orbit.
/// Equi-probable permutations commute with `D^{1/2}`, so the subspace is the
/// same in both coordinate systems.
fn orbit_projector(n: usize, qs: &[&InvolutionPermutation]) -> DMatrix<f64> {
    let orbit = pair_orbits(n, qs);
    let mut size = vec![0usize; n * n];
    for &o in &orbit {
        size[o] += 1;
    }
    DMatrix::from_fn(n * n, n * n, |i, j| if orbit[i] == orbit[j] { 1.0 / size[orbit[i]] as f64 } else { 0.0 })
}

/// Per-stage cosines `alpha_i = ||T_i T_{>i} (I - T_cap)||` and the combined
/// rate `sqrt(1 - prod (1 - alpha_i^2))`.
pub fn subspace_angle(schedule: &ProjectionSchedule, pi: &ProbabilityVector) -> Result<SubspaceAngle> {
    let n = schedule.n_states();
    if n > MAX_ANGLE_STATES {
        return Err(Error::TooLarge { n, max: MAX_ANGLE_STATES });
    }
    if pi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: pi.len() });
    }
    schedule.check_against(pi)?;
    let qs: Vec<&InvolutionPermutation> = schedule.involutions().iter().collect();
    let m = qs.len();
    let eye = DMatrix::<f64>::identity(n * n, n * n);
    let mut alpha_i = Vec::with_capacity(m.saturating_sub(1));
    for i in 0..m.saturating_sub(1) {
        let t_i = orbit_projector(n, &qs[i..=i]);
        let t_rest = orbit_projector(n, &qs[i + 1..]);
        let t_cap = orbit_projector(n, &qs[i..]);
        let op = t_i * t_rest * (&eye - t_cap);
        let norm = op.svd(false, false).singular_values.max();
        alpha_i.push(norm.clamp(0.0, 1.0));
    }
    let prod: f64 = alpha_i.iter().map(|a| 1.0 - a * a).product();
    Ok(SubspaceAngle { alpha: (1.0 - prod).max(0.0).sqrt(), alpha_i })
}

/// Number of projection steps guaranteed by the angle bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepBound {
    Steps(u64),
    Infinite,
}

/// Smallest `t >= m` with `t >= m log(sqrt(n_states) / eps) / log(1 / alpha)`.
pub fn rate_certificate(angle: &SubspaceAngle, n_states: usize, eps: f64, m: usize) -> Result<SweepBound> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let alpha = angle.alpha;
    if alpha >= 1.0 {
        return Ok(SweepBound::Infinite);
    }
    let m = m as f64;
    if alpha <= 0.0 {
        return Ok(SweepBound::Steps(m as u64));
    }
    let t = m * ((n_states as f64).sqrt() / eps).ln() / (1.0 / alpha).ln();
    // Guard against values such as 1.0000000000000002 from rounding.
    let t = (t - 1e-9).ceil().max(m);
    Ok(SweepBound::Steps(t as u64))
}

/// Frobenius norm helper exposed for rate checks.
pub fn weighted_norm(m: &StochasticMatrix, pi: &ProbabilityVector) -> Result<f64> {
    frobenius_norm(m.matrix(), pi)
}
