//! Choosing involutions: exhaustive enumeration, exact and heuristic
//! assignment, and trajectory-driven equi-energy pairing.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::chain::{EquiMode, InvolutionPermutation, Permutation, ProbabilityVector, StochasticMatrix};
use crate::divergence::frobenius_dist;
use crate::projection::project;
use crate::spin::{self, SpinConfig, SpinInvolution, SpinModel};
use crate::{rng, Error, Result};

/// Partition of the states into classes of equal stationary probability.
#[derive(Debug, Clone)]
pub struct EquiClassIndex {
    pi: ProbabilityVector,
    mode: EquiMode,
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
}

impl EquiClassIndex {
    /// Groups states whose probabilities agree under `mode`. In tolerance
    /// mode a class is anchored at its smallest member, so every pair in a
    /// class passes the equi-probability check.
    pub fn from_pi(pi: &ProbabilityVector, mode: EquiMode) -> Self {
        let n = pi.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| pi[a].total_cmp(&pi[b]).then(a.cmp(&b)));
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for x in order {
            match classes.last_mut() {
                Some(c) if mode.equal(pi[c[0]], pi[x]) && c.iter().all(|&y| mode.equal(pi[y], pi[x])) => c.push(x),
                _ => classes.push(vec![x]),
            }
        }
        for c in &mut classes {
            c.sort_unstable();
        }
        classes.sort_by_key(|c| c[0]);
        let mut class_of = vec![0; n];
        for (k, c) in classes.iter().enumerate() {
            for &x in c {
                class_of[x] = k;
            }
        }
        Self { pi: pi.clone(), mode, classes, class_of }
    }

    /// Classes of equal energy under the Gibbs law at `beta > 0`.
    pub fn from_hamiltonian(h: &[i64], beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument("beta must be positive to identify energy classes".into()));
        }
        let hf: Vec<f64> = h.iter().map(|&e| e as f64).collect();
        let pi = crate::landscape::gibbs(&hf, beta)?;
        Ok(Self::from_pi(&pi, EquiMode::Exact))
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, x: usize) -> usize {
        self.class_of[x]
    }

    pub fn pi(&self) -> &ProbabilityVector {
        &self.pi
    }

    pub fn mode(&self) -> EquiMode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.class_of.len()
    }

    /// `prod_c T(|c|)` where `T` counts involutions of a set.
    pub fn involution_count(&self) -> u128 {
        self.classes.iter().map(|c| involution_number(c.len())).fold(1u128, |a, b| a.saturating_mul(b))
    }

    fn build(&self, map: Vec<usize>) -> InvolutionPermutation {
        InvolutionPermutation::new(map, &self.pi, self.mode).expect("pairs stay within equi-probability classes")
    }
}

/// Number of involutions of a `k`-element set.
pub fn involution_number(k: usize) -> u128 {
    let (mut a, mut b) = (1u128, 1u128);
    for i in 2..=k {
        let next = b.saturating_add(((i - 1) as u128).saturating_mul(a));
        a = b;
        b = next;
    }
    b
}

fn class_involutions(members: &[usize]) -> Vec<Vec<(usize, usize)>> {
    fn rec(rest: &[usize], acc: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        let Some((&first, tail)) = rest.split_first() else {
            out.push(acc.clone());
            return;
        };
        rec(tail, acc, out);
        for i in 0..tail.len() {
            let mut remaining = tail.to_vec();
            let partner = remaining.remove(i);
            acc.push((first, partner));
            rec(&remaining, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec(members, &mut Vec::new(), &mut out);
    out
}

/// Iterator over every equi-probability involution, identity first.
pub struct InvolutionIter<'a> {
    index: &'a EquiClassIndex,
    per_class: Vec<Vec<Vec<(usize, usize)>>>,
    counter: Vec<usize>,
    done: bool,
}

impl Iterator for InvolutionIter<'_> {
    type Item = InvolutionPermutation;

    fn next(&mut self) -> Option<InvolutionPermutation> {
        if self.done {
            return None;
        }
        let mut map: Vec<usize> = (0..self.index.n()).collect();
        for (c, &k) in self.counter.iter().enumerate() {
            for &(a, b) in &self.per_class[c][k] {
                map[a] = b;
                map[b] = a;
            }
        }
        self.done = true;
        for c in 0..self.counter.len() {
            self.counter[c] += 1;
            if self.counter[c] < self.per_class[c].len() {
                self.done = false;
                break;
            }
            self.counter[c] = 0;
        }
        Some(self.index.build(map))
    }
}

/// Enumerates all involutions that preserve the class structure.
pub fn enumerate_involutions(index: &EquiClassIndex, cap: u128) -> Result<InvolutionIter<'_>> {
    let count = index.involution_count();
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let per_class: Vec<_> = index.classes.iter().map(|c| class_involutions(c)).collect();
    let counter = vec![0; per_class.len()];
    Ok(InvolutionIter { index, per_class, counter, done: false })
}

/// `||P - P(Q)||_F^2`, the squared distance moved by one projection.
pub fn assignment_score<Q: Permutation + ?Sized>(p: &StochasticMatrix, q: &Q, pi: &ProbabilityVector) -> Result<f64> {
    let pb = project(p, q, pi)?;
    Ok(frobenius_dist(p.matrix(), pb.matrix(), pi)?.powi(2))
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Exhaustive maximisation of [`assignment_score`] over the enumeration.
/// Ties go to the lexicographically smallest mapping.
pub fn assignment_exact(p: &StochasticMatrix, index: &EquiClassIndex, cap: u128) -> Result<(InvolutionPermutation, f64)> {
    if index.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: index.n() });
    }
    let mut best: Option<(InvolutionPermutation, f64)> = None;
    for q in enumerate_involutions(index, cap)? {
        let s = assignment_score(p, &q, index.pi())?;
        let better = match &best {
            None => true,
            Some((bq, bs)) => {
                if ties(s, *bs) {
                    q.mapping() < bq.mapping()
                } else {
                    s > *bs
                }
            }
        };
        if better {
            best = Some((q, s));
        }
    }
    Ok(best.expect("the identity is always enumerated"))
}

/// Outcome of a local search.
#[derive(Debug, Clone)]
pub struct LocalSearchResult {
    pub permutation: InvolutionPermutation,
    pub score: f64,
    /// Score after each accepted move, starting with the identity.
    pub accepted_scores: Vec<f64>,
}

/// A proposed change to an involution's pairing.
fn propose_move<R: Rng>(map: &[usize], index: &EquiClassIndex, rng: &mut R) -> Option<Vec<usize>> {
    let mut moves: Vec<u8> = Vec::new();
    let fixed_by_class: Vec<Vec<usize>> =
        index.classes.iter().map(|c| c.iter().copied().filter(|&x| map[x] == x).collect()).collect();
    let pairs_by_class: Vec<Vec<(usize, usize)>> = index
        .classes
        .iter()
        .map(|c| c.iter().copied().filter(|&x| map[x] > x).map(|x| (x, map[x])).collect())
        .collect();
    if fixed_by_class.iter().any(|f| f.len() >= 2) {
        moves.push(0);
    }
    if pairs_by_class.iter().any(|p| !p.is_empty()) {
        moves.push(1);
    }
    if pairs_by_class.iter().any(|p| p.len() >= 2) {
        moves.push(2);
    }
    let mixed: Vec<usize> =
        (0..index.classes.len()).filter(|&c| !pairs_by_class[c].is_empty() && !fixed_by_class[c].is_empty()).collect();
    if !mixed.is_empty() {
        moves.push(3);
    }
    if moves.is_empty() {
        return None;
    }
    let mut next = map.to_vec();
    match moves[rng.random_range(0..moves.len())] {
        0 => {
            let cands: Vec<&Vec<usize>> = fixed_by_class.iter().filter(|f| f.len() >= 2).collect();
            let f = cands[rng.random_range(0..cands.len())];
            let i = rng.random_range(0..f.len());
            let mut j = rng.random_range(0..f.len() - 1);
            if j >= i {
                j += 1;
            }
            next[f[i]] = f[j];
            next[f[j]] = f[i];
        }
        1 => {
            let all: Vec<(usize, usize)> = pairs_by_class.iter().flatten().copied().collect();
            let (a, b) = all[rng.random_range(0..all.len())];
            next[a] = a;
            next[b] = b;
        }
        3 => {
            // Hand one end of a pair over to a fixed point of the same class.
            let c = mixed[rng.random_range(0..mixed.len())];
            let (a, b) = pairs_by_class[c][rng.random_range(0..pairs_by_class[c].len())];
            let f = fixed_by_class[c][rng.random_range(0..fixed_by_class[c].len())];
            let (keep, drop) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            next[drop] = drop;
            next[keep] = f;
            next[f] = keep;
        }
        _ => {
            let cands: Vec<&Vec<(usize, usize)>> = pairs_by_class.iter().filter(|p| p.len() >= 2).collect();
            let ps = cands[rng.random_range(0..cands.len())];
            let i = rng.random_range(0..ps.len());
            let mut j = rng.random_range(0..ps.len() - 1);
            if j >= i {
                j += 1;
            }
            let ((a, b), (c, d)) = (ps[i], ps[j]);
            let (x, y) = if rng.random_bool(0.5) { (c, d) } else { (d, c) };
            next[a] = x;
            next[x] = a;
            next[b] = y;
            next[y] = b;
        }
    }
    Some(next)
}

/// Random involution within the classes: a shuffled class is paired off in
/// order, each candidate pair kept with probability 1/2.
fn random_within_classes<R: Rng>(index: &EquiClassIndex, rng: &mut R) -> Vec<usize> {
    let mut map: Vec<usize> = (0..index.n()).collect();
    for class in &index.classes {
        let mut c = class.clone();
        c.shuffle(rng);
        for pair in c.chunks(2) {
            if pair.len() == 2 && rng.random_bool(0.5) {
                map[pair[0]] = pair[1];
                map[pair[1]] = pair[0];
            }
        }
    }
    map
}

/// Hill climbing on [`assignment_score`] with add-pair, remove-pair,
/// swap-partner and hand-over-to-fixed-point moves, restarted from a random
/// involution after [`LOCAL_SEARCH_STALL`]`· n` proposals without improvement.
/// `budget` counts proposals. The first climb starts at the identity;
/// `accepted_scores` tracks the best score found so far.
pub fn assignment_local_search(
    p: &StochasticMatrix,
    index: &EquiClassIndex,
    budget: usize,
    seed: u64,
) -> Result<LocalSearchResult> {
    if index.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), found: index.n() });
    }
    let mut r = rng::from_seed(seed);
    let stall_limit = LOCAL_SEARCH_STALL * p.n().max(1);
    let mut current = index.build((0..p.n()).collect());
    let mut score = assignment_score(p, &current, index.pi())?;
    let mut best = (current.clone(), score);
    let mut accepted_scores = vec![score];
    let mut stall = 0;
    for _ in 0..budget {
        if stall >= stall_limit {
            current = index.build(random_within_classes(index, &mut r));
            score = assignment_score(p, &current, index.pi())?;
            stall = 0;
        } else {
            let Some(next) = propose_move(current.mapping(), index, &mut r) else {
                break;
            };
            let cand = index.build(next);
            let s = assignment_score(p, &cand, index.pi())?;
            if s > score {
                current = cand;
                score = s;
                stall = 0;
            } else {
                stall += 1;
            }
        }
        if score > best.1 {
            best = (current.clone(), score);
            accepted_scores.push(score);
        }
    }
    Ok(LocalSearchResult { permutation: best.0, score: best.1, accepted_scores })
}

/// Proposals per state without improvement before a local search restarts.
pub const LOCAL_SEARCH_STALL: usize = 4;

/// Joint local search over `m` involutions applied cyclically for `sweeps`
/// cycles, maximising `||P - Pi||_F^2 - ||R - Pi||_F^2` for the final iterate `R`.
pub fn assignment_local_search_multi(
    p: &StochasticMatrix,
    index: &EquiClassIndex,
    m: usize,
    sweeps: usize,
    budget: usize,
    seed: u64,
) -> Result<(Vec<InvolutionPermutation>, f64)> {
    if m == 0 {
        return Err(Error::EmptySchedule);
    }
    let pi = index.pi();
    let big_pi = crate::chain::stationary_matrix(pi);
    let base = frobenius_dist(p.matrix(), big_pi.matrix(), pi)?.powi(2);
    let objective = |qs: &[InvolutionPermutation]| -> Result<f64> {
        let mut r = p.clone();
        for _ in 0..sweeps {
            for q in qs {
                r = project(&r, q, pi)?;
            }
        }
        Ok(base - frobenius_dist(r.matrix(), big_pi.matrix(), pi)?.powi(2))
    };
    let mut rr = rng::from_seed(seed);
    let mut qs: Vec<InvolutionPermutation> = (0..m).map(|_| index.build((0..p.n()).collect())).collect();
    let mut score = objective(&qs)?;
    for _ in 0..budget {
        let k = rr.random_range(0..m);
        let Some(next) = propose_move(qs[k].mapping(), index, &mut rr) else {
            break;
        };
        let mut cand = qs.clone();
        cand[k] = index.build(next);
        let s = objective(&cand)?;
        if s > score {
            qs = cand;
            score = s;
        }
    }
    Ok((qs, score))
}

/// An involution stored by its non-fixed pairs (both directions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairMap<S: Eq + Hash> {
    pairs: HashMap<S, S>,
}

impl<S: Eq + Hash + Clone> Default for PairMap<S> {
    fn default() -> Self {
        Self { pairs: HashMap::new() }
    }
}

impl<S: Eq + Hash + Clone> PairMap<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the transposition `a <-> b`; both must currently be fixed.
    pub fn insert_pair(&mut self, a: S, b: S) -> Result<()> {
        if a == b || self.pairs.contains_key(&a) || self.pairs.contains_key(&b) {
            return Err(Error::InvalidArgument("pair endpoints must be distinct fixed points".into()));
        }
        self.pairs.insert(a.clone(), b.clone());
        self.pairs.insert(b, a);
        Ok(())
    }

    pub fn image<'a>(&'a self, s: &'a S) -> &'a S {
        self.pairs.get(s).unwrap_or(s)
    }

    pub fn is_fixed(&self, s: &S) -> bool {
        !self.pairs.contains_key(s)
    }

    /// Number of transpositions.
    pub fn n_pairs(&self) -> usize {
        self.pairs.len() / 2
    }

    pub fn iter(&self) -> impl Iterator<Item = (&S, &S)> {
        self.pairs.iter()
    }
}

/// Trajectory-driven construction of an equi-energy involution.
///
/// Every visited state that is still a fixed point waits in a ledger keyed
/// by its energy. Every `period` records, the oldest waiting state that has a
/// co-energetic waiting partner is paired with the oldest such partner.
#[derive(Debug, Clone)]
pub struct AdaptiveState<S: Eq + Hash> {
    map: PairMap<S>,
    visited: HashSet<S>,
    ledger: BTreeMap<i64, VecDeque<(u64, S)>>,
    period: usize,
    clock: u64,
}

/// Default number of records between pairing epochs.
pub const DEFAULT_ADAPT_EVERY: usize = 50;

impl<S: Eq + Hash + Clone> AdaptiveState<S> {
    pub fn new(period: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidArgument("update period must be positive".into()));
        }
        Ok(Self { map: PairMap::new(), visited: HashSet::new(), ledger: BTreeMap::new(), period, clock: 0 })
    }

    pub fn permutation(&self) -> &PairMap<S> {
        &self.map
    }

    pub fn into_permutation(self) -> PairMap<S> {
        self.map
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// Records a visit and, at epoch boundaries, possibly adds one pair,
    /// which is returned.
    pub fn record(&mut self, state: &S, energy: i64) -> Option<(S, S)> {
        let stamp = self.clock;
        self.clock += 1;
        if self.visited.insert(state.clone()) {
            self.ledger.entry(energy).or_default().push_back((stamp, state.clone()));
        }
        if !self.clock.is_multiple_of(self.period as u64) {
            return None;
        }
        let energy = self
            .ledger
            .iter()
            .filter(|(_, q)| q.len() >= 2)
            .min_by_key(|(_, q)| q[0].0)
            .map(|(&e, _)| e)?;
        let queue = self.ledger.get_mut(&energy).expect("energy was just found");
        let (_, a) = queue.pop_front().expect("queue has two entries");
        let (_, b) = queue.pop_front().expect("queue has two entries");
        if queue.is_empty() {
            self.ledger.remove(&energy);
        }
        self.map.insert_pair(a.clone(), b.clone()).expect("ledger holds only fixed points");
        Some((a, b))
    }
}

/// Free function form of [`AdaptiveState::record`].
pub fn adaptive_record<S: Eq + Hash + Clone>(state: &S, energy: i64, tracker: &mut AdaptiveState<S>) -> Option<(S, S)> {
    tracker.record(state, energy)
}

/// Runs `runs` independent Metropolis chains at the exploration temperature
/// `beta_e`, each from `start`, and turns each trajectory into an equi-energy
/// involution through [`AdaptiveState`].
pub fn exploratory_build(
    model: &SpinModel,
    start: &SpinConfig,
    beta_e: f64,
    steps: usize,
    seed: u64,
    runs: usize,
    period: usize,
) -> Result<Vec<SpinInvolution>> {
    if !(beta_e >= 0.0) {
        return Err(Error::InvalidArgument(format!("exploration beta must be non-negative, got {beta_e}")));
    }
    model.check_config(start)?;
    let kernel = spin::MetropolisKernel::new(model, beta_e)?;
    let mut out = Vec::with_capacity(runs);
    for run in 0..runs {
        let mut r = rng::substream(seed, 0x1000 + run as u64);
        let mut tracker = AdaptiveState::new(period)?;
        let mut x = start.clone();
        let mut energy = model.hamiltonian(&x);
        tracker.record(&x.key(), energy);
        for _ in 0..steps {
            energy += kernel.step_with_delta(&mut x, &mut r);
            tracker.record(&x.key(), energy);
        }
        out.push(SpinInvolution::Pairs(tracker.into_permutation()));
    }
    Ok(out)
}

/// Global spin flip `x -> -x` with the all-`+1` and all-`-1` configurations
/// held fixed.
pub fn symmetry_involution(_model: &SpinModel) -> SpinInvolution {
    SpinInvolution::GlobalFlip { swap_ground_states: false }
}
