//! Trajectory-level samplers on one-dimensional spin systems.
//!
//! Three models are supported: the Ising chain `H = sum (1 - x_i x_{i+1})`,
//! the Edwards-Anderson glass `H = -sum_{i<j} J_ij x_i x_j` with Rademacher
//! couplings, and the Blume-Capel chain `H = sum (x_i - x_{i+1})^2` on the
//! alphabet `{-1, 0, 1}`. All energies are integers.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::chain::{InvolutionPermutation, Permutation, ProbabilityVector, StochasticMatrix};
use crate::tuning::{self, AdaptiveState, PairMap};
use crate::{rng, Error, Result};

/// Which Hamiltonian a [`SpinModel`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    IsingLine,
    EdwardsAnderson,
    BlumeCapel,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::IsingLine => "ising",
            ModelKind::EdwardsAnderson => "ea",
            ModelKind::BlumeCapel => "bc",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ising" | "ising_line" => Ok(ModelKind::IsingLine),
            "ea" | "edwards_anderson" => Ok(ModelKind::EdwardsAnderson),
            "bc" | "blume_capel" => Ok(ModelKind::BlumeCapel),
            other => Err(Error::ConfigInvalid(format!("unknown model '{other}'"))),
        }
    }
}

const BINARY: [i8; 2] = [-1, 1];
const TERNARY: [i8; 3] = [-1, 0, 1];

/// Largest dimension for which configurations fit the integer key.
pub const MAX_KEYED_DIM: usize = 80;

/// A spin model of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinModel {
    kind: ModelKind,
    d: usize,
    /// Dense symmetric `d x d` couplings with zero diagonal (EA only).
    couplings: Option<Vec<i8>>,
}

impl SpinModel {
    pub fn ising(d: usize) -> Result<Self> {
        Self::new(ModelKind::IsingLine, d, 0)
    }

    pub fn blume_capel(d: usize) -> Result<Self> {
        Self::new(ModelKind::BlumeCapel, d, 0)
    }

    /// EA model with i.i.d. Rademacher couplings drawn from `seed`.
    pub fn edwards_anderson(d: usize, seed: u64) -> Result<Self> {
        Self::new(ModelKind::EdwardsAnderson, d, seed)
    }

    /// `seed` is used only for the EA couplings.
    pub fn new(kind: ModelKind, d: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::ConfigInvalid("dimension must be at least 1".into()));
        }
        let couplings = (kind == ModelKind::EdwardsAnderson).then(|| {
            let mut r = rng::from_seed(seed);
            let mut j = vec![0i8; d * d];
            for a in 0..d {
                for b in (a + 1)..d {
                    let v = if r.random_bool(0.5) { 1 } else { -1 };
                    j[a * d + b] = v;
                    j[b * d + a] = v;
                }
            }
            j
        });
        Ok(Self { kind, d, couplings })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alphabet(&self) -> &'static [i8] {
        match self.kind {
            ModelKind::BlumeCapel => &TERNARY,
            _ => &BINARY,
        }
    }

    pub fn coupling(&self, i: usize, j: usize) -> i8 {
        self.couplings.as_ref().map_or(0, |c| c[i * self.d + j])
    }

    pub fn check_config(&self, x: &SpinConfig) -> Result<()> {
        if x.0.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: x.0.len() });
        }
        if let Some(s) = x.0.iter().find(|s| !self.alphabet().contains(s)) {
            return Err(Error::InvalidArgument(format!("spin {s} is not in the alphabet of the {} model", self.kind.name())));
        }
        Ok(())
    }

    pub fn hamiltonian(&self, x: &SpinConfig) -> i64 {
        let s = &x.0;
        match self.kind {
            ModelKind::IsingLine => s.windows(2).map(|w| 1 - (w[0] * w[1]) as i64).sum(),
            ModelKind::BlumeCapel => s.windows(2).map(|w| ((w[0] - w[1]) as i64).pow(2)).sum(),
            ModelKind::EdwardsAnderson => {
                let mut h = 0i64;
                for i in 0..self.d {
                    for j in (i + 1)..self.d {
                        h -= (self.coupling(i, j) * s[i] * s[j]) as i64;
                    }
                }
                h
            }
        }
    }

    /// Energy change when `site` is set to `new_spin`.
    pub fn delta_h(&self, x: &SpinConfig, site: usize, new_spin: i8) -> i64 {
        let s = &x.0;
        let old = s[site] as i64;
        let new = new_spin as i64;
        match self.kind {
            ModelKind::IsingLine => {
                let nb: i64 = neighbours(site, self.d).map(|j| s[j] as i64).sum();
                -(new - old) * nb
            }
            ModelKind::BlumeCapel => neighbours(site, self.d)
                .map(|j| {
                    let v = s[j] as i64;
                    (new - v).pow(2) - (old - v).pow(2)
                })
                .sum(),
            ModelKind::EdwardsAnderson => {
                let row = &self.couplings.as_ref().expect("EA model has couplings")[site * self.d..(site + 1) * self.d];
                let field: i64 = row.iter().zip(s).map(|(&j, &v)| (j * v) as i64).sum();
                -(new - old) * field
            }
        }
    }

    /// Uniform random configuration.
    pub fn random_config<R: Rng + ?Sized>(&self, rng: &mut R) -> SpinConfig {
        let a = self.alphabet();
        SpinConfig((0..self.d).map(|_| a[rng.random_range(0..a.len())]).collect())
    }

    /// Every configuration, for small `d`.
    pub fn enumerate_configs(&self) -> Result<ConfigCodec> {
        let k = self.alphabet().len();
        let total = (k as f64).powi(self.d as i32);
        if total > 4096.0 {
            return Err(Error::TooLarge { n: total as usize, max: 4096 });
        }
        let total = total as usize;
        let configs: Vec<SpinConfig> = (0..total)
            .map(|mut i| {
                let mut s = Vec::with_capacity(self.d);
                for _ in 0..self.d {
                    s.push(self.alphabet()[i % k]);
                    i /= k;
                }
                SpinConfig(s)
            })
            .collect();
        let index = configs.iter().enumerate().map(|(i, c)| (c.key(), i)).collect();
        Ok(ConfigCodec { configs, index })
    }
}

fn neighbours(site: usize, d: usize) -> impl Iterator<Item = usize> {
    let left = site.checked_sub(1);
    let right = (site + 1 < d).then_some(site + 1);
    left.into_iter().chain(right)
}

/// Free-function form of [`SpinModel::hamiltonian`].
pub fn hamiltonian(model: &SpinModel, x: &SpinConfig) -> i64 {
    model.hamiltonian(x)
}

/// Free-function form of [`SpinModel::delta_h`].
pub fn delta_h(model: &SpinModel, x: &SpinConfig, site: usize, new_spin: i8) -> i64 {
    model.delta_h(x, site, new_spin)
}

/// A configuration `x = (x_1, ..., x_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Self {
        Self(spins)
    }

    pub fn constant(d: usize, spin: i8) -> Self {
        Self(vec![spin; d])
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }

    pub fn magnetization(&self) -> f64 {
        self.0.iter().map(|&s| s as f64).sum::<f64>() / self.0.len() as f64
    }

    /// Base-3 integer key with digit `x_i + 1` at position `i`; valid for `d <= 80`.
    pub fn key(&self) -> u128 {
        self.0.iter().rev().fold(0u128, |acc, &s| acc * 3 + (s + 1) as u128)
    }

    pub fn from_key(mut key: u128, d: usize) -> Self {
        let mut s = Vec::with_capacity(d);
        for _ in 0..d {
            s.push((key % 3) as i8 - 1);
            key /= 3;
        }
        Self(s)
    }

    fn is_constant(&self, spin: i8) -> bool {
        self.0.iter().all(|&s| s == spin)
    }
}

/// Dense indexing of all configurations of a small model.
#[derive(Debug, Clone)]
pub struct ConfigCodec {
    configs: Vec<SpinConfig>,
    index: HashMap<u128, usize>,
}

impl ConfigCodec {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn config(&self, i: usize) -> &SpinConfig {
        &self.configs[i]
    }

    pub fn index_of(&self, x: &SpinConfig) -> usize {
        self.index[&x.key()]
    }

    /// The single-site Metropolis kernel at `beta` and its Gibbs law.
    pub fn mh_kernel(&self, model: &SpinModel, beta: f64) -> Result<(StochasticMatrix, ProbabilityVector)> {
        let n = self.len();
        let a = model.alphabet();
        let q = 1.0 / (model.d() * (a.len() - 1)) as f64;
        let mut rows = vec![vec![0.0; n]; n];
        for (i, x) in self.configs.iter().enumerate() {
            let mut off = 0.0;
            for site in 0..model.d() {
                for &s in a.iter().filter(|&&s| s != x.0[site]) {
                    let dh = model.delta_h(x, site, s);
                    let mut y = x.clone();
                    y.0[site] = s;
                    let p = q * (-beta * dh.max(0) as f64).exp();
                    rows[i][self.index_of(&y)] += p;
                    off += p;
                }
            }
            rows[i][i] += 1.0 - off;
        }
        let h: Vec<f64> = self.configs.iter().map(|x| model.hamiltonian(x) as f64).collect();
        Ok((StochasticMatrix::from_rows(&rows)?, crate::landscape::gibbs(&h, beta)?))
    }

    /// Dense form of a configuration involution, checked to preserve energy.
    pub fn involution(&self, model: &SpinModel, sigma: &SpinInvolution) -> Result<InvolutionPermutation> {
        let mut map = Vec::with_capacity(self.len());
        for (i, x) in self.configs.iter().enumerate() {
            let mut y = x.clone();
            sigma.apply(&mut y);
            let j = self.index_of(&y);
            if model.hamiltonian(x) != model.hamiltonian(&y) {
                return Err(Error::NotEquiProbability { x: i, y: j, gap: (model.hamiltonian(x) - model.hamiltonian(&y)).abs() as f64 });
            }
            map.push(j);
        }
        InvolutionPermutation::without_distribution(map)
    }
}

/// A Markov kernel that can be sampled one step at a time.
pub trait BaseKernel {
    type State;

    /// Advances `x` by one step. Returns the change in integer energy for
    /// kernels on an energy landscape, and 0 for kernels without one.
    fn step<R: Rng + ?Sized>(&self, x: &mut Self::State, rng: &mut R) -> i64;
}

/// An involution acting on states in place.
pub trait StateInvolution<S> {
    fn apply(&self, x: &mut S);
}

/// Single-site Metropolis kernel: a uniform site is proposed to take a
/// uniform spin different from its current one.
#[derive(Debug, Clone)]
pub struct MetropolisKernel<'a> {
    model: &'a SpinModel,
    beta: f64,
}

impl<'a> MetropolisKernel<'a> {
    pub fn new(model: &'a SpinModel, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::ConfigInvalid(format!("beta must be a non-negative number, got {beta}")));
        }
        Ok(Self { model, beta })
    }

    /// One step; returns the energy change (0 when rejected).
    pub fn step_with_delta<R: Rng + ?Sized>(&self, x: &mut SpinConfig, rng: &mut R) -> i64 {
        let site = rng.random_range(0..self.model.d);
        let a = self.model.alphabet();
        let cur = x.0[site];
        let mut k = rng.random_range(0..a.len() - 1);
        if a[k] == cur {
            k = a.len() - 1;
        }
        let new = a[k];
        let dh = self.model.delta_h(x, site, new);
        if dh <= 0 || rng.random::<f64>() < (-self.beta * dh as f64).exp() {
            x.0[site] = new;
            dh
        } else {
            0
        }
    }
}

impl BaseKernel for MetropolisKernel<'_> {
    type State = SpinConfig;
    fn step<R: Rng + ?Sized>(&self, x: &mut SpinConfig, rng: &mut R) -> i64 {
        self.step_with_delta(x, rng)
    }
}

/// Row-wise sampler for an explicit stochastic matrix.
#[derive(Debug, Clone)]
pub struct MatrixKernel {
    cdf: Vec<Vec<f64>>,
}

impl MatrixKernel {
    pub fn new(p: &StochasticMatrix) -> Self {
        let cdf = (0..p.n())
            .map(|x| {
                let mut acc = 0.0;
                (0..p.n())
                    .map(|y| {
                        acc += p.get(x, y);
                        acc
                    })
                    .collect()
            })
            .collect();
        Self { cdf }
    }
}

impl BaseKernel for MatrixKernel {
    type State = usize;
    fn step<R: Rng + ?Sized>(&self, x: &mut usize, rng: &mut R) -> i64 {
        let row = &self.cdf[*x];
        let u = rng.random::<f64>() * row[row.len() - 1];
        *x = row.partition_point(|&c| c <= u).min(row.len() - 1);
        0
    }
}

impl StateInvolution<usize> for InvolutionPermutation {
    fn apply(&self, x: &mut usize) {
        *x = self.image(*x);
    }
}

/// Involutions on spin configurations.
#[derive(Debug, Clone, PartialEq)]
pub enum SpinInvolution {
    Identity,
    /// `x -> -x`. Unless `swap_ground_states` is set, the all-`+1` and
    /// all-`-1` configurations are fixed points.
    GlobalFlip { swap_ground_states: bool },
    /// Explicit transpositions keyed by [`SpinConfig::key`].
    Pairs(PairMap<u128>),
}

impl SpinInvolution {
    /// The transposition of two configurations.
    pub fn swap(a: &SpinConfig, b: &SpinConfig) -> Result<Self> {
        let mut m = PairMap::new();
        m.insert_pair(a.key(), b.key())?;
        Ok(SpinInvolution::Pairs(m))
    }
}

impl StateInvolution<SpinConfig> for PairMap<u128> {
    fn apply(&self, x: &mut SpinConfig) {
        let key = x.key();
        let image = *self.image(&key);
        if image != key {
            *x = SpinConfig::from_key(image, x.d());
        }
    }
}

impl StateInvolution<SpinConfig> for SpinInvolution {
    fn apply(&self, x: &mut SpinConfig) {
        match self {
            SpinInvolution::Identity => {}
            SpinInvolution::GlobalFlip { swap_ground_states } => {
                if *swap_ground_states || !(x.is_constant(1) || x.is_constant(-1)) {
                    for s in &mut x.0 {
                        *s = -*s;
                    }
                }
            }
            SpinInvolution::Pairs(m) => m.apply(x),
        }
    }
}

/// One Metropolis step; returns whether the proposal was accepted.
pub fn mh_step<R: Rng + ?Sized>(model: &SpinModel, x: &mut SpinConfig, beta: f64, rng: &mut R) -> Result<bool> {
    let before = x.clone();
    MetropolisKernel::new(model, beta)?.step_with_delta(x, rng);
    Ok(*x != before)
}

/// One step of `(P + Q P Q) / 2`: with probability 1/2 a plain step,
/// otherwise `sigma`, a step, and `sigma` again.
pub fn projected_step<K, I, R>(kernel: &K, x: &mut K::State, sigma: &I, rng: &mut R) -> i64
where
    K: BaseKernel,
    I: StateInvolution<K::State> + ?Sized,
    R: Rng + ?Sized,
{
    if rng.random_bool(0.5) {
        kernel.step(x, rng)
    } else {
        sigma.apply(x);
        let dh = kernel.step(x, rng);
        sigma.apply(x);
        dh
    }
}

/// Realised `sigma_1, ..., sigma_n`, each the identity (`None`) or the
/// schedule entry `(i - 1) mod m` (`Some`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationProgram {
    pub sigma: Vec<Option<usize>>,
}

impl PermutationProgram {
    pub fn draw<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Self {
        Self { sigma: (0..n).map(|i| rng.random_bool(0.5).then_some(i % m)).collect() }
    }
}

/// One step of the kernel `R_n` built from the schedule: draw a fresh
/// program, move to `sigma_1 ∘ ... ∘ sigma_n (x)`, take a base step, and map
/// back through `sigma_n ∘ ... ∘ sigma_1`.
pub fn recursive_rn_step<K, I, R>(kernel: &K, x: &mut K::State, schedule: &[I], n: usize, rng: &mut R) -> i64
where
    K: BaseKernel,
    I: StateInvolution<K::State>,
    R: Rng + ?Sized,
{
    if schedule.is_empty() {
        return kernel.step(x, rng);
    }
    let program = PermutationProgram::draw(n, schedule.len(), rng);
    for s in program.sigma.iter().rev().flatten() {
        schedule[*s].apply(x);
    }
    let dh = kernel.step(x, rng);
    for s in program.sigma.iter().flatten() {
        schedule[*s].apply(x);
    }
    dh
}

/// Sampler driven by [`run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Standard,
    FixedQ,
    Adaptive,
    Exploratory,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Standard => "standard",
            SamplerKind::FixedQ => "fixed_q",
            SamplerKind::Adaptive => "adaptive",
            SamplerKind::Exploratory => "exploratory",
        }
    }

    fn stream(self) -> u64 {
        match self {
            SamplerKind::Standard => 10,
            SamplerKind::FixedQ => 11,
            SamplerKind::Adaptive => 12,
            SamplerKind::Exploratory => 13,
        }
    }
}

impl FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "mh" => Ok(SamplerKind::Standard),
            "fixed_q" | "fixed" => Ok(SamplerKind::FixedQ),
            "adaptive" => Ok(SamplerKind::Adaptive),
            "exploratory" => Ok(SamplerKind::Exploratory),
            other => Err(Error::ConfigInvalid(format!("unknown sampler '{other}'"))),
        }
    }
}

/// Parameters of one spin experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub d: usize,
    pub beta: f64,
    pub beta_e: f64,
    pub steps: usize,
    pub explore_steps: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub adapt_every: usize,
    pub record_stride: usize,
    /// Number of exploration chains; more than one gives a schedule.
    pub explore_runs: usize,
    /// Let the global flip exchange the all-`+1` and all-`-1` configurations.
    pub swap_ground_states: bool,
}

/// Keys accepted by [`ExperimentConfig::parse`].
pub const CONFIG_KEYS: &[&str] = &[
    "model",
    "d",
    "beta",
    "beta_e",
    "steps",
    "explore_steps",
    "seed",
    "sampler",
    "adapt_every",
    "record_stride",
    "explore_runs",
    "swap_ground_states",
];

impl ExperimentConfig {
    /// Reference parameters per model: `d = 50`, `beta = 2` with `1e5` steps
    /// for Ising and EA, `beta = 3` with `2e5` steps for Blume-Capel, and an
    /// exploration chain at `beta_e = 0.1` of the same length.
    pub fn reference(model: ModelKind, sampler: SamplerKind, seed: u64) -> Self {
        let (beta, steps) = match model {
            ModelKind::BlumeCapel => (3.0, 200_000),
            _ => (2.0, 100_000),
        };
        Self {
            model,
            d: 50,
            beta,
            beta_e: 0.1,
            steps,
            explore_steps: steps,
            seed,
            sampler,
            adapt_every: tuning::DEFAULT_ADAPT_EVERY,
            record_stride: 10,
            explore_runs: 1,
            swap_ground_states: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.d > MAX_KEYED_DIM && matches!(self.sampler, SamplerKind::Adaptive | SamplerKind::Exploratory) {
            return bad(format!("adaptive samplers support d <= {MAX_KEYED_DIM}"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be non-negative, got {}", self.beta));
        }
        if !(self.beta_e >= 0.0 && self.beta_e.is_finite()) {
            return bad(format!("beta_e must be non-negative, got {}", self.beta_e));
        }
        if self.adapt_every == 0 {
            return bad("adapt_every must be positive".into());
        }
        if self.record_stride == 0 {
            return bad("record_stride must be positive".into());
        }
        if self.explore_runs == 0 {
            return bad("explore_runs must be positive".into());
        }
        Ok(())
    }

    /// Parses flat `key = value` lines. `model` is required; every other key
    /// defaults to the reference parameters of that model. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse { line: i + 1, message: "expected 'key = value'".into() });
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(Error::ConfigInvalid(format!("unknown key '{k}' on line {}", i + 1)));
            }
            if entries.iter().any(|(_, e, _)| *e == k) {
                return Err(Error::Parse { line: i + 1, message: format!("duplicate key '{k}'") });
            }
            entries.push((i + 1, k, v));
        }
        let get = |key: &str| entries.iter().find(|(_, k, _)| k == key);
        let (_, _, model) = get("model").ok_or_else(|| Error::ConfigInvalid("missing key 'model'".into()))?;
        let model: ModelKind = model.parse()?;
        let sampler = match get("sampler") {
            Some((_, _, s)) => s.parse()?,
            None => SamplerKind::FixedQ,
        };
        let mut cfg = Self::reference(model, sampler, 0);
        fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Parse { line, message: format!("invalid value '{v}' for '{key}'") })
        }
        for (line, k, v) in &entries {
            let line = *line;
            match k.as_str() {
                "d" => cfg.d = num(line, k, v)?,
                "beta" => cfg.beta = num(line, k, v)?,
                "beta_e" => cfg.beta_e = num(line, k, v)?,
                "steps" => cfg.steps = num(line, k, v)?,
                "explore_steps" => cfg.explore_steps = num(line, k, v)?,
                "seed" => cfg.seed = num(line, k, v)?,
                "adapt_every" => cfg.adapt_every = num(line, k, v)?,
                "record_stride" => cfg.record_stride = num(line, k, v)?,
                "explore_runs" => cfg.explore_runs = num(line, k, v)?,
                "swap_ground_states" => cfg.swap_ground_states = num(line, k, v)?,
                _ => {}
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Recorded output of one sampler run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub model: ModelKind,
    pub sampler: SamplerKind,
    pub d: usize,
    pub beta: f64,
    pub steps: usize,
    pub seed: u64,
    pub stride: usize,
    /// Step index of each recorded sample.
    pub record_steps: Vec<usize>,
    pub magnetization: Vec<f64>,
    pub hamiltonian: Vec<i64>,
    /// `sum_t |m_{t+1} - m_t|` over consecutive post-step states.
    pub jump_sum: f64,
    /// Number of terms in `jump_sum`.
    pub jump_terms: usize,
    /// Number of transpositions in the final adaptive or explored map.
    pub mapped_pairs: usize,
}

impl TraceRecord {
    /// A stride-one record of a given magnetisation series, for diagnostics.
    pub fn from_series(magnetization: Vec<f64>) -> Self {
        let jump_sum = magnetization.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let n = magnetization.len();
        Self {
            model: ModelKind::IsingLine,
            sampler: SamplerKind::Standard,
            d: 0,
            beta: 0.0,
            steps: n,
            seed: 0,
            stride: 1,
            record_steps: (1..=n).collect(),
            hamiltonian: vec![0; n],
            magnetization,
            jump_sum,
            jump_terms: n.saturating_sub(1),
            mapped_pairs: 0,
        }
    }

    /// CSV with header `step,magnetization,hamiltonian`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,magnetization,hamiltonian\n");
        for ((t, m), h) in self.record_steps.iter().zip(&self.magnetization).zip(&self.hamiltonian) {
            let _ = writeln!(out, "{t},{m},{h}");
        }
        out
    }

    pub fn visits_both_modes(&self, level: f64) -> bool {
        self.magnetization.iter().any(|&m| m > level) && self.magnetization.iter().any(|&m| m < -level)
    }
}

struct Recorder {
    stride: usize,
    record_steps: Vec<usize>,
    magnetization: Vec<f64>,
    hamiltonian: Vec<i64>,
    jump_sum: f64,
    jump_terms: usize,
    last_m: Option<f64>,
}

impl Recorder {
    fn new(steps: usize, stride: usize) -> Self {
        let cap = steps / stride;
        Self {
            stride,
            record_steps: Vec::with_capacity(cap),
            magnetization: Vec::with_capacity(cap),
            hamiltonian: Vec::with_capacity(cap),
            jump_sum: 0.0,
            jump_terms: 0,
            last_m: None,
        }
    }

    fn observe(&mut self, t: usize, x: &SpinConfig, h: i64) {
        let m = x.magnetization();
        if let Some(prev) = self.last_m {
            self.jump_sum += (m - prev).abs();
            self.jump_terms += 1;
        }
        self.last_m = Some(m);
        if t.is_multiple_of(self.stride) {
            self.record_steps.push(t);
            self.magnetization.push(m);
            self.hamiltonian.push(h);
        }
    }
}

/// Shared initial configuration for all samplers of an experiment.
pub fn initial_config(model: &SpinModel, seed: u64) -> SpinConfig {
    model.random_config(&mut rng::substream(seed, 2))
}

/// The model of an experiment; EA couplings depend only on the seed so all
/// samplers see the same realisation.
pub fn experiment_model(config: &ExperimentConfig) -> Result<SpinModel> {
    SpinModel::new(config.model, config.d, rng::substream(config.seed, 1).random())
}

/// Runs the configured sampler.
pub fn run_experiment(config: &ExperimentConfig) -> Result<TraceRecord> {
    config.validate()?;
    let model = experiment_model(config)?;
    let start = initial_config(&model, config.seed);
    let kernel = MetropolisKernel::new(&model, config.beta)?;
    let mut r = rng::substream(config.seed, config.sampler.stream());
    let mut rec = Recorder::new(config.steps, config.record_stride);
    let mut x = start.clone();
    let mut h = model.hamiltonian(&x);
    let flip = SpinInvolution::GlobalFlip { swap_ground_states: config.swap_ground_states };
    let mut mapped_pairs = 0;
    match config.sampler {
        SamplerKind::Standard => {
            for t in 1..=config.steps {
                h += kernel.step(&mut x, &mut r);
                rec.observe(t, &x, h);
            }
        }
        SamplerKind::FixedQ => {
            if model.kind() == ModelKind::BlumeCapel {
                let d = model.d();
                let ground_swap = SpinInvolution::swap(&SpinConfig::constant(d, 1), &SpinConfig::constant(d, 0))?;
                let schedule = [flip, ground_swap];
                for t in 1..=config.steps {
                    h += recursive_rn_step(&kernel, &mut x, &schedule, 2, &mut r);
                    rec.observe(t, &x, h);
                }
            } else {
                for t in 1..=config.steps {
                    h += projected_step(&kernel, &mut x, &flip, &mut r);
                    rec.observe(t, &x, h);
                }
            }
        }
        SamplerKind::Adaptive => {
            let mut tracker = AdaptiveState::new(config.adapt_every)?;
            tracker.record(&x.key(), h);
            for t in 1..=config.steps {
                h += projected_step(&kernel, &mut x, tracker.permutation(), &mut r);
                tracker.record(&x.key(), h);
                rec.observe(t, &x, h);
            }
            mapped_pairs = tracker.permutation().n_pairs();
        }
        SamplerKind::Exploratory => {
            let explore_seed = rng::substream(config.seed, 3).random();
            let schedule = tuning::exploratory_build(
                &model,
                &start,
                config.beta_e,
                config.explore_steps,
                explore_seed,
                config.explore_runs,
                config.adapt_every,
            )?;
            mapped_pairs = schedule
                .iter()
                .map(|s| match s {
                    SpinInvolution::Pairs(m) => m.n_pairs(),
                    _ => 0,
                })
                .sum();
            let m = schedule.len();
            for t in 1..=config.steps {
                h += if m == 1 {
                    projected_step(&kernel, &mut x, &schedule[0], &mut r)
                } else {
                    recursive_rn_step(&kernel, &mut x, &schedule, m, &mut r)
                };
                rec.observe(t, &x, h);
            }
        }
    }
    Ok(TraceRecord {
        model: config.model,
        sampler: config.sampler,
        d: config.d,
        beta: config.beta,
        steps: config.steps,
        seed: config.seed,
        stride: config.record_stride,
        record_steps: rec.record_steps,
        magnetization: rec.magnetization,
        hamiltonian: rec.hamiltonian,
        jump_sum: rec.jump_sum,
        jump_terms: rec.jump_terms,
        mapped_pairs,
    })
}

/// Summary statistics of a trace, serialised as the run's JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub model: ModelKind,
    pub sampler: SamplerKind,
    pub d: usize,
    pub beta: f64,
    pub steps: usize,
    pub seed: u64,
    pub sample_mean: f64,
    /// 95% interval from 20 non-overlapping batch means.
    pub ci_low: f64,
    pub ci_high: f64,
    pub avg_jump_distance: f64,
    /// 95% interval treating samples as independent.
    pub naive_ci_low: f64,
    pub naive_ci_high: f64,
}

impl Summary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialises")
    }
}

/// Number of batches used for batch-means intervals.
pub const CI_BATCHES: usize = 20;

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sample mean, batch-means and naive 95% intervals, and average jump distance.
pub fn summarize(trace: &TraceRecord) -> Summary {
    let m = &trace.magnetization;
    let (mean, sd) = if m.is_empty() { (f64::NAN, f64::NAN) } else { mean_sd(m) };
    let batches = CI_BATCHES.min(m.len());
    let (ci_low, ci_high) = if batches >= 2 {
        let size = m.len() / batches;
        let means: Vec<f64> = m[..batches * size].chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
        let (_, bsd) = mean_sd(&means);
        let t = StudentsT::new(0.0, 1.0, (batches - 1) as f64).expect("positive degrees of freedom").inverse_cdf(0.975);
        let half = t * bsd / (batches as f64).sqrt();
        (mean - half, mean + half)
    } else {
        (mean, mean)
    };
    let naive_half = if m.len() >= 2 { 1.959_963_984_540_054 * sd / (m.len() as f64).sqrt() } else { 0.0 };
    let avg_jump_distance = if trace.jump_terms > 0 { trace.jump_sum / trace.jump_terms as f64 } else { 0.0 };
    Summary {
        model: trace.model,
        sampler: trace.sampler,
        d: trace.d,
        beta: trace.beta,
        steps: trace.steps,
        seed: trace.seed,
        sample_mean: mean,
        ci_low,
        ci_high,
        avg_jump_distance,
        naive_ci_low: mean - naive_half,
        naive_ci_high: mean + naive_half,
    }
}
