//! Python bindings: kernels, projections and the bimodal and spin studies.

use nalgebra::DMatrix;
use permproj_core::chain::{self, EquiMode, GeneralPermutation, InvolutionPermutation, ProbabilityVector, StochasticMatrix};
use permproj_core::landscape::{self, SupportGraph};
use permproj_core::projection::{self, MixWeight, ProjectionSchedule};
use permproj_core::spin::{self, ExperimentConfig};
use permproj_core::{divergence, spectral, Error, ErrorKind};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Runtime => PyRuntimeError::new_err(e.to_string()),
        ErrorKind::Parse | ErrorKind::Validation => PyValueError::new_err(e.to_string()),
    }
}

/// A stochastic matrix together with a stationary distribution.
#[pyclass(module = "permproj", frozen)]
struct Kernel {
    p: StochasticMatrix,
    pi: ProbabilityVector,
}

impl Kernel {
    fn involution(&self, mapping: Vec<usize>) -> PyResult<InvolutionPermutation> {
        InvolutionPermutation::new(mapping, &self.pi, EquiMode::Relative(1e-9)).map_err(py_err)
    }
}

#[pymethods]
impl Kernel {
    /// Builds a kernel from row lists. Without `pi` the stationary law is solved for.
    #[new]
    #[pyo3(signature = (rows, pi=None))]
    fn new(rows: Vec<Vec<f64>>, pi: Option<Vec<f64>>) -> PyResult<Self> {
        let p = StochasticMatrix::from_rows(&rows).map_err(py_err)?;
        let pi = match pi {
            Some(w) => {
                let pi = ProbabilityVector::new(w, 1e-10).map_err(py_err)?;
                if !divergence::is_stationary(&p, &pi) {
                    return Err(PyValueError::new_err("pi is not stationary for the matrix"));
                }
                pi
            }
            None => chain::stationary_of(&p, 1e-10).map_err(py_err)?,
        };
        Ok(Kernel { p, pi })
    }

    #[getter]
    fn n(&self) -> usize {
        self.p.n()
    }

    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.pi.as_slice().to_vec()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.p.n();
        (0..n).map(|i| (0..n).map(|j| self.p.get(i, j)).collect()).collect()
    }

    fn trace(&self) -> f64 {
        self.p.trace()
    }

    /// `alpha P + (1 - alpha) Q P* Q` for the involution given as an image list.
    #[pyo3(signature = (mapping, alpha=0.5))]
    fn project(&self, mapping: Vec<usize>, alpha: f64) -> PyResult<Kernel> {
        let q = self.involution(mapping)?;
        let p = if alpha == 0.5 {
            projection::project(&self.p, &q, &self.pi)
        } else {
            let w = MixWeight::new(alpha).map_err(py_err)?;
            projection::project_alpha(&self.p, &q, w)
        }
        .map_err(py_err)?;
        Ok(Kernel { p, pi: self.pi.clone() })
    }

    /// Projection by an arbitrary permutation; needs a uniform stationary law.
    fn project_permutation(&self, mapping: Vec<usize>) -> PyResult<Kernel> {
        if !self.pi.is_uniform(1e-12) {
            return Err(PyValueError::new_err("general permutations need a uniform stationary law"));
        }
        let q = GeneralPermutation::new(mapping).map_err(py_err)?;
        let p = projection::project(&self.p, &q, &self.pi).map_err(py_err)?;
        Ok(Kernel { p, pi: self.pi.clone() })
    }

    fn kl_to_pi(&self) -> PyResult<f64> {
        let big_pi = chain::stationary_matrix(&self.pi);
        Ok(divergence::kl_rate(&self.p, &big_pi, &self.pi).map_err(py_err)?.finite().unwrap_or(f64::INFINITY))
    }

    fn frobenius_distance(&self, other: &Kernel) -> PyResult<f64> {
        divergence::frobenius_dist(self.p.matrix(), other.p.matrix(), &self.pi).map_err(py_err)
    }

    /// Eigenvalues, SLEM, gap, relaxation time and eigentime of a reversible kernel.
    fn spectrum<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = spectral::spectrum(&self.p, &self.pi).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("eigenvalues", s.eigenvalues.clone())?;
        d.set_item("slem", s.slem)?;
        d.set_item("gap", s.gap)?;
        d.set_item("t_rel", s.t_rel)?;
        d.set_item("t_av", s.t_av)?;
        Ok(d)
    }

    fn asymptotic_variance(&self, f: Vec<f64>) -> PyResult<f64> {
        spectral::asymptotic_variance(&f, &self.p, &self.pi).map_err(py_err)
    }

    fn worst_case_av(&self) -> PyResult<f64> {
        spectral::worst_case_av(&self.p, &self.pi).map_err(py_err)
    }

    fn average_case_av(&self) -> PyResult<f64> {
        spectral::average_case_av(&self.p, &self.pi).map_err(py_err)
    }

    #[pyo3(signature = (eps=0.25, max_steps=spectral::DEFAULT_MIX_BUDGET))]
    fn mixing_time(&self, eps: f64, max_steps: usize) -> PyResult<usize> {
        spectral::mixing_time(&self.p, &self.pi, eps, max_steps).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Kernel(n={}, trace={:.6})", self.p.n(), self.p.trace())
    }
}

/// Alternating projections over a list of involutions.
/// Returns the per-iterate diagnostics and the final kernel.
#[pyfunction]
#[pyo3(signature = (kernel, mappings, max_sweeps=projection::DEFAULT_MAX_SWEEPS, eps=projection::DEFAULT_EPS))]
fn alternating_projections<'py>(
    py: Python<'py>,
    kernel: &Kernel,
    mappings: Vec<Vec<usize>>,
    max_sweeps: usize,
    eps: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let qs = mappings.into_iter().map(|m| kernel.involution(m)).collect::<PyResult<Vec<_>>>()?;
    let schedule = ProjectionSchedule::new(qs).map_err(py_err)?;
    let run = projection::alternating_projections(&kernel.p, &schedule, &kernel.pi, max_sweeps, eps).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("converged", run.converged)?;
    d.set_item("kl_to_pi", run.stats.iter().map(|s| s.kl_to_pi).collect::<Vec<_>>())?;
    d.set_item("frob_step", run.stats.iter().map(|s| s.frob_step).collect::<Vec<_>>())?;
    d.set_item("slem", run.stats.iter().map(|s| s.slem).collect::<Vec<_>>())?;
    d.set_item("trace", run.trace)?;
    d.set_item("limit", Kernel { p: run.limit().clone(), pi: kernel.pi.clone() })?;
    Ok(d)
}

#[pyfunction]
fn birth_death_chain(n: usize) -> PyResult<Kernel> {
    let p = chain::birth_death_chain(n).map_err(py_err)?;
    Ok(Kernel { p, pi: ProbabilityVector::uniform(n) })
}

#[pyfunction]
fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    use permproj_core::chain::Permutation;
    chain::random_permutation(n, seed).mapping().to_vec()
}

/// Critical heights and Arrhenius slopes of the two-well landscape on `{-J..J}`.
#[pyfunction]
#[pyo3(signature = (j, betas=vec![1.0, 2.0, 3.0, 4.0]))]
fn bimodal_study<'py>(py: Python<'py>, j: usize, betas: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let inst = landscape::bimodal_instance(j).map_err(py_err)?;
    let h = landscape::critical_height(&SupportGraph::of(&inst.proposal), &inst.hamiltonian).map_err(py_err)?;
    let hp = landscape::critical_height(&SupportGraph::of(&inst.projected_proposal()), &inst.hamiltonian).map_err(py_err)?;
    let mh = landscape::arrhenius_study(|b| inst.mh(b), &betas).map_err(py_err)?;
    let proj = landscape::arrhenius_study(|b| inst.projected(b), &betas).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("critical_height", h.height)?;
    d.set_item("projected_critical_height", hp.height)?;
    d.set_item("slope", mh.slope)?;
    d.set_item("projected_slope", proj.slope)?;
    d.set_item("t_rel", mh.rows.iter().map(|r| r.t_rel).collect::<Vec<_>>())?;
    d.set_item("projected_t_rel", proj.rows.iter().map(|r| r.t_rel).collect::<Vec<_>>())?;
    Ok(d)
}

/// Runs one spin experiment from `key = value` config text.
/// Returns the summary statistics and the recorded magnetisation series.
#[pyfunction]
fn run_spin<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::parse(config).map_err(py_err)?;
    let trace = py.detach(|| spin::run_experiment(&cfg)).map_err(py_err)?;
    let s = spin::summarize(&trace);
    let d = PyDict::new(py);
    d.set_item("model", cfg.model.name())?;
    d.set_item("sampler", cfg.sampler.name())?;
    d.set_item("sample_mean", s.sample_mean)?;
    d.set_item("ci", (s.ci_low, s.ci_high))?;
    d.set_item("naive_ci", (s.naive_ci_low, s.naive_ci_high))?;
    d.set_item("avg_jump_distance", s.avg_jump_distance)?;
    d.set_item("magnetization", trace.magnetization.clone())?;
    d.set_item("hamiltonian", trace.hamiltonian.clone())?;
    Ok(d)
}

/// Stationary matrix `Pi` of a distribution, as a kernel.
#[pyfunction]
fn stationary_kernel(pi: Vec<f64>) -> PyResult<Kernel> {
    let pi = ProbabilityVector::new(pi, 1e-10).map_err(py_err)?;
    let n = pi.len();
    let m = DMatrix::from_fn(n, n, |_, y| pi[y]);
    let p = StochasticMatrix::new(m, 1e-12).map_err(py_err)?;
    Ok(Kernel { p, pi })
}

#[pymodule]
fn permproj(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kernel>()?;
    m.add_function(wrap_pyfunction!(alternating_projections, m)?)?;
    m.add_function(wrap_pyfunction!(birth_death_chain, m)?)?;
    m.add_function(wrap_pyfunction!(random_permutation, m)?)?;
    m.add_function(wrap_pyfunction!(bimodal_study, m)?)?;
    m.add_function(wrap_pyfunction!(run_spin, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_kernel, m)?)?;
    Ok(())
}
