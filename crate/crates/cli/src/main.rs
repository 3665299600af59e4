//! `permproj`: analyses and experiments on permutation projections of Markov chains.
//!
//! Exit status is 0 on success, 2 for unreadable input (command line or file
//! syntax), 3 for inputs that parse but fail validation and 4 for runtime
//! failures such as I/O errors or exhausted step budgets.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use permproj_core::chain::{self, InvolutionPermutation, ProbabilityVector, StochasticMatrix};
use permproj_core::landscape::{self, SupportGraph};
use permproj_core::projection::{self, ProjectionSchedule};
use permproj_core::spin::{self, ExperimentConfig, SamplerKind};
use permproj_core::{divergence, io, rng, spectral, Error, ErrorKind};
use rand::RngCore;
use serde_json::{json, Value};

const EXIT_PARSE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

/// Constant in the logarithmic mixing bound column of `dhn`.
const DHN_BOUND_C: f64 = 5.0;

#[derive(Parser, Debug)]
#[command(name = "permproj", version, about = "Permutation projections of finite Markov chains")]
struct Cli {
    /// Seed for randomised commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write outputs to files in this directory instead of stdout.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral, variance and speed-limit report for a matrix file.
    Analyze {
        matrix: PathBuf,
        /// Tolerance for the trace-one and eigenvalue-overlap tests.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Alternating projections over one or more involution files.
    Project {
        matrix: PathBuf,
        #[arg(required = true)]
        permutations: Vec<PathBuf>,
        #[arg(long, default_value_t = projection::DEFAULT_MAX_SWEEPS)]
        sweeps: usize,
        #[arg(long, default_value_t = projection::DEFAULT_EPS)]
        eps: f64,
    },
    /// Arrhenius study and critical heights of the two-well landscape.
    Bimodal {
        #[arg(long = "J", short = 'J')]
        j: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0, 4.0])]
        beta_grid: Vec<f64>,
    },
    /// Mixing times of the path walk projected by random permutations.
    Dhn {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
    },
    /// Spin-chain experiment from a `key = value` config file.
    Spin { config: PathBuf },
}

/// An output document: file name under `--out-dir` and its contents.
struct Artifact {
    name: String,
    body: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_PARSE) } else { ExitCode::SUCCESS };
        }
    };
    if matches!(cli.command, Command::Dhn { .. }) && cli.seed.is_none() {
        let e = Cli::command().error(clap::error::ErrorKind::MissingRequiredArgument, "dhn needs an explicit --seed");
        let _ = e.print();
        return ExitCode::from(EXIT_PARSE);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("permproj: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Parse => EXIT_PARSE,
                ErrorKind::Validation => EXIT_VALIDATION,
                ErrorKind::Runtime => EXIT_RUNTIME,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let artifacts = match &cli.command {
        Command::Analyze { matrix, tol } => analyze(matrix, *tol, cli.format)?,
        Command::Project { matrix, permutations, sweeps, eps } => {
            project(matrix, permutations, *sweeps, *eps, cli.format, cli.out_dir.is_some())?
        }
        Command::Bimodal { j, beta_grid } => bimodal(*j, beta_grid, cli.format)?,
        Command::Dhn { n, trials, eps } => {
            let seed = cli.seed.expect("checked in main");
            dhn(n, *trials, *eps, seed, cli.format)?
        }
        Command::Spin { config } => spin_cmd(config, cli.seed, cli.out_dir.is_some())?,
    };
    emit(&artifacts, cli.out_dir.as_deref())
}

fn emit(artifacts: &[Artifact], out_dir: Option<&Path>) -> Result<(), Error> {
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for a in artifacts {
                let path = dir.join(&a.name);
                fs::write(&path, &a.body)?;
                println!("{}", path.display());
            }
        }
        None => {
            for a in artifacts {
                print!("{}", a.body);
            }
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Matrix file plus its stationary law, solved for when the file omits it.
fn load_matrix(path: &Path) -> Result<(StochasticMatrix, ProbabilityVector), Error> {
    let file = io::parse_matrix(&read(path)?)?;
    let pi = match file.pi {
        Some(pi) => {
            if !divergence::is_stationary(&file.matrix, &pi) {
                return Err(Error::NotStationary { residual: stationary_residual(&file.matrix, &pi) });
            }
            pi
        }
        None => chain::stationary_of(&file.matrix, 1e-10)?,
    };
    Ok((file.matrix, pi))
}

fn stationary_residual(p: &StochasticMatrix, pi: &ProbabilityVector) -> f64 {
    let n = p.n();
    (0..n)
        .map(|y| ((0..n).map(|x| pi[x] * p.get(x, y)).sum::<f64>() - pi[y]).abs())
        .fold(0.0, f64::max)
}

fn json_doc(name: &str, v: &Value) -> Artifact {
    Artifact { name: name.into(), body: serde_json::to_string_pretty(v).expect("values serialise") + "\n" }
}

/// JSON number, or null for non-finite values.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn analyze(path: &Path, tol: f64, format: Format) -> Result<Vec<Artifact>, Error> {
    let (p, pi) = load_matrix(path)?;
    let big_pi = chain::stationary_matrix(&pi);
    let rev = chain::is_reversible(&p, &pi, 1e-10);
    let speed = projection::speed_limit_report(&p, &pi, tol)?;
    let kl = divergence::kl_rate(&p, &big_pi, &pi)?.finite().unwrap_or(f64::INFINITY);
    let frob = divergence::frobenius_dist(p.matrix(), big_pi.matrix(), &pi)?;
    let tv = divergence::tv_weighted(&p, &big_pi, &pi)?.finite().unwrap_or(f64::NAN);

    let mut rows: Vec<(String, Value)> = vec![
        ("n".into(), json!(p.n())),
        ("trace".into(), num(speed.trace)),
        ("reversible".into(), json!(rev.reversible)),
        ("trace_one".into(), json!(speed.trace_one)),
        ("sylvester_overlap".into(), json!(speed.sylvester_overlap)),
        ("min_overlap_gap".into(), num(speed.min_overlap_gap)),
        ("gap_half_condition".into(), json!(speed.gap_half_condition)),
        ("kl_to_pi".into(), num(kl)),
        ("frobenius_to_pi".into(), num(frob)),
        ("tv_to_pi".into(), num(tv)),
    ];
    if rev.reversible {
        let s = spectral::spectrum(&p, &pi)?;
        rows.push(("slem".into(), num(s.slem)));
        rows.push(("gap".into(), num(s.gap)));
        rows.push(("t_rel".into(), num(s.t_rel)));
        rows.push(("t_av".into(), num(s.t_av)));
        rows.push(("worst_case_av".into(), num(spectral::worst_case_av(&p, &pi)?)));
        rows.push(("average_case_av".into(), num(spectral::average_case_av(&p, &pi)?)));
        for (k, v) in s.eigenvalues.iter().enumerate() {
            rows.push((format!("eigenvalue_{k}"), num(*v)));
        }
    } else {
        for (k, z) in speed.eigenvalues.iter().enumerate() {
            rows.push((format!("eigenvalue_{k}_re"), num(z.re)));
            rows.push((format!("eigenvalue_{k}_im"), num(z.im)));
        }
    }
    Ok(vec![match format {
        Format::Json => json_doc("analyze.json", &Value::Object(rows.into_iter().collect())),
        Format::Csv => {
            let mut body = String::from("key,value\n");
            for (k, v) in rows {
                let _ = writeln!(body, "{k},{v}");
            }
            Artifact { name: "analyze.csv".into(), body }
        }
    }])
}

fn project(
    matrix: &Path,
    perms: &[PathBuf],
    sweeps: usize,
    eps: f64,
    format: Format,
    write_limit: bool,
) -> Result<Vec<Artifact>, Error> {
    let (p, pi) = load_matrix(matrix)?;
    let mut qs = Vec::with_capacity(perms.len());
    for path in perms {
        let map = io::parse_permutation(&read(path)?, p.n())?;
        qs.push(InvolutionPermutation::new(map, &pi, chain::EquiMode::Relative(1e-9))?);
    }
    let schedule = ProjectionSchedule::new(qs)?;
    let run = projection::alternating_projections(&p, &schedule, &pi, sweeps, eps)?;
    let report = match format {
        Format::Csv => Artifact { name: "project.csv".into(), body: run.to_csv() },
        Format::Json => {
            let stats: Vec<Value> = run
                .stats
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    json!({
                        "step": j,
                        "kl_to_pi": num(s.kl_to_pi),
                        "frob_step": num(s.frob_step),
                        "trace": num(s.trace),
                        "slem": num(s.slem),
                    })
                })
                .collect();
            json_doc(
                "project.json",
                &json!({
                    "converged": run.converged,
                    "final_step": num(run.final_step),
                    "trace": num(run.trace),
                    "stats": stats,
                }),
            )
        }
    };
    let mut out = vec![report];
    if write_limit {
        out.push(Artifact { name: "limit.txt".into(), body: io::format_matrix(run.limit(), Some(&pi)) });
    }
    Ok(out)
}

fn bimodal(j: usize, grid: &[f64], format: Format) -> Result<Vec<Artifact>, Error> {
    let inst = landscape::bimodal_instance(j)?;
    let h_mh = landscape::critical_height(&SupportGraph::of(&inst.proposal), &inst.hamiltonian)?.height;
    let h_proj = landscape::critical_height(&SupportGraph::of(&inst.projected_proposal()), &inst.hamiltonian)?.height;
    let mh = landscape::arrhenius_study(|b| inst.mh(b), grid)?;
    let proj = landscape::arrhenius_study(|b| inst.projected(b), grid)?;
    let variants = [("mh", h_mh, &mh), ("projected", h_proj, &proj)];
    Ok(vec![match format {
        Format::Csv => {
            let mut body = String::from("variant,beta,gap,t_rel,ln_t_rel,slope,critical_height\n");
            for (name, h, study) in variants {
                for r in &study.rows {
                    let _ = writeln!(
                        body,
                        "{name},{},{:.17e},{:.17e},{:.17e},{:.17e},{h}",
                        r.beta, r.gap, r.t_rel, r.ln_t_rel, study.slope
                    );
                }
            }
            Artifact { name: "bimodal.csv".into(), body }
        }
        Format::Json => {
            let vs: Vec<Value> = variants
                .iter()
                .map(|(name, h, study)| {
                    let rows: Vec<Value> = study
                        .rows
                        .iter()
                        .map(|r| json!({"beta": r.beta, "gap": num(r.gap), "t_rel": num(r.t_rel), "ln_t_rel": num(r.ln_t_rel)}))
                        .collect();
                    json!({"variant": name, "critical_height": h, "slope": num(study.slope), "rows": rows})
                })
                .collect();
            json_doc("bimodal.json", &json!({"J": j, "beta_grid": grid, "variants": vs}))
        }
    }])
}

fn dhn(ns: &[usize], trials: usize, eps: f64, seed: u64, format: Format) -> Result<Vec<Artifact>, Error> {
    let mut rows = Vec::new();
    for &n in ns {
        let p = chain::birth_death_chain(n)?;
        let pi = ProbabilityVector::uniform(n);
        let nf = n as f64;
        let bound = if n > 1 { nf.ln() / 2f64.ln() + DHN_BOUND_C * nf.ln().sqrt() } else { 0.0 };
        for trial in 0..trials {
            let perm_seed = rng::substream(seed, (n as u64) << 32 | trial as u64).next_u64();
            let q = chain::random_permutation(n, perm_seed);
            let pb = projection::project(&p, &q, &pi)?;
            let t = spectral::mixing_time(&pb, &pi, eps, spectral::DEFAULT_MIX_BUDGET)?;
            rows.push((n, trial, t, bound));
        }
    }
    Ok(vec![match format {
        Format::Csv => {
            let mut body = String::from("n,trial,t_mix,bound\n");
            for (n, trial, t, bound) in rows {
                let _ = writeln!(body, "{n},{trial},{t},{bound:.6}");
            }
            Artifact { name: "dhn.csv".into(), body }
        }
        Format::Json => {
            let v: Vec<Value> =
                rows.iter().map(|(n, trial, t, bound)| json!({"n": n, "trial": trial, "t_mix": t, "bound": bound})).collect();
            json_doc("dhn.json", &json!({"eps": eps, "seed": seed, "bound_c": DHN_BOUND_C, "trials": v}))
        }
    }])
}

/// Runs the configured sampler next to standard Metropolis from the same start.
fn spin_cmd(path: &Path, seed: Option<u64>, write_traces: bool) -> Result<Vec<Artifact>, Error> {
    let mut config = ExperimentConfig::parse(&read(path)?)?;
    if let Some(s) = seed {
        config.seed = s;
        config.validate()?;
    }
    let mut samplers = vec![SamplerKind::Standard];
    if config.sampler != SamplerKind::Standard {
        samplers.push(config.sampler);
    }
    let mut artifacts = Vec::new();
    let mut summaries = Vec::new();
    for sampler in samplers {
        let mut c = config.clone();
        c.sampler = sampler;
        let trace = spin::run_experiment(&c)?;
        summaries.push(serde_json::to_value(spin::summarize(&trace)).expect("summary serialises"));
        if write_traces {
            artifacts.push(Artifact {
                name: format!("spin_{}_{}_trace.csv", c.model.name(), sampler.name()),
                body: trace.to_csv(),
            });
        }
    }
    artifacts.push(json_doc(&format!("spin_{}_summary.json", config.model.name()), &Value::Array(summaries)));
    Ok(artifacts)
}
