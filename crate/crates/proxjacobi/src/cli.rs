//! The `proxjacobi` command.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success; `solve` reached `‖Ax − b‖∞ ≤ ε` |
//! | 1 | I/O, parse, schema, configuration or usage error |
//! | 2 | `solve` hit the iteration cap |
//! | 3 | `solve` aborted on a block-solver failure |
//! | 4 | `trace-check` found a failing property |
//! | 5 | the problem failed validation |

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use proxjacobi_core::auglag::penalty_residuals;
use proxjacobi_core::jacobi::{init_state, run_fixed, BlockExecutor, Clock, NoClock, RunConfig, SerialExecutor, TraceRecord};
use proxjacobi_core::model::{validate_problem, variable_splitting_transform, IterateState, Params, Problem};
use proxjacobi_core::problems::{
    gen_acopf_toy, gen_coupled_qp, gen_multiperiod_dispatch, kkt_reference_solve, scale_objective, DispatchGenerator,
    NetworkData,
};
use proxjacobi_core::tuner::{run_adaptive, Termination, TunerConfig};

use crate::check::check_trace;
use crate::config::{parse_overrides, TunerOverrides};
use crate::json::{self, ResidualsDoc, SolutionDoc};
use crate::pool::{PoolExecutor, WallClock};
use crate::trace::{read_trace, TraceWriter};
use crate::{read_file, write_file, Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ITERATION_CAP: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;
pub const EXIT_INVALID_PROBLEM: i32 = 5;

/// Default iteration limit of `solve --fixed-params`.
pub const DEFAULT_FIXED_ITERS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "proxjacobi", version, about = "Distributed proximal Jacobi augmented-Lagrangian solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem with the adaptive scheme or fixed parameters.
    Solve(SolveArgs),
    /// Check dimensions and coupling rank of a problem file.
    Validate { problem: PathBuf },
    /// Write a generated problem.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Re-verify the properties of a recorded trace.
    TraceCheck { trace: PathBuf, problem: PathBuf },
}

#[derive(Debug, Args)]
struct SolveArgs {
    problem: PathBuf,
    /// Stop once ‖Ax − b‖∞ ≤ eps.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Block-solve threads; 0 solves blocks on the calling thread.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Fixed parameters `rho,theta,tau_x,tau_z`; disables the tuner.
    #[arg(long, value_name = "RHO,THETA,TAU_X,TAU_Z")]
    fixed_params: Option<String>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Tuner configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write zero timing columns, making traces reproducible byte for byte.
    #[arg(long)]
    no_timings: bool,
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    kappa_x: Option<f64>,
    #[arg(long)]
    kappa_z: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    nu_x: Option<f64>,
    #[arg(long)]
    nu_rho: Option<f64>,
    #[arg(long)]
    nu_theta: Option<f64>,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    psi_cap: Option<u32>,
}

#[derive(Debug, Subcommand)]
enum GenerateKind {
    /// Random strictly convex QP blocks with an exact KKT oracle.
    CoupledQp {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        blocks: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        oracle: Option<PathBuf>,
    },
    /// Ramp-coupled two-generator economic dispatch.
    Dispatch {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        periods: usize,
        #[arg(long, default_value_t = 0.2)]
        ramp_frac: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        oracle: Option<PathBuf>,
    },
    /// Multi-period polar AC power flow on a chain network or a network file.
    AcopfToy {
        #[arg(long, default_value_t = 2)]
        buses: usize,
        #[arg(long, default_value_t = 3)]
        periods: usize,
        /// Network JSON; overrides --buses.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Multiply the objectives by this factor.
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Variable-splitting transform of an existing problem file.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Options of a solve, independent of the command line.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tuner: TunerConfig,
    /// Fixed parameters; `None` runs the adaptive scheme.
    pub fixed: Option<Params>,
    /// Iteration limit of a fixed-parameter run.
    pub max_iters: usize,
    pub workers: usize,
    pub timings: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tuner: TunerConfig::default(),
            fixed: None,
            max_iters: DEFAULT_FIXED_ITERS,
            workers: 0,
            timings: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveRun {
    pub termination: Termination,
    pub state: IterateState,
    pub trace: Vec<TraceRecord>,
    pub error: Option<String>,
}

impl SolveRun {
    pub fn exit_code(&self) -> i32 {
        match self.termination {
            Termination::FeasibleStop => EXIT_OK,
            Termination::IterationCap => EXIT_ITERATION_CAP,
            Termination::BlockFailure => EXIT_NUMERICAL,
        }
    }
}

/// Runs a solve from the box midpoint with `z⁰ = λ⁰ = 0`, handing every
/// record to `on_record` as it is produced.
pub fn solve_problem(p: &Problem, opts: &SolveOptions, on_record: &mut dyn FnMut(&TraceRecord)) -> Result<SolveRun> {
    let pool;
    let executor: &dyn BlockExecutor = if opts.workers == 0 {
        &SerialExecutor
    } else {
        pool = PoolExecutor::new(opts.workers)?;
        &pool
    };
    let wall = WallClock::default();
    let clock: &dyn Clock = if opts.timings { &wall } else { &NoClock };
    let mut run = RunConfig::serial(opts.max_iters);
    run.executor = executor;
    run.clock = clock;

    let x0 = p.midpoint();
    let zeros = vec![0.0; p.m];
    match opts.fixed {
        None => {
            let out = run_adaptive(p, &opts.tuner, &x0, &zeros, &zeros, &run, &mut |_, r| on_record(r))?;
            Ok(SolveRun {
                termination: out.termination,
                state: out.state,
                trace: out.trace,
                error: out.error.map(|e| e.to_string()),
            })
        }
        Some(params) => {
            let init = init_state(p, &x0, &zeros, &zeros, &params)?;
            let eps = opts.tuner.eps;
            let mut reached = false;
            let out = run_fixed(p, &params, init, &run, &mut |_, r| {
                on_record(r);
                reached = r.coupling_inf <= eps;
                reached
            });
            let termination = if out.error.is_some() {
                Termination::BlockFailure
            } else if reached {
                Termination::FeasibleStop
            } else {
                Termination::IterationCap
            };
            Ok(SolveRun {
                termination,
                state: out.state,
                trace: out.trace,
                error: out.error.map(|e| e.to_string()),
            })
        }
    }
}

/// Count of records where the Lyapunov function increased.
pub fn lyapunov_increases(trace: &[TraceRecord]) -> usize {
    trace
        .iter()
        .filter(|r| r.dphi > crate::check::LYAPUNOV_TOL * (1.0 + r.phi.abs()))
        .count()
}

pub fn solution_doc(p: &Problem, run: &SolveRun) -> SolutionDoc {
    let s = &run.state;
    let residuals = match penalty_residuals(p, s) {
        Ok(r) => ResidualsDoc {
            pi: r.pi,
            coupling_inf: r.infnorm_coupling,
            p_inf: r.infnorm_p,
            d_inf: r.infnorm_d,
            delta: r.delta.iter().map(|d| d.is_finite().then_some(*d)).collect(),
            block_equality_violation: Vec::new(),
        },
        Err(_) => {
            let pi = proxjacobi_core::auglag::primal_residual(p, &s.x).unwrap_or(f64::NAN);
            let viol = proxjacobi_core::algebra::coupling_violation(p, &s.x).unwrap_or_default();
            ResidualsDoc {
                pi,
                coupling_inf: viol.iter().fold(0.0, |a, v| a.max(v.abs())),
                p_inf: f64::NAN,
                d_inf: f64::NAN,
                delta: vec![None; p.num_blocks()],
                block_equality_violation: Vec::new(),
            }
        }
    };
    let block_equality_violation = p
        .blocks
        .iter()
        .zip(&s.x)
        .map(|(b, x)| b.set.equality_violation(x))
        .collect();
    SolutionDoc {
        termination: run.termination.as_str().to_string(),
        iterations: run.trace.len(),
        objective: p.objective(&s.x),
        params: s.params.into(),
        residuals: ResidualsDoc {
            block_equality_violation,
            ..residuals
        },
        lyapunov_increases: lyapunov_increases(&run.trace),
        error: run.error.clone(),
        x: s.x.clone(),
        z: s.z.clone(),
        lambda: s.lambda.clone(),
    }
}

fn parse_fixed(text: &str) -> Result<Params> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("--fixed-params: {e}")))?;
    if vals.len() != 4 {
        return Err(Error::Config(format!("--fixed-params needs 4 values, got {}", vals.len())));
    }
    Ok(Params::new(vals[0], vals[1], vals[2], vals[3])?)
}

fn load_problem_file(path: &Path) -> Result<Problem> {
    json::load_problem(&read_file(path)?)
}

/// Problem parsed and validated; `Ok(Err(code))` carries the exit code of a
/// validation failure.
fn load_valid(path: &Path) -> Result<std::result::Result<Problem, i32>> {
    let p = load_problem_file(path)?;
    let rep = validate_problem(&p);
    for w in &rep.warnings {
        log::warn!("{w}");
    }
    if !rep.is_valid() {
        for e in &rep.errors {
            eprintln!("error: {e}");
        }
        return Ok(Err(EXIT_INVALID_PROBLEM));
    }
    Ok(Ok(p))
}

fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let p = match load_valid(&a.problem)? {
        Ok(p) => p,
        Err(code) => return Ok(code),
    };
    let mut ov = match &a.config {
        Some(path) => parse_overrides(&read_file(path)?)?,
        None => TunerOverrides::default(),
    };
    let flags = [
        (&mut ov.rho0, a.rho0),
        (&mut ov.omega, a.omega),
        (&mut ov.kappa_x, a.kappa_x),
        (&mut ov.kappa_z, a.kappa_z),
        (&mut ov.zeta, a.zeta),
        (&mut ov.nu_x, a.nu_x),
        (&mut ov.nu_rho, a.nu_rho),
        (&mut ov.nu_theta, a.nu_theta),
        (&mut ov.chi, a.chi),
        (&mut ov.eps, a.eps),
    ];
    for (slot, flag) in flags {
        if flag.is_some() {
            *slot = flag;
        }
    }
    if a.psi_cap.is_some() {
        ov.psi_cap = a.psi_cap;
    }
    if a.max_iters.is_some() {
        ov.max_outer = a.max_iters;
    }
    let tuner = ov.apply(TunerConfig::default());
    tuner.validate()?;
    let fixed = a.fixed_params.as_deref().map(parse_fixed).transpose()?;
    let opts = SolveOptions {
        tuner,
        fixed,
        max_iters: a.max_iters.unwrap_or(DEFAULT_FIXED_ITERS),
        workers: a.workers,
        timings: !a.no_timings,
    };

    let mut writer = match &a.trace {
        Some(path) => {
            let f = File::create(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            Some(TraceWriter::new(BufWriter::new(f), p.num_blocks())?)
        }
        None => None,
    };
    let mut write_err = None;
    let run = solve_problem(&p, &opts, &mut |r| {
        log::debug!(
            "k = {} phi = {:.6e} pi = {:.3e} rho = {:.3e} theta = {:.3e} tau_x = {:.3e}",
            r.k,
            r.phi,
            r.pi,
            r.params.rho,
            r.params.theta,
            r.params.tau_x
        );
        if let (Some(w), None) = (writer.as_mut(), write_err.as_ref()) {
            if let Err(e) = w.push(r) {
                write_err = Some(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    if let Some(w) = writer {
        let mut inner = w.finish()?;
        inner.flush().map_err(|source| Error::Io {
            path: a.trace.clone().unwrap_or_default(),
            source,
        })?;
    }

    let increases = lyapunov_increases(&run.trace);
    if increases > 0 {
        log::warn!("Lyapunov function increased at {increases} iterations");
    }
    if let Some(e) = &run.error {
        log::error!("{e}");
    }
    log::info!("{} after {} iterations", run.termination.as_str(), run.trace.len());
    let doc = solution_doc(&p, &run);
    if let Some(path) = &a.solution {
        write_file(path, &json::solution_to_json(&doc))?;
    }
    println!(
        "{} after {} iterations: |Ax-b|_inf = {:.3e}, objective = {:.10e}",
        doc.termination, doc.iterations, doc.residuals.coupling_inf, doc.objective
    );
    Ok(run.exit_code())
}

fn cmd_validate(path: &Path) -> Result<i32> {
    let p = load_problem_file(path)?;
    let rep = validate_problem(&p);
    for w in &rep.warnings {
        println!("warning: {w}");
    }
    for e in &rep.errors {
        println!("error: {e}");
    }
    if rep.is_valid() {
        println!(
            "valid: T = {}, m = {}, {} variables",
            p.num_blocks(),
            p.m,
            p.total_dim()
        );
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_INVALID_PROBLEM)
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Dispatch instance used by `generate dispatch`: two generators and a
/// sinusoidal demand with 2% seeded noise.
pub fn default_dispatch(seed: u64, periods: usize, ramp_frac: f64) -> Result<Problem> {
    let gens = [
        DispatchGenerator {
            p_min: 0.0,
            p_max: 2.0,
            cost_quad: 1.0,
            cost_lin: 1.0,
        },
        DispatchGenerator {
            p_min: 0.0,
            p_max: 1.5,
            cost_quad: 2.0,
            cost_lin: 0.5,
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile: Vec<f64> = (0..periods)
        .map(|t| {
            let base = 1.0 + 0.2 * (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin();
            base * (1.0 + 0.02 * rng.gen_range(-1.0..1.0))
        })
        .collect();
    let mut p = gen_multiperiod_dispatch(periods, &gens, ramp_frac, &profile)?;
    p.meta.insert("seed".into(), seed.to_string());
    Ok(p)
}

fn cmd_generate(kind: &GenerateKind) -> Result<i32> {
    match kind {
        GenerateKind::CoupledQp {
            seed,
            blocks,
            n,
            m,
            out,
            oracle,
        } => {
            let (mut p, sol) = gen_coupled_qp(*seed, *blocks, *n, *m)?;
            p.meta.insert("seed".into(), seed.to_string());
            emit(out, &json::problem_to_json(&p))?;
            if let Some(path) = oracle {
                write_file(path, &json::oracle_to_json(&sol))?;
            }
        }
        GenerateKind::Dispatch {
            seed,
            periods,
            ramp_frac,
            out,
            oracle,
        } => {
            let p = default_dispatch(*seed, *periods, *ramp_frac)?;
            emit(out, &json::problem_to_json(&p))?;
            if let Some(path) = oracle {
                match kkt_reference_solve(&p) {
                    Ok(sol) => write_file(path, &json::oracle_to_json(&sol))?,
                    Err(e) => log::warn!("no oracle written: {e}"),
                }
            }
        }
        GenerateKind::AcopfToy {
            buses,
            periods,
            network,
            scale,
            out,
        } => {
            let net = match network {
                Some(path) => json::load_network(&read_file(path)?)?,
                None => NetworkData::toy(*buses, *periods)?,
            };
            let mut p = gen_acopf_toy(&net, *periods)?;
            if let Some(f) = scale {
                p = scale_objective(&p, *f);
            }
            emit(out, &json::problem_to_json(&p))?;
        }
        GenerateKind::Split { input, out } => {
            let p = load_problem_file(input)?;
            emit(out, &json::problem_to_json(&variable_splitting_transform(&p)))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_trace_check(trace: &Path, problem: &Path) -> Result<i32> {
    let p = load_problem_file(problem)?;
    let f = File::open(trace).map_err(|source| Error::Io {
        path: trace.to_path_buf(),
        source,
    })?;
    let (records, _) = read_trace(std::io::BufReader::new(f))?;
    let rep = check_trace(&p, &records)?;
    print!("{rep}");
    Ok(if rep.passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("PROXJACOBI_LOG", "error");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (program name first) and runs the command; returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Validate { problem } => cmd_validate(problem),
        Command::Generate { kind } => cmd_generate(kind),
        Command::TraceCheck { trace, problem } => cmd_trace_check(trace, problem),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
