//! Acceptance criteria 1-12. Every test prints one `criterion N PASS|FAIL`
//! line before asserting.

use std::io::Write;
use std::sync::OnceLock;

use proxjacobi::check::{check_trace, Outcome};
use proxjacobi::cli::{solve_problem, SolveOptions, SolveRun};
use proxjacobi::trace::{read_trace, trace_to_string};
use proxjacobi_core::algebra::{couple_apply, r_matrix_eigencheck};
use proxjacobi_core::auglag::{dagger_norm_sq, theorem1_params};
use proxjacobi_core::jacobi::{init_state, run_fixed, RunConfig, TraceRecord};
use proxjacobi_core::model::{Params, Problem};
use proxjacobi_core::problems::{gen_acopf_toy, gen_coupled_qp, penalty_reference_solve, NetworkData, OracleSolution};
use proxjacobi_core::tuner::{init_params, tune_step, StopDecision, Termination, TunerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 20;
const C1_EPS: f64 = 1e-6;
const C1_X_TOL: f64 = 1e-4;
const C1_LAMBDA_TOL: f64 = 1e-3;
const C2_EPS: f64 = 1e-2;
const C2_ITERS: usize = 5000;
const IDENTITY_TOL: f64 = 1e-10;
const C7_ITERS: usize = 100;
const C7_GROWTH: f64 = 10.0;
const C8_EPS: f64 = 1e-3;
const C8_BALANCE_TOL: f64 = 1e-6;
const C8_ORDERS: f64 = 3.0;
const C9_START_DIST: f64 = 1e-3;
const C9_ITERS: usize = 200;
const C9_RATIO: f64 = 1.0 + 1e-10;
const C11_TOL: f64 = 1e-9;

/// Written to the raw stdout handle so the line survives test output capture.
fn report(n: u32, ok: bool, detail: &str) {
    let line = format!("criterion {n:>2} {}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn inf_dist(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

/// Instance shape of seed `s`: `T ∈ 2..=6`, `n_t ∈ 1..=5`, `m ∈ 1..=4`.
fn qp_instance(seed: u64) -> (Problem, OracleSolution) {
    let t = 2 + (seed % 5) as usize;
    let n = 1 + ((seed / 2) % 5) as usize;
    let m = (1 + ((seed / 3) % 4) as usize).min(t * n);
    gen_coupled_qp(seed, t, n, m).unwrap()
}

fn oracle_options(workers: usize) -> SolveOptions {
    SolveOptions {
        tuner: TunerConfig::default().with_eps(C1_EPS),
        workers,
        timings: false,
        ..SolveOptions::default()
    }
}

struct QpRun {
    problem: Problem,
    oracle: OracleSolution,
    run: SolveRun,
}

fn adaptive_runs() -> &'static Vec<QpRun> {
    static RUNS: OnceLock<Vec<QpRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (0..SEEDS)
            .map(|seed| {
                let (problem, oracle) = qp_instance(seed);
                let run = solve_problem(&problem, &oracle_options(0), &mut |_| {}).unwrap();
                QpRun { problem, oracle, run }
            })
            .collect()
    })
}

struct FixedRun {
    problem: Problem,
    trace: Vec<TraceRecord>,
}

fn worst_case_runs() -> &'static Vec<FixedRun> {
    static RUNS: OnceLock<Vec<FixedRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (0..SEEDS)
            .map(|seed| {
                let (problem, _) = qp_instance(seed);
                let params = theorem1_params(C2_EPS, problem.num_blocks()).unwrap();
                let zeros = vec![0.0; problem.m];
                let init = init_state(&problem, &problem.zeros(), &zeros, &zeros, &params).unwrap();
                let out = run_fixed(&problem, &params, init, &RunConfig::serial(C2_ITERS), &mut |_, _| false);
                assert!(out.error.is_none());
                FixedRun {
                    problem,
                    trace: out.trace,
                }
            })
            .collect()
    })
}

/// `check_trace` on the trace as written to and read back from CSV, the
/// path `trace-check` takes.
fn check_via_csv(p: &Problem, trace: &[TraceRecord]) -> proxjacobi::check::CheckReport {
    let csv = trace_to_string(p.num_blocks(), trace);
    let (back, _) = read_trace(csv.as_bytes()).unwrap();
    check_trace(p, &back).unwrap()
}

fn acopf_problem(periods: usize) -> Problem {
    gen_acopf_toy(&NetworkData::toy(2, periods).unwrap(), periods).unwrap()
}

fn acopf_options(workers: usize) -> SolveOptions {
    SolveOptions {
        tuner: TunerConfig::default().with_eps(C8_EPS),
        workers,
        timings: false,
        ..SolveOptions::default()
    }
}

#[test]
fn criterion_01_oracle_equivalence() {
    let mut ok = true;
    let (mut worst_x, mut worst_l) = (0.0f64, 0.0f64);
    for r in adaptive_runs() {
        let dx = inf_dist(&r.run.state.x, &r.oracle.x_star);
        let dl = inf_dist(std::slice::from_ref(&r.run.state.lambda), std::slice::from_ref(&r.oracle.lambda_star));
        worst_x = worst_x.max(dx);
        worst_l = worst_l.max(dl);
        ok &= r.run.termination == Termination::FeasibleStop && dx <= C1_X_TOL && dl <= C1_LAMBDA_TOL;
    }
    report(
        1,
        ok,
        &format!("{SEEDS} instances, max |x-x*| {worst_x:.2e} (<= {C1_X_TOL:e}), max |l-l*| {worst_l:.2e} (<= {C1_LAMBDA_TOL:e})"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_eps_stationarity_at_worst_case_parameters() {
    let mut worst = 0.0f64;
    for r in worst_case_runs() {
        let best = r
            .trace
            .iter()
            .map(|rec| rec.pi.max(rec.delta_max))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best);
    }
    let ok = worst <= C2_EPS;
    report(
        2,
        ok,
        &format!("worst over {SEEDS} instances of min_j max(pi, delta) = {worst:.3e} after {C2_ITERS} iterations (need <= {C2_EPS:e})"),
    );
    assert!(ok);
}

#[test]
fn criterion_03_lyapunov_monotonicity() {
    let mut ok = true;
    let mut detail = String::new();
    for (seed, r) in worst_case_runs().iter().enumerate() {
        let rep = check_via_csv(&r.problem, &r.trace);
        for name in ["monotonicity", "lower-bound"] {
            let item = rep.get(name).unwrap();
            if item.outcome != Outcome::Pass {
                ok = false;
                detail = format!("seed {seed}: {name}: {}", item.detail);
            }
        }
    }
    if ok {
        detail = format!("monotone and above the separable bound on all {SEEDS} feasible-eta runs");
    }
    report(3, ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_04_descent_inequality() {
    let mut ok = true;
    let mut detail = format!("holds termwise on all {SEEDS} feasible-eta runs");
    for (seed, r) in worst_case_runs().iter().enumerate() {
        let rep = check_via_csv(&r.problem, &r.trace);
        let item = rep.get("descent-inequality").unwrap();
        if item.outcome != Outcome::Pass {
            ok = false;
            detail = format!("seed {seed}: {}", item.detail);
        }
    }
    report(4, ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_05_identities() {
    let records = adaptive_runs()
        .iter()
        .flat_map(|r| r.run.trace.iter())
        .chain(worst_case_runs().iter().flat_map(|r| r.trace.iter()));
    let mut worst = 0.0f64;
    let mut count = 0;
    for rec in records {
        count += 1;
        worst = worst
            .max(rec.lemma1_res)
            .max(rec.dlambda_res)
            .max(rec.p_identity_res)
            .max(rec.zstat_res);
    }
    let ok = worst <= IDENTITY_TOL;
    report(5, ok, &format!("{count} records, max relative residual {worst:.2e} (<= {IDENTITY_TOL:e})"));
    assert!(ok);
}

#[test]
fn criterion_06_bound_existence() {
    let mut ok = true;
    let mut detail = format!("a record meets both bounds on all {SEEDS} runs");
    for (seed, r) in worst_case_runs().iter().enumerate() {
        let rep = check_via_csv(&r.problem, &r.trace);
        let item = rep.get("theorem1-bounds").unwrap();
        if item.outcome != Outcome::Pass {
            ok = false;
            detail = format!("seed {seed}: {:?} {}", item.outcome, item.detail);
        }
    }
    report(6, ok, &detail);
    assert!(ok);
}

#[test]
fn criterion_07_divergence_without_proximal_term() {
    let p = acopf_problem(3);
    let t = p.num_blocks() as f64;
    let run = |tau_x: f64| {
        let params = Params::new(1.0, 1e6, tau_x, 1.0 / 32.0).unwrap();
        let zeros = vec![0.0; p.m];
        let init = init_state(&p, &p.midpoint(), &zeros, &zeros, &params).unwrap();
        let out = run_fixed(&p, &params, init, &RunConfig::serial(C7_ITERS), &mut |_, _| false);
        assert!(out.error.is_none());
        out.trace
    };
    let free = run(0.0);
    let phi1 = free[0].phi;
    let phi_k = free.last().unwrap().phi;
    let grows = free.len() == C7_ITERS && phi_k >= C7_GROWTH * phi1.max(1.0);

    let damped = run((2.0 * t - 1.0) * 1.0);
    let rep = check_via_csv(&p, &damped);
    let mono = rep.get("monotonicity").unwrap();
    let monotone = mono.outcome == Outcome::Pass;

    let ok = grows && monotone;
    report(
        7,
        ok,
        &format!(
            "tau_x = 0: Phi^1 = {phi1:.4e}, Phi^{C7_ITERS} = {phi_k:.4e} (need >= {C7_GROWTH} max(1, Phi^1)); tau_x = {}: {}",
            2.0 * t - 1.0,
            mono.detail
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_acopf_convergence() {
    let p = acopf_problem(12);
    let run = solve_problem(&p, &acopf_options(0), &mut |_| {}).unwrap();
    let coupling = run.trace.last().unwrap().coupling_inf;
    let balance = p
        .blocks
        .iter()
        .zip(&run.state.x)
        .map(|(b, x)| b.set.equality_violation(x))
        .fold(0.0, f64::max);
    let pi0 = run.trace[0].pi;
    let pi_k = run.trace.last().unwrap().pi;
    let orders = (pi0 / pi_k).log10();
    let ok = run.termination == Termination::FeasibleStop
        && coupling <= C8_EPS
        && balance <= C8_BALANCE_TOL
        && orders >= C8_ORDERS;
    report(
        8,
        ok,
        &format!(
            "{} after {} iterations, |Ax-b|_inf {coupling:.2e}, balance {balance:.2e}, pi {pi0:.3e} -> {pi_k:.3e} ({orders:.2} orders)",
            run.termination.as_str(),
            run.trace.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_local_contraction() {
    let mut ok = true;
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let blocks = 2 + (seed % 3) as usize;
        let (p, _) = gen_coupled_qp(seed, blocks, 2, 2).unwrap();
        let params = theorem1_params(0.5, blocks).unwrap();
        let r = penalty_reference_solve(&p, params.theta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0: Vec<Vec<f64>> = r
            .x_star
            .iter()
            .map(|v| v.iter().map(|a| a + C9_START_DIST * rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let ax = couple_apply(&p, &x0).unwrap();
        let z0: Vec<f64> = p.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let l0: Vec<f64> = z0.iter().map(|z| -params.theta * z).collect();
        let init = init_state(&p, &x0, &z0, &l0, &params).unwrap();
        let norm = |s: &_| dagger_norm_sq(&p, s, &r.x_star, &r.z_star, &r.lambda_star, &params).unwrap().sqrt();
        let mut prev = norm(&init);
        let out = run_fixed(&p, &params, init, &RunConfig::serial(C9_ITERS), &mut |s, _| {
            let d = norm(s);
            worst = worst.max(d / prev);
            ok &= d <= C9_RATIO * prev;
            prev = d;
            false
        });
        ok &= out.error.is_none() && out.trace.len() == C9_ITERS;
    }
    report(
        9,
        ok,
        &format!("5 instances x {C9_ITERS} iterations, max dagger-norm ratio {worst:.12} (<= {C9_RATIO})"),
    );
    assert!(ok);
}

#[test]
fn criterion_10_parallel_determinism() {
    let mut ok = true;
    let mut compared = 0;
    for r in adaptive_runs() {
        let blocks = r.problem.num_blocks();
        let reference = trace_to_string(blocks, &r.run.trace);
        for workers in [1, 2, blocks] {
            let run = solve_problem(&r.problem, &oracle_options(workers), &mut |_| {}).unwrap();
            ok &= trace_to_string(blocks, &run.trace) == reference;
            compared += 1;
        }
    }
    let p = acopf_problem(12);
    let reference = trace_to_string(p.num_blocks(), &solve_problem(&p, &acopf_options(0), &mut |_| {}).unwrap().trace);
    for workers in [1, 2, p.num_blocks()] {
        let run = solve_problem(&p, &acopf_options(workers), &mut |_| {}).unwrap();
        ok &= trace_to_string(p.num_blocks(), &run.trace) == reference;
        compared += 1;
    }
    report(10, ok, &format!("{compared} parallel traces compared byte for byte with the serial trace"));
    assert!(ok);
}

#[test]
fn criterion_11_eigenstructure() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pairs: Vec<(f64, f64)> = (0..10)
        .map(|_| (rng.gen_range(1e-2..1e2), rng.gen_range(0.0..1e2)))
        .collect();
    let mut ok = true;
    let mut worst = 0.0f64;
    for blocks in 1..=10 {
        for m in 1..=5 {
            for &(rho, tau_x) in &pairs {
                let (lo, hi) = r_matrix_eigencheck(rho, tau_x, blocks, m).unwrap();
                let small = rho + tau_x - rho * blocks as f64;
                let large = if blocks == 1 { small } else { rho + tau_x };
                let scale = 1.0 + small.abs().max(large.abs());
                let err = ((lo - small).abs().max((hi - large).abs())) / scale;
                worst = worst.max(err);
                ok &= err <= C11_TOL;
            }
        }
    }
    report(11, ok, &format!("500 cases, max relative eigenvalue error {worst:.2e} (<= {C11_TOL:e})"));
    assert!(ok);
}

fn metrics(k: usize, dphi: f64, coupling_inf: f64, p_inf: f64, d_inf: f64, params: Params) -> TraceRecord {
    TraceRecord {
        k,
        phi: 1.0,
        dphi,
        coupling_inf,
        p_inf,
        d_inf,
        pi: coupling_inf,
        delta: vec![0.0; 3],
        delta_max: 0.0,
        params,
        t_xupd_ms: 0.0,
        t_zupd_ms: 0.0,
        t_lupd_ms: 0.0,
        inner_iters: vec![0; 3],
        inner_iters_total: 0,
        capped_blocks: 0,
        lemma1_res: 0.0,
        dlambda_res: 0.0,
        p_identity_res: 0.0,
        zstat_res: 0.0,
        dx_sq: 0.0,
        dx_sq_prev: 0.0,
        dz_sq: 0.0,
        dz_sq_prev: 0.0,
    }
}

#[test]
fn criterion_12_tuner_rules() {
    // T = 3, so tau_x is capped at 5 rho; omega = 1/4 makes the rho cap reachable
    let cfg = TunerConfig {
        eps: 0.5,
        rho0: 0.5,
        omega: 0.25,
        psi_cap: 1,
        ..TunerConfig::default()
    };
    let (p0, mut state) = init_params(&cfg);
    let p = |rho, theta, tau_x, tau_z| Params { rho, theta, tau_x, tau_z };
    let init_ok = p0 == p(0.5, 4.0, 1.0, 1.0 / 64.0);
    // (dphi, coupling_inf, p_inf, d_inf) and the expected (params, psi, decision)
    let script = [
        // Phi increased: tau_x doubles
        ((1.0, 1.0, 1.0, 1.0), p(0.5, 4.0, 2.0, 1.0 / 64.0), 0, StopDecision::Continue),
        // doubling again hits (2T-1) rho
        ((1.0, 1.0, 1.0, 1.0), p(0.5, 4.0, 2.5, 1.0 / 64.0), 0, StopDecision::Continue),
        // p > chi d: rho doubles up to omega theta = 1, tau's reset
        ((-1.0, 1.0, 1.0, 0.01), p(1.0, 4.0, 2.0, 1.0 / 32.0), 0, StopDecision::Continue),
        // rho already at omega theta; dphi equal to zeta |Phi| does not count
        ((1e-4, 1.0, 1.0, 0.01), p(1.0, 4.0, 2.0, 1.0 / 32.0), 0, StopDecision::Continue),
        // penalty residuals below eps but coupling violated: theta grows
        ((-1.0, 1.0, 0.25, 0.25), p(1.0, 40.0, 2.0, 1.0 / 32.0), 0, StopDecision::Continue),
        // rho doubles below the new cap omega theta = 10
        ((-1.0, 1.0, 1.0, 0.01), p(2.0, 40.0, 4.0, 1.0 / 16.0), 0, StopDecision::Continue),
        // d > chi p: rho halves, one decrease used
        ((-1.0, 1.0, 0.01, 1.0), p(1.0, 40.0, 2.0, 1.0 / 32.0), 1, StopDecision::Continue),
        // decrease blocked by Psi = 1; Phi increase doubles tau_x
        ((1.0, 1.0, 0.01, 1.0), p(1.0, 40.0, 4.0, 1.0 / 32.0), 1, StopDecision::Continue),
        // all three rules in order: tau_x, theta, rho (which resets tau_x)
        ((1.0, 1.0, 0.4, 0.01), p(2.0, 400.0, 4.0, 1.0 / 16.0), 1, StopDecision::Continue),
        // coupling within eps: stop, nothing changes
        ((-1.0, 0.5, 0.1, 0.1), p(2.0, 400.0, 4.0, 1.0 / 16.0), 1, StopDecision::Stop),
    ];
    let mut ok = init_ok;
    let mut first_bad = None;
    for (k, ((dphi, c, pi, di), want, psi, decision)) in script.iter().enumerate() {
        let rec = metrics(k + 1, *dphi, *c, *pi, *di, state.params);
        let (next, d) = tune_step(&state, &rec, 3, &cfg);
        let step_ok = next.params == *want && next.psi == *psi && d == *decision;
        if !step_ok && first_bad.is_none() {
            first_bad = Some(format!("step {}: got {:?} psi {} {:?}", k + 1, next.params, next.psi, d));
        }
        ok &= step_ok;
        state = next;
    }
    let detail = first_bad.unwrap_or_else(|| format!("{} scripted steps reproduce the hand-derived trajectory", script.len()));
    report(12, ok, &detail);
    assert!(ok);
}
