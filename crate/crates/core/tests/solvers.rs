use proxjacobi_core::algebra::{CsrMatrix, DenseMatrix};
use proxjacobi_core::auglag::{normal_cone_distance, BlockLagrangian};
use proxjacobi_core::jacobi::init_state;
use proxjacobi_core::model::{ConstraintSet, Params, QuadraticFunction};
use proxjacobi_core::problems::{gen_acopf_toy, NetworkData};
use proxjacobi_core::subsolver::{
    dispatch, solve_box_pg, solve_equality_alm, solve_equality_sqp, solve_quadratic_exact, BlockObjective,
    BlockSolveRequest, SolveStatus, SolverKind, DEFAULT_INNER_CAP, DEFAULT_INNER_TOL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn req<'a>(obj: &'a dyn BlockObjective, set: &'a ConstraintSet, warm: &'a [f64]) -> BlockSolveRequest<'a> {
    BlockSolveRequest {
        block: 0,
        objective: obj,
        set,
        warm_start: warm,
        tol: DEFAULT_INNER_TOL,
        max_iters: DEFAULT_INNER_CAP,
    }
}

fn random_convex(rng: &mut ChaCha8Rng, n: usize) -> QuadraticFunction {
    let m: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let m = DenseMatrix::from_row_major(n, n, m);
    let mut q = m.transpose().matmul(&m);
    for i in 0..n {
        q[(i, i)] += 0.5;
    }
    let c = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    QuadraticFunction::new(CsrMatrix::from_dense(&q), c, 0.0).unwrap()
}

#[test]
fn exact_and_projected_gradient_agree_without_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=6 {
        let f = random_convex(&mut rng, n);
        let set = ConstraintSet::unbounded(n);
        let warm = vec![0.0; n];
        let a = solve_quadratic_exact(&req(&f, &set, &warm));
        let b = solve_box_pg(&req(&f, &set, &warm));
        assert_eq!(a.status, SolveStatus::Converged);
        let d = a.x.iter().zip(&b.x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(d < 1e-7, "n = {n}: {d}");
    }
}

#[test]
fn every_solver_keeps_the_descent_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..20 {
        let n = 1 + trial % 4;
        let f = random_convex(&mut rng, n);
        let set = ConstraintSet::boxed(vec![-0.5; n], vec![0.5; n]);
        let warm: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let fw = f.value(&warm);
        for kind in [None, Some(SolverKind::BoxPg), Some(SolverKind::QuadraticActiveSet)] {
            let r = dispatch(&req(&f, &set, &warm), kind);
            assert!(f.value(&r.x) <= fw + 1e-12 * (1.0 + fw.abs()));
        }
    }
}

/// Block 1 subproblem of the 2-bus, 3-period toy at the box midpoint.
fn acopf_block() -> (proxjacobi_core::model::Problem, proxjacobi_core::model::IterateState, Params) {
    let net = NetworkData::toy(2, 3).unwrap();
    let p = gen_acopf_toy(&net, 3).unwrap();
    let params = Params::new(1.0, 1e3, 2.0, 0.1).unwrap();
    let zero = vec![0.0; p.m];
    let s = init_state(&p, &p.midpoint(), &zero, &zero, &params).unwrap();
    (p, s, params)
}

#[test]
fn alm_reaches_power_balance_feasibility() {
    let (p, s, params) = acopf_block();
    let t = 1;
    let bl = BlockLagrangian::new(&p, t, &s.x, &s.z, &s.lambda, &params, &s.x[t]).unwrap();
    let set = &p.blocks[t].set;
    let r = solve_equality_alm(&req(&bl, set, &s.x[t]));
    assert!(r.status != SolveStatus::NumericalFailure);
    assert!(set.equality_violation(&r.x) <= 1e-7, "{}", set.equality_violation(&r.x));
    assert!(set.bound_violation(&r.x) == 0.0);
}

#[test]
fn sqp_converges_on_power_balance_block() {
    let (p, s, params) = acopf_block();
    for t in 0..p.blocks.len() {
        let bl = BlockLagrangian::new(&p, t, &s.x, &s.z, &s.lambda, &params, &s.x[t]).unwrap();
        let set = &p.blocks[t].set;
        let r = solve_equality_sqp(&req(&bl, set, &s.x[t])).expect("local QPs solvable");
        assert_eq!(r.status, SolveStatus::Converged);
        assert!(set.equality_violation(&r.x) <= DEFAULT_INNER_TOL);
        let g = bl.gradient(&r.x);
        assert!(normal_cone_distance(set, &r.x, &g) <= DEFAULT_INNER_TOL);
        let routed = dispatch(&req(&bl, set, &s.x[t]), None);
        assert_eq!(routed.solver, SolverKind::EqualitySqp);
        assert_eq!(routed.x, r.x);
    }
}

#[test]
fn sqp_is_no_worse_than_alm_on_a_smooth_block() {
    let (p, s, params) = acopf_block();
    let t = 2;
    let bl = BlockLagrangian::new(&p, t, &s.x, &s.z, &s.lambda, &params, &s.x[t]).unwrap();
    let set = &p.blocks[t].set;
    let sqp = dispatch(&req(&bl, set, &s.x[t]), Some(SolverKind::EqualitySqp));
    let alm = dispatch(&req(&bl, set, &s.x[t]), Some(SolverKind::EqualityAlm));
    for r in [&sqp, &alm] {
        assert!(set.equality_violation(&r.x) <= 1e-7);
        assert!(set.bound_violation(&r.x) == 0.0);
    }
    assert!(bl.value(&sqp.x) <= bl.value(&alm.x) + 1e-9);
}
