use proxjacobi::cli::default_dispatch;
use proxjacobi::json::{load_network, load_oracle, load_problem, oracle_to_json, problem_to_json};
use proxjacobi_core::model::{validate_problem, variable_splitting_transform};
use proxjacobi_core::problems::{gen_acopf_toy, gen_coupled_qp, NetworkData};

fn round_trip(p: &proxjacobi_core::model::Problem) {
    let text = problem_to_json(p);
    let back = load_problem(&text).unwrap();
    assert_eq!(&back, p);
    assert_eq!(problem_to_json(&back), text);
}

#[test]
fn generator_outputs_round_trip_and_validate() {
    let mut problems = Vec::new();
    for seed in 0..5 {
        problems.push(gen_coupled_qp(seed, 2 + seed as usize % 3, 3, 2).unwrap().0);
    }
    problems.push(default_dispatch(0, 5, 0.2).unwrap());
    for (buses, periods) in [(1, 2), (2, 3), (3, 4), (5, 2)] {
        problems.push(gen_acopf_toy(&NetworkData::toy(buses, periods).unwrap(), periods).unwrap());
    }
    let split = variable_splitting_transform(&problems[0]);
    problems.push(split);
    for p in &problems {
        assert!(validate_problem(p).is_valid(), "{:?}", validate_problem(p));
        round_trip(p);
    }
}

#[test]
fn oracle_document_round_trip() {
    let (_, sol) = gen_coupled_qp(3, 3, 2, 2).unwrap();
    let doc = load_oracle(&oracle_to_json(&sol)).unwrap();
    assert_eq!(doc.x_star, sol.x_star);
    assert_eq!(doc.lambda_star, sol.lambda_star);
    assert_eq!(doc.provenance, "kkt-linear-solve");
}

#[test]
fn network_document_matches_the_builtin_toy() {
    let toy = NetworkData::toy(3, 2).unwrap();
    let text = format!(
        r#"{{"buses": 3,
            "lines": [{{"from": 0, "to": 1, "r": 0.02, "x": 0.2, "b_shunt": 0.04}},
                      {{"from": 1, "to": 2, "r": 0.02, "x": 0.2, "b_shunt": 0.04}}],
            "generators": [
                {{"bus": 0, "p_min": 0, "p_max": 2, "q_min": -1.5, "q_max": 1.5, "ramp": 0.2, "cost_quad": 1, "cost_lin": 1}},
                {{"bus": 2, "p_min": 0, "p_max": 1, "q_min": -1, "q_max": 1, "ramp": 0.1, "cost_quad": 2, "cost_lin": 0.5}}],
            "p_load": {:?}, "q_load": {:?}}}"#,
        toy.p_load, toy.q_load
    );
    let net = load_network(&text).unwrap();
    assert_eq!(net, toy);
    assert_eq!(
        problem_to_json(&gen_acopf_toy(&net, 2).unwrap()),
        problem_to_json(&gen_acopf_toy(&toy, 2).unwrap())
    );
}

#[test]
fn network_errors_are_reported() {
    let text = r#"{"buses": 2, "lines": [{"from": 0, "to": 0, "r": 0.1, "x": 0.1}],
                   "generators": [], "p_load": [[0, 0]], "q_load": [[0, 0]]}"#;
    assert!(load_network(text).is_err());
}
