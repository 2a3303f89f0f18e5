use std::path::Path;

use proptest::prelude::*;
use semicoop::scenario::parse_scenario_str;
use serde_json::json;

#[allow(clippy::too_many_arguments)]
fn scenario(
    nodes: [usize; 3],
    metric: serde_json::Value,
    x0: [f64; 3],
    strategy: f64,
    gamma: f64,
    gff_seed: Option<u64>,
    mass: f64,
    quadratic: Option<f64>,
    seed: u64,
) -> String {
    let mut v = json!({
        "grid": [
            {"start": 0.0, "end": 1.0, "nodes": nodes[0]},
            {"start": -0.5, "end": 0.5, "nodes": nodes[1]},
            {"start": 0.0, "end": 2.0, "nodes": nodes[2]}
        ],
        "metric": metric,
        "firms": [{"x0": x0, "strategy": strategy, "alpha1": 0.5, "alpha2": 0.4,
                   "rho_hat": 0.5, "rho_tilde": 0.3, "stubbornness": 1.0}],
        "polygons": [{"sides": [{"area": 1.0}, {"area": 0.5}, {"area": 0.25}]}],
        "gff": {"gamma": gamma},
        "kernel": {"mass": mass, "epsilon": 0.01, "omega": 0.5, "xbar": 0.2, "lambda": 0.1},
        "seed": seed
    });
    if let Some(s) = gff_seed {
        v["gff"]["seed"] = json!(s);
    }
    if let Some(vertex) = quadratic {
        v["profit"] = json!({"model": "quadratic", "vertex": vertex});
    }
    v.to_string()
}

fn metric() -> impl Strategy<Value = serde_json::Value> {
    prop_oneof![
        Just(json!({"preset": "flat"})),
        (0.0f64..0.5).prop_map(|a| json!({"preset": "conformal", "amplitude": a})),
        (0.1f64..0.4).prop_map(|o| json!({"preset": "constant", "matrix": [2.0, o, 0.0, o, 1.0, 0.0, 0.0, 0.0, 1.5]})),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn accepted_scenarios_round_trip(
        nodes in prop::array::uniform3(4usize..9),
        metric in metric(),
        x0 in prop::array::uniform3(0.0f64..1.0),
        strategy in 0.0f64..0.5,
        gamma in 0.01f64..=2.0,
        gff_seed in prop::option::of(any::<u64>()),
        mass in 1.0f64..1e4,
        quadratic in prop::option::of(0.1f64..0.9),
        seed in any::<u64>(),
    ) {
        let text = scenario(nodes, metric, x0, strategy, gamma, gff_seed, mass, quadratic, seed);
        let first = parse_scenario_str(&text, Path::new(".")).unwrap();
        let again = serde_json::to_string(&first).unwrap();
        let second = parse_scenario_str(&again, Path::new(".")).unwrap();
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(first.canonical_json().unwrap(), second.canonical_json().unwrap());
    }

    #[test]
    fn stage_seeds_are_pure_functions_of_seed_and_label(seed in any::<u64>()) {
        let text = scenario([4, 4, 4], json!({"preset": "flat"}), [0.5; 3], 0.1, 1.0, None, 10.0, None, seed);
        let a = parse_scenario_str(&text, Path::new(".")).unwrap();
        let b = parse_scenario_str(&text, Path::new(".")).unwrap();
        prop_assert_eq!(a.stage_seed("sde/0"), b.stage_seed("sde/0"));
        prop_assert_ne!(a.stage_seed("sde/0"), a.stage_seed("sde/1"));
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = scenario([4, 4, 4], json!({"preset": "flat"}), [0.5; 3], 0.1, 1.0, None, 10.0, None, 1);
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["kernel"]["mas"] = json!(1.0);
    assert!(parse_scenario_str(&v.to_string(), Path::new(".")).is_err());
}

#[test]
fn every_violation_is_reported() {
    let text = scenario([4, 4, 4], json!({"preset": "flat"}), [0.5; 3], 0.1, 3.0, None, -1.0, None, 1);
    let err = parse_scenario_str(&text, Path::new(".")).unwrap_err().to_string();
    assert!(err.contains("gamma must lie in (0,2]"), "{err}");
    assert!(err.contains("M must be positive"), "{err}");
    assert!(err.starts_with("2 validation errors"), "{err}");
}

#[test]
fn missing_metric_file_is_named() {
    let text = scenario(
        [4, 4, 4],
        json!({"preset": "file", "path": "nowhere/metric.bin"}),
        [0.5; 3],
        0.1,
        1.0,
        None,
        10.0,
        None,
        1,
    );
    let err = parse_scenario_str(&text, Path::new("/tmp")).unwrap_err().to_string();
    assert!(err.contains("nowhere/metric.bin"), "{err}");
}
