use jumphist_core::histories::{
    coarse_grain_absorption, decoherence_functional, decoherence_report, full_decoherence_matrix,
    max_offdiagonal_by_distance, Convention, History, DEFAULT_N_CAP, DEFAULT_PROBABILITY_FLOOR,
};
use jumphist_core::model::H0Spec;
use jumphist_core::ModelParams;

fn regime(n: usize) -> ModelParams {
    ModelParams::qubit(0.05, 1.0, 500.0, 0.05, n)
}

fn attained(p: &ModelParams) -> f64 {
    let d = full_decoherence_matrix(p, Convention::Literal, DEFAULT_N_CAP).unwrap();
    decoherence_report(&d, 1.0, DEFAULT_PROBABILITY_FLOOR).attained_epsilon
}

#[test]
fn attained_epsilon_is_monotone_in_dephasing() {
    let eps: Vec<f64> = [50.0, 150.0, 500.0, 1500.0, 5000.0]
        .iter()
        .map(|&gamma2| attained(&ModelParams { gamma2, ..regime(4) }))
        .collect();
    for pair in eps.windows(2) {
        assert!(pair[1] <= pair[0], "{eps:?}");
    }
}

#[test]
fn attained_epsilon_is_of_order_inverse_g_dt() {
    let p = regime(5);
    let eps = attained(&p);
    let g_dt = p.g() * p.dt;
    assert!(eps > 0.05 / g_dt && eps < 5.0 / g_dt, "ε = {eps}, 1/Gδt = {}", 1.0 / g_dt);
}

#[test]
fn multi_step_differences_are_more_suppressed() {
    for conv in [Convention::Literal, Convention::ProjectAfterStep] {
        let p = ModelParams {
            h0: H0Spec::Diagonal {
                frequencies: vec![0.0, 0.5],
            },
            initial_state: vec![[0.6, 0.0], [0.8, 0.0]],
            ..regime(6)
        };
        let d = full_decoherence_matrix(&p, conv, DEFAULT_N_CAP).unwrap();
        let by_distance = max_offdiagonal_by_distance(&d);
        assert!(by_distance[2..].iter().all(|&m| m <= by_distance[1]), "{by_distance:?}");
    }
}

#[test]
fn recursion_matches_naive_on_random_regime() {
    let p = ModelParams {
        kappa: 0.11,
        gamma1: 1.7,
        gamma2: 321.0,
        dt: 0.07,
        h0: H0Spec::Matrix {
            rows: vec![vec![[0.0, 0.0], [0.2, -0.1]], vec![[0.2, 0.1], [0.9, 0.0]]],
        },
        initial_state: vec![[0.2, 0.3], [0.9, -0.1]],
        ..regime(3)
    };
    let d = full_decoherence_matrix(&p, Convention::Literal, DEFAULT_N_CAP).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            let naive =
                decoherence_functional(&p, &History::from_index(i, 3), &History::from_index(j, 3), Convention::Literal)
                    .unwrap();
            assert!((d.entries[(i, j)] - naive).norm() < 1e-12);
        }
    }
}

#[test]
fn zero_coupling_coarse_grains_to_no_photon() {
    let p = ModelParams { kappa: 0.0, ..regime(6) };
    let d = full_decoherence_matrix(&p, Convention::Literal, DEFAULT_N_CAP).unwrap();
    let cg = coarse_grain_absorption(&d.probabilities(), 6, 2).unwrap();
    assert_eq!(cg.class(&[]), 1.0);
    assert_eq!(cg.classes.values().filter(|&&v| v != 0.0).count(), 1);
}

#[test]
fn coarse_classes_partition_and_leakage_is_bounded() {
    // Strong coupling and fast absorption so that photon classes carry
    // visible weight within eight projections.
    let p = ModelParams {
        kappa: 0.3,
        gamma1: 2.0,
        gamma2: 25.0,
        dt: 0.25,
        ..regime(8)
    };
    let window = 3;
    let d = full_decoherence_matrix(&p, Convention::Literal, DEFAULT_N_CAP).unwrap();
    let cg = coarse_grain_absorption(&d.probabilities(), 8, window).unwrap();
    assert!((cg.total() - 1.0).abs() < 1e-9);

    let photon_weight: f64 = cg.classes.iter().filter(|(k, _)| !k.is_empty()).map(|(_, v)| v).sum();
    assert!(photon_weight > 1e-3);
    let bound = (-p.gamma1 * window as f64 * p.dt).exp() + p.kappa2_over_g();
    assert!(
        cg.leakage <= bound * (photon_weight + cg.leakage),
        "leakage {} vs bound {}",
        cg.leakage,
        bound * (photon_weight + cg.leakage)
    );
}

#[test]
fn json_file_keeps_params_and_invariants() {
    let d = full_decoherence_matrix(&regime(2), Convention::ProjectAfterStep, DEFAULT_N_CAP).unwrap();
    let v: serde_json::Value = serde_json::from_str(&d.to_json().unwrap()).unwrap();
    assert_eq!(v["n_steps"], 2);
    assert_eq!(v["params"]["gamma2"], 500.0);
    assert_eq!(v["convention"], "project_after_step");
    assert_eq!(v["entries"][0].as_array().unwrap().len(), 2);
}
