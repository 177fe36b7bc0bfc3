use jumphist_core::analysis::unraveling_consistency;
use jumphist_core::hilbert::trace_distance;
use jumphist_core::liouville::Superoperator;
use jumphist_core::model::{build_reduced_model, H0Spec};
use jumphist_core::trajectories::{
    ensemble_average, read_records, stream_seed, write_records, Unraveling, Weighting,
};
use jumphist_core::{DensityMatrix, ModelParams};

#[test]
fn jump_count_mean_follows_survival_law() {
    // A qubit can jump at most once, so the mean count is 1 − exp(−2κ²T/G).
    let p = ModelParams::qubit(0.5, 1.0, 50.0, 0.05, 2000);
    let m = 100_000;
    let snaps = Unraveling::new(&p).unwrap().ensemble_snapshots(11, m, &[]).unwrap();
    let expected = 1.0 - (-p.jump_rate() * p.total_time()).exp();
    let stderr = (expected * (1.0 - expected) / m as f64).sqrt();
    let mean = snaps.mean_jumps();
    assert!(
        (mean - expected).abs() <= 3.0 * stderr,
        "mean {mean}, expected {expected} ± {stderr}"
    );
}

#[test]
fn records_round_trip_through_text() {
    let p = ModelParams::qubit(0.5, 1.0, 50.0, 0.05, 2000);
    let records = Unraveling::new(&p).unwrap().sample_many(5, 200).unwrap();
    let mut buf = Vec::new();
    write_records(&mut buf, &records).unwrap();
    let lines = read_records(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(lines.len(), 200);
    for (line, r) in lines.iter().zip(&records) {
        assert_eq!(line.seed, r.seed);
        assert_eq!(line.jump_steps, r.jump_steps);
        assert_eq!(line.weight, r.weight);
    }
    assert_eq!(records[17].seed, stream_seed(5, 17));
}

fn strong() -> ModelParams {
    ModelParams {
        kappa: 0.4,
        gamma1: 1.0,
        gamma2: 20.0,
        d_sys: 3,
        h0: H0Spec::Diagonal {
            frequencies: vec![0.0, 0.3, 0.6],
        },
        dt: 0.02,
        n_steps: 500,
        initial_state: vec![[0.3, 0.0], [0.5, 0.2], [0.7, 0.0]],
    }
}

#[test]
fn ensemble_average_matches_snapshot_average() {
    let p = strong();
    let u = Unraveling::new(&p).unwrap();
    let records = u.sample_many(3, 300).unwrap();
    let direct = ensemble_average(&records, Weighting::Sampled).unwrap();
    let snaps = u.ensemble_snapshots(3, 300, &[p.n_steps]).unwrap().averages();
    assert!(trace_distance(&direct, &snaps[0]).unwrap() < 1e-12);
}

fn final_distance(p: &ModelParams, m: usize, seed: u64) -> f64 {
    let avg = Unraveling::new(p).unwrap().ensemble_snapshots(seed, m, &[p.n_steps]).unwrap().averages();
    let gen = Superoperator::generator(&build_reduced_model(p).unwrap().lindblad_model().unwrap());
    let rho0 = p.system_state().unwrap().projector().into_matrix();
    let exact = DensityMatrix::new(gen.exponential(p.total_time()).unwrap().apply(&rho0)).unwrap();
    trace_distance(&avg[0], &exact).unwrap()
}

#[test]
fn statistical_error_shrinks_like_inverse_sqrt_m() {
    let p = strong();
    let seeds = 32;
    let mean_distance = |m: usize| (0..seeds).map(|s| final_distance(&p, m, 1000 + s)).sum::<f64>() / seeds as f64;
    let d: Vec<f64> = [100, 1000, 10_000].iter().map(|&m| mean_distance(m)).collect();
    for pair in d.windows(2) {
        let ratio = pair[0] / pair[1];
        let ideal = 10f64.sqrt();
        assert!(ratio > ideal / 2.0 && ratio < ideal * 2.0, "{d:?}");
    }
}

#[test]
fn strong_coupling_unraveling_is_consistent() {
    let p = strong();
    let r = unraveling_consistency(&p, 10_000, p.total_time(), 5, 77).unwrap();
    assert!(r.mean_jumps > 0.1);
    assert!(r.pass(), "{:?}", r.points);
}
