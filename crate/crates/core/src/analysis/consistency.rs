use serde::{Deserialize, Serialize};

use super::{Bands, SeriesPoint};
use crate::error::{Error, Result};
use crate::hilbert::{trace_distance, DensityMatrix};
use crate::liouville::{build_propagator, Superoperator};
use crate::model::{build_reduced_model, build_total_model, ModelParams};
use crate::trajectories::Unraveling;

pub const MIN_ENSEMBLE: usize = 100;
pub const DEFAULT_CHECKPOINTS: usize = 5;
pub const DEFAULT_ADIABATIC_SAMPLES: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub params: ModelParams,
    pub trajectories: usize,
    pub seed: u64,
    pub mean_jumps: f64,
    /// Trace distance per checkpoint time.
    pub points: Vec<SeriesPoint>,
}

impl ConsistencyReport {
    pub fn pass(&self) -> bool {
        self.points.iter().all(|p| p.pass)
    }

    pub fn max_distance(&self) -> f64 {
        self.points.iter().map(|p| p.measured).fold(0.0, f64::max)
    }
}

fn check_total_time(p: &ModelParams, total_time: f64) -> Result<()> {
    let expected = p.total_time();
    if (total_time - expected).abs() > 1e-9 * expected.max(1.0) {
        return Err(Error::Precondition(format!(
            "T = {total_time} does not equal n_steps * dt = {expected}"
        )));
    }
    Ok(())
}

/// Trace distance between the ensemble average of `m` trajectories and the
/// exact reduced master-equation evolution at evenly spaced checkpoints up
/// to `T`, each held to `3/√M + 2κ²δtT/G`.
pub fn unraveling_consistency(
    p: &ModelParams,
    m: usize,
    total_time: f64,
    checkpoints: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    if m < MIN_ENSEMBLE {
        return Err(Error::Precondition(format!(
            "ensemble of {m} trajectories is below the minimum of {MIN_ENSEMBLE}"
        )));
    }
    if checkpoints == 0 || checkpoints > p.n_steps {
        return Err(Error::invalid("checkpoints", format!("must lie in 1..={}", p.n_steps)));
    }
    check_total_time(p, total_time)?;

    let steps: Vec<usize> = (1..=checkpoints).map(|i| i * p.n_steps / checkpoints).collect();
    let ensemble = Unraveling::new(p)?.ensemble_snapshots(seed, m, &steps)?;
    let averages = ensemble.averages();

    let generator = Superoperator::generator(&build_reduced_model(p)?.lindblad_model()?);
    let mut rho = p.system_state()?.projector().into_matrix();
    let mut done = 0;
    let band = 3.0 / (m as f64).sqrt() + 2.0 * p.kappa2_over_g() * p.dt * total_time;
    let mut points = Vec::with_capacity(steps.len());
    for (&s, avg) in steps.iter().zip(&averages) {
        rho = generator.exponential((s - done) as f64 * p.dt)?.apply(&rho);
        done = s;
        let exact = DensityMatrix::new(rho.clone())?;
        let distance = trace_distance(avg, &exact)?;
        points.push(SeriesPoint::new(s as f64 * p.dt, distance, band, true));
    }
    Ok(ConsistencyReport {
        params: p.clone(),
        trajectories: m,
        seed,
        mean_jumps: ensemble.mean_jumps(),
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticReport {
    pub params: ModelParams,
    pub total_time: f64,
    /// Errors are asserted only from this time on.
    pub assert_from: f64,
    pub points: Vec<SeriesPoint>,
}

impl AdiabaticReport {
    pub fn pass(&self) -> bool {
        self.points.iter().all(|p| p.pass)
    }

    /// Largest error among asserted points.
    pub fn max_asserted_error(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.asserted)
            .map(|p| p.measured)
            .fold(0.0, f64::max)
    }
}

/// Trace distance between the system marginal `ρ00 + ρ11` of the full
/// evolution and the reduced evolution, sampled on `samples` evenly spaced
/// times in `[1/Γ1, T]`. Points with `t ≥ 10/Γ1` are held to `C·κ/Γ1`;
/// earlier ones are reported only.
pub fn adiabatic_validity(p: &ModelParams, total_time: f64, samples: usize, bands: Bands) -> Result<AdiabaticReport> {
    p.validate()?;
    let assert_from = 10.0 / p.gamma1;
    if !(total_time >= assert_from) {
        return Err(Error::Precondition(format!(
            "T = {total_time} is shorter than 10/gamma1 = {assert_from}"
        )));
    }
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least two sample times"));
    }
    let start = 1.0 / p.gamma1;
    let step = (total_time - start) / (samples - 1) as f64;

    let full_model = build_total_model(p)?;
    let reduced_model = build_reduced_model(p)?.lindblad_model()?;
    let full_start = build_propagator(&full_model, start)?;
    let full_step = build_propagator(&full_model, step)?;
    let red_start = build_propagator(&reduced_model, start)?;
    let red_step = build_propagator(&reduced_model, step)?;

    let mut full = full_start.apply(&crate::histories::initial_total_state(p)?);
    let mut reduced = red_start.apply(&p.system_state()?.projector().into_matrix());
    let band = bands.constant * p.kappa / p.gamma1;
    let mut points = Vec::with_capacity(samples);
    for i in 0..samples {
        if i > 0 {
            full = full_step.apply(&full);
            reduced = red_step.apply(&reduced);
        }
        let t = start + i as f64 * step;
        let marginal = DensityMatrix::new(full.clone())?
            .partial_trace_second(2)?
            .normalized()
            .ok_or_else(|| Error::Degenerate("full evolution lost all trace".into()))?;
        let error = trace_distance(&marginal, &DensityMatrix::new(reduced.clone())?)?;
        points.push(SeriesPoint::new(t, error, band, t >= assert_from * (1.0 - 1e-12)));
    }
    Ok(AdiabaticReport {
        params: p.clone(),
        total_time,
        assert_from,
        points,
    })
}

/// Largest asserted adiabatic error at `p` and with Γ2 scaled by `factor`.
pub fn adiabatic_improvement(p: &ModelParams, total_time: f64, factor: f64, bands: Bands) -> Result<(f64, f64)> {
    let scaled = ModelParams {
        gamma2: p.gamma2 * factor,
        ..p.clone()
    };
    let base = adiabatic_validity(p, total_time, DEFAULT_ADIABATIC_SAMPLES, bands)?;
    let better = adiabatic_validity(&scaled, total_time, DEFAULT_ADIABATIC_SAMPLES, bands)?;
    Ok((base.max_asserted_error(), better.max_asserted_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::H0Spec;

    fn regime(n: usize) -> ModelParams {
        ModelParams::qubit(0.05, 1.0, 500.0, 0.05, n)
    }

    #[test]
    fn zero_coupling_ensemble_is_exact() {
        let p = ModelParams {
            kappa: 0.0,
            h0: H0Spec::Diagonal {
                frequencies: vec![0.0, 0.3],
            },
            initial_state: vec![[0.6, 0.0], [0.8, 0.0]],
            ..regime(400)
        };
        let r = unraveling_consistency(&p, 100, 20.0, 5, 1).unwrap();
        assert_eq!(r.points.len(), 5);
        assert_eq!(r.mean_jumps, 0.0);
        for pt in &r.points {
            assert!(pt.measured < 1e-12, "{pt:?}");
        }
    }

    #[test]
    fn consistency_preconditions() {
        let p = regime(400);
        assert!(matches!(unraveling_consistency(&p, 99, 20.0, 5, 1), Err(Error::Precondition(_))));
        assert!(matches!(unraveling_consistency(&p, 100, 21.0, 5, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn checkpoints_are_evenly_spaced() {
        let r = unraveling_consistency(&regime(400), 100, 20.0, 5, 3).unwrap();
        let times: Vec<f64> = r.points.iter().map(|p| p.parameter).collect();
        assert_eq!(times, vec![4.0, 8.0, 12.0, 16.0, 20.0]);
    }

    #[test]
    fn adiabatic_requires_long_run() {
        assert!(matches!(
            adiabatic_validity(&regime(10), 9.0, 10, Bands::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn zero_coupling_adiabatic_error_vanishes() {
        let p = ModelParams { kappa: 0.0, ..regime(10) };
        let r = adiabatic_validity(&p, 30.0, 10, Bands::default()).unwrap();
        assert!(r.points.iter().all(|pt| pt.measured < 1e-14));
    }

    #[test]
    fn early_points_are_not_asserted() {
        let r = adiabatic_validity(&regime(10), 30.0, 30, Bands::default()).unwrap();
        assert!(r.points.iter().any(|pt| !pt.asserted));
        assert!(r.points.iter().filter(|pt| pt.parameter >= 10.0).all(|pt| pt.asserted));
        assert!(r.pass());
    }
}
