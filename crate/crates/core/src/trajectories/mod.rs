//! Quantum-jump unraveling of the reduced master equation.
//!
//! Between jumps the (unnormalized) system state evolves under the
//! non-Hermitian `H_eff`; in each step of width δt a jump `ψ → aψ` happens
//! with probability `q = (2κ²/G) <ψ̃|a†a|ψ̃> δt` evaluated on the
//! renormalized state. Step `s` covers `(sδt, (s+1)δt]`: the state is first
//! propagated by `e^{−iH_eff δt}` and a jump, if drawn, is attributed to
//! time `(s+1)δt`.
//!
//! Each record carries the unnormalized final state
//! `(2δtκ²/G)^{N/2} e^{−iH_eff(T−t_N)} a ⋯ a e^{−iH_eff t_1} ψ`, whose squared
//! norm is the probability of its jump pattern.

mod record;
mod rng;

use nalgebra::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{c, matrix_exponential, CMatrix, CVector, DensityMatrix, Operator, StateVector, I};
use crate::model::{build_reduced_model, ModelParams};

pub use record::{read_records, write_records, RecordLine, HEADER as RECORD_HEADER};
pub use rng::{stream_seed, TrajectoryRng};

/// Largest per-step jump probability for which first-order sampling is
/// accepted.
pub const MAX_STEP_JUMP_PROBABILITY: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    /// Seed of this trajectory's random stream.
    pub seed: u64,
    /// Strictly increasing step indices at which jumps occurred.
    pub jump_steps: Vec<usize>,
    /// Unnormalized final state.
    pub final_state: StateVector,
    /// `‖final_state‖²`.
    pub weight: f64,
}

impl TrajectoryRecord {
    pub fn jump_count(&self) -> usize {
        self.jump_steps.len()
    }

    /// Renormalized final state `ψ̃`, `None` for zero weight.
    pub fn normalized_state(&self) -> Option<StateVector> {
        self.final_state.normalized()
    }
}

/// `e^{−iH_eff t} ψ`, without renormalization.
pub fn evolve_no_jump(h_eff: &Operator, psi: &StateVector, t: f64) -> Result<StateVector> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", format!("evolution time must be >= 0, got {t}")));
    }
    Ok(matrix_exponential(&h_eff.scale(-I), t)?.apply(psi))
}

/// `ψ → aψ`. A zero result is legal and has zero weight.
pub fn apply_jump(jump_op: &Operator, psi: &StateVector) -> StateVector {
    jump_op.apply(psi)
}

/// Precomputed no-jump step propagator and jump bookkeeping for one
/// parameter set.
#[derive(Clone, Debug)]
pub struct Unraveling {
    step: CMatrix,
    jump: CMatrix,
    /// `2δtκ²/G`.
    step_jump_factor: f64,
    initial: StateVector,
    n_steps: usize,
    dt: f64,
}

impl Unraveling {
    pub fn new(p: &ModelParams) -> Result<Self> {
        let reduced = build_reduced_model(p)?;
        let step = matrix_exponential(&reduced.h_eff.scale(-I), p.dt)?.into_matrix();
        Ok(Self {
            step,
            jump: reduced.jump_op.into_matrix(),
            step_jump_factor: reduced.jump_rate * p.dt,
            initial: p.system_state()?,
            n_steps: p.n_steps,
            dt: p.dt,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Per-step jump probability prefactor `2δtκ²/G`.
    pub fn step_jump_factor(&self) -> f64 {
        self.step_jump_factor
    }

    /// `q = (2δtκ²/G) <ψ̃|a†a|ψ̃>` for a normalized state.
    pub fn step_jump_probability(&self, normalized: &StateVector) -> f64 {
        self.step_jump_factor * mean_excitation(normalized.amplitudes())
    }

    pub fn sample(&self, stream_seed: u64) -> Result<TrajectoryRecord> {
        Ok(self.sample_with_snapshots(stream_seed, &[])?.0)
    }

    /// Samples one trajectory, also returning the renormalized state after
    /// each requested number of completed steps (`0..=n_steps`, ascending).
    pub fn sample_with_snapshots(
        &self,
        stream_seed: u64,
        snapshot_steps: &[usize],
    ) -> Result<(TrajectoryRecord, Vec<StateVector>)> {
        if let Some(&bad) = snapshot_steps.iter().find(|&&s| s > self.n_steps) {
            return Err(Error::invalid(
                "snapshot_steps",
                format!("step {bad} exceeds n_steps {}", self.n_steps),
            ));
        }
        if snapshot_steps.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("snapshot_steps", "must be ascending"));
        }

        let mut rng = TrajectoryRng::new(stream_seed);
        let mut psi = self.initial.amplitudes().clone();
        let mut scratch = CVector::zeros(psi.len());
        let mut log_weight = 0.0_f64;
        let mut jumps = Vec::new();
        let mut snapshots = Vec::with_capacity(snapshot_steps.len());
        let mut next_snap = snapshot_steps.iter().peekable();
        let one = c(1.0);
        let zero = c(0.0);

        while next_snap.next_if_eq(&&0).is_some() {
            snapshots.push(StateVector::new(psi.clone())?);
        }

        for s in 0..self.n_steps {
            scratch.gemv(one, &self.step, &psi, zero);
            log_weight += renormalize_into(&scratch, &mut psi);

            let q = self.step_jump_factor * mean_excitation(&psi);
            if q > MAX_STEP_JUMP_PROBABILITY {
                return Err(Error::OverExcited { step: s, probability: q });
            }
            if rng.uniform() < q {
                scratch.gemv(one, &self.jump, &psi, zero);
                log_weight += self.step_jump_factor.ln() + renormalize_into(&scratch, &mut psi);
                jumps.push(s);
            }

            while next_snap.next_if_eq(&&(s + 1)).is_some() {
                snapshots.push(StateVector::new(psi.clone())?);
            }
        }

        let weight = log_weight.exp();
        let final_state = StateVector::new(psi)?.scaled(weight.sqrt());
        Ok((
            TrajectoryRecord {
                seed: stream_seed,
                jump_steps: jumps,
                final_state,
                weight,
            },
            snapshots,
        ))
    }

    /// Samples `count` trajectories in parallel; record `i` uses stream
    /// `base_seed ^ i`. Output order is by index regardless of scheduling.
    pub fn sample_many(&self, base_seed: u64, count: usize) -> Result<Vec<TrajectoryRecord>> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| self.sample(stream_seed(base_seed, i)))
            .collect()
    }

    /// Ensemble-averaged renormalized states at each snapshot step, merged
    /// across trajectories with an order-independent sum.
    pub fn ensemble_snapshots(&self, base_seed: u64, count: usize, snapshot_steps: &[usize]) -> Result<EnsembleSnapshots> {
        if count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let d = self.initial.dim();
        let empty = || EnsembleSnapshots {
            sums: vec![CMatrix::zeros(d, d); snapshot_steps.len()],
            count: 0,
            total_jumps: 0,
        };
        let merged = (0..count as u64)
            .into_par_iter()
            .map(|i| self.sample_with_snapshots(stream_seed(base_seed, i), snapshot_steps))
            .try_fold(empty, |mut acc, item| {
                let (record, snaps) = item?;
                for (sum, psi) in acc.sums.iter_mut().zip(&snaps) {
                    *sum += psi.amplitudes() * psi.amplitudes().adjoint();
                }
                acc.count += 1;
                acc.total_jumps += record.jump_count();
                Ok::<_, Error>(acc)
            })
            .try_reduce(empty, |mut a, b| {
                for (x, y) in a.sums.iter_mut().zip(b.sums) {
                    *x += y;
                }
                a.count += b.count;
                a.total_jumps += b.total_jumps;
                Ok(a)
            })?;
        Ok(merged)
    }
}

/// Summed `ψ̃ψ̃†` per snapshot over an ensemble.
#[derive(Clone, Debug)]
pub struct EnsembleSnapshots {
    pub sums: Vec<CMatrix>,
    pub count: usize,
    pub total_jumps: usize,
}

impl EnsembleSnapshots {
    pub fn averages(&self) -> Vec<DensityMatrix> {
        let n = c(self.count as f64);
        self.sums
            .iter()
            .map(|s| DensityMatrix::new(s / n).expect("square by construction"))
            .collect()
    }

    pub fn mean_jumps(&self) -> f64 {
        self.total_jumps as f64 / self.count as f64
    }
}

fn mean_excitation(psi: &CVector) -> f64 {
    psi.iter().enumerate().map(|(k, z)| k as f64 * z.norm_sqr()).sum()
}

/// Writes `src/‖src‖` into `dst` and returns `ln ‖src‖²`.
fn renormalize_into(src: &CVector, dst: &mut CVector) -> f64 {
    let norm_sqr = src.norm_squared();
    let inv = Complex::new(norm_sqr.sqrt().recip(), 0.0);
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d = s * inv;
    }
    norm_sqr.ln()
}

/// Samples a single trajectory over `T`, which must equal `n_steps·δt`.
pub fn sample_trajectory(stream_seed: u64, p: &ModelParams, total_time: f64) -> Result<TrajectoryRecord> {
    check_total_time(p, total_time)?;
    Unraveling::new(p)?.sample(stream_seed)
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

/// Probability of a jump pattern over `T = n_steps·δt`:
/// `(2δtκ²/G)^N ‖e^{−iH_eff(T−t_N)} a ⋯ a e^{−iH_eff t_1} ψ‖²` with jump
/// times `t_i = (s_i + 1)δt`. Each segment is exponentiated directly.
pub fn trajectory_probability(p: &ModelParams, jump_steps: &[usize]) -> Result<f64> {
    if jump_steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("jump_steps", "must be strictly increasing"));
    }
    if let Some(&last) = jump_steps.last() {
        if last >= p.n_steps {
            return Err(Error::invalid(
                "jump_steps",
                format!("step {last} outside 0..{}", p.n_steps),
            ));
        }
    }
    let reduced = build_reduced_model(p)?;
    let mut psi = p.system_state()?;
    let mut elapsed_steps = 0usize;
    for &s in jump_steps {
        let t = (s + 1 - elapsed_steps) as f64 * p.dt;
        psi = apply_jump(&reduced.jump_op, &evolve_no_jump(&reduced.h_eff, &psi, t)?);
        elapsed_steps = s + 1;
    }
    let t_rest = (p.n_steps - elapsed_steps) as f64 * p.dt;
    psi = evolve_no_jump(&reduced.h_eff, &psi, t_rest)?;
    let prefactor = (reduced.jump_rate * p.dt).powi(jump_steps.len() as i32);
    Ok(prefactor * psi.norm_sqr())
}

/// Every trajectory with at most one jump, weighted by
/// [`trajectory_probability`].
pub fn enumerate_single_jumps(p: &ModelParams) -> Result<Vec<TrajectoryRecord>> {
    let reduced = build_reduced_model(p)?;
    let step = matrix_exponential(&reduced.h_eff.scale(-I), p.dt)?;
    let prefactor = (reduced.jump_rate * p.dt).sqrt();
    let psi0 = p.system_state()?;

    // Pre-jump states after s+1 steps, and powers of the step propagator for
    // the post-jump remainder.
    let mut pre = Vec::with_capacity(p.n_steps + 1);
    let mut psi = psi0.clone();
    pre.push(psi.clone());
    for _ in 0..p.n_steps {
        psi = step.apply(&psi);
        pre.push(psi.clone());
    }

    let mut out = Vec::with_capacity(p.n_steps + 1);
    out.push(TrajectoryRecord {
        seed: 0,
        jump_steps: vec![],
        weight: pre[p.n_steps].norm_sqr(),
        final_state: pre[p.n_steps].clone(),
    });
    for s in 0..p.n_steps {
        let after = apply_jump(&reduced.jump_op, &pre[s + 1]).scaled(prefactor);
        let rest = p.n_steps - (s + 1);
        let final_state = evolve_no_jump(&reduced.h_eff, &after, rest as f64 * p.dt)?;
        out.push(TrajectoryRecord {
            seed: 0,
            jump_steps: vec![s],
            weight: final_state.norm_sqr(),
            final_state,
        });
    }
    Ok(out)
}

/// How records are combined by [`ensemble_average`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    /// Records were drawn from the sampling measure: plain average.
    Sampled,
    /// Records enumerate patterns: weight-normalized average.
    Enumerated,
}

/// Mean of `ψ̃ψ̃†` over the records.
pub fn ensemble_average(records: &[TrajectoryRecord], weighting: Weighting) -> Result<DensityMatrix> {
    let first = records.first().ok_or(Error::EmptyEnsemble)?;
    let d = first.final_state.dim();
    let mut sum = CMatrix::zeros(d, d);
    let mut total = 0.0;
    for r in records {
        if r.final_state.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.final_state.dim(),
            });
        }
        let w = match weighting {
            Weighting::Sampled => 1.0,
            Weighting::Enumerated => r.weight,
        };
        if w == 0.0 {
            continue;
        }
        let psi = r
            .normalized_state()
            .ok_or_else(|| Error::Degenerate(format!("record {} has a zero final state", r.seed)))?;
        sum += psi.amplitudes() * psi.amplitudes().adjoint() * c(w);
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::Degenerate("ensemble carries no weight".into()));
    }
    DensityMatrix::new(sum / c(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::trace_distance;
    use crate::model::H0Spec;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn regime(n_steps: usize) -> ModelParams {
        ModelParams::qubit(0.05, 1.0, 500.0, 0.05, n_steps)
    }

    #[test]
    fn no_jump_evolution_examples() {
        let p = regime(1);
        let r = build_reduced_model(&p).unwrap();
        let excited = StateVector::basis(2, 1);
        let out = evolve_no_jump(&r.h_eff, &excited, 1000.0).unwrap();
        let expected = (-2.0 * 0.0025 * 1000.0 / 1000.5f64).exp();
        assert_relative_eq!(out.norm_sqr(), expected, max_relative = 1e-12);
        assert_relative_eq!(out.norm_sqr(), 0.995015, max_relative = 1e-6);

        let ground = StateVector::basis(2, 0);
        assert_eq!(evolve_no_jump(&r.h_eff, &ground, 1000.0).unwrap(), ground);

        let p0 = ModelParams {
            kappa: 0.0,
            h0: H0Spec::Diagonal {
                frequencies: vec![0.0, 1.3],
            },
            ..regime(1)
        };
        let r0 = build_reduced_model(&p0).unwrap();
        let plus = StateVector::from_amplitudes(&[c(0.6), c(0.8)]).unwrap();
        assert_abs_diff_eq!(evolve_no_jump(&r0.h_eff, &plus, 77.0).unwrap().norm_sqr(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn jump_examples() {
        let a2 = Operator::lowering(2);
        assert_eq!(apply_jump(&a2, &StateVector::basis(2, 1)), StateVector::basis(2, 0));
        assert_eq!(apply_jump(&a2, &StateVector::basis(2, 0)), StateVector::zeros(2));
        let a4 = Operator::lowering(4);
        let out = apply_jump(&a4, &StateVector::basis(4, 2));
        assert_abs_diff_eq!(out.amplitudes()[1].re, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(out.norm_sqr(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn per_step_jump_probability_prefactor() {
        let u = Unraveling::new(&regime(10)).unwrap();
        assert_relative_eq!(u.step_jump_factor(), 2.0 * 0.05 * 0.0025 / 1000.5, max_relative = 1e-15);
        assert_relative_eq!(u.step_jump_factor(), 2.4988e-7, max_relative = 1e-4);
        assert_relative_eq!(
            u.step_jump_probability(&StateVector::basis(2, 1)),
            u.step_jump_factor(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = ModelParams::qubit(0.5, 1.0, 50.0, 0.05, 4000);
        let u = Unraveling::new(&p).unwrap();
        for seed in 0..20 {
            assert_eq!(u.sample(seed).unwrap(), u.sample(seed).unwrap());
        }
        let batch1 = u.sample_many(99, 64).unwrap();
        let batch2 = u.sample_many(99, 64).unwrap();
        assert_eq!(batch1, batch2);
        assert_eq!(batch1[5], u.sample(stream_seed(99, 5)).unwrap());
    }

    #[test]
    fn zero_coupling_never_jumps() {
        let p = ModelParams { kappa: 0.0, ..regime(500) };
        let u = Unraveling::new(&p).unwrap();
        for r in u.sample_many(1, 50).unwrap() {
            assert!(r.jump_steps.is_empty());
            assert_eq!(r.weight, 1.0);
        }
    }

    #[test]
    fn over_excited_is_rejected() {
        let p = ModelParams {
            kappa: 20.0,
            gamma2: 50.0,
            dt: 0.5,
            ..regime(10)
        };
        assert!(matches!(
            Unraveling::new(&p).unwrap().sample(0),
            Err(Error::OverExcited { step: 0, .. })
        ));
    }

    #[test]
    fn sampled_weight_equals_pattern_probability() {
        // Strong coupling so that jumps actually occur in a short run.
        let p = ModelParams {
            d_sys: 4,
            kappa: 2.0,
            gamma1: 20.0,
            gamma2: 500.0,
            dt: 0.02,
            n_steps: 400,
            h0: H0Spec::Diagonal {
                frequencies: vec![0.0, 0.5, 1.0, 1.5],
            },
            initial_state: vec![[0.0, 0.0], [0.3, 0.1], [0.5, 0.0], [0.0, 0.8]],
        };
        let u = Unraveling::new(&p).unwrap();
        let mut jumped = 0;
        for seed in 0..40 {
            let r = u.sample(seed).unwrap();
            jumped += usize::from(!r.jump_steps.is_empty());
            assert!(r.jump_steps.windows(2).all(|w| w[0] < w[1]));
            assert!((0.0..=1.0).contains(&r.weight));
            assert_abs_diff_eq!(r.weight, r.final_state.norm_sqr(), epsilon = 1e-12);
            let exact = trajectory_probability(&p, &r.jump_steps).unwrap();
            assert_abs_diff_eq!(r.weight, exact, epsilon = 1e-8);
            assert_relative_eq!(r.weight, exact, max_relative = 1e-8);
        }
        assert!(jumped > 5);
    }

    #[test]
    fn sample_trajectory_checks_total_time() {
        let p = regime(100);
        assert!(sample_trajectory(3, &p, 5.0).is_ok());
        assert!(matches!(sample_trajectory(3, &p, 6.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn norm_never_increases_between_jumps() {
        let p = ModelParams {
            h0: H0Spec::Diagonal {
                frequencies: vec![0.0, 0.4],
            },
            initial_state: vec![[0.6, 0.0], [0.0, 0.8]],
            ..regime(1)
        };
        let r = build_reduced_model(&p).unwrap();
        let mut psi = p.system_state().unwrap();
        let mut last = psi.norm_sqr();
        for _ in 0..200 {
            psi = evolve_no_jump(&r.h_eff, &psi, 5.0).unwrap();
            assert!(psi.norm_sqr() <= last);
            last = psi.norm_sqr();
        }
    }

    #[test]
    fn probability_examples() {
        let p0 = ModelParams { kappa: 0.0, ..regime(20) };
        assert_eq!(trajectory_probability(&p0, &[]).unwrap(), 1.0);

        let p = regime(20_000);
        assert_relative_eq!(
            trajectory_probability(&p, &[]).unwrap(),
            (-2.0 * 0.0025 * 1000.0 / 1000.5f64).exp(),
            max_relative = 1e-12
        );
        assert!(trajectory_probability(&p, &[5, 5]).is_err());
        assert!(trajectory_probability(&p, &[20_000]).is_err());
    }

    #[test]
    fn single_jump_patterns_partition_unity() {
        let p = regime(20_000);
        let records = enumerate_single_jumps(&p).unwrap();
        let total: f64 = records.iter().map(|r| r.weight).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn single_jump_step_distribution_is_geometric() {
        let p = regime(2_000);
        let records = enumerate_single_jumps(&p).unwrap();
        let ratio = (-p.jump_rate() * p.dt).exp();
        for pair in records[1..].windows(2) {
            assert_abs_diff_eq!(pair[1].weight / pair[0].weight, ratio, epsilon = 1e-9);
        }
        // Spot-check the enumeration against the direct evaluator.
        for s in [0usize, 17, 1999] {
            let direct = trajectory_probability(&p, &[s]).unwrap();
            assert_relative_eq!(records[s + 1].weight, direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn ensemble_of_one_is_its_projector() {
        let p = regime(50);
        let r = Unraveling::new(&p).unwrap().sample(4).unwrap();
        let rho = ensemble_average(std::slice::from_ref(&r), Weighting::Sampled).unwrap();
        let psi = r.normalized_state().unwrap();
        assert!(crate::hilbert::max_abs(&(rho.matrix() - psi.projector().matrix())) < 1e-15);
        assert!(matches!(ensemble_average(&[], Weighting::Sampled), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn zero_coupling_ensemble_is_unitary_evolution() {
        let p = ModelParams {
            kappa: 0.0,
            h0: H0Spec::Diagonal {
                frequencies: vec![0.0, 0.9],
            },
            initial_state: vec![[0.6, 0.0], [0.0, 0.8]],
            ..regime(200)
        };
        let records = Unraveling::new(&p).unwrap().sample_many(0, 20).unwrap();
        let rho = ensemble_average(&records, Weighting::Sampled).unwrap();
        let h0 = p.h0_operator().unwrap();
        let psi_t = evolve_no_jump(&h0, &p.system_state().unwrap(), p.total_time()).unwrap();
        assert!(trace_distance(&rho, &psi_t.projector()).unwrap() < 1e-12);
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn enumerated_ensemble_has_unit_trace() {
        let p = ModelParams {
            initial_state: vec![[0.6, 0.0], [0.8, 0.0]],
            ..regime(500)
        };
        let rho = ensemble_average(&enumerate_single_jumps(&p).unwrap(), Weighting::Enumerated).unwrap();
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
        assert!(rho.is_physical(1e-10));
    }

    #[test]
    fn snapshots_track_requested_steps() {
        let p = regime(10);
        let u = Unraveling::new(&p).unwrap();
        let (record, snaps) = u.sample_with_snapshots(1, &[0, 5, 10]).unwrap();
        assert_eq!(snaps.len(), 3);
        assert_eq!(snaps[0], p.system_state().unwrap());
        let last = record.normalized_state().unwrap();
        assert!((last.amplitudes() - snaps[2].amplitudes()).norm() < 1e-14);
        assert!(u.sample_with_snapshots(1, &[11]).is_err());
        assert!(u.sample_with_snapshots(1, &[5, 2]).is_err());
    }
}
