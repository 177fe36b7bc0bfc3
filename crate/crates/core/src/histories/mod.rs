//! Decoherent histories of the output mode.
//!
//! A history is a string of photon-presence bits `α_1 … α_N`, each recorded
//! by the projector `P_α = 1 ⊗ |α><α|`. For a pair of histories the
//! decoherence functional is
//!
//! ```text
//! D[h,h'] = Tr{ P_{α_N} e^{Lδt}( ⋯ e^{Lδt}( P_{α_1} ρ0 P_{α'_1} ) ⋯ ) P_{α'_N} }
//! ```
//!
//! with `ρ0 = |ψ0><ψ0| ⊗ |0><0|` and `L` the full generator. Under
//! [`Convention::Literal`] the first projection acts directly on `ρ0` and
//! there are `N − 1` propagations; [`Convention::ProjectAfterStep`] also
//! propagates before the first projection, so the history spans `T = Nδt`.
//!
//! Histories are indexed MSB-first: `α_1` is the most significant bit.

mod coarse;
mod matrix;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{c, CMatrix, CVector, Operator, C64};
use crate::liouville::{build_propagator, vectorize, Superoperator};
use crate::model::{build_total_model, ModelParams};

pub use coarse::{coarse_grain_absorption, CoarseGrained};
pub use matrix::{
    decoherence_report, full_decoherence_matrix, max_offdiagonal_by_distance, DecoherenceMatrix,
    DecoherenceReport, InvariantSummary, DEFAULT_N_CAP, DEFAULT_PROBABILITY_FLOOR,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct History {
    bits: Vec<bool>,
}

impl History {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    /// Decodes an MSB-first index.
    pub fn from_index(index: usize, n: usize) -> Self {
        Self {
            bits: (0..n).map(|j| (index >> (n - 1 - j)) & 1 == 1).collect(),
        }
    }

    /// Zeros except for a single 1 at 1-based position `step`.
    pub fn single(n: usize, step: usize) -> Self {
        let mut h = Self::zeros(n);
        h.bits[step - 1] = true;
        h
    }

    /// `0^{onset-1} 1^{n-onset+1}`: the photon appears at 1-based step
    /// `onset` and is seen at every later projection.
    pub fn onset(n: usize, onset: usize) -> Self {
        Self {
            bits: (1..=n).map(|j| j >= onset).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn index(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
    }

    pub fn hamming_distance(&self, other: &History) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for History {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidHistory(format!("unexpected character {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(History::new)
    }
}

impl Serialize for History {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for History {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Placement of the first projection relative to the first propagation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// First projection on the initial state; `N − 1` propagations.
    #[default]
    Literal,
    /// Propagate by δt before every projection; `N` propagations.
    ProjectAfterStep,
}

impl Convention {
    /// Time elapsed at the 1-based projection `k`.
    pub fn projection_time(self, k: usize, dt: f64) -> f64 {
        match self {
            Convention::Literal => (k - 1) as f64 * dt,
            Convention::ProjectAfterStep => k as f64 * dt,
        }
    }

    fn propagates_before(self, step: usize) -> bool {
        step > 0 || self == Convention::ProjectAfterStep
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Literal => "literal",
            Convention::ProjectAfterStep => "project_after_step",
        })
    }
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Convention::Literal),
            "project_after_step" => Ok(Convention::ProjectAfterStep),
            other => Err(Error::invalid(
                "convention",
                format!("expected \"literal\" or \"project_after_step\", got {other:?}"),
            )),
        }
    }
}

/// `1_sys ⊗ |α><α|`.
pub fn projector(alpha: bool, d_sys: usize) -> Operator {
    let mut m = CMatrix::zeros(2, 2);
    m[(usize::from(alpha), usize::from(alpha))] = c(1.0);
    Operator::identity(d_sys).tensor(&Operator::new(m).expect("square"))
}

/// Initial total state `|ψ0><ψ0| ⊗ |0><0|`.
pub fn initial_total_state(p: &ModelParams) -> Result<CMatrix> {
    let psi = p.system_state()?;
    let total = psi.tensor(&crate::hilbert::StateVector::basis(2, 0));
    Ok(total.projector().into_matrix())
}

/// Fast evaluator for branch operators, working on column-stacked vectors
/// with projections applied as index masks.
#[derive(Clone, Debug)]
pub struct HistoryEngine {
    dim: usize,
    propagator: CMatrix,
    initial: CVector,
    n_steps: usize,
    convention: Convention,
}

impl HistoryEngine {
    pub fn new(p: &ModelParams, convention: Convention) -> Result<Self> {
        p.validate()?;
        let model = build_total_model(p)?;
        let propagator = build_propagator(&model, p.dt)?.matrix().clone();
        Ok(Self {
            dim: model.dim(),
            propagator,
            initial: vectorize(&initial_total_state(p)?),
            n_steps: p.n_steps,
            convention,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub(crate) fn initial(&self) -> &CVector {
        &self.initial
    }

    pub(crate) fn propagate(&self, v: &CVector) -> CVector {
        &self.propagator * v
    }

    /// `P_a X P_b` in vectorized form: keeps entries `(i, j)` whose mode
    /// indices are `a` and `b`.
    pub(crate) fn project_into(&self, v: &CVector, a: bool, b: bool, out: &mut CVector) {
        let d = self.dim;
        let (a, b) = (usize::from(a), usize::from(b));
        for (k, (o, x)) in out.iter_mut().zip(v.iter()).enumerate() {
            let (i, j) = (k % d, k / d);
            *o = if i % 2 == a && j % 2 == b { *x } else { C64::new(0.0, 0.0) };
        }
    }

    pub(crate) fn trace(&self, v: &CVector) -> C64 {
        (0..self.dim).map(|i| v[i + self.dim * i]).sum()
    }

    /// Applies one (propagate, project) step for 0-based step `step`.
    pub(crate) fn step(&self, v: &CVector, step: usize, a: bool, b: bool) -> CVector {
        let mut out = CVector::zeros(v.len());
        if self.convention.propagates_before(step) {
            self.project_into(&self.propagate(v), a, b, &mut out);
        } else {
            self.project_into(v, a, b, &mut out);
        }
        out
    }

    /// Branch operator after the first `left.len()` projection pairs.
    pub fn branch(&self, left: &[bool], right: &[bool]) -> Result<CVector> {
        if left.len() != right.len() {
            return Err(Error::DimensionMismatch {
                expected: left.len(),
                found: right.len(),
            });
        }
        if left.len() > self.n_steps {
            return Err(Error::InvalidHistory(format!(
                "prefix of length {} exceeds n_steps {}",
                left.len(),
                self.n_steps
            )));
        }
        let mut v = self.initial.clone();
        for (k, (&a, &b)) in left.iter().zip(right).enumerate() {
            v = self.step(&v, k, a, b);
        }
        Ok(v)
    }

    /// `D[h,h']` for full-length histories.
    pub fn functional(&self, h: &History, h2: &History) -> Result<C64> {
        self.check_len(h)?;
        self.check_len(h2)?;
        Ok(self.trace(&self.branch(h.bits(), h2.bits())?))
    }

    pub fn probability(&self, h: &History) -> Result<f64> {
        Ok(self.functional(h, h)?.re)
    }

    /// Probability that the first `prefix.len()` projections return
    /// `prefix`, summed over everything afterwards. By completeness and
    /// trace preservation this is the trace of the prefix branch.
    pub fn prefix_probability(&self, prefix: &[bool]) -> Result<f64> {
        Ok(self.trace(&self.branch(prefix, prefix)?).re)
    }

    fn check_len(&self, h: &History) -> Result<()> {
        if h.len() != self.n_steps {
            return Err(Error::InvalidHistory(format!(
                "history {h} has length {} but n_steps is {}",
                h.len(),
                self.n_steps
            )));
        }
        Ok(())
    }
}

/// Direct evaluation of `D[h,h']` with explicit projector products and the
/// dense propagator. Independent of [`HistoryEngine`]; used as its oracle.
pub fn decoherence_functional(p: &ModelParams, h: &History, h2: &History, convention: Convention) -> Result<C64> {
    p.validate()?;
    if h.len() != h2.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            found: h2.len(),
        });
    }
    if h.len() != p.n_steps {
        return Err(Error::InvalidHistory(format!(
            "history length {} does not match n_steps {}",
            h.len(),
            p.n_steps
        )));
    }
    let prop: Superoperator = build_propagator(&build_total_model(p)?, p.dt)?;
    let proj = [projector(false, p.d_sys), projector(true, p.d_sys)];
    let mut rho = initial_total_state(p)?;
    for (k, (&a, &b)) in h.bits().iter().zip(h2.bits()).enumerate() {
        if convention.propagates_before(k) {
            rho = prop.apply(&rho);
        }
        rho = proj[usize::from(a)].matrix() * rho * proj[usize::from(b)].matrix();
    }
    Ok(rho.trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::H0Spec;
    use approx::assert_abs_diff_eq;

    fn regime(n: usize) -> ModelParams {
        ModelParams::qubit(0.05, 1.0, 500.0, 0.05, n)
    }

    #[test]
    fn projectors_are_complete_and_exclusive() {
        let p0 = projector(false, 3);
        let p1 = projector(true, 3);
        assert_eq!((&p0 + &p1).matrix(), Operator::identity(6).matrix());
        assert_eq!((&p0 * &p1).matrix(), &CMatrix::zeros(6, 6));
        let psi = crate::hilbert::StateVector::from_amplitudes(&[c(0.6), c(0.0), c(0.8)]).unwrap();
        let excited = psi.tensor(&crate::hilbert::StateVector::basis(2, 1));
        assert_eq!(p1.apply(&excited), excited);
    }

    #[test]
    fn history_index_is_msb_first() {
        let h: History = "100".parse().unwrap();
        assert_eq!(h.index(), 4);
        assert_eq!(History::from_index(4, 3), h);
        assert_eq!(History::single(5, 2).to_string(), "01000");
        assert_eq!(History::onset(5, 3).to_string(), "00111");
        assert!("01x".parse::<History>().is_err());
        for i in 0..16 {
            assert_eq!(History::from_index(i, 4).index(), i);
        }
    }

    #[test]
    fn history_serializes_as_bit_string() {
        let h: History = "0110".parse().unwrap();
        let json = serde_json::to_string(&h).unwrap();
        assert_eq!(json, "\"0110\"");
        assert_eq!(serde_json::from_str::<History>(&json).unwrap(), h);
    }

    #[test]
    fn zero_coupling_functional() {
        let p = ModelParams { kappa: 0.0, ..regime(4) };
        let zeros = History::zeros(4);
        for conv in [Convention::Literal, Convention::ProjectAfterStep] {
            assert_eq!(decoherence_functional(&p, &zeros, &zeros, conv).unwrap(), c(1.0));
            let engine = HistoryEngine::new(&p, conv).unwrap();
            assert_eq!(engine.probability(&zeros).unwrap(), 1.0);
            for i in 1..16 {
                let h = History::from_index(i, 4);
                assert_eq!(decoherence_functional(&p, &h, &zeros, conv).unwrap().norm(), 0.0);
                assert_eq!(engine.probability(&h).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn engine_matches_direct_evaluation() {
        let p = ModelParams {
            kappa: 0.3,
            gamma2: 20.0,
            h0: H0Spec::Diagonal {
                frequencies: vec![0.0, 0.7],
            },
            initial_state: vec![[0.6, 0.0], [0.0, 0.8]],
            ..regime(4)
        };
        for conv in [Convention::Literal, Convention::ProjectAfterStep] {
            let engine = HistoryEngine::new(&p, conv).unwrap();
            for i in [0usize, 3, 6, 9, 15] {
                for j in [0usize, 1, 5, 12, 15] {
                    let (h, h2) = (History::from_index(i, 4), History::from_index(j, 4));
                    let fast = engine.functional(&h, &h2).unwrap();
                    let slow = decoherence_functional(&p, &h, &h2, conv).unwrap();
                    assert!((fast - slow).norm() < 1e-12, "{h} {h2}: {fast} vs {slow}");
                }
            }
        }
    }

    #[test]
    fn literal_first_projection_sees_no_photon() {
        // The mode starts empty, so any history with α_1 = 1 has zero weight
        // under the literal ordering but not after a step.
        let p = ModelParams {
            kappa: 0.3,
            gamma2: 20.0,
            ..regime(2)
        };
        let h: History = "10".parse().unwrap();
        let lit = HistoryEngine::new(&p, Convention::Literal).unwrap();
        let after = HistoryEngine::new(&p, Convention::ProjectAfterStep).unwrap();
        assert_eq!(lit.probability(&h).unwrap(), 0.0);
        assert!(after.probability(&h).unwrap() > 0.0);
    }

    #[test]
    fn prefix_probability_marginalizes_suffix() {
        let p = ModelParams {
            kappa: 0.3,
            gamma2: 20.0,
            ..regime(4)
        };
        let engine = HistoryEngine::new(&p, Convention::Literal).unwrap();
        let prefix = [false, true];
        let summed: f64 = (0..4)
            .map(|tail| {
                let mut bits = prefix.to_vec();
                bits.extend(History::from_index(tail, 2).bits());
                engine.probability(&History::new(bits)).unwrap()
            })
            .sum();
        assert_abs_diff_eq!(engine.prefix_probability(&prefix).unwrap(), summed, epsilon = 1e-14);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let p = regime(3);
        let engine = HistoryEngine::new(&p, Convention::Literal).unwrap();
        let short = History::zeros(2);
        assert!(engine.functional(&short, &short).is_err());
        assert!(decoherence_functional(&p, &History::zeros(3), &short, Convention::Literal).is_err());
    }

    #[test]
    fn projection_times() {
        assert_eq!(Convention::Literal.projection_time(1, 0.5), 0.0);
        assert_eq!(Convention::ProjectAfterStep.projection_time(1, 0.5), 0.5);
        assert_eq!("literal".parse::<Convention>().unwrap(), Convention::Literal);
        assert!("after".parse::<Convention>().is_err());
    }
}
