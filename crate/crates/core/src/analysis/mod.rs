//! Cross-checks between the three descriptions of the model.
//!
//! Each check compares a quantity measured on the exact dense evolution with
//! the first-order prediction and accepts it inside an explicit error band
//! built from the terms that prediction drops (`1/(Gδt)`, `Γ1δt`, `κ²T/G`)
//! times one configurable headroom constant.

mod consistency;
mod scaling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histories::{Convention, History, HistoryEngine};
use crate::model::{build_reduced_model, ModelParams};
use crate::trajectories::{apply_jump, evolve_no_jump};

pub use consistency::{
    adiabatic_improvement, adiabatic_validity, unraveling_consistency, AdiabaticReport, ConsistencyReport,
    DEFAULT_ADIABATIC_SAMPLES, DEFAULT_CHECKPOINTS, MIN_ENSEMBLE,
};
pub use scaling::{
    decoherence_ratio, decoherence_scaling, least_squares, scaling_pair, ScalingAxis, ScalingFit, ScalingPair,
    ScalingPoint, MIN_SCALING_POINTS, MIN_SCALING_SPAN,
};

/// Band headroom and the denominator floor for relative errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub constant: f64,
    pub floor: f64,
}

impl Default for Bands {
    fn default() -> Self {
        Self {
            constant: 10.0,
            floor: 1e-30,
        }
    }
}

impl Bands {
    pub fn relative_error(&self, measured: f64, reference: f64) -> f64 {
        (measured - reference).abs() / reference.abs().max(self.floor)
    }

    /// `C (1/(Gδt) + Γ1δt)`.
    pub fn step_band(&self, p: &ModelParams) -> f64 {
        self.constant * (1.0 / (p.g() * p.dt) + p.gamma1 * p.dt)
    }

    /// `C (1/(Gδt) + Γ1δt + κ²Nδt/G)`.
    pub fn history_band(&self, p: &ModelParams) -> f64 {
        self.step_band(p) + self.constant * p.kappa2_over_g() * p.total_time()
    }
}

/// One row of a series report; serializes to the CSV columns
/// `parameter,measured,band,pass`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub parameter: f64,
    pub measured: f64,
    pub band: f64,
    /// Points outside the asserted range are reported only.
    pub asserted: bool,
    pub pass: bool,
}

impl SeriesPoint {
    pub fn new(parameter: f64, measured: f64, band: f64, asserted: bool) -> Self {
        Self {
            parameter,
            measured,
            band,
            asserted,
            pass: !asserted || measured <= band,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub label: String,
    /// Step index or count the entry refers to.
    pub parameter: f64,
    pub history_value: f64,
    pub formula_value: f64,
    pub relative_error: f64,
    pub band: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub params: ModelParams,
    pub convention: Convention,
    pub bands: Bands,
    pub entries: Vec<ComparisonEntry>,
}

impl ComparisonReport {
    fn new(p: &ModelParams, convention: Convention, bands: Bands) -> Self {
        Self {
            params: p.clone(),
            convention,
            bands,
            entries: Vec::new(),
        }
    }

    fn push(&mut self, label: impl Into<String>, parameter: f64, history_value: f64, formula_value: f64, band: f64) {
        let relative_error = self.bands.relative_error(history_value, formula_value);
        self.entries.push(ComparisonEntry {
            label: label.into(),
            parameter,
            history_value,
            formula_value,
            relative_error,
            band,
            pass: relative_error <= band,
        });
    }

    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, label: &str) -> Option<&ComparisonEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn series(&self) -> Vec<SeriesPoint> {
        self.entries
            .iter()
            .map(|e| SeriesPoint::new(e.parameter, e.relative_error, e.band, true))
            .collect()
    }
}

/// Probability of no jump over `t`: `‖e^{−iH_eff t} ψ‖²`.
pub fn no_jump_formula(p: &ModelParams, t: f64) -> Result<f64> {
    let r = build_reduced_model(p)?;
    Ok(evolve_no_jump(&r.h_eff, &p.system_state()?, t)?.norm_sqr())
}

/// Probability of a jump in the step ending at `t`:
/// `(2δtκ²/G) ‖a e^{−iH_eff t} ψ‖²`.
pub fn one_jump_formula(p: &ModelParams, t: f64) -> Result<f64> {
    let r = build_reduced_model(p)?;
    let psi = apply_jump(&r.jump_op, &evolve_no_jump(&r.h_eff, &p.system_state()?, t)?);
    Ok(r.jump_rate * p.dt * psi.norm_sqr())
}

/// All-zeros history probability against the no-jump formula over `Nδt`.
pub fn compare_no_jump(p: &ModelParams, convention: Convention, bands: Bands) -> Result<ComparisonReport> {
    let engine = HistoryEngine::new(p, convention)?;
    let measured = engine.probability(&History::zeros(p.n_steps))?;
    let formula = no_jump_formula(p, p.total_time())?;
    let mut report = ComparisonReport::new(p, convention, bands);
    report.push("no_jump", p.n_steps as f64, measured, formula, bands.history_band(p));
    Ok(report)
}

/// Photon first seen at 1-based projection `jump_step` and absorbed within
/// `window_steps` further projections, against the one-jump formula; plus
/// the post-onset persistence `(1 − Γ1δt)^k` for `k ≤ window_steps` and the
/// one-step absorption probability `Γ1δt`.
///
/// Later events are marginalized, so the class probability is
/// `p(0…01) − p(0…01^{w+1})` over prefixes.
pub fn compare_one_jump(
    p: &ModelParams,
    jump_step: usize,
    window_steps: usize,
    convention: Convention,
    bands: Bands,
) -> Result<ComparisonReport> {
    if jump_step == 0 || jump_step > p.n_steps {
        return Err(Error::invalid(
            "jump_step",
            format!("must lie in 1..={}, got {jump_step}", p.n_steps),
        ));
    }
    if window_steps == 0 {
        return Err(Error::invalid("window_steps", "window must span at least one step"));
    }
    if jump_step + window_steps > p.n_steps {
        return Err(Error::invalid(
            "window_steps",
            format!(
                "window of {window_steps} steps after step {jump_step} runs past n_steps {}",
                p.n_steps
            ),
        ));
    }
    let engine = HistoryEngine::new(p, convention)?;
    let mut prefix = vec![false; jump_step - 1];
    prefix.push(true);
    let mut branch = engine.branch(&prefix, &prefix)?;
    let onset = engine.trace(&branch).re;

    // persist[k]: photon still seen k projections after onset.
    let mut persist = Vec::with_capacity(window_steps + 1);
    persist.push(onset);
    for k in 0..window_steps {
        branch = engine.step(&branch, jump_step + k, true, true);
        persist.push(engine.trace(&branch).re);
    }

    let mut report = ComparisonReport::new(p, convention, bands);
    let leakage_band = (-p.gamma1 * window_steps as f64 * p.dt).exp();
    report.push(
        "one_jump_class",
        jump_step as f64,
        onset - persist[window_steps],
        one_jump_formula(p, jump_step as f64 * p.dt)?,
        bands.history_band(p) + leakage_band,
    );

    if onset > bands.floor {
        let step_band = bands.step_band(p);
        let survive = 1.0 - p.gamma1 * p.dt;
        report.push("absorption", 1.0, (onset - persist[1]) / onset, p.gamma1 * p.dt, step_band);
        for (k, &pk) in persist.iter().enumerate().skip(1) {
            report.push(
                format!("persistence_{k}"),
                k as f64,
                pk / onset,
                survive.powi(k as i32),
                step_band,
            );
        }
    }
    Ok(report)
}
