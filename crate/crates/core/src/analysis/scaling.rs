use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histories::{Convention, History, HistoryEngine};
use crate::model::ModelParams;

pub const MIN_SCALING_POINTS: usize = 4;
/// Required ratio between the largest and smallest `Gδt` in a sweep.
pub const MIN_SCALING_SPAN: f64 = 30.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingAxis {
    #[default]
    Gamma2,
    Dt,
}

impl std::str::FromStr for ScalingAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma2" => Ok(Self::Gamma2),
            "dt" => Ok(Self::Dt),
            other => Err(Error::invalid(
                "sweep_axis",
                format!("expected \"gamma2\" or \"dt\", got {other:?}"),
            )),
        }
    }
}

/// Pair of single-step-differing histories whose off-diagonal is tracked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingPair {
    /// Photon first seen at step `m+1` versus step `m`, with `m = N/2 + 1`;
    /// both histories keep seeing it afterwards.
    #[default]
    PhotonOnset,
    /// All zeros versus a single 1 at step `N/2 + 1`.
    EmissionVsSilence,
}

pub fn scaling_pair(pair: ScalingPair, n: usize) -> Result<(History, History)> {
    if n < 2 {
        return Err(Error::Degenerate(format!("scaling pair needs at least 2 steps, got {n}")));
    }
    let m = n / 2 + 1;
    Ok(match pair {
        ScalingPair::PhotonOnset => (History::onset(n, m + 1), History::onset(n, m)),
        ScalingPair::EmissionVsSilence => (History::zeros(n), History::single(n, m)),
    })
}

/// `|D[h,h']|² / (p(h) p(h'))`.
pub fn decoherence_ratio(p: &ModelParams, convention: Convention, h: &History, h2: &History) -> Result<f64> {
    let engine = HistoryEngine::new(p, convention)?;
    let d = engine.functional(h, h2)?;
    let ph = engine.probability(h)?;
    let ph2 = engine.probability(h2)?;
    Ok(d.norm_sqr() / (ph * ph2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub value: f64,
    pub g_dt: f64,
    pub ratio: f64,
    pub log_g_dt: f64,
    pub log_ratio: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub axis: ScalingAxis,
    pub pair: ScalingPair,
    pub histories: (History, History),
    pub slope: f64,
    pub intercept: f64,
    pub points: Vec<ScalingPoint>,
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Degenerate("least squares needs two or more paired points".into()));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Fits `log(|D|²/(pp'))` against `log(Gδt)` while sweeping Γ2 or δt.
pub fn decoherence_scaling(
    base: &ModelParams,
    axis: ScalingAxis,
    values: &[f64],
    pair: ScalingPair,
    convention: Convention,
) -> Result<ScalingFit> {
    if values.len() < MIN_SCALING_POINTS {
        return Err(Error::Degenerate(format!(
            "sweep has {} points, need at least {MIN_SCALING_POINTS}",
            values.len()
        )));
    }
    let params: Vec<ModelParams> = values
        .iter()
        .map(|&v| {
            let mut p = base.clone();
            match axis {
                ScalingAxis::Gamma2 => p.gamma2 = v,
                ScalingAxis::Dt => p.dt = v,
            }
            p.validate().map(|_| p)
        })
        .collect::<Result<_>>()?;

    let g_dt: Vec<f64> = params.iter().map(|p| p.g() * p.dt).collect();
    let lo = g_dt.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = g_dt.iter().copied().fold(0.0, f64::max);
    // Relative slack so that e.g. 0.01..0.3 counts as ×30 despite rounding.
    if !(hi / lo >= MIN_SCALING_SPAN * (1.0 - 1e-12)) {
        return Err(Error::Degenerate(format!(
            "sweep spans a factor {:.3} in G·dt, need at least {MIN_SCALING_SPAN}",
            hi / lo
        )));
    }

    let (h, h2) = scaling_pair(pair, base.n_steps)?;
    let ratios: Vec<f64> = params
        .par_iter()
        .map(|p| decoherence_ratio(p, convention, &h, &h2))
        .collect::<Result<_>>()?;
    if let Some(bad) = ratios.iter().position(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::Degenerate(format!(
            "ratio at sweep value {} is {}; cannot fit a power law",
            values[bad], ratios[bad]
        )));
    }

    let xs: Vec<f64> = g_dt.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = ratios.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys)?;
    let points = values
        .iter()
        .enumerate()
        .map(|(i, &value)| ScalingPoint {
            value,
            g_dt: g_dt[i],
            ratio: ratios[i],
            log_g_dt: xs[i],
            log_ratio: ys[i],
            residual: ys[i] - (slope * xs[i] + intercept),
        })
        .collect();
    Ok(ScalingFit {
        axis,
        pair,
        histories: (h, h2),
        slope,
        intercept,
        points,
    })
}
