//! Run configuration: one TOML file with flat dotted keys
//! (`model.kappa = 0.05`, `run.seed = 7`, `output.dir = "runs"`), command
//! line overrides on top, and a fully resolved form that is written back as
//! the run manifest.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use jumphist_core::analysis::{Bands, ScalingAxis, ScalingPair};
use jumphist_core::histories::{Convention, DEFAULT_N_CAP};
use jumphist_core::ModelParams;
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "JUMPHIST_OUT";
pub const DEFAULT_OUT: &str = "runs";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub output: OutputOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub seed: u64,
    /// Trajectory ensemble size M.
    pub traj_count: usize,
    /// Defaults to `n_steps * dt`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_time: Option<f64>,
    pub sweep: Vec<f64>,
    pub sweep_axis: ScalingAxis,
    pub scaling_pair: ScalingPair,
    pub n_cap: usize,
    /// Absorption window in steps; defaults to `5/(Γ1 dt)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_steps: Option<usize>,
    pub band_constant: f64,
    pub convention: Convention,
    /// 1-based step of the registered photon for `compare`; defaults to
    /// `max(2, n_steps/20)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_step: Option<usize>,
    pub checkpoints: usize,
    /// Decoherence threshold ε for the histories report.
    pub epsilon: f64,
    pub adiabatic_samples: usize,
    /// Γ2 multiplier for the adiabatic improvement check.
    pub gamma2_factor: f64,
    /// Accepted slope interval for `scaling`.
    pub slope_min: f64,
    pub slope_max: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            traj_count: 10_000,
            total_time: None,
            sweep: vec![100.0, 200.0, 500.0, 1000.0, 2000.0, 3100.0],
            sweep_axis: ScalingAxis::Gamma2,
            scaling_pair: ScalingPair::PhotonOnset,
            n_cap: DEFAULT_N_CAP,
            window_steps: None,
            band_constant: Bands::default().constant,
            convention: Convention::Literal,
            jump_step: None,
            checkpoints: 5,
            epsilon: 0.1,
            adiabatic_samples: 40,
            gamma2_factor: 10.0,
            slope_min: -2.3,
            slope_max: -1.7,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputOptions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl Default for RunConfig {
    /// Two-level system in the strongly dephased regime.
    fn default() -> Self {
        Self {
            model: ModelParams::qubit(0.05, 1.0, 500.0, 0.05, 2000),
            run: RunOptions::default(),
            output: OutputOptions::default(),
        }
    }
}

/// Values given on the command line; `None` leaves the file value alone.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n_steps: Option<usize>,
    pub traj_count: Option<usize>,
    pub total_time: Option<f64>,
    pub sweep: Option<Vec<f64>>,
    pub window_steps: Option<usize>,
    pub band_constant: Option<f64>,
}

/// Parses `"a,b,c"` into numbers.
pub fn parse_sweep(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|part| {
            let t = part.trim();
            t.parse::<f64>().map_err(|_| format!("sweep value {t:?} is not a number"))
        })
        .collect()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("{}", e.message().trim()).context(describe_span(text, e.span())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.run.seed = v;
        }
        if let Some(v) = &o.out {
            self.output.dir = Some(v.clone());
        }
        if let Some(v) = o.n_steps {
            self.model.n_steps = v;
        }
        if let Some(v) = o.traj_count {
            self.run.traj_count = v;
        }
        if let Some(v) = o.total_time {
            self.run.total_time = Some(v);
        }
        if let Some(v) = &o.sweep {
            self.run.sweep = v.clone();
        }
        if let Some(v) = o.window_steps {
            self.run.window_steps = Some(v);
        }
        if let Some(v) = o.band_constant {
            self.run.band_constant = v;
        }
    }

    /// Validates everything and fills in derived defaults, so that the
    /// result serializes to a self-contained manifest.
    pub fn resolve(mut self) -> Result<Self> {
        self.model.validate()?;
        let p = &self.model;
        let r = &mut self.run;

        let total = r.total_time.unwrap_or_else(|| p.total_time());
        if !(total.is_finite() && total > 0.0) {
            bail!("invalid value for `run.total_time`: must be finite and > 0, got {total}");
        }
        r.total_time = Some(total);

        let window = match r.window_steps {
            Some(w) => w,
            None => ((5.0 / (p.gamma1 * p.dt)).round() as usize).max(1),
        };
        if window == 0 {
            bail!("invalid value for `run.window_steps`: window must span at least one step");
        }
        r.window_steps = Some(window);
        r.jump_step = Some(r.jump_step.unwrap_or((p.n_steps / 20).max(2).min(p.n_steps)));

        if !(r.band_constant.is_finite() && r.band_constant > 0.0) {
            bail!("invalid value for `run.band_constant`: must be finite and > 0, got {}", r.band_constant);
        }
        if !(r.epsilon >= 0.0) {
            bail!("invalid value for `run.epsilon`: must be >= 0, got {}", r.epsilon);
        }
        if r.traj_count == 0 {
            bail!("invalid value for `run.traj_count`: need at least one trajectory");
        }
        if r.checkpoints == 0 {
            bail!("invalid value for `run.checkpoints`: need at least one checkpoint");
        }
        if let Some(bad) = r.sweep.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            bail!("invalid value for `run.sweep`: entries must be finite and > 0, got {bad}");
        }
        if !(r.gamma2_factor > 0.0) {
            bail!("invalid value for `run.gamma2_factor`: must be > 0");
        }
        if !(r.slope_min <= r.slope_max) {
            bail!("invalid value for `run.slope_min`: exceeds `run.slope_max`");
        }
        Ok(self)
    }

    pub fn bands(&self) -> Bands {
        Bands {
            constant: self.run.band_constant,
            ..Bands::default()
        }
    }

    pub fn total_time(&self) -> f64 {
        self.run.total_time.unwrap_or_else(|| self.model.total_time())
    }

    pub fn window_steps(&self) -> usize {
        self.run.window_steps.expect("resolved config")
    }

    pub fn jump_step(&self) -> usize {
        self.run.jump_step.expect("resolved config")
    }

    /// Output root: `output.dir`, else `$JUMPHIST_OUT`, else `runs`.
    pub fn output_root(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

fn describe_span(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(s) => {
            let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
            format!("invalid config at line {line}")
        }
        None => "invalid config".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
model.kappa = 0.05
model.gamma1 = 1.0
model.gamma2 = 500.0
model.d_sys = 2
model.dt = 0.05
model.n_steps = 40
model.initial_state = [[0.0, 0.0], [1.0, 0.0]]
run.seed = 9
run.sweep = [100.0, 3100.0]
output.dir = "out"
"#;

    #[test]
    fn parses_dotted_keys() {
        let c = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.model.n_steps, 40);
        assert_eq!(c.run.seed, 9);
        assert_eq!(c.run.sweep, vec![100.0, 3100.0]);
        assert_eq!(c.run.traj_count, 10_000);
        assert_eq!(c.output.dir, Some(PathBuf::from("out")));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml(&SAMPLE.replace("run.seed", "run.sede")).unwrap_err();
        assert!(format!("{err:#}").contains("sede"), "{err:#}");
        let err = RunConfig::from_toml(&SAMPLE.replace("model.kappa = 0.05\n", "")).unwrap_err();
        assert!(format!("{err:#}").contains("kappa"), "{err:#}");
    }

    #[test]
    fn validation_names_field() {
        let c = RunConfig::from_toml(&SAMPLE.replace("model.gamma2 = 500.0", "model.gamma2 = -1.0")).unwrap();
        let err = c.resolve().unwrap_err();
        assert!(format!("{err:#}").contains("gamma2"), "{err:#}");
    }

    #[test]
    fn overrides_win_and_defaults_resolve() {
        let mut c = RunConfig::from_toml(SAMPLE).unwrap();
        c.apply(&Overrides {
            seed: Some(3),
            n_steps: Some(400),
            sweep: Some(vec![1.0, 2.0]),
            ..Default::default()
        });
        let c = c.resolve().unwrap();
        assert_eq!(c.run.seed, 3);
        assert_eq!(c.model.n_steps, 400);
        assert_eq!(c.run.sweep, vec![1.0, 2.0]);
        assert_eq!(c.total_time(), 20.0);
        assert_eq!(c.window_steps(), 100);
        assert_eq!(c.jump_step(), 20);
    }

    #[test]
    fn manifest_is_a_valid_config() {
        let c = RunConfig::from_toml(SAMPLE).unwrap().resolve().unwrap();
        let text = c.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.clone().resolve().unwrap(), c);
    }

    #[test]
    fn sweep_flag_parsing() {
        assert_eq!(parse_sweep("1, 2.5,3e2").unwrap(), vec![1.0, 2.5, 300.0]);
        assert!(parse_sweep("1,,2").is_err());
        assert!(parse_sweep("a").is_err());
    }
}
