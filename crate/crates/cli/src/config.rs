//! Experiment configuration: TOML on disk, `key=value` overrides on the
//! command line, validation before any work starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use oqrw_core::sde::Scheme;
use oqrw_core::spin::{BlochState, KrausPair, KrausParamsUvrs, ModelParams, ScalingParams};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Discrete,
    Sde,
    Fp,
    Toy,
    Analyze,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Discrete => "discrete",
            Mode::Sde => "sde",
            Mode::Fp => "fp",
            Mode::Toy => "toy",
            Mode::Analyze => "analyze",
        }
    }
}

/// Either `(u, v, r, s)` or `(a, omega0[, epsilon])`, never both.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl ModelSpec {
    pub fn uvrs(u: f64, v: f64, r: f64, s: f64) -> Self {
        Self { u: Some(u), v: Some(v), r: Some(r), s: Some(s), ..Default::default() }
    }

    pub fn continuum(a: f64, omega0: f64) -> Self {
        Self { a: Some(a), omega0: Some(omega0), ..Default::default() }
    }

    pub fn scaling(a: f64, omega0: f64, epsilon: f64) -> Self {
        Self { epsilon: Some(epsilon), ..Self::continuum(a, omega0) }
    }

    fn has_uvrs(&self) -> bool {
        self.u.is_some() || self.v.is_some() || self.r.is_some() || self.s.is_some()
    }

    fn has_continuum(&self) -> bool {
        self.a.is_some() || self.omega0.is_some() || self.epsilon.is_some()
    }

    pub fn uvrs_params(&self) -> Result<Option<KrausParamsUvrs>, CliError> {
        match (self.u, self.v, self.r, self.s) {
            (Some(u), Some(v), Some(r), Some(s)) => Ok(Some(KrausParamsUvrs::new(u, v, r, s).map_err(field_err("model"))?)),
            (None, None, None, None) => Ok(None),
            _ => Err(CliError::Config("model: u, v, r and s must be given together".into())),
        }
    }

    pub fn model_params(&self) -> Result<Option<ModelParams>, CliError> {
        match (self.a, self.omega0) {
            (Some(a), Some(w)) => Ok(Some(ModelParams::new(a, w).map_err(field_err("model"))?)),
            (None, None) => Ok(None),
            _ => Err(CliError::Config("model: a and omega0 must be given together".into())),
        }
    }

    pub fn require_model(&self) -> Result<ModelParams, CliError> {
        self.model_params()?.ok_or_else(|| CliError::Config("model.a: this mode needs a and omega0".into()))
    }

    /// The Kraus pair for discrete walks.
    pub fn kraus(&self) -> Result<KrausPair, CliError> {
        if let Some(p) = self.uvrs_params()? {
            return KrausPair::from_uvrs(&p).map_err(field_err("model"));
        }
        let m = self.require_model()?;
        let eps = self.epsilon.ok_or_else(|| CliError::Config("model.epsilon: needed to build a Kraus pair from (a, omega0)".into()))?;
        let sp = ScalingParams::new(m.a, m.omega0, eps).map_err(field_err("model.epsilon"))?;
        KrausPair::from_scaling(&sp).map_err(field_err("model.epsilon"))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match (self.has_uvrs(), self.has_continuum()) {
            (true, true) => Err(CliError::Config("model: give either u, v, r, s or a, omega0, epsilon, not both".into())),
            (false, false) => Err(CliError::Config("model: no parameters given".into())),
            (true, false) => self.uvrs_params().map(|_| ()),
            (false, true) => {
                self.require_model()?;
                if let Some(e) = self.epsilon {
                    if !(e > 0.0 && e.is_finite()) {
                        return Err(CliError::Config("model.epsilon: must be positive".into()));
                    }
                }
                Ok(())
            }
        }
    }
}

fn field_err(field: &'static str) -> impl Fn(oqrw_core::Error) -> CliError {
    move |e| CliError::Config(format!("{field}: {e}"))
}

/// Initial internal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rho0Spec {
    MaximallyMixed,
    PureUp,
    PureDown,
    Bloch([f64; 3]),
}

impl Rho0Spec {
    pub fn state(&self) -> Result<BlochState, CliError> {
        let s = match *self {
            Rho0Spec::MaximallyMixed => BlochState::maximally_mixed(),
            Rho0Spec::PureUp => BlochState::pure_up(),
            Rho0Spec::PureDown => BlochState::pure_down(),
            Rho0Spec::Bloch([a, b, c]) => BlochState::new(a, b, c),
        };
        s.validate().map_err(field_err("rho0"))?;
        Ok(s)
    }
}

fn default_trajectories() -> usize {
    1
}

fn default_recorded() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Discrete walks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<u64>,
    /// Continuous modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
    #[serde(default)]
    pub scheme: Scheme,
    /// How many trajectories get their own CSV.
    #[serde(default = "default_recorded")]
    pub recorded_trajectories: usize,
    /// Times (or step counts) at which ensemble samples and histograms are taken.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_times: Vec<f64>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            n_steps: None,
            t_max: None,
            dt: None,
            n_trajectories: 1,
            stride: None,
            scheme: Scheme::default(),
            recorded_trajectories: 1,
            sample_times: Vec::new(),
        }
    }
}

fn default_dx() -> f64 {
    0.05
}

fn default_safety() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_dx")]
    pub dx: f64,
    /// Fraction of the largest stable time step.
    #[serde(default = "default_safety")]
    pub safety: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { dx: default_dx(), safety: default_safety() }
    }
}

fn default_hysteresis() -> f64 {
    oqrw_core::flips::DEFAULT_HYSTERESIS
}

fn default_bins() -> usize {
    100
}

fn default_resamples() -> usize {
    200
}

fn default_max_rel_stderr() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    #[serde(default = "default_hysteresis")]
    pub hysteresis: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Track the mean `sqrt(det rho)` and fit its decay.
    #[serde(default)]
    pub purification: bool,
    /// Horizon (steps or time) of the purification series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purification_horizon: Option<f64>,
    #[serde(default = "default_max_rel_stderr")]
    pub max_rel_stderr: f64,
    /// `[t_start, t_end]` for the variance-slope fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deff_window: Option<[f64; 2]>,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    /// Tabulate `V(y)` on `[-y, y]` with this half-width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_range: Option<f64>,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            hysteresis: default_hysteresis(),
            bins: default_bins(),
            purification: false,
            purification_horizon: None,
            max_rel_stderr: default_max_rel_stderr(),
            deff_window: None,
            bootstrap_resamples: default_resamples(),
            potential_range: None,
        }
    }
}

fn default_label() -> String {
    "run".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default)]
    pub seed: u64,
    /// Prior run directory read by `analyze`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Output root; the run writes into `<output>/<label>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_rho0")]
    pub rho0: Rho0Spec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub estimators: EstimatorSpec,
}

fn default_rho0() -> Rho0Spec {
    Rho0Spec::MaximallyMixed
}

impl ExperimentConfig {
    pub fn new(mode: Mode, label: &str, model: ModelSpec) -> Self {
        Self {
            mode,
            label: label.into(),
            seed: 0,
            input: None,
            output: None,
            model,
            rho0: default_rho0(),
            run: RunSpec::default(),
            grid: GridSpec::default(),
            estimators: EstimatorSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Applies `key.path=value` overrides. Values are parsed as TOML
    /// literals, falling back to plain strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, CliError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Value::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o.split_once('=').ok_or_else(|| CliError::Config(format!("override `{o}`: expected key=value")))?;
            let value = parse_literal(raw.trim());
            set_path(&mut root, key.trim(), value)?;
        }
        root.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    fn t_max(&self) -> Result<f64, CliError> {
        let t = self.run.t_max.ok_or_else(|| CliError::Config("run.t_max: required for this mode".into()))?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Config("run.t_max: must be positive".into()));
        }
        Ok(t)
    }

    /// Checks every field against what the selected mode needs.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.label.is_empty() || self.label.contains(['/', '\\']) || self.label == ".." {
            return Err(CliError::Config("label: must be a plain, non-empty name".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(CliError::Config("seed: must not exceed 2^63 - 1 (TOML integers are signed)".into()));
        }
        if self.run.n_trajectories == 0 {
            return Err(CliError::Config("run.n_trajectories: must be at least 1".into()));
        }
        if self.run.stride == Some(0) {
            return Err(CliError::Config("run.stride: must be at least 1".into()));
        }
        let h = self.estimators.hysteresis;
        if !(h > 0.0 && h < 1.0) {
            return Err(CliError::Config("estimators.hysteresis: must lie in (0, 1)".into()));
        }
        if self.estimators.bins == 0 {
            return Err(CliError::Config("estimators.bins: must be at least 1".into()));
        }
        if let Some([lo, hi]) = self.estimators.deff_window {
            if !(hi > lo && lo >= 0.0) {
                return Err(CliError::Config("estimators.deff_window: need 0 <= start < end".into()));
            }
        }
        if self.run.sample_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(CliError::Config("run.sample_times: must be non-negative".into()));
        }
        if self.run.sample_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("run.sample_times: must be strictly increasing".into()));
        }
        if let Some(dt) = self.run.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::Config("run.dt: must be positive".into()));
            }
        }
        match self.mode {
            Mode::Discrete => {
                self.model.validate()?;
                self.model.kraus()?;
                self.rho0.state()?;
                let n = self.run.n_steps.ok_or_else(|| CliError::Config("run.n_steps: required for discrete walks".into()))?;
                if n == 0 {
                    return Err(CliError::Config("run.n_steps: must be at least 1".into()));
                }
                if self.run.sample_times.iter().any(|&t| t > n as f64 || t.fract() != 0.0) {
                    return Err(CliError::Config("run.sample_times: must be whole steps within run.n_steps".into()));
                }
            }
            Mode::Sde => {
                self.model.validate()?;
                self.model.require_model()?;
                self.rho0.state()?;
                let t = self.t_max()?;
                if self.run.dt.is_some_and(|dt| dt > t) {
                    return Err(CliError::Config("run.dt: must not exceed run.t_max".into()));
                }
                if self.run.sample_times.iter().any(|&s| s > t) {
                    return Err(CliError::Config("run.sample_times: must not exceed run.t_max".into()));
                }
            }
            Mode::Fp => {
                self.model.validate()?;
                self.model.require_model()?;
                self.rho0.state()?;
                let t = self.t_max()?;
                if !(self.grid.dx > 0.0) {
                    return Err(CliError::Config("grid.dx: must be positive".into()));
                }
                if !(self.grid.safety > 0.0 && self.grid.safety <= 1.0) {
                    return Err(CliError::Config("grid.safety: must lie in (0, 1]".into()));
                }
                if self.run.sample_times.iter().any(|&s| s > t) {
                    return Err(CliError::Config("run.sample_times: must not exceed run.t_max".into()));
                }
            }
            Mode::Toy => {
                self.t_max()?;
                if !(self.grid.dx > 0.0) {
                    return Err(CliError::Config("grid.dx: must be positive".into()));
                }
            }
            Mode::Analyze => {
                if self.input.is_none() {
                    return Err(CliError::Config("input: analyze needs a prior run directory".into()));
                }
            }
        }
        Ok(())
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Config(format!("override: empty key `{key}`")))?;
    let mut node = root;
    for p in parts {
        let table = node.as_table_mut().ok_or_else(|| CliError::Config(format!("override `{key}`: `{p}` is not a table")))?;
        node = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| CliError::Config(format!("override `{key}`: parent is not a table")))?;
    // integers given for float fields are accepted by the deserializer
    table.insert(last.to_string(), value);
    Ok(())
}
