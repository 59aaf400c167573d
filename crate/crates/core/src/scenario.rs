//! Scenario files: one TOML document describing a circuit, its memory
//! element, the initial state and the numerics.
//!
//! Durations are given in oscillation periods `T0`. Gain-loss strengths of
//! the memristor are relative to `gamma_PT(mu)`; meminductor couplings are
//! relative to `mu_PT(Gamma)`.
//!
//! ```toml
//! variant = "memristive"
//!
//! [circuit]
//! mu = 0.3
//!
//! [memristor]
//! gamma_on_rel = 2.0
//! gamma_off_rel = 0.3
//! x0 = 0.5
//!
//! [initial]
//! kind = "psi1"
//! amplitude = 10.0
//! ```

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::{gamma_pt, mu_pt, CircuitParams, PhiState};
use crate::diagnostics::{make_initial_state, InitialKind, DEFAULT_THRESHOLD};
use crate::dynamics::{IntegrationSettings, SystemVariant};
use crate::error::ParamError;
use crate::memory::{Meminductor, Memristor, Polarity, DEFAULT_CLAMP_EPSILON};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    Static,
    Memristive,
    Meminductive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    /// Absolute coupling `mu` (static and memristive dimers).
    #[serde(default = "one")]
    pub mu: f64,
    /// Dimensionless gain-loss strength `Gamma` (static and meminductive).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Static dimer only: `gamma / gamma_PT(mu)`. Exclusive with `gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_rel: Option<f64>,
}

impl Default for CircuitSection {
    fn default() -> Self {
        Self {
            mu: 1.0,
            gamma: None,
            gamma_rel: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemristorSection {
    pub gamma_on_rel: f64,
    pub gamma_off_rel: f64,
    #[serde(default = "half")]
    pub x0: f64,
    #[serde(default = "positive")]
    pub polarity: Polarity,
    #[serde(default = "one_u32")]
    pub p: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeminductorSection {
    /// Strongest coupling (smallest inductance), relative to `mu_PT`.
    pub mu_less_rel: f64,
    /// Weakest coupling (largest inductance), relative to `mu_PT`. Defaults
    /// to `mu_less_rel - mu_gap_rel`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_greater_rel: Option<f64>,
    #[serde(default = "default_gap")]
    pub mu_gap_rel: f64,
    #[serde(default = "half")]
    pub y0: f64,
    #[serde(default = "positive")]
    pub polarity: Polarity,
    #[serde(default = "one_u32")]
    pub p: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    /// Value of the nonzero component: `V1(0)` in `v0` for `psi1`, so
    /// `k|psi_1>` has amplitude `k/2`.
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: InitialKind::Psi1,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    /// Step in periods.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Run length in periods.
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Amplification window in periods.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    #[serde(default = "default_epsilon")]
    pub clamp_epsilon: f64,
    #[serde(default = "default_cutoff")]
    pub divergence_cutoff: f64,
    #[serde(default = "default_halvings")]
    pub max_halvings: u32,
    /// Static dimer only: rescale instead of stopping at the cutoff.
    #[serde(default)]
    pub rescale_linear: bool,
    /// Phase threshold on the amplification rate, in `omega0`.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_end: default_t_end(),
            tau: default_tau(),
            decimation: default_decimation(),
            clamp_epsilon: default_epsilon(),
            divergence_cutoff: default_cutoff(),
            max_halvings: default_halvings(),
            rescale_linear: false,
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default)]
    pub gamma_rel_min: f64,
    #[serde(default = "default_spectrum_max")]
    pub gamma_rel_max: f64,
    #[serde(default = "default_spectrum_points")]
    pub points: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            gamma_rel_min: 0.0,
            gamma_rel_max: default_spectrum_max(),
            points: default_spectrum_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn value(&self, k: usize) -> f64 {
        if k + 1 == self.count {
            return self.max;
        }
        self.min + (self.max - self.min) * k as f64 / (self.count - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.value(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis1: AxisSpec,
    pub axis2: AxisSpec,
}

/// A named variation on the base scenario. Every key other than `label` and
/// `kind` names a scalar field (see [`ScenarioConfig::set_field`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOverride {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<InitialKind>,
    #[serde(flatten)]
    pub values: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub variant: VariantKind,
    #[serde(default)]
    pub circuit: CircuitSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memristor: Option<MemristorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meminductor: Option<MeminductorSection>,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunOverride>,
}

/// Everything needed to integrate and classify one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub params: CircuitParams,
    pub variant: SystemVariant,
    pub phi0: PhiState,
    pub mem0: Option<f64>,
    pub settings: IntegrationSettings,
    /// Amplification window in `1/omega0`.
    pub tau: f64,
    pub threshold: f64,
    /// `gamma_PT` of the resolved circuit, used to scale reported rates.
    pub gamma_pt: f64,
}

/// Names accepted by [`ScenarioConfig::set_field`].
pub const SCALAR_FIELDS: &[&str] = &[
    "mu",
    "gamma",
    "gamma_rel",
    "gamma_on_rel",
    "gamma_off_rel",
    "x0",
    "mu_less_rel",
    "mu_greater_rel",
    "mu_gap_rel",
    "y0",
    "polarity",
    "p",
    "amplitude",
    "dt",
    "t_end",
    "tau",
];

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Effective configuration with every default written out.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.normalized()).expect("scenario config is always representable as TOML")
    }

    /// SHA-256 of the effective configuration, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    /// Copy with derived defaults made explicit.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        if let Some(m) = out.meminductor.as_mut() {
            m.mu_greater_rel.get_or_insert(m.mu_less_rel - m.mu_gap_rel);
        }
        if out.variant == VariantKind::Meminductive && out.circuit.gamma.is_none() {
            out.circuit.gamma = Some(0.5);
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.circuit;
        if c.gamma.is_some() && c.gamma_rel.is_some() {
            return invalid("circuit.gamma and circuit.gamma_rel are mutually exclusive");
        }
        match self.variant {
            VariantKind::Static => {
                if c.gamma.is_none() && c.gamma_rel.is_none() {
                    return invalid("static variant needs circuit.gamma or circuit.gamma_rel");
                }
            }
            VariantKind::Memristive => {
                if self.memristor.is_none() {
                    return invalid("memristive variant needs a [memristor] section");
                }
                if c.gamma.is_some() || c.gamma_rel.is_some() {
                    return invalid("memristive variant takes its gain-loss strength from [memristor]");
                }
            }
            VariantKind::Meminductive => {
                if self.meminductor.is_none() {
                    return invalid("meminductive variant needs a [meminductor] section");
                }
                if c.gamma_rel.is_some() {
                    return invalid("meminductive variant takes circuit.gamma, not circuit.gamma_rel");
                }
            }
        }
        if self.integration.rescale_linear && self.variant != VariantKind::Static {
            return invalid("integration.rescale_linear applies to the static variant only");
        }
        if self.variant != VariantKind::Memristive && self.memristor.is_some() {
            return invalid("[memristor] given for a non-memristive variant");
        }
        if self.variant != VariantKind::Meminductive && self.meminductor.is_some() {
            return invalid("[meminductor] given for a non-meminductive variant");
        }
        let i = &self.integration;
        for (name, v) in [
            ("dt", i.dt),
            ("t_end", i.t_end),
            ("tau", i.tau),
            ("threshold", i.threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("integration.{name} must be positive, got {v}"));
            }
        }
        if let Some(s) = &self.spectrum {
            if s.points < 2
                || s.gamma_rel_max.partial_cmp(&s.gamma_rel_min) != Some(Ordering::Greater)
                || s.gamma_rel_min < 0.0
            {
                return invalid("spectrum needs points >= 2 and 0 <= gamma_rel_min < gamma_rel_max");
            }
        }
        if let Some(s) = &self.sweep {
            for a in [&s.axis1, &s.axis2] {
                if !SCALAR_FIELDS.contains(&a.name.as_str()) {
                    return invalid(format!("sweep axis `{}` is not a scalar config field", a.name));
                }
                if a.count < 2 || a.min.partial_cmp(&a.max) != Some(Ordering::Less) {
                    return invalid(format!("sweep axis `{}` needs count >= 2 and min < max", a.name));
                }
            }
            if s.axis1.name == s.axis2.name {
                return invalid("sweep axes must differ");
            }
        }
        for r in &self.runs {
            if r.label.is_empty() || r.label.contains(['/', '\\']) {
                return invalid(format!(
                    "run label `{}` must be a non-empty file-name-safe string",
                    r.label
                ));
            }
            for name in r.values.keys() {
                if !SCALAR_FIELDS.contains(&name.as_str()) {
                    return invalid(format!("run `{}` overrides unknown field `{name}`", r.label));
                }
            }
        }
        let mut labels: Vec<&str> = self.runs.iter().map(|r| r.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return invalid("run labels must be unique");
        }
        Ok(())
    }

    /// Sets one scalar field by name; used by sweeps and run overrides.
    pub fn set_field(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        let variant = self.variant;
        let need = |present: bool, section: &str| -> Result<(), ConfigError> {
            if present {
                Ok(())
            } else {
                invalid(format!(
                    "field `{name}` needs a [{section}] section ({variant:?} variant)"
                ))
            }
        };
        match name {
            "mu" => self.circuit.mu = value,
            "gamma" => {
                self.circuit.gamma = Some(value);
                self.circuit.gamma_rel = None;
            }
            "gamma_rel" => {
                self.circuit.gamma_rel = Some(value);
                self.circuit.gamma = None;
            }
            "gamma_on_rel" | "gamma_off_rel" | "x0" => {
                need(self.memristor.is_some(), "memristor")?;
                let m = self.memristor.as_mut().unwrap();
                match name {
                    "gamma_on_rel" => m.gamma_on_rel = value,
                    "gamma_off_rel" => m.gamma_off_rel = value,
                    _ => m.x0 = value,
                }
            }
            "mu_less_rel" | "mu_greater_rel" | "mu_gap_rel" | "y0" => {
                need(self.meminductor.is_some(), "meminductor")?;
                let m = self.meminductor.as_mut().unwrap();
                match name {
                    "mu_less_rel" => m.mu_less_rel = value,
                    "mu_greater_rel" => m.mu_greater_rel = Some(value),
                    "mu_gap_rel" => {
                        m.mu_gap_rel = value;
                        m.mu_greater_rel = None;
                    }
                    _ => m.y0 = value,
                }
            }
            "polarity" => {
                let pol = match value {
                    1.0 => Polarity::Positive,
                    -1.0 => Polarity::Negative,
                    v => return invalid(format!("polarity must be +1 or -1, got {v}")),
                };
                match (self.memristor.as_mut(), self.meminductor.as_mut()) {
                    (Some(m), _) => m.polarity = pol,
                    (_, Some(m)) => m.polarity = pol,
                    _ => return invalid("polarity needs a memory element"),
                }
            }
            "p" => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX)) {
                    return invalid(format!("window exponent p must be a positive integer, got {value}"));
                }
                let p = value as u32;
                match (self.memristor.as_mut(), self.meminductor.as_mut()) {
                    (Some(m), _) => m.p = p,
                    (_, Some(m)) => m.p = p,
                    _ => return invalid("p needs a memory element"),
                }
            }
            "amplitude" => self.initial.amplitude = value,
            "dt" => self.integration.dt = value,
            "t_end" => self.integration.t_end = value,
            "tau" => self.integration.tau = value,
            other => return invalid(format!("unknown scalar field `{other}`")),
        }
        Ok(())
    }

    /// The base scenario with one run's overrides applied.
    pub fn with_run(&self, run: &RunOverride) -> Result<Self, ConfigError> {
        let mut out = self.clone();
        out.runs.clear();
        if let Some(kind) = run.kind {
            out.initial.kind = kind;
        }
        for (name, value) in &run.values {
            out.set_field(name, *value)?;
        }
        out.validate()?;
        Ok(out)
    }

    /// Labelled single-run scenarios: the `[[runs]]` list, or the base
    /// scenario under the label `run` when there is none.
    pub fn expand_runs(&self) -> Result<Vec<(String, ScenarioConfig)>, ConfigError> {
        if self.runs.is_empty() {
            return Ok(vec![("run".to_string(), self.clone())]);
        }
        self.runs
            .iter()
            .map(|r| Ok((r.label.clone(), self.with_run(r)?)))
            .collect()
    }

    pub fn resolve(&self) -> Result<ResolvedScenario, ConfigError> {
        self.validate()?;
        let cfg = self.normalized();
        let c = &cfg.circuit;
        let (params, variant, mem0) = match cfg.variant {
            VariantKind::Static => {
                let gamma = match (c.gamma, c.gamma_rel) {
                    (Some(g), _) => g,
                    (_, Some(r)) => r * gamma_pt(c.mu, 1.0),
                    _ => unreachable!("validated"),
                };
                (CircuitParams::new(c.mu, gamma)?, SystemVariant::Static { gamma }, None)
            }
            VariantKind::Memristive => {
                let m = cfg.memristor.as_ref().unwrap();
                let params = CircuitParams::new(c.mu, 0.0)?;
                let g = gamma_pt(c.mu, params.omega0());
                if m.gamma_on_rel.partial_cmp(&m.gamma_off_rel) != Some(Ordering::Greater) {
                    return invalid("memristor needs gamma_on_rel > gamma_off_rel");
                }
                let device =
                    Memristor::from_gamma_bounds(m.gamma_off_rel * g, m.gamma_on_rel * g, params.c(), m.polarity, m.p)?;
                (params, SystemVariant::Memristive(device), Some(m.x0))
            }
            VariantKind::Meminductive => {
                let m = cfg.meminductor.as_ref().unwrap();
                let gamma = c.gamma.unwrap();
                let base = mu_pt(gamma);
                let greater = m.mu_greater_rel.unwrap() * base;
                let less = m.mu_less_rel * base;
                let params = CircuitParams::new(less, gamma)?;
                let device = Meminductor::from_couplings(greater, less, params.l(), m.polarity, m.p)?;
                (params, SystemVariant::Meminductive { device, gamma }, Some(m.y0))
            }
        };
        if let Some(m) = mem0 {
            if !(m > 0.0 && m < 1.0) {
                return invalid(format!("initial memory state must lie in (0, 1), got {m}"));
            }
        }
        let i = &cfg.integration;
        let period = params.period();
        let settings = IntegrationSettings {
            dt: i.dt * period,
            t_end: i.t_end * period,
            decimation: i.decimation,
            clamp_epsilon: i.clamp_epsilon,
            divergence_cutoff: i.divergence_cutoff,
            max_halvings: i.max_halvings,
            rescale_linear: i.rescale_linear,
        };
        settings.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let phi0 = make_initial_state(cfg.initial.kind, cfg.initial.amplitude);
        if phi0.to_array().iter().all(|v| *v == 0.0) {
            return invalid("initial state is zero");
        }
        Ok(ResolvedScenario {
            gamma_pt: gamma_pt(params.mu(), params.omega0()),
            params,
            variant,
            phi0,
            mem0,
            settings,
            tau: i.tau * period,
            threshold: i.threshold,
        })
    }
}

fn one() -> f64 {
    1.0
}
fn one_u32() -> u32 {
    1
}
fn half() -> f64 {
    0.5
}
fn positive() -> Polarity {
    Polarity::Positive
}
fn default_gap() -> f64 {
    0.2
}
fn default_dt() -> f64 {
    1.0 / 500.0
}
fn default_t_end() -> f64 {
    200.0
}
fn default_tau() -> f64 {
    100.0
}
fn default_decimation() -> usize {
    10
}
fn default_epsilon() -> f64 {
    DEFAULT_CLAMP_EPSILON
}
fn default_cutoff() -> f64 {
    1e12
}
fn default_halvings() -> u32 {
    4
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_spectrum_max() -> f64 {
    5.1
}
fn default_spectrum_points() -> usize {
    511
}
