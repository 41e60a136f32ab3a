use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelKind, ParameterRanges};
use crate::error::{Error, Result};

/// One sweep: a random network, a stable model on it, an initial deviation,
/// and the grid of sampling frequencies and sample-set sizes to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: u64,
    pub network: NetworkConfig,
    pub model: ModelConfig,
    pub init: InitConfig,
    pub sampling: SamplingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub n: usize,
    pub edge_probability: f64,
}

/// Fixed parameters when all of those the kind needs are given, otherwise a
/// seeded draw from `ranges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub influx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(default)]
    pub ranges: ParameterRanges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Bandlimited,
    Arbitrary,
}

/// The initial deviation `y(0) = x(0) - x_inf`.
///
/// A bandlimited init takes either a bandwidth `omega` or a mode count
/// `modes` (the bandwidth holding exactly that many smoothest modes).
/// `amplitude` is `||y(0)||_2`, or `||y(0)|| / ||x_inf||` when `relative_amplitude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub kind: InitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    pub amplitude: f64,
    #[serde(default)]
    pub relative_amplitude: bool,
}

impl InitConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Parameter(format!(
                "amplitude must be > 0, got {}",
                self.amplitude
            )));
        }
        match (self.kind, self.omega, self.modes) {
            (InitKind::Bandlimited, Some(_), Some(_)) | (InitKind::Bandlimited, None, None) => {
                return Err(Error::Parameter(
                    "bandlimited init needs exactly one of omega, modes".into(),
                ))
            }
            (InitKind::Arbitrary, None, None) | (InitKind::Bandlimited, _, _) => {}
            (InitKind::Arbitrary, _, _) => {
                return Err(Error::Parameter(
                    "arbitrary init takes no omega or modes".into(),
                ))
            }
        }
        if self.modes.is_some_and(|m| m == 0 || m > n) {
            return Err(Error::Parameter(format!("modes must be in 1..={n}")));
        }
        if self.omega.is_some_and(|w| !(w > 0.0)) {
            return Err(Error::Parameter(
                "omega must be > 0 (an empty band carries no signal)".into(),
            ));
        }
        Ok(())
    }
}

fn default_epsilon_relative() -> f64 {
    1e-3
}

fn default_true() -> bool {
    true
}

/// Sampling frequencies are multiples of `Omega_c / pi`. `epsilon` defaults
/// to `epsilon_relative * ||y(0)||`; `horizon` and `eval_step` default to the
/// decay-based horizon and `pi / (4 Omega_c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub fs_multiples: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_true")]
    pub benchmark: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_epsilon_relative")]
    pub epsilon_relative: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_step: Option<f64>,
}

fn ascending<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: SweepConfig =
            toml::from_str(text).map_err(|e| Error::format("sweep config", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SweepConfig::from_toml(&text).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(path.display().to_string(), message),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization is infallible")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.network.n;
        let p = self.network.edge_probability;
        if n < 2 || !(p > 0.0 && p <= 1.0) {
            return Err(Error::Parameter(format!(
                "network needs n >= 2 and p in (0, 1] (n = {n}, p = {p})"
            )));
        }
        let s = &self.sampling;
        if s.fs_multiples.is_empty()
            || !ascending(&s.fs_multiples)
            || s.fs_multiples.iter().any(|m| !(*m > 0.0 && m.is_finite()))
        {
            return Err(Error::Parameter(
                "fs_multiples must be nonempty, positive and ascending".into(),
            ));
        }
        if s.sample_sizes.is_empty() || !ascending(&s.sample_sizes) || s.sample_sizes[0] == 0 {
            return Err(Error::Parameter(
                "sample_sizes must be nonempty, positive and ascending".into(),
            ));
        }
        if let Some(&big) = s.sample_sizes.last().filter(|&&v| v > n) {
            return Err(Error::Parameter(format!(
                "sample size {big} exceeds n = {n}"
            )));
        }
        for (name, v) in [
            ("epsilon", s.epsilon),
            ("horizon", s.horizon),
            ("eval_step", s.eval_step),
        ] {
            if let Some(v) = v.filter(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Parameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(s.epsilon_relative > 0.0) {
            return Err(Error::Parameter(format!(
                "epsilon_relative must be > 0, got {}",
                s.epsilon_relative
            )));
        }
        self.init.validate(n)
    }
}
