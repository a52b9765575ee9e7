use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TdsError};
use crate::hard_instances::scenario::{ScenarioKind, TruthSpec};
use crate::tds::{Budgets, Mode, Overrides, ParameterMode, TdsParams};

/// Schema version accepted by [`RunConfig::from_toml`].
pub const CONFIG_VERSION: u32 = 1;

/// One experiment: a scenario, a learner and the seeds to run it on.
///
/// ```toml
/// version = 1
/// seeds = [0, 1, 2]
///
/// [scenario]
/// kind = "cov-inflation"
/// d = 6
/// k = 2
/// params = { factor = 4.0 }
///
/// [learner]
/// mode = "homogeneous"
/// eps = 0.25
///
/// [samples]
/// m_train = 50000
/// m_test = 50000
/// m_holdout = 10000
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub scenario: ScenarioConfig,
    pub learner: LearnerConfig,
    pub samples: SampleSizes,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: String,
    pub d: usize,
    pub k: usize,
    #[serde(default = "default_eta")]
    pub eta_min: f64,
    #[serde(default)]
    pub params: toml::Table,
}

fn default_eta() -> f64 {
    0.15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub mode: Mode,
    pub eps: f64,
    /// Defaults to the scenario's `k`.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_parameter_mode")]
    pub parameter_mode: ParameterMode,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub c_prime: f64,
    #[serde(default = "one")]
    pub c_dprime: f64,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub budgets: Option<BudgetConfig>,
}

fn default_parameter_mode() -> ParameterMode {
    ParameterMode::Practical
}

fn default_delta() -> f64 {
    0.1
}

fn one() -> f64 {
    1.0
}

/// Enumeration caps. TOML integers are 64-bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub cover: u64,
    pub candidates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSizes {
    pub m_train: usize,
    pub m_test: usize,
    pub m_holdout: usize,
}

fn config_err(path: &str, msg: impl Into<String>) -> TdsError {
    TdsError::Config { path: path.into(), msg: msg.into() }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_err("", e.message()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(table))
            .map_err(|e| config_err(&e.path().to_string(), e.inner().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Structural checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(config_err("version", format!("expected {CONFIG_VERSION}, got {}", self.version)));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "at least one seed is required"));
        }
        let s = &self.samples;
        for (name, v) in [("m_train", s.m_train), ("m_test", s.m_test), ("m_holdout", s.m_holdout)] {
            if v == 0 {
                return Err(config_err(&format!("samples.{name}"), "must be at least 1"));
            }
        }
        if self.scenario.d == 0 {
            return Err(config_err("scenario.d", "must be at least 1"));
        }
        if self.scenario.k == 0 {
            return Err(config_err("scenario.k", "must be at least 1"));
        }
        if !(0.0..0.5).contains(&self.scenario.eta_min) {
            return Err(config_err("scenario.eta_min", "must lie in [0, 1/2)"));
        }
        if !(self.learner.eps > 0.0 && self.learner.eps < 1.0) {
            return Err(config_err("learner.eps", "must lie in (0, 1)"));
        }
        if self.learner.k == Some(0) {
            return Err(config_err("learner.k", "must be at least 1"));
        }
        self.scenario_kind()?;
        self.tds_params()
            .resolve(self.scenario.d)
            .map_err(|e| config_err("learner", e.to_string()))?;
        Ok(())
    }

    pub fn scenario_kind(&self) -> Result<ScenarioKind> {
        if !ScenarioKind::NAMES.contains(&self.scenario.kind.as_str()) {
            return Err(config_err(
                "scenario.kind",
                format!("unknown kind `{}`, expected one of {:?}", self.scenario.kind, ScenarioKind::NAMES),
            ));
        }
        let mut table = self.scenario.params.clone();
        if table.contains_key("kind") {
            return Err(config_err("scenario.params.kind", "set the kind on `scenario.kind`"));
        }
        table.insert("kind".into(), toml::Value::String(self.scenario.kind.clone()));
        // The tagged enum buffers its input, so errors cannot point deeper.
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| config_err("scenario.params", e.message()))
    }

    pub fn truth_spec(&self) -> TruthSpec {
        TruthSpec {
            d: self.scenario.d,
            k: self.scenario.k,
            eta_min: self.scenario.eta_min,
            homogeneous: self.learner.mode == Mode::Homogeneous,
        }
    }

    pub fn tds_params(&self) -> TdsParams {
        let l = &self.learner;
        TdsParams {
            eps: l.eps,
            delta: l.delta,
            k: l.k.unwrap_or(self.scenario.k),
            mode: l.mode,
            c: l.c,
            c_prime: l.c_prime,
            c_dprime: l.c_dprime,
            parameter_mode: l.parameter_mode,
            overrides: l.overrides,
            budgets: l
                .budgets
                .map(|b| Budgets { cover: b.cover.into(), candidates: b.candidates.into() })
                .unwrap_or_default(),
        }
    }
}
