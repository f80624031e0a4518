//! Experiment configuration, read from TOML.
//!
//! ```toml
//! name = "binary-desk"
//! n_runs = 20
//! n = 500
//! m = 50
//! snr = 10.0
//! sigma2_discard = 2.0
//! estimators = ["KB-GS-1", "KB-GS-2", "KB-St", "KB-Or", "ML-GS", "MAP-GS"]
//! master_seed = 2024
//!
//! [quantizer]
//! kind = "binary"
//! threshold = 1.0
//!
//! [em]
//! rel_tol = 1e-3
//! max_iters = 200
//! em_samples = 100
//! em_burn_in = 100
//! final_samples = 500
//! final_burn_in = 100
//! beta_grid = 200
//! ```
//!
//! Every key except `name`, `sigma2_discard`, `em`, `baseline_moments` and
//! `max_redraws` is required.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use quantid_core::baselines::MomentSource;
use quantid_core::inference::EmConfig;
use quantid_core::kernel::BETA_BOUNDS;
use quantid_core::sampler::{GibbsConfig, Method};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

/// Runs in a paper-scale experiment.
pub const PAPER_RUNS: usize = 100;
/// Runs in a desk-scale experiment.
pub const DESK_RUNS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "KB-GS-1")]
    KbGsJoint,
    #[serde(rename = "KB-GS-2")]
    KbGsMarginal,
    #[serde(rename = "KB-St")]
    KbStandard,
    #[serde(rename = "KB-Or")]
    KbOracle,
    #[serde(rename = "ML-GS")]
    MlGs,
    #[serde(rename = "MAP-GS")]
    MapGs,
}

impl EstimatorKind {
    pub const ALL: [Self; 6] = [
        Self::KbGsJoint,
        Self::KbGsMarginal,
        Self::KbStandard,
        Self::KbOracle,
        Self::MlGs,
        Self::MapGs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::KbGsJoint => "KB-GS-1",
            Self::KbGsMarginal => "KB-GS-2",
            Self::KbStandard => "KB-St",
            Self::KbOracle => "KB-Or",
            Self::MlGs => "ML-GS",
            Self::MapGs => "MAP-GS",
        }
    }

    /// RNG stream offset within a run. Fixed per estimator, so adding or
    /// removing an estimator leaves the others' draws unchanged. Offset 0
    /// is the data generator.
    pub fn stream_offset(self) -> u64 {
        match self {
            Self::KbGsJoint => 1,
            Self::KbGsMarginal => 2,
            Self::KbStandard => 3,
            Self::KbOracle => 4,
            Self::MlGs => 5,
            Self::MapGs => 6,
        }
    }

    pub fn gibbs_method(self) -> Option<Method> {
        match self {
            Self::KbGsJoint => Some(Method::Joint),
            Self::KbGsMarginal => Some(Method::Marginal),
            _ => None,
        }
    }

    pub fn from_method(method: Method) -> Self {
        match method {
            Method::Joint => Self::KbGsJoint,
            Method::Marginal => Self::KbGsMarginal,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // Accept the trailing-dot spelling too ("KB-St.").
        let key = s.trim().trim_end_matches('.');
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(key))
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                format!(
                    "unknown estimator `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum QuantizerSpec {
    /// `±1` around `threshold`.
    Binary { threshold: f64 },
    /// `⌈x⌉`, with the integer range chosen per run to cover the latent
    /// output.
    Ceil,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Moments {
    #[default]
    Analytic,
    Sampled,
}

impl From<Moments> for MomentSource {
    fn from(m: Moments) -> Self {
        match m {
            Moments::Analytic => MomentSource::Analytic,
            Moments::Sampled => MomentSource::Sampled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmSettings {
    pub rel_tol: f64,
    pub max_iters: usize,
    pub em_samples: usize,
    pub em_burn_in: usize,
    pub final_samples: usize,
    pub final_burn_in: usize,
    pub beta_grid: usize,
}

impl Default for EmSettings {
    fn default() -> Self {
        let d = EmConfig::default();
        Self {
            rel_tol: d.rel_tol,
            max_iters: d.max_iters,
            em_samples: d.gibbs_em.n_samples,
            em_burn_in: d.gibbs_em.burn_in,
            final_samples: d.gibbs_final.n_samples,
            final_burn_in: d.gibbs_final.burn_in,
            beta_grid: d.beta_grid,
        }
    }
}

impl EmSettings {
    pub fn to_em_config(&self) -> EmConfig {
        EmConfig {
            rel_tol: self.rel_tol,
            max_iters: self.max_iters,
            gibbs_em: GibbsConfig {
                n_samples: self.em_samples,
                burn_in: self.em_burn_in,
            },
            gibbs_final: GibbsConfig {
                n_samples: self.final_samples,
                burn_in: self.final_burn_in,
            },
            beta_grid: self.beta_grid,
            beta_bounds: BETA_BOUNDS,
        }
    }
}

fn default_max_redraws() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub n_runs: usize,
    /// Data length `N`.
    pub n: usize,
    /// Impulse-response length.
    pub m: usize,
    pub quantizer: QuantizerSpec,
    /// `var(U g) / σ²`.
    pub snr: f64,
    /// Redraw the system when the calibrated `σ²` exceeds this.
    #[serde(default)]
    pub sigma2_discard: Option<f64>,
    pub estimators: Vec<EstimatorKind>,
    pub master_seed: u64,
    #[serde(default)]
    pub em: EmSettings,
    /// Moment source for the ML-GS and MAP-GS E-steps.
    #[serde(default)]
    pub baseline_moments: Moments,
    /// Redraws allowed per run before the experiment fails.
    #[serde(default = "default_max_redraws")]
    pub max_redraws: usize,
}

impl ExperimentConfig {
    /// Binary experiment, threshold 1, `N = 500`, discard when `σ² > 2`.
    pub fn binary_desk() -> Self {
        Self {
            name: "binary".into(),
            n_runs: DESK_RUNS,
            n: 500,
            m: 50,
            quantizer: QuantizerSpec::Binary { threshold: 1.0 },
            snr: 10.0,
            sigma2_discard: Some(2.0),
            estimators: EstimatorKind::ALL.to_vec(),
            master_seed: 2024,
            em: EmSettings::default(),
            baseline_moments: Moments::Analytic,
            max_redraws: default_max_redraws(),
        }
    }

    /// Ceil experiment, `N = 200`, no discard rule.
    pub fn ceil_desk() -> Self {
        Self {
            name: "ceil".into(),
            n: 200,
            quantizer: QuantizerSpec::Ceil,
            sigma2_discard: None,
            ..Self::binary_desk()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "binary" => Some(Self::binary_desk()),
            "ceil" => Some(Self::ceil_desk()),
            _ => None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s).map_err(|e| ConfigError::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1".into());
        }
        if self.m == 0 || self.n < self.m {
            return bad(format!(
                "need 1 <= m <= n, got m = {}, n = {}",
                self.m, self.n
            ));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return bad(format!("snr must be positive and finite, got {}", self.snr));
        }
        if let Some(t) = self.sigma2_discard {
            if t.is_nan() || t <= 0.0 {
                return bad(format!("sigma2_discard must be positive, got {t}"));
            }
        }
        if let QuantizerSpec::Binary { threshold } = self.quantizer {
            if !threshold.is_finite() {
                return bad("binary threshold must be finite".into());
            }
        }
        if self.estimators.is_empty() {
            return bad("no estimators configured".into());
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(e) {
                return bad(format!("estimator {e} listed twice"));
            }
        }
        if self.em.beta_grid < 2 {
            return bad("em.beta_grid must be at least 2".into());
        }
        self.em
            .to_em_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("em: {e}")))
    }
}
