//! Run configuration: every threshold of every stage, read from one TOML file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adjust::AdjustConfig;
use crate::analysis::{CausalEvent, GenealogyConfig, PhaseConfig, StrengthThresholds};
use crate::error::{Error, Result};
use crate::ewa::EwaConfig;
use crate::models::{ModelKind, ModelSpec};
use crate::prep::PrepConfig;
use crate::preprocess::PreprocessConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub strength: StrengthThresholds,
    pub phases: PhaseConfig,
    pub genealogy: GenealogyConfig,
    pub seasonal_period: u32,
    /// Manual causal-factor events; GA events are derived from the calendar.
    pub events: Vec<CausalEvent>,
    /// Upper bound on selected predictors, strongest first; 0 means no bound.
    pub max_predictors: usize,
    /// A predictor is skipped when |r| with an already selected one exceeds this.
    pub collinearity_cut: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            strength: StrengthThresholds::default(),
            phases: PhaseConfig::default(),
            genealogy: GenealogyConfig::default(),
            seasonal_period: 12,
            events: vec![],
            max_predictors: 2,
            collinearity_cut: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelsConfig {
    pub train_fraction: f64,
    /// Control-interval multiplier on the test residual SD.
    pub z: f64,
    pub seed: u64,
    pub algorithms: Vec<ModelKind>,
    pub phase_wise: bool,
    /// Moving-average window applied to the modeling target; 1 keeps the raw target.
    pub target_smoothing: u32,
    /// Per-algorithm overrides keyed by algorithm name, e.g. `[models.hyperparameters.NeuralNet]`.
    pub hyperparameters: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        ModelsConfig {
            train_fraction: 0.7,
            z: 1.96,
            seed: 42,
            algorithms: ModelKind::ZOO.to_vec(),
            phase_wise: true,
            target_smoothing: 1,
            hyperparameters: BTreeMap::new(),
        }
    }
}

impl ModelsConfig {
    pub fn specs(&self) -> Vec<ModelSpec> {
        let mut kinds = self.algorithms.clone();
        if self.phase_wise && !kinds.contains(&ModelKind::PhaseWise) {
            kinds.push(ModelKind::PhaseWise);
        }
        kinds
            .into_iter()
            .map(|k| {
                let mut spec = ModelSpec::new(k).with_seed(self.seed);
                if let Some(hp) = self.hyperparameters.get(&format!("{k:?}")) {
                    for (key, v) in hp {
                        spec = spec.with(key, *v);
                    }
                }
                spec
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub horizon_months: u32,
    /// Months before the cycle also forecast, so rescaling and EWA can compare to actuals.
    pub backcast_months: u32,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            horizon_months: 12,
            backcast_months: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub preprocess: PreprocessConfig,
    pub prep: PrepConfig,
    pub analysis: AnalysisConfig,
    pub models: ModelsConfig,
    pub forecast: ForecastConfig,
    pub ewa: EwaConfig,
    pub adjust: AdjustConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config =
            toml::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::validation(format!("config: {m}")));
        let m = &self.models;
        if !(m.train_fraction > 0.0 && m.train_fraction < 1.0) {
            return bad(format!(
                "models.train_fraction must be in (0, 1), got {}",
                m.train_fraction
            ));
        }
        if !(m.z >= 0.0) {
            return bad("models.z must be non-negative".into());
        }
        if m.algorithms.is_empty() {
            return bad("models.algorithms is empty".into());
        }
        if m.target_smoothing == 0 {
            return bad("models.target_smoothing must be at least 1".into());
        }
        if self.forecast.horizon_months == 0 {
            return bad("forecast.horizon_months must be at least 1".into());
        }
        if !(self.preprocess.sigma > 0.0) {
            return bad("preprocess.sigma must be positive".into());
        }
        let s = &self.analysis.strength;
        if !(0.0 <= s.weak_below && s.weak_below <= s.strong_from && s.strong_from <= 1.0) {
            return bad("analysis.strength needs 0 <= weak_below <= strong_from <= 1".into());
        }
        if !(self.analysis.collinearity_cut > 0.0 && self.analysis.collinearity_cut <= 1.0) {
            return bad("analysis.collinearity_cut must be in (0, 1]".into());
        }
        if self.analysis.seasonal_period < 2 {
            return bad("analysis.seasonal_period must be at least 2".into());
        }
        let a = &self.adjust;
        if !(0.0 < a.min_factor && a.min_factor <= 1.0 && a.max_factor >= 1.0) {
            return bad("adjust clamps need 0 < min_factor <= 1 <= max_factor".into());
        }
        let e = &self.ewa;
        if !(e.over_threshold <= e.retrain_threshold && e.under_threshold <= e.retrain_threshold) {
            return bad("ewa thresholds must not exceed retrain_threshold".into());
        }
        Ok(())
    }
}
