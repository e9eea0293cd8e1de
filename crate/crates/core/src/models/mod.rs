//! Model zoo, chronological evaluation, control intervals and ranking.

pub mod cart;
pub mod chaid;
pub mod holt;
pub mod leaderboard;
pub mod linear;
pub mod neural;
pub mod phasewise;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::LifecyclePhases;
use crate::domain::{FeatureMatrix, MonthIndex, MonthRange, PredictorTable};
use crate::error::{Error, Result};

pub use leaderboard::{evaluate_models, rank_models, Evaluation, LeaderboardRow, ModelLeaderboard};
pub use phasewise::fit_phasewise;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    LinearRegression,
    PolynomialRegression,
    CartTree,
    ChaidTree,
    NeuralNet,
    TimeSeries,
    PhaseWise,
}

impl ModelKind {
    /// The five supervised kinds ranked on every cycle.
    pub const ZOO: [ModelKind; 5] = [
        ModelKind::LinearRegression,
        ModelKind::CartTree,
        ModelKind::ChaidTree,
        ModelKind::NeuralNet,
        ModelKind::TimeSeries,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::LinearRegression => "Linear Regression",
            ModelKind::PolynomialRegression => "Polynomial Regression",
            ModelKind::CartTree => "C&R Tree",
            ModelKind::ChaidTree => "CHAID",
            ModelKind::NeuralNet => "Neural Network",
            ModelKind::TimeSeries => "Time Series",
            ModelKind::PhaseWise => "Phase-wise",
        }
    }

    pub fn from_label(s: &str) -> Option<ModelKind> {
        [
            ModelKind::LinearRegression,
            ModelKind::PolynomialRegression,
            ModelKind::CartTree,
            ModelKind::ChaidTree,
            ModelKind::NeuralNet,
            ModelKind::TimeSeries,
            ModelKind::PhaseWise,
        ]
        .into_iter()
        .find(|k| k.label() == s || format!("{k:?}") == s)
    }

    /// Kinds that forecast from the month index rather than predictor columns.
    pub fn is_time_based(self) -> bool {
        matches!(self, ModelKind::TimeSeries | ModelKind::PhaseWise)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            hyperparameters: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.hyperparameters.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn param(&self, key: &str, default: f64) -> f64 {
        self.hyperparameters.get(key).copied().unwrap_or(default)
    }

    pub fn param_usize(&self, key: &str, default: usize) -> usize {
        self.param(key, default as f64).max(0.0) as usize
    }

    /// Minimum training rows for this spec given `n_predictors` columns.
    pub fn min_rows(&self, n_predictors: usize) -> usize {
        match self.kind {
            ModelKind::LinearRegression => n_predictors + 2,
            ModelKind::PolynomialRegression => 2 * n_predictors + 2,
            ModelKind::CartTree | ModelKind::ChaidTree => {
                let leaf = if self.kind == ModelKind::CartTree {
                    "min_leaf"
                } else {
                    "min_segment"
                };
                2 * self.param_usize(leaf, 5).max(1)
            }
            ModelKind::NeuralNet => 10,
            ModelKind::TimeSeries => holt::HoltConfig::from_spec(self).min_rows(),
            ModelKind::PhaseWise => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Params {
    Linear(linear::LinearModel),
    Cart(cart::RegressionTree),
    Chaid(chaid::ChaidTree),
    Neural(neural::Mlp),
    Holt(holt::HoltModel),
    PhaseWise(phasewise::PhaseWiseModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub predictors: Vec<String>,
    pub training: MonthRange,
    pub params: Params,
}

impl FittedModel {
    /// One prediction per row, clamped at zero.
    pub fn predict(&self, rows: &PredictorTable) -> Result<Vec<f64>> {
        Ok(self
            .predict_raw(rows)?
            .into_iter()
            .map(|v| v.max(0.0))
            .collect())
    }

    pub(crate) fn predict_raw(&self, rows: &PredictorTable) -> Result<Vec<f64>> {
        let months: Vec<MonthIndex> = rows.months.iter().collect();
        if let Params::Holt(h) = &self.params {
            return Ok(months.iter().map(|m| h.predict_month(*m)).collect());
        }
        if let Params::PhaseWise(p) = &self.params {
            return p.predict(rows);
        }
        let table = rows.select(&self.predictors)?;
        let out = (0..table.n_rows())
            .map(|i| {
                let x = table.row(i);
                match &self.params {
                    Params::Linear(m) => m.predict_row(&x),
                    Params::Cart(t) => t.predict_row(&x),
                    Params::Chaid(t) => t.predict_row(&x),
                    Params::Neural(n) => n.predict_row(&x),
                    Params::Holt(_) | Params::PhaseWise(_) => unreachable!(),
                }
            })
            .collect::<Vec<f64>>();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "{} produced a non-finite prediction",
                self.spec.kind.label()
            )));
        }
        Ok(out)
    }
}

pub fn predict(model: &FittedModel, rows: &PredictorTable) -> Result<Vec<f64>> {
    model.predict(rows)
}

fn check_rows(spec: &ModelSpec, train: &FeatureMatrix) -> Result<()> {
    let need = spec.min_rows(train.predictor_names().len());
    if train.n_rows() < need {
        return Err(Error::validation(format!(
            "{} needs at least {need} training rows, got {}",
            spec.kind.label(),
            train.n_rows()
        )));
    }
    Ok(())
}

/// Fits a single-model spec. Phase-wise composites go through [`fit_phasewise`].
pub fn fit(spec: &ModelSpec, train: &FeatureMatrix) -> Result<FittedModel> {
    check_rows(spec, train)?;
    let cols: Vec<&[f64]> = train
        .predictors
        .columns
        .iter()
        .map(|c| c.as_slice())
        .collect();
    let y = &train.target;
    let params = match spec.kind {
        ModelKind::LinearRegression => Params::Linear(linear::fit_linear(
            &cols,
            y,
            1,
            spec.param("ridge_lambda", 1e-8),
        )?),
        ModelKind::PolynomialRegression => Params::Linear(linear::fit_linear(
            &cols,
            y,
            2,
            spec.param("ridge_lambda", 1e-8),
        )?),
        ModelKind::CartTree => Params::Cart(cart::fit_cart(
            &cols,
            y,
            &cart::CartConfig::from_spec(spec),
        )?),
        ModelKind::ChaidTree => Params::Chaid(chaid::fit_chaid(
            &cols,
            y,
            &chaid::ChaidConfig::from_spec(spec),
        )?),
        ModelKind::NeuralNet => Params::Neural(neural::fit_mlp(
            &cols,
            y,
            &neural::MlpConfig::from_spec(spec),
        )?),
        ModelKind::TimeSeries => Params::Holt(holt::fit_holt(
            y,
            train.months().start,
            &holt::HoltConfig::from_spec(spec),
        )?),
        ModelKind::PhaseWise => {
            return Err(Error::validation(
                "Phase-wise models are fitted with lifecycle phases via fit_phasewise",
            ))
        }
    };
    Ok(FittedModel {
        spec: spec.clone(),
        predictors: if spec.kind.is_time_based() {
            Vec::new()
        } else {
            train.predictor_names().to_vec()
        },
        training: train.months(),
        params,
    })
}

/// Fits any spec; phase-wise specs need `phases` and may use `fallback` for short phases.
pub fn fit_any(
    spec: &ModelSpec,
    train: &FeatureMatrix,
    phases: Option<&LifecyclePhases>,
    fallback: Option<&FittedModel>,
) -> Result<FittedModel> {
    match (spec.kind, phases) {
        (ModelKind::PhaseWise, Some(p)) => fit_phasewise(spec, train, p, fallback),
        (ModelKind::PhaseWise, None) => Err(Error::validation(
            "Phase-wise model requested without lifecycle phases",
        )),
        _ => fit(spec, train),
    }
}

/// First `⌈fraction·n⌉` rows train, the rest test.
pub fn split_chronological(
    matrix: &FeatureMatrix,
    train_fraction: f64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::validation(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let n = matrix.n_rows();
    // 0.7 * 10 is 7.000000000000001 in floating point.
    let k = ((train_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if k == 0 || k >= n {
        return Err(Error::validation(format!(
            "a {train_fraction} split of {n} rows leaves an empty train or test side"
        )));
    }
    Ok((matrix.slice(0..k), matrix.slice(k..n)))
}

/// Mean absolute percentage error over months with non-zero actuals.
pub fn evaluate_mape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    percentage_errors(actual, forecast)
        .map(|e| e.iter().map(|v| v.abs()).sum::<f64>() / e.len() as f64)
}

/// Signed mean percentage error, positive when actuals exceed the forecast.
pub fn signed_mpe(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    percentage_errors(actual, forecast).map(|e| e.iter().sum::<f64>() / e.len() as f64)
}

fn percentage_errors(actual: &[f64], forecast: &[f64]) -> Result<Vec<f64>> {
    if actual.len() != forecast.len() || actual.is_empty() {
        return Err(Error::validation(format!(
            "MAPE needs equal non-empty sequences, got {} and {}",
            actual.len(),
            forecast.len()
        )));
    }
    let errs: Vec<f64> = actual
        .iter()
        .zip(forecast)
        .filter(|(a, _)| **a != 0.0)
        .map(|(a, f)| (a - f) / a * 100.0)
        .collect();
    if errs.is_empty() {
        return Err(Error::numeric("MAPE undefined: every actual is zero"));
    }
    if errs.len() < actual.len() {
        log::warn!(
            "MAPE skips {} zero-actual months",
            actual.len() - errs.len()
        );
    }
    Ok(errs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub months: MonthRange,
    pub best_fit: Vec<f64>,
    pub lci: Vec<f64>,
    pub uci: Vec<f64>,
    pub model: ModelSpec,
    pub test_mape: f64,
    pub test_correlation: f64,
    /// Rule tags already applied by the adjustment engine.
    #[serde(default)]
    pub adjustments: Vec<String>,
}

impl ForecastSeries {
    pub fn index_of(&self, m: MonthIndex) -> Option<usize> {
        self.months
            .contains(m)
            .then(|| (m - self.months.start) as usize)
    }

    pub fn best_at(&self, m: MonthIndex) -> Option<f64> {
        self.index_of(m).map(|i| self.best_fit[i])
    }

    pub fn check(&self) -> Result<()> {
        let n = self.months.len();
        if self.best_fit.len() != n || self.lci.len() != n || self.uci.len() != n {
            return Err(Error::validation(
                "forecast columns do not match its month range",
            ));
        }
        for i in 0..n {
            let (l, b, u) = (self.lci[i], self.best_fit[i], self.uci[i]);
            if !(0.0 <= l && l <= b && b <= u) {
                return Err(Error::validation(format!(
                    "forecast ordering violated at {}: lci {l}, best {b}, uci {u}",
                    self.months.start + i as i32
                )));
            }
        }
        Ok(())
    }
}

/// Residual-SD bands around `best_fit`, clamped at zero.
pub fn interval_bands(best_fit: &[f64], residual_sd: f64, z: f64) -> (Vec<f64>, Vec<f64>) {
    let half = z * residual_sd;
    let lci = best_fit.iter().map(|b| (b - half).max(0.0)).collect();
    let uci = best_fit.iter().map(|b| (b + half).max(0.0)).collect();
    (lci, uci)
}

/// Sample SD of test residuals.
pub fn residual_sd(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(Error::validation(
            "control intervals need a non-empty test set",
        ));
    }
    let resid: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| a - p).collect();
    Ok(crate::stats::sample_sd(&resid))
}

/// Best fit and `∓ z·SD(test residuals)` bands over `horizon`.
pub fn control_intervals(
    model: &FittedModel,
    test: &FeatureMatrix,
    horizon: &PredictorTable,
    z: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if test.is_empty() {
        return Err(Error::validation(
            "control intervals need a non-empty test set",
        ));
    }
    let sd = residual_sd(&test.target, &model.predict(&test.predictors)?)?;
    let best = model.predict(horizon)?;
    let (lci, uci) = interval_bands(&best, sd, z);
    Ok((best, lci, uci))
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::domain::{FeatureMatrix, MonthIndex, MonthRange, PredictorTable};

    pub fn matrix(columns: Vec<(&str, Vec<f64>)>, target: Vec<f64>) -> FeatureMatrix {
        let n = target.len();
        FeatureMatrix {
            target_name: "y".into(),
            target,
            predictors: PredictorTable {
                months: MonthRange::with_len(MonthIndex(0), n),
                names: columns.iter().map(|c| c.0.to_string()).collect(),
                columns: columns.into_iter().map(|c| c.1).collect(),
            },
        }
    }
}
