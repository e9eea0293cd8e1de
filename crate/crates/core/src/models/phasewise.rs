use serde::{Deserialize, Serialize};

use super::holt::{self, HoltConfig, HoltModel, Seasonality};
use super::linear::{self, LinearModel};
use super::{FittedModel, ModelSpec, Params};
use crate::analysis::{LifecyclePhases, Phase};
use crate::domain::{FeatureMatrix, PredictorTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SubModel {
    /// Straight line in the month index.
    Trend(LinearModel),
    Smoothing(HoltModel),
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseWiseModel {
    pub phases: LifecyclePhases,
    /// Sub-model per non-empty phase, in lifecycle order.
    pub subs: Vec<(Phase, SubModel)>,
    pub fallback: Option<Box<FittedModel>>,
}

impl PhaseWiseModel {
    pub fn sub(&self, phase: Phase) -> Option<&SubModel> {
        self.subs.iter().find(|(p, _)| *p == phase).map(|(_, s)| s)
    }

    /// Slope of a trend sub-model, in units per month.
    pub fn slope(&self, phase: Phase) -> Option<f64> {
        match self.sub(phase)? {
            SubModel::Trend(m) => m.coefficients.first().copied(),
            _ => None,
        }
    }

    pub fn predict(&self, rows: &PredictorTable) -> Result<Vec<f64>> {
        let mut fallback_rows: Option<Vec<f64>> = None;
        let mut out = Vec::with_capacity(rows.n_rows());
        for (i, m) in rows.months.iter().enumerate() {
            let phase = self
                .phases
                .nearest_phase(m)
                .ok_or_else(|| Error::validation("phase-wise model has no non-empty phase"))?;
            let v = match self.sub(phase) {
                Some(SubModel::Trend(lm)) => lm.predict_row(&[f64::from(m.0)]),
                Some(SubModel::Smoothing(h)) => h.predict_month(m),
                Some(SubModel::Fallback) | None => {
                    if fallback_rows.is_none() {
                        let fb = self.fallback.as_ref().ok_or_else(|| {
                            Error::validation(format!(
                                "no sub-model or fallback for the {} phase",
                                phase.name()
                            ))
                        })?;
                        fallback_rows = Some(fb.predict_raw(rows)?);
                    }
                    fallback_rows.as_ref().unwrap()[i]
                }
            };
            out.push(v);
        }
        Ok(out)
    }
}

/// Ramp phases get a linear trend on the month index, the plateau gets Holt smoothing.
/// A phase with too few training rows uses `fallback`, which must then be present.
pub fn fit_phasewise(
    spec: &ModelSpec,
    matrix: &FeatureMatrix,
    phases: &LifecyclePhases,
    fallback: Option<&FittedModel>,
) -> Result<FittedModel> {
    let min_trend = spec.param_usize("min_trend_rows", 3).max(3);
    let smoothing = HoltConfig {
        period: spec.param_usize("period", 12).max(2),
        seasonality: Seasonality::Auto,
    };
    let mut subs = Vec::new();
    for phase in Phase::ALL {
        let range = phases.get(phase);
        if range.is_empty() {
            continue;
        }
        let rows = matrix.restricted(range);
        let sub = match phase {
            Phase::RampUp | Phase::RampDown if rows.n_rows() >= min_trend => {
                let t: Vec<f64> = rows.months().iter().map(|m| f64::from(m.0)).collect();
                SubModel::Trend(linear::fit_linear(&[&t], &rows.target, 1, 1e-8)?)
            }
            Phase::Plateau if rows.n_rows() >= smoothing.min_rows() => SubModel::Smoothing(
                holt::fit_holt(&rows.target, rows.months().start, &smoothing)?,
            ),
            _ => {
                if fallback.is_none() {
                    return Err(Error::validation(format!(
                        "{} phase has {} training rows and no fallback model",
                        phase.name(),
                        rows.n_rows()
                    )));
                }
                log::warn!(
                    "{} phase has {} training rows; using the fallback model",
                    phase.name(),
                    rows.n_rows()
                );
                SubModel::Fallback
            }
        };
        subs.push((phase, sub));
    }
    if subs.is_empty() {
        return Err(Error::validation(
            "phase-wise model needs at least one non-empty phase",
        ));
    }
    let uses_fallback = subs.iter().any(|(_, s)| matches!(s, SubModel::Fallback));
    let model = PhaseWiseModel {
        phases: *phases,
        subs,
        fallback: fallback
            .filter(|_| uses_fallback)
            .map(|f| Box::new(f.clone())),
    };
    Ok(FittedModel {
        spec: spec.clone(),
        predictors: model
            .fallback
            .as_ref()
            .map(|f| f.predictors.clone())
            .unwrap_or_default(),
        training: matrix.months(),
        params: Params::PhaseWise(model),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{MonthIndex, MonthRange};
    use crate::models::testutil::matrix;
    use crate::models::{fit, ModelKind};

    fn r(a: i32, b: i32) -> MonthRange {
        MonthRange::new(MonthIndex(a), MonthIndex(b))
    }

    fn trapezoid() -> Vec<f64> {
        (0..34)
            .map(|t| match t {
                0..15 => 10.0 * (t + 1) as f64,
                15..25 => 150.0,
                _ => 150.0 * (1.0 - (t - 24) as f64 / 10.0),
            })
            .collect()
    }

    #[test]
    fn slopes_have_expected_signs() {
        let y = trapezoid();
        let m = matrix(vec![("x", vec![0.0; 34])], y);
        let phases = LifecyclePhases {
            ramp_up: r(0, 15),
            plateau: r(15, 25),
            ramp_down: r(25, 34),
        };
        let f = fit_phasewise(&ModelSpec::new(ModelKind::PhaseWise), &m, &phases, None).unwrap();
        let Params::PhaseWise(p) = &f.params else {
            panic!()
        };
        assert!(p.slope(Phase::RampUp).unwrap() > 0.0);
        assert!(p.slope(Phase::RampDown).unwrap() < 0.0);
        assert!(matches!(
            p.sub(Phase::Plateau),
            Some(SubModel::Smoothing(_))
        ));
        let pred = f.predict(&m.predictors).unwrap();
        for (a, b) in pred.iter().zip(&m.target) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn two_phase_composite() {
        let y: Vec<f64> = trapezoid()[..25].to_vec();
        let m = matrix(vec![("x", vec![0.0; 25])], y);
        let phases = LifecyclePhases {
            ramp_up: r(0, 15),
            plateau: r(15, 25),
            ramp_down: r(25, 25),
        };
        let f = fit_phasewise(&ModelSpec::new(ModelKind::PhaseWise), &m, &phases, None).unwrap();
        let Params::PhaseWise(p) = &f.params else {
            panic!()
        };
        assert_eq!(p.subs.len(), 2);
    }

    #[test]
    fn short_phase_needs_fallback() {
        let y = trapezoid()[..26].to_vec();
        let x: Vec<f64> = (0..26).map(f64::from).collect();
        let m = matrix(vec![("x", x)], y);
        let phases = LifecyclePhases {
            ramp_up: r(0, 15),
            plateau: r(15, 25),
            ramp_down: r(25, 34),
        };
        let spec = ModelSpec::new(ModelKind::PhaseWise);
        assert!(fit_phasewise(&spec, &m, &phases, None).is_err());
        let fb = fit(&ModelSpec::new(ModelKind::LinearRegression), &m).unwrap();
        let f = fit_phasewise(&spec, &m, &phases, Some(&fb)).unwrap();
        let Params::PhaseWise(p) = &f.params else {
            panic!()
        };
        assert_eq!(p.sub(Phase::RampDown), Some(&SubModel::Fallback));
        let pred = f.predict(&m.predictors).unwrap();
        assert_eq!(pred[25], fb.predict(&m.predictors).unwrap()[25]);
    }
}
