//! Rule-based corrections applied to a forecast before it is reported.

use serde::{Deserialize, Serialize};

use crate::analysis::SeasonalDecomposition;
use crate::domain::{FeatureSeries, GaCalendar, MonthIndex};
use crate::error::Result;
use crate::models::ForecastSeries;

pub const RULE_RESCALE: &str = "rescale";
pub const RULE_SEASONAL: &str = "seasonal_damping";
pub const RULE_ONSET: &str = "onset_clamp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdjustConfig {
    pub lookback_months: usize,
    /// Mean absolute PAD (percent) above which the forecast is rescaled.
    pub deviation_threshold: f64,
    pub min_factor: f64,
    pub max_factor: f64,
    /// Share of the seasonal component removed for active generations.
    pub seasonal_damping: f64,
    /// Months after GA before any returns are forecast.
    pub onset_months: i32,
}

impl Default for AdjustConfig {
    fn default() -> Self {
        AdjustConfig {
            lookback_months: 3,
            deviation_threshold: 10.0,
            min_factor: 0.5,
            max_factor: 2.0,
            seasonal_damping: 0.2,
            onset_months: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedAdjustment {
    pub rule: String,
    pub factor: f64,
    pub months: Vec<MonthIndex>,
    pub note: String,
}

fn apply_all(f: &mut ForecastSeries, idx: usize, op: impl Fn(f64) -> f64) {
    f.best_fit[idx] = op(f.best_fit[idx]).max(0.0);
    f.lci[idx] = op(f.lci[idx]).max(0.0);
    f.uci[idx] = op(f.uci[idx]).max(0.0);
}

/// Applies the rescale, seasonal-damping and onset rules in that order.
///
/// `decision` is the first forecast month of the cycle. Each rule tags the forecast and is
/// skipped when its tag is already present, so repeated calls change nothing.
pub fn adjust_forecast(
    forecast: &ForecastSeries,
    actuals: &FeatureSeries,
    seasonal: Option<&SeasonalDecomposition>,
    calendar: &GaCalendar,
    generation: &str,
    decision: MonthIndex,
    cfg: &AdjustConfig,
) -> Result<(ForecastSeries, Vec<AppliedAdjustment>)> {
    forecast.check()?;
    let mut out = forecast.clone();
    let mut log_items = Vec::new();
    let done = |tag: &str| forecast.adjustments.iter().any(|t| t == tag);

    if !done(RULE_RESCALE) {
        let window: Vec<MonthIndex> = out
            .months
            .iter()
            .filter(|m| *m < decision && actuals.get(*m).is_some())
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .take(cfg.lookback_months)
            .rev()
            .collect();
        if window.len() < cfg.lookback_months {
            log::warn!(
                "only {} months of actuals overlap the forecast; rescale skipped",
                window.len()
            );
        } else {
            let a: Vec<f64> = window.iter().map(|m| actuals.get(*m).unwrap()).collect();
            let f: Vec<f64> = window.iter().map(|m| out.best_at(*m).unwrap()).collect();
            let pads: Vec<f64> = a
                .iter()
                .zip(&f)
                .filter(|(a, _)| **a != 0.0)
                .map(|(a, f)| ((a - f) / a * 100.0).abs())
                .collect();
            let mean_pad = if pads.is_empty() {
                0.0
            } else {
                pads.iter().sum::<f64>() / pads.len() as f64
            };
            let (sa, sf) = (a.iter().sum::<f64>(), f.iter().sum::<f64>());
            if mean_pad > cfg.deviation_threshold + 1e-9 && sf > 0.0 {
                let factor = (sa / sf).clamp(cfg.min_factor, cfg.max_factor);
                for i in 0..out.months.len() {
                    apply_all(&mut out, i, |v| v * factor);
                }
                out.adjustments.push(RULE_RESCALE.into());
                log_items.push(AppliedAdjustment {
                    rule: RULE_RESCALE.into(),
                    factor,
                    months: out.months.iter().collect(),
                    note: format!("mean |PAD| {mean_pad:.2}% over {} months", window.len()),
                });
            }
        }
    }

    let active = calendar
        .ramp_down_ga(generation)
        .is_none_or(|ga| ga > decision);
    if !done(RULE_SEASONAL) && active && cfg.seasonal_damping != 0.0 {
        if let Some(s) = seasonal {
            let months: Vec<MonthIndex> = out.months.iter().filter(|m| *m >= decision).collect();
            for m in &months {
                let i = out.index_of(*m).unwrap();
                let shift = cfg.seasonal_damping * s.seasonal_at(*m);
                apply_all(&mut out, i, |v| v - shift);
            }
            out.adjustments.push(RULE_SEASONAL.into());
            log_items.push(AppliedAdjustment {
                rule: RULE_SEASONAL.into(),
                factor: 1.0 - cfg.seasonal_damping,
                months,
                note: "generation active; seasonal component dampened".into(),
            });
        }
    }

    if !done(RULE_ONSET) {
        let ga = calendar.require_ga(generation)?;
        let cutoff = ga + cfg.onset_months;
        let months: Vec<MonthIndex> = out.months.iter().filter(|m| *m < cutoff).collect();
        for m in &months {
            let i = out.index_of(*m).unwrap();
            apply_all(&mut out, i, |_| 0.0);
        }
        out.adjustments.push(RULE_ONSET.into());
        if !months.is_empty() {
            log_items.push(AppliedAdjustment {
                rule: RULE_ONSET.into(),
                factor: 0.0,
                months,
                note: format!("before GA + {} months", cfg.onset_months),
            });
        }
    }
    out.check()?;
    Ok((out, log_items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::decompose_seasonal;
    use crate::domain::{GaEntry, GenerationId, MonthRange, Provenance};
    use crate::models::{ModelKind, ModelSpec};
    use proptest::prelude::*;

    fn cal(next_next: Option<i32>) -> GaCalendar {
        let mut gas = vec![("g", 0), ("h", 20)];
        if let Some(m) = next_next {
            gas.push(("k", m));
        }
        GaCalendar::new(
            gas.iter()
                .enumerate()
                .map(|(i, (n, g))| GaEntry {
                    generation: GenerationId::new(*n, i as i32).unwrap(),
                    family: "f".into(),
                    ga_month: MonthIndex(*g),
                })
                .collect(),
        )
        .unwrap()
    }

    fn fc(start: i32, best: Vec<f64>) -> ForecastSeries {
        ForecastSeries {
            months: MonthRange::with_len(MonthIndex(start), best.len()),
            lci: best.iter().map(|v| (v - 10.0).max(0.0)).collect(),
            uci: best.iter().map(|v| v + 10.0).collect(),
            best_fit: best,
            model: ModelSpec::new(ModelKind::LinearRegression),
            test_mape: 1.0,
            test_correlation: 0.9,
            adjustments: vec![],
        }
    }

    fn actuals(v: &[f64], start: i32) -> FeatureSeries {
        FeatureSeries::from_values(
            "gross_returns",
            MonthIndex(start),
            v.to_vec(),
            Provenance::Raw,
        )
    }

    #[test]
    fn boundary_pad_is_not_rescaled() {
        let f = fc(27, vec![110.0, 110.0, 110.0, 120.0, 120.0]);
        let (out, items) = adjust_forecast(
            &f,
            &actuals(&[100.0; 3], 27),
            None,
            &cal(Some(40)),
            "g",
            MonthIndex(30),
            &AdjustConfig::default(),
        )
        .unwrap();
        assert!(items.iter().all(|a| a.rule != RULE_RESCALE));
        assert_eq!(out.best_fit, f.best_fit);
    }

    #[test]
    fn rescale_factor() {
        let f = fc(
            27,
            vec![400.0 / 3.0, 400.0 / 3.0, 400.0 / 3.0, 200.0, 200.0],
        );
        let (out, items) = adjust_forecast(
            &f,
            &actuals(&[100.0; 3], 27),
            None,
            &cal(Some(40)),
            "g",
            MonthIndex(30),
            &AdjustConfig::default(),
        )
        .unwrap();
        let r = items.iter().find(|a| a.rule == RULE_RESCALE).unwrap();
        assert!((r.factor - 0.75).abs() < 1e-12);
        assert!((out.best_fit[3] - 150.0).abs() < 1e-9);
    }

    #[test]
    fn onset_clamp() {
        let f = fc(5, vec![50.0; 10]);
        let (out, _) = adjust_forecast(
            &f,
            &actuals(&[], 0),
            None,
            &cal(Some(40)),
            "g",
            MonthIndex(8),
            &AdjustConfig::default(),
        )
        .unwrap();
        assert!(out.best_fit[..7].iter().all(|v| *v == 0.0) && out.uci[6] == 0.0);
        assert_eq!(out.best_fit[7], 50.0);
    }

    #[test]
    fn seasonal_damping_only_for_active() {
        let s: Vec<f64> = (0..36)
            .map(|t| 100.0 + 10.0 * (t as f64 * std::f64::consts::PI / 6.0).sin())
            .collect();
        let dec = decompose_seasonal(&actuals(&s, 0), 12).unwrap();
        let f = fc(30, vec![100.0; 6]);
        let a = actuals(&[100.0; 3], 30);
        let cfg = AdjustConfig::default();
        let (active, _) =
            adjust_forecast(&f, &a, Some(&dec), &cal(None), "g", MonthIndex(33), &cfg).unwrap();
        for (i, m) in active.months.iter().enumerate() {
            let want = if m >= MonthIndex(33) {
                100.0 - 0.2 * dec.seasonal_at(m)
            } else {
                100.0
            };
            assert!((active.best_fit[i] - want).abs() < 1e-9);
        }
        let (inactive, _) = adjust_forecast(
            &f,
            &a,
            Some(&dec),
            &cal(Some(32)),
            "g",
            MonthIndex(33),
            &cfg,
        )
        .unwrap();
        assert_eq!(inactive.best_fit, f.best_fit);
    }

    proptest! {
        #[test]
        fn idempotent_and_ordered(
            best in prop::collection::vec(0.0f64..500.0, 8),
            act in prop::collection::vec(1.0f64..500.0, 3),
            half in 0.0f64..50.0,
            gen_ga in 0i32..30,
        ) {
            let mut f = fc(40, best.clone());
            f.lci = best.iter().map(|b| (b - half).max(0.0)).collect();
            f.uci = best.iter().map(|b| b + half).collect();
            let s: Vec<f64> = (0..36).map(|t| 50.0 + 20.0 * ((t % 12) as f64 - 5.5)).collect();
            let dec = decompose_seasonal(&actuals(&s, 0), 12).unwrap();
            let gal = GaCalendar::new(vec![
                GaEntry { generation: GenerationId::new("g", 0).unwrap(), family: "f".into(), ga_month: MonthIndex(gen_ga + 20) },
                GaEntry { generation: GenerationId::new("h", 1).unwrap(), family: "f".into(), ga_month: MonthIndex(gen_ga + 30) },
            ]).unwrap();
            let a = actuals(&act, 40);
            let cfg = AdjustConfig::default();
            let (once, _) = adjust_forecast(&f, &a, Some(&dec), &gal, "g", MonthIndex(43), &cfg).unwrap();
            let (twice, again) = adjust_forecast(&once, &a, Some(&dec), &gal, "g", MonthIndex(43), &cfg).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(again.is_empty());
            prop_assert!(once.check().is_ok());
        }

        #[test]
        fn identity_when_nothing_applies(best in prop::collection::vec(50.0f64..500.0, 6), wiggle in prop::collection::vec(-0.09f64..0.09, 3)) {
            let f = fc(40, best.clone());
            let act: Vec<f64> = best[..3].iter().zip(&wiggle).map(|(b, w)| b / (1.0 - w)).collect();
            let (out, _) = adjust_forecast(&f, &actuals(&act, 40), None, &cal(Some(30)), "g", MonthIndex(43), &AdjustConfig::default()).unwrap();
            prop_assert_eq!(out.best_fit, f.best_fit);
            prop_assert_eq!(out.lci, f.lci);
            prop_assert_eq!(out.uci, f.uci);
        }
    }
}
