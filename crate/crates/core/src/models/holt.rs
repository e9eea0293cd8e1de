use serde::{Deserialize, Serialize};

use super::ModelSpec;
use crate::domain::MonthIndex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Seasonality {
    Off,
    On,
    /// On when at least two full periods are available.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoltConfig {
    pub period: usize,
    pub seasonality: Seasonality,
}

impl HoltConfig {
    /// `seasonal`: 0 off, 1 on, anything else auto.
    pub fn from_spec(spec: &ModelSpec) -> Self {
        let seasonality = match spec.param("seasonal", 2.0) as i64 {
            0 => Seasonality::Off,
            1 => Seasonality::On,
            _ => Seasonality::Auto,
        };
        HoltConfig {
            period: spec.param_usize("period", 12).max(2),
            seasonality,
        }
    }

    pub fn seasonal_for(&self, n: usize) -> bool {
        match self.seasonality {
            Seasonality::Off => false,
            Seasonality::On => true,
            Seasonality::Auto => n >= 2 * self.period,
        }
    }

    pub fn min_rows(&self) -> usize {
        match self.seasonality {
            Seasonality::On => 2 * self.period,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoltModel {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub period: usize,
    pub start: MonthIndex,
    /// One-step-ahead fitted values over the training months.
    pub fitted: Vec<f64>,
    pub level: f64,
    pub trend: f64,
    /// Final seasonal state per position `t mod period`; empty when non-seasonal.
    pub season: Vec<f64>,
    pub sse: f64,
}

impl HoltModel {
    pub fn n(&self) -> usize {
        self.fitted.len()
    }

    /// Fitted value inside the training window, `h`-step forecast after it.
    pub fn predict_month(&self, m: MonthIndex) -> f64 {
        let t = m - self.start;
        let n = self.n() as i32;
        if t < 0 {
            return self.fitted[0];
        }
        if t < n {
            return self.fitted[t as usize];
        }
        let h = (t - n + 1) as f64;
        let s = if self.season.is_empty() {
            0.0
        } else {
            self.season[t as usize % self.period]
        };
        self.level + h * self.trend + s
    }
}

struct Run {
    fitted: Vec<f64>,
    level: f64,
    trend: f64,
    season: Vec<f64>,
    sse: f64,
}

fn run_plain(y: &[f64], alpha: f64, beta: f64) -> Run {
    let (mut l, mut b) = (y[0], y[1] - y[0]);
    let mut fitted = vec![y[0]];
    let mut sse = 0.0;
    for &v in &y[1..] {
        let f = l + b;
        fitted.push(f);
        sse += (v - f).powi(2);
        let nl = alpha * v + (1.0 - alpha) * (l + b);
        b = beta * (nl - l) + (1.0 - beta) * b;
        l = nl;
    }
    Run {
        fitted,
        level: l,
        trend: b,
        season: vec![],
        sse,
    }
}

fn run_seasonal(y: &[f64], p: usize, alpha: f64, beta: f64, gamma: f64) -> Run {
    let m1 = y[..p].iter().sum::<f64>() / p as f64;
    let m2 = y[p..2 * p].iter().sum::<f64>() / p as f64;
    let mut b = (m2 - m1) / p as f64;
    let centre = (p as f64 - 1.0) / 2.0;
    let mut l = m1 + b * centre;
    let mut season: Vec<f64> = (0..p)
        .map(|i| y[i] - (m1 + b * (i as f64 - centre)))
        .collect();
    let mut fitted: Vec<f64> = y[..p].to_vec();
    let mut sse = 0.0;
    for (t, &v) in y.iter().enumerate().skip(p) {
        let s_old = season[t % p];
        let f = l + b + s_old;
        fitted.push(f);
        sse += (v - f).powi(2);
        let nl = alpha * (v - s_old) + (1.0 - alpha) * (l + b);
        b = beta * (nl - l) + (1.0 - beta) * b;
        season[t % p] = gamma * (v - nl) + (1.0 - gamma) * s_old;
        l = nl;
    }
    Run {
        fitted,
        level: l,
        trend: b,
        season,
        sse,
    }
}

fn grid() -> impl Iterator<Item = f64> + Clone {
    (1..=19).map(|k| k as f64 * 0.05)
}

/// Holt linear trend, optionally with additive seasonality, parameters by in-sample SSE grid search.
pub fn fit_holt(y: &[f64], start: MonthIndex, cfg: &HoltConfig) -> Result<HoltModel> {
    let seasonal = cfg.seasonal_for(y.len());
    let need = if seasonal { 2 * cfg.period } else { 3 };
    if y.len() < need {
        return Err(Error::validation(format!(
            "Time Series needs at least {need} rows, got {}",
            y.len()
        )));
    }
    let mut best: Option<(Run, f64, f64, Option<f64>)> = None;
    for a in grid() {
        for b in grid() {
            let gammas: Vec<Option<f64>> = if seasonal {
                grid().map(Some).collect()
            } else {
                vec![None]
            };
            for g in gammas {
                let run = match g {
                    Some(g) => run_seasonal(y, cfg.period, a, b, g),
                    None => run_plain(y, a, b),
                };
                if best.as_ref().is_none_or(|(r, ..)| run.sse < r.sse) {
                    best = Some((run, a, b, g));
                }
            }
        }
    }
    let (run, alpha, beta, gamma) = best.expect("grid is non-empty");
    if !run.sse.is_finite() {
        return Err(Error::numeric("Time Series fit diverged"));
    }
    Ok(HoltModel {
        alpha,
        beta,
        gamma,
        period: cfg.period,
        start,
        fitted: run.fitted,
        level: run.level,
        trend: run.trend,
        season: run.season,
        sse: run.sse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn off() -> HoltConfig {
        HoltConfig {
            period: 12,
            seasonality: Seasonality::Off,
        }
    }

    #[test]
    fn linear_trend_continues() {
        let y: Vec<f64> = (0..20).map(|t| 5.0 + 1.5 * t as f64).collect();
        let m = fit_holt(&y, MonthIndex(100), &off()).unwrap();
        for h in 0..24 {
            let t = 20 + h;
            assert!((m.predict_month(MonthIndex(100 + t)) - (5.0 + 1.5 * t as f64)).abs() < 1e-6);
        }
        assert!(m.sse < 1e-18);
    }

    #[test]
    fn recurrence_matches_hand_computation() {
        let y = [10.0, 12.0, 13.0, 17.0];
        let r = run_plain(&y, 0.5, 0.5);
        // l0=10 b0=2; t1: f=12, l=12, b=2; t2: f=14, l=13.5, b=1.75; t3: f=15.25
        assert_eq!(r.fitted, vec![10.0, 12.0, 14.0, 15.25]);
        assert!((r.sse - (1.0 + 1.75f64.powi(2))).abs() < 1e-12);
    }

    #[test]
    fn seasonal_pattern_is_forecast() {
        let s = |t: usize| 8.0 * (2.0 * PI * t as f64 / 12.0).sin();
        let y: Vec<f64> = (0..48).map(|t| 50.0 + 0.5 * t as f64 + s(t)).collect();
        let m = fit_holt(
            &y,
            MonthIndex(0),
            &HoltConfig {
                period: 12,
                seasonality: Seasonality::Auto,
            },
        )
        .unwrap();
        assert!(m.gamma.is_some());
        for t in 48..60 {
            let want = 50.0 + 0.5 * t as f64 + s(t);
            assert!(
                (m.predict_month(MonthIndex(t as i32)) - want).abs() < 0.5,
                "t{t}"
            );
        }
    }

    #[test]
    fn auto_falls_back_to_plain_when_short() {
        let y: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let m = fit_holt(
            &y,
            MonthIndex(0),
            &HoltConfig {
                period: 12,
                seasonality: Seasonality::Auto,
            },
        )
        .unwrap();
        assert!(m.gamma.is_none());
        assert!(fit_holt(
            &y,
            MonthIndex(0),
            &HoltConfig {
                period: 12,
                seasonality: Seasonality::On
            }
        )
        .is_err());
    }
}
