//! Early-warning checks of last cycle's forecast against realized returns.

use serde::{Deserialize, Serialize};

use crate::domain::{FeatureSeries, MonthIndex};
use crate::error::{Error, Result};
use crate::models::ForecastSeries;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesChoice {
    BestFit,
    Lci,
    Uci,
}

impl SeriesChoice {
    pub fn name(self) -> &'static str {
        match self {
            SeriesChoice::BestFit => "best_fit",
            SeriesChoice::Lci => "lci",
            SeriesChoice::Uci => "uci",
        }
    }

    pub fn pick(self, f: &ForecastSeries) -> &[f64] {
        match self {
            SeriesChoice::BestFit => &f.best_fit,
            SeriesChoice::Lci => &f.lci,
            SeriesChoice::Uci => &f.uci,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Color {
    Red,
    Yellow,
    Green,
}

impl Color {
    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "Red",
            Color::Yellow => "Yellow",
            Color::Green => "Green",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alert {
    None,
    OverForecast,
    UnderForecast,
}

impl Alert {
    pub fn name(self) -> &'static str {
        match self {
            Alert::None => "None",
            Alert::OverForecast => "OverForecast",
            Alert::UnderForecast => "UnderForecast",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recommendation {
    UseBestFit,
    UseLci,
    UseUci,
    RetrainModel,
}

impl Recommendation {
    pub fn name(self) -> &'static str {
        match self {
            Recommendation::UseBestFit => "UseBestFit",
            Recommendation::UseLci => "UseLCI",
            Recommendation::UseUci => "UseUCI",
            Recommendation::RetrainModel => "RetrainModel",
        }
    }

    pub fn choice(self) -> SeriesChoice {
        match self {
            Recommendation::UseLci => SeriesChoice::Lci,
            Recommendation::UseUci => SeriesChoice::Uci,
            _ => SeriesChoice::BestFit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub red: i64,
    pub yellow: i64,
    pub green: i64,
}

impl ScoreWeights {
    pub const LITERAL: ScoreWeights = ScoreWeights {
        red: 3,
        yellow: 6,
        green: 3,
    };
    pub const SIGNED: ScoreWeights = ScoreWeights {
        red: -3,
        yellow: 1,
        green: 3,
    };
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights::LITERAL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EwaConfig {
    pub lookback_months: usize,
    /// Minimum absolute window PAD for an over-forecast alert.
    pub over_threshold: f64,
    pub under_threshold: f64,
    pub retrain_threshold: f64,
    pub red_cut: f64,
    pub weights: ScoreWeights,
    pub score_window: usize,
    pub stats_window: usize,
    pub projection_window: usize,
}

impl Default for EwaConfig {
    fn default() -> Self {
        EwaConfig {
            lookback_months: 3,
            over_threshold: 10.0,
            under_threshold: 20.0,
            retrain_threshold: 30.0,
            red_cut: -10.0,
            weights: ScoreWeights::LITERAL,
            score_window: 6,
            stats_window: 6,
            projection_window: 6,
        }
    }
}

/// `actual - forecast`, element-wise.
pub fn deviation(actual: &[f64], forecast: &[f64]) -> Result<Vec<f64>> {
    if actual.len() != forecast.len() {
        return Err(Error::validation(format!(
            "deviation length mismatch {} vs {}",
            actual.len(),
            forecast.len()
        )));
    }
    Ok(actual.iter().zip(forecast).map(|(a, f)| a - f).collect())
}

/// Signed percentage `deviation / actual · 100`; zero-actual months are None.
pub fn pad(deviation: &[f64], actual: &[f64]) -> Result<Vec<Option<f64>>> {
    if actual.len() != deviation.len() {
        return Err(Error::validation(format!(
            "PAD length mismatch {} vs {}",
            deviation.len(),
            actual.len()
        )));
    }
    let out: Vec<Option<f64>> = deviation
        .iter()
        .zip(actual)
        .map(|(d, a)| (*a != 0.0).then(|| d * 100.0 / a))
        .collect();
    let skipped = out.iter().filter(|v| v.is_none()).count();
    if skipped == out.len() {
        return Err(Error::numeric("PAD undefined: every actual is zero"));
    }
    if skipped > 0 {
        log::warn!("PAD skips {skipped} zero-actual months");
    }
    Ok(out)
}

pub fn color(pad_value: f64, red_cut: f64) -> Color {
    if pad_value < red_cut {
        Color::Red
    } else if pad_value <= 0.0 {
        Color::Yellow
    } else {
        Color::Green
    }
}

pub fn mape_score(colors: &[Color], w: &ScoreWeights) -> i64 {
    colors
        .iter()
        .map(|c| match c {
            Color::Red => w.red,
            Color::Yellow => w.yellow,
            Color::Green => w.green,
        })
        .sum()
}

/// Sums of every `window`-long run of `history`.
pub fn moving_sums(history: &[f64], window: usize) -> Vec<f64> {
    if window == 0 {
        return vec![];
    }
    history.windows(window).map(|w| w.iter().sum()).collect()
}

/// Mean and sample SD of the moving `window`-month sums.
pub fn six_month_stats(history: &[f64], window: usize) -> Result<(f64, f64)> {
    if window == 0 || history.len() < window {
        return Err(Error::validation(format!(
            "need at least {window} MAPE values, got {}",
            history.len()
        )));
    }
    let sums = moving_sums(history, window);
    Ok((crate::stats::mean(&sums), crate::stats::sample_sd(&sums)))
}

/// `Σ recent actuals - Σ next forecasts`, both `window` months long.
pub fn projection(recent_actuals: &[f64], next_forecasts: &[f64], window: usize) -> Result<f64> {
    if recent_actuals.len() != window || next_forecasts.len() != window {
        return Err(Error::validation(format!(
            "projection needs {window}-month windows, got {} and {}",
            recent_actuals.len(),
            next_forecasts.len()
        )));
    }
    Ok(recent_actuals.iter().sum::<f64>() - next_forecasts.iter().sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub months: Vec<MonthIndex>,
    pub actual: Vec<f64>,
    pub forecast: Vec<f64>,
    pub deviation: Vec<f64>,
    pub pad: Vec<Option<f64>>,
    pub cumulative_deviation: f64,
    /// `100 · Σ deviation / Σ actual` over the window.
    pub window_pad: f64,
    pub alert: Alert,
    pub recommendation: Recommendation,
}

/// Alert and action from the window totals.
pub fn classify(
    cumulative_deviation: f64,
    window_pad: f64,
    cfg: &EwaConfig,
) -> (Alert, Recommendation) {
    let mag = window_pad.abs();
    if cumulative_deviation < 0.0 && mag > cfg.over_threshold + EPS {
        let rec = if mag > cfg.retrain_threshold + EPS {
            Recommendation::RetrainModel
        } else {
            Recommendation::UseLci
        };
        (Alert::OverForecast, rec)
    } else if cumulative_deviation > 0.0 && window_pad > cfg.under_threshold + EPS {
        let rec = if mag > cfg.retrain_threshold + EPS {
            Recommendation::RetrainModel
        } else {
            Recommendation::UseUci
        };
        (Alert::UnderForecast, rec)
    } else {
        (Alert::None, Recommendation::UseBestFit)
    }
}

pub fn evaluate_step(
    months: Vec<MonthIndex>,
    actual: Vec<f64>,
    forecast: Vec<f64>,
    cfg: &EwaConfig,
) -> Result<StepResult> {
    let dev = deviation(&actual, &forecast)?;
    let pads = pad(&dev, &actual)?;
    let cum: f64 = dev.iter().sum();
    let total: f64 = actual.iter().sum();
    let window_pad = cum * 100.0 / total;
    let (alert, recommendation) = classify(cum, window_pad, cfg);
    Ok(StepResult {
        months,
        actual,
        forecast,
        deviation: dev,
        pad: pads,
        cumulative_deviation: cum,
        window_pad,
        alert,
        recommendation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviousCycle {
    pub cycle: MonthIndex,
    pub forecast: ForecastSeries,
    pub selected: SeriesChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwaInput {
    pub as_of: MonthIndex,
    pub previous: Option<PreviousCycle>,
    pub current_forecast: ForecastSeries,
    pub actuals: FeatureSeries,
    /// Window PAD magnitudes from earlier cycles, oldest first.
    #[serde(default)]
    pub mape_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EwaStatus {
    Evaluated,
    FirstCycle,
    InsufficientOverlap,
}

impl EwaStatus {
    pub fn name(self) -> &'static str {
        match self {
            EwaStatus::Evaluated => "evaluated",
            EwaStatus::FirstCycle => "first cycle",
            EwaStatus::InsufficientOverlap => "insufficient overlap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwaReport {
    pub status: EwaStatus,
    pub step1: Option<StepResult>,
    pub step2: Option<StepResult>,
    /// Step 1 and step 2 reached different alerts.
    pub steps_disagree: bool,
    pub score_months: Vec<MonthIndex>,
    pub colors: Vec<Color>,
    pub score: i64,
    pub six_month_stats: Option<(f64, f64)>,
    pub projection: Option<f64>,
    pub alert: Alert,
    pub recommendation: Recommendation,
}

impl EwaReport {
    pub fn color_at(&self, m: MonthIndex) -> Option<Color> {
        self.score_months
            .iter()
            .position(|x| *x == m)
            .map(|i| self.colors[i])
    }
}

/// Months before `as_of` where both `forecast` and `actuals` have values, most recent `limit`.
fn overlap_months(
    forecast: &ForecastSeries,
    actuals: &FeatureSeries,
    as_of: MonthIndex,
    limit: usize,
) -> Vec<MonthIndex> {
    let mut months: Vec<MonthIndex> = forecast
        .months
        .iter()
        .filter(|m| *m < as_of && actuals.get(*m).is_some())
        .collect();
    let skip = months.len().saturating_sub(limit);
    months.drain(..skip);
    months
}

fn current_extras(input: &EwaInput, cfg: &EwaConfig) -> Option<f64> {
    let w = cfg.projection_window;
    let recent: Vec<f64> = (1..=w as i32)
        .rev()
        .filter_map(|k| input.actuals.get(input.as_of - k))
        .collect();
    let next: Vec<f64> = (0..w as i32)
        .filter_map(|k| input.current_forecast.best_at(input.as_of + k))
        .collect();
    projection(&recent, &next, w).ok()
}

/// Three-step check: previous best fit vs actuals, planner selection vs actuals, then an action.
pub fn run_ewa(input: &EwaInput, cfg: &EwaConfig) -> Result<EwaReport> {
    let proj = current_extras(input, cfg);
    let stats_of = |extra: Option<f64>| {
        let mut h = input.mape_history.clone();
        h.extend(extra);
        six_month_stats(&h, cfg.stats_window).ok()
    };
    let empty = |status| EwaReport {
        status,
        step1: None,
        step2: None,
        steps_disagree: false,
        score_months: vec![],
        colors: vec![],
        score: 0,
        six_month_stats: stats_of(None),
        projection: proj,
        alert: Alert::None,
        recommendation: Recommendation::UseBestFit,
    };
    let Some(prev) = &input.previous else {
        return Ok(empty(EwaStatus::FirstCycle));
    };

    let window = overlap_months(
        &prev.forecast,
        &input.actuals,
        input.as_of,
        cfg.lookback_months,
    );
    if window.len() < cfg.lookback_months || cfg.lookback_months == 0 {
        log::warn!(
            "only {} months overlap the previous forecast; EWA skipped",
            window.len()
        );
        return Ok(empty(EwaStatus::InsufficientOverlap));
    }
    let actual: Vec<f64> = window
        .iter()
        .map(|m| input.actuals.get(*m).unwrap())
        .collect();
    let series_at = |choice: SeriesChoice| -> Vec<f64> {
        let s = choice.pick(&prev.forecast);
        window
            .iter()
            .map(|m| s[prev.forecast.index_of(*m).unwrap()])
            .collect()
    };
    let step1 = evaluate_step(
        window.clone(),
        actual.clone(),
        series_at(SeriesChoice::BestFit),
        cfg,
    )?;
    let step2 = evaluate_step(window.clone(), actual, series_at(prev.selected), cfg)?;

    let score_months = overlap_months(
        &prev.forecast,
        &input.actuals,
        input.as_of,
        cfg.score_window,
    );
    let colors: Vec<Color> = score_months
        .iter()
        .filter_map(|m| {
            let a = input.actuals.get(*m)?;
            let f = prev.forecast.best_at(*m)?;
            (a != 0.0).then(|| color((a - f) * 100.0 / a, cfg.red_cut))
        })
        .collect();

    Ok(EwaReport {
        status: EwaStatus::Evaluated,
        steps_disagree: step1.alert != step2.alert,
        score: mape_score(&colors, &cfg.weights),
        score_months,
        colors,
        six_month_stats: stats_of(Some(step1.window_pad.abs())),
        projection: proj,
        alert: step1.alert,
        recommendation: step1.recommendation,
        step1: Some(step1),
        step2: Some(step2),
    })
}
