//! Browser bindings: a synthetic forecasting cycle, an early-warning check and strength labels.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use etn_forecast::analysis::{classify_strength, StrengthThresholds};
use etn_forecast::config::Config;
use etn_forecast::domain::{MonthRange, SourceFeature};
use etn_forecast::ewa::{run_ewa, EwaConfig, EwaInput, PreviousCycle, SeriesChoice};
use etn_forecast::models::{interval_bands, ForecastSeries, ModelKind, ModelSpec};
use etn_forecast::synth::{generate, ScenarioSpec};
use etn_forecast::{pipeline, report};

#[derive(Serialize)]
struct MonthRow {
    month: String,
    actual: Option<f64>,
    best_fit: f64,
    lci: f64,
    uci: f64,
}

#[derive(Serialize)]
struct ModelRow {
    algorithm: String,
    mape: f64,
    correlation: f64,
}

#[derive(Serialize)]
struct CycleView {
    generation: String,
    cycle: String,
    analog: String,
    analog_score: f64,
    predictors: Vec<String>,
    rows: Vec<MonthRow>,
    leaderboard: Vec<ModelRow>,
    report_csv: String,
}

#[derive(Serialize)]
struct EwaView {
    window_pad: Option<f64>,
    alert: String,
    recommendation: String,
    colors: Vec<String>,
    score: i64,
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json(v: &impl Serialize) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(js_err)
}

/// Generates a three-generation scenario and forecasts the newest generation
/// `months_after_trigger` months into its returns lifecycle.
#[wasm_bindgen]
pub fn run_synthetic_cycle(
    seed: u32,
    months_after_trigger: u32,
    noise_sd: f64,
) -> Result<String, JsError> {
    let spec = ScenarioSpec {
        seed: seed.into(),
        noise_sd,
        ..ScenarioSpec::default()
    };
    let sc = generate(&spec).map_err(js_err)?;
    let generation = spec.name_of(spec.generations - 1);
    let cycle = spec.ga_of(spec.generations) + months_after_trigger as i32;
    let ingest = pipeline::ingest(
        sc.series,
        sc.calendar,
        &generation,
        cycle,
        Config::default(),
    )
    .map_err(js_err)?;
    let a = pipeline::run_stages(ingest, None).map_err(js_err)?;
    let actuals = a.ingest.actuals();
    let fc = &a.adjusted.forecast;
    let rows = fc
        .months
        .iter()
        .enumerate()
        .map(|(i, m)| MonthRow {
            month: m.to_string(),
            actual: actuals.get(m),
            best_fit: fc.best_fit[i],
            lci: fc.lci[i],
            uci: fc.uci[i],
        })
        .collect();
    let leaderboard = a
        .train
        .leaderboard
        .rows
        .iter()
        .map(|r| ModelRow {
            algorithm: r.algorithm.clone(),
            mape: r.mape_best_fit,
            correlation: r.correlation,
        })
        .collect();
    to_json(&CycleView {
        generation,
        cycle: cycle.to_string(),
        analog: a.analysis.genealogy.generation.clone(),
        analog_score: a.analysis.genealogy.score,
        predictors: a.analysis.selected.clone(),
        rows,
        leaderboard,
        report_csv: report::emit_report(&a).map_err(js_err)?,
    })
}

/// Evaluates a previous forecast that was `bias_percent` above the realized returns.
#[wasm_bindgen]
pub fn ewa_check(seed: u32, bias_percent: f64) -> Result<String, JsError> {
    let spec = ScenarioSpec {
        seed: seed.into(),
        ..ScenarioSpec::default()
    };
    let sc = generate(&spec).map_err(js_err)?;
    let name = spec.name_of(spec.generations - 1);
    let actuals = sc
        .series_of(&name)
        .ok_or_else(|| js_err("missing generation"))?
        .feature(SourceFeature::GrossReturns);
    let as_of = actuals.end() - 1;
    let months = MonthRange::with_len(as_of - 3, 12);
    let best: Vec<f64> = months
        .iter()
        .map(|m| actuals.get(m).unwrap_or(0.0) * (1.0 + bias_percent / 100.0))
        .collect();
    let (lci, uci) = interval_bands(&best, 0.05 * best.iter().cloned().fold(0.0, f64::max), 1.96);
    let forecast = ForecastSeries {
        months,
        best_fit: best,
        lci,
        uci,
        model: ModelSpec::new(ModelKind::LinearRegression),
        test_mape: 0.0,
        test_correlation: 1.0,
        adjustments: vec![],
    };
    let input = EwaInput {
        as_of,
        previous: Some(PreviousCycle {
            cycle: months.start,
            forecast: forecast.clone(),
            selected: SeriesChoice::BestFit,
        }),
        current_forecast: forecast,
        actuals: actuals.restricted(MonthRange::new(actuals.range().start, as_of)),
        mape_history: vec![],
    };
    let r = run_ewa(&input, &EwaConfig::default()).map_err(js_err)?;
    to_json(&EwaView {
        window_pad: r.step1.as_ref().map(|s| s.window_pad),
        alert: r.alert.name().to_string(),
        recommendation: r.recommendation.name().to_string(),
        colors: r.colors.iter().map(|c| format!("{c:?}")).collect(),
        score: r.score,
    })
}

/// Weak, Medium or Strong for a correlation coefficient under the default cuts.
#[wasm_bindgen]
pub fn strength_label(r: f64) -> Result<String, JsError> {
    classify_strength(r, &StrengthThresholds::default())
        .map(|s| format!("{s:?}"))
        .map_err(js_err)
}
