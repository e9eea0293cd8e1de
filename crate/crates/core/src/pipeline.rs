//! Monthly planning cycle as a chain of stages, each producing a serializable artifact.
//!
//! ingest → prepare → analyze → train → forecast → adjust → ewa → report

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjust::{adjust_forecast, AppliedAdjustment};
use crate::analysis::{
    decompose_seasonal, genealogy_match, pearson_values, segment_lifecycle, select_predictors,
    CausalFactorFlags, CorrelationTable, GenealogyMatch, LifecyclePhases, SeasonalDecomposition,
};
use crate::config::Config;
use crate::domain::{
    align, align_predictors, FeatureSeries, GaCalendar, GenerationId, GenerationSeries, MonthIndex,
    MonthRange, SourceFeature,
};
use crate::error::{Error, Result};
use crate::ewa::{
    self, color, mape_score, run_ewa, six_month_stats, EwaInput, EwaReport, SeriesChoice,
};
use crate::models::{
    evaluate_models, fit_any, interval_bands, split_chronological, FittedModel, ForecastSeries,
    LeaderboardRow, ModelKind, ModelLeaderboard,
};
use crate::prep::{build_features, moving_average, GenerationFeatures};
use crate::preprocess::{clean_generation, normalization_factor, OutlierReport};
use crate::store::{CycleRecord, CycleStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestArtifact {
    pub config: Config,
    pub generation: String,
    pub cycle: MonthIndex,
    pub calendar: GaCalendar,
    /// Every generation's history, truncated to months before the cycle.
    pub series: Vec<GenerationSeries>,
    pub latest_month: MonthIndex,
}

impl IngestArtifact {
    pub fn series_of(&self, name: &str) -> Option<&GenerationSeries> {
        self.series.iter().find(|s| s.generation == name)
    }

    pub fn current(&self) -> &GenerationSeries {
        self.series_of(&self.generation)
            .expect("ingest guarantees the current generation")
    }

    pub fn actuals(&self) -> FeatureSeries {
        self.current().feature(SourceFeature::GrossReturns)
    }

    /// Months forecast this cycle: the backcast window followed by the horizon.
    pub fn window(&self) -> MonthRange {
        let f = &self.config.forecast;
        MonthRange::new(
            self.cycle - f.backcast_months as i32,
            self.cycle + f.horizon_months as i32,
        )
    }
}

pub fn ingest(
    history: Vec<GenerationSeries>,
    calendar: GaCalendar,
    generation: &str,
    cycle: MonthIndex,
    config: Config,
) -> Result<IngestArtifact> {
    config.validate()?;
    calendar.require_ga(generation)?;
    calendar.trigger_ga(generation)?;
    let series: Vec<GenerationSeries> = history
        .iter()
        .filter_map(|s| s.truncated_before(cycle))
        .collect();
    if !series.iter().any(|s| s.generation == generation) {
        return Err(Error::validation(format!(
            "no history for `{generation}` before {cycle}"
        )));
    }
    let latest_month = series
        .iter()
        .map(|s| s.range().end - 1)
        .max()
        .expect("non-empty");
    Ok(IngestArtifact {
        config,
        generation: generation.to_string(),
        cycle,
        calendar,
        series,
        latest_month,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedGeneration {
    pub series: GenerationSeries,
    pub outliers: Vec<OutlierReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedArtifact {
    pub generations: Vec<PreparedGeneration>,
}

impl PreparedArtifact {
    pub fn get(&self, name: &str) -> Option<&PreparedGeneration> {
        self.generations
            .iter()
            .find(|g| g.series.generation == name)
    }
}

/// Outlier screening for the current generation and its predecessors in the same family.
pub fn prepare(ingest: &IngestArtifact) -> Result<PreparedArtifact> {
    let cal = &ingest.calendar;
    let family = &cal
        .entry(&ingest.generation)
        .expect("checked at ingest")
        .family;
    let mut generations = Vec::new();
    for s in &ingest.series {
        let Some(e) = cal.entry(&s.generation) else {
            log::warn!("`{}` has no GA calendar entry; ignored", s.generation);
            continue;
        };
        if &e.family != family {
            continue;
        }
        let (series, outliers) = clean_generation(
            s,
            &ingest.config.preprocess,
            cal.trigger_ga(&s.generation).ok(),
        )?;
        generations.push(PreparedGeneration { series, outliers });
    }
    Ok(PreparedArtifact { generations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationFactor {
    pub feature: String,
    pub factor: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisArtifact {
    pub genealogy: GenealogyMatch,
    /// Months added to the matched generation so its returns trigger lines up with the current one.
    pub shift: i32,
    pub normalization: Vec<NormalizationFactor>,
    /// Matched generation's features, normalized and shifted.
    pub analog: GenerationFeatures,
    /// Modeling target on the current generation's calendar.
    pub target: FeatureSeries,
    pub current: GenerationFeatures,
    pub correlation: CorrelationTable,
    pub selected: Vec<String>,
    /// Predictors not defined over the whole training range or forecast window.
    pub uncovered: Vec<String>,
    pub selection_note: Option<String>,
    pub phases: LifecyclePhases,
    pub seasonal: Option<SeasonalDecomposition>,
    pub flags: CausalFactorFlags,
}

fn scale_series(s: &GenerationSeries, factors: &[(SourceFeature, f64)]) -> GenerationSeries {
    let mut out = s.clone();
    for (f, k) in factors {
        for v in out.values_mut(*f) {
            *v *= k;
        }
    }
    out
}

fn normalize_to(
    current: &GenerationSeries,
    matched: &GenerationSeries,
    shift: i32,
) -> Result<Vec<NormalizationFactor>> {
    let aligned = matched.shifted(shift);
    let span = current.range().intersect(&aligned.range());
    let window = |s: &GenerationSeries, f: SourceFeature| -> Vec<f64> {
        span.iter()
            .map(|m| s.values(f)[(m - s.start) as usize])
            .collect()
    };
    let returns = normalization_factor(
        &window(&aligned, SourceFeature::GrossReturns),
        &window(current, SourceFeature::GrossReturns),
    )
    .map_err(|e| Error::numeric(format!("returns normalization over {span}: {e}")))?;
    Ok(SourceFeature::ALL
        .iter()
        .map(|f| {
            let (factor, note) = if *f == SourceFeature::GrossReturns {
                (returns, String::new())
            } else {
                match normalization_factor(&window(&aligned, *f), &window(current, *f)) {
                    Ok(k) => (k, String::new()),
                    Err(e) => (returns, format!("returns factor used: {e}")),
                }
            };
            NormalizationFactor {
                feature: f.name().to_string(),
                factor,
                note,
            }
        })
        .collect())
}

fn trim_trailing_zeros(f: &FeatureSeries) -> FeatureSeries {
    let last = f.defined().filter(|(_, v)| *v > 0.0).map(|(m, _)| m).last();
    match last {
        Some(m) => f.restricted(MonthRange::new(f.start, m + 1)),
        None => f.clone(),
    }
}

fn covers(f: &FeatureSeries, range: MonthRange) -> bool {
    range.iter().all(|m| f.is_defined(m))
}

/// Genealogy match, normalization and alignment of the analog, predictor selection,
/// lifecycle phases, seasonality and causal flags.
pub fn analyze(ingest: &IngestArtifact, prepared: &PreparedArtifact) -> Result<AnalysisArtifact> {
    let cfg = &ingest.config;
    let cal = &ingest.calendar;
    let name = &ingest.generation;
    let current = &prepared
        .get(name)
        .ok_or_else(|| Error::validation(format!("`{name}` was not prepared")))?
        .series;
    let candidates: Vec<GenerationSeries> = cal
        .predecessors(name)
        .iter()
        .filter_map(|e| prepared.get(&e.generation.name))
        .map(|p| p.series.clone())
        .collect();
    if candidates.is_empty() {
        return Err(Error::validation(format!(
            "`{name}` has no earlier generation with history"
        )));
    }
    let genealogy = genealogy_match(current, &candidates, cal, &cfg.analysis.genealogy)?;
    let matched_name = genealogy.generation.clone();
    let matched = &prepared.get(&matched_name).expect("candidate").series;
    let shift = cal.trigger_ga(name)? - cal.trigger_ga(&matched_name)?;

    let normalization = normalize_to(current, matched, shift)?;
    let factors: Vec<(SourceFeature, f64)> = SourceFeature::ALL
        .iter()
        .zip(&normalization)
        .map(|(f, n)| (*f, n.factor))
        .collect();
    let matched_norm = scale_series(matched, &factors);
    let feats = build_features(&matched_norm, cal, &cfg.prep)?;

    let flags_matched = CausalFactorFlags::build(cal, &matched_name, &cfg.analysis.events)?;
    let raw_target = trim_trailing_zeros(&feats.target);
    let mut target = moving_average(&raw_target, cfg.models.target_smoothing)?;
    for (i, v) in target.values.iter_mut().enumerate() {
        if flags_matched.excluded(target.start + i as i32) {
            *v = None;
        }
    }
    let phases =
        segment_lifecycle(&raw_target, cal, &matched_name, &cfg.analysis.phases)?.shifted(shift);
    let seasonal = match decompose_seasonal(&raw_target, cfg.analysis.seasonal_period) {
        Ok(d) => Some(d),
        Err(e) => {
            log::warn!("seasonal decomposition of `{matched_name}` skipped: {e}");
            None
        }
    };

    let analog = feats.shifted(shift);
    let target = target.shifted(shift);
    let current_feats = build_features(current, cal, &cfg.prep)?;

    let training = target.defined_range();
    let window = ingest.window();
    let mut uncovered = Vec::new();
    let covered: Vec<&FeatureSeries> = analog
        .predictors
        .iter()
        .filter(|p| {
            let ok = covers(p, training)
                && current_feats
                    .predictors
                    .iter()
                    .any(|c| c.name == p.name && covers(c, window));
            if !ok {
                uncovered.push(p.name.clone());
            }
            ok
        })
        .collect();

    let mut targets: Vec<&FeatureSeries> = vec![&target];
    targets.extend(
        analog
            .target_variants
            .iter()
            .filter(|v| v.name != target.name),
    );
    let correlation = CorrelationTable::build(&analog.predictors, &targets, &cfg.analysis.strength);
    let for_target = correlation.for_target(&target.name);
    let strong = if for_target.rows.is_empty() {
        Default::default()
    } else {
        select_predictors(&for_target)?
    };
    let r_of = |name: &str| {
        for_target
            .rows
            .iter()
            .find(|r| r.predictor == name)
            .map(|r| r.pearson_r.abs())
    };
    let mut ranked: Vec<&FeatureSeries> = covered
        .iter()
        .copied()
        .filter(|p| strong.contains(&p.name))
        .collect();
    ranked.sort_by(|a, b| {
        r_of(&b.name)
            .unwrap_or(0.0)
            .total_cmp(&r_of(&a.name).unwrap_or(0.0))
            .then(a.name.cmp(&b.name))
    });
    let mut kept: Vec<&FeatureSeries> = Vec::new();
    let mut pruned = Vec::new();
    for p in ranked {
        let cap = cfg.analysis.max_predictors;
        if cap > 0 && kept.len() >= cap {
            pruned.push(format!("{} (cap)", p.name));
            continue;
        }
        let clash = kept.iter().find(|k| {
            let (a, b) = crate::analysis::correlation::overlap(
                &p.restricted(training),
                &k.restricted(training),
            );
            pearson_values(&a, &b)
                .map(|r| r.abs() > cfg.analysis.collinearity_cut)
                .unwrap_or(false)
        });
        match clash {
            Some(k) => pruned.push(format!("{} (collinear with {})", p.name, k.name)),
            None => kept.push(p),
        }
    }
    let mut selected: Vec<String> = kept.iter().map(|p| p.name.clone()).collect();
    let selection_note = (!pruned.is_empty()).then(|| format!("pruned: {}", pruned.join(", ")));
    selected.sort();

    Ok(AnalysisArtifact {
        genealogy,
        shift,
        normalization,
        analog,
        target,
        current: current_feats,
        correlation,
        selected,
        uncovered,
        selection_note,
        phases,
        seasonal,
        flags: CausalFactorFlags::build(cal, name, &cfg.analysis.events)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmFit {
    pub row: LeaderboardRow,
    pub test_months: MonthRange,
    pub test_actual: Vec<f64>,
    pub test_predictions: Vec<f64>,
    pub residual_sd: f64,
    /// Refit on the whole analog lifecycle; used for the forecast.
    pub full_model: FittedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainArtifact {
    pub matrix_months: MonthRange,
    pub train_months: MonthRange,
    pub test_months: MonthRange,
    pub leaderboard: ModelLeaderboard,
    pub failures: Vec<(String, String)>,
    /// Ranked like the leaderboard.
    pub fits: Vec<AlgorithmFit>,
}

pub fn train(ingest: &IngestArtifact, analysis: &AnalysisArtifact) -> Result<TrainArtifact> {
    let cfg = &ingest.config.models;
    let preds: Vec<FeatureSeries> = analysis
        .analog
        .predictors
        .iter()
        .filter(|p| analysis.selected.contains(&p.name))
        .cloned()
        .collect();
    let matrix = align(&preds, &analysis.target)?;
    if matrix.n_rows() < 6 {
        return Err(Error::validation(format!(
            "only {} aligned training rows",
            matrix.n_rows()
        )));
    }
    let (tr, te) = split_chronological(&matrix, cfg.train_fraction)?;
    let phases = Some(&analysis.phases);
    let (leaderboard, evals, failures) = evaluate_models(&cfg.specs(), &tr, &te, phases, cfg.z);
    if evals.is_empty() {
        return Err(Error::numeric(format!(
            "no model could be fitted: {failures:?}"
        )));
    }

    let (composite, single): (Vec<_>, Vec<_>) = evals
        .iter()
        .partition(|e| e.row.spec.kind == ModelKind::PhaseWise);
    let mut full: Vec<(usize, Result<FittedModel>)> = single
        .par_iter()
        .map(|e| {
            (
                evals.iter().position(|x| std::ptr::eq(x, *e)).unwrap(),
                fit_any(&e.row.spec, &matrix, phases, None),
            )
        })
        .collect();
    let fallback = full
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .next()
        .cloned();
    for e in composite {
        let i = evals.iter().position(|x| std::ptr::eq(x, e)).unwrap();
        full.push((i, fit_any(&e.row.spec, &matrix, phases, fallback.as_ref())));
    }
    full.sort_by_key(|(i, _)| *i);

    let fits = full
        .into_iter()
        .map(|(i, r)| {
            let e = &evals[i];
            Ok(AlgorithmFit {
                row: e.row.clone(),
                test_months: te.months(),
                test_actual: te.target.clone(),
                test_predictions: e.test_predictions.clone(),
                residual_sd: e.residual_sd,
                full_model: r.map_err(|err| {
                    Error::numeric(format!("{} refit failed: {err}", e.row.algorithm))
                })?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainArtifact {
        matrix_months: matrix.months(),
        train_months: tr.months(),
        test_months: te.months(),
        leaderboard,
        failures,
        fits,
    })
}

/// Early-warning figures for one algorithm on its held-out months.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmStats {
    pub algorithm: String,
    pub cum_sum_mean: Option<f64>,
    pub cum_sum_sd: Option<f64>,
    pub mape_score: i64,
    pub projection: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmForecast {
    pub algorithm: String,
    pub best_fit: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastArtifact {
    pub forecast: ForecastSeries,
    pub algorithms: Vec<AlgorithmForecast>,
    pub stats: Vec<AlgorithmStats>,
}

fn algorithm_stats(
    fit: &AlgorithmFit,
    forecast: &[f64],
    window: MonthRange,
    ingest: &IngestArtifact,
) -> AlgorithmStats {
    let cfg = &ingest.config.ewa;
    let apes: Vec<f64> = fit
        .test_actual
        .iter()
        .zip(&fit.test_predictions)
        .filter(|(a, _)| **a != 0.0)
        .map(|(a, p)| ((a - p) / a * 100.0).abs())
        .collect();
    let (cum_sum_mean, cum_sum_sd) = match six_month_stats(&apes, cfg.stats_window) {
        Ok((m, s)) => (Some(m), Some(s)),
        Err(_) => (None, None),
    };
    let n = fit.test_actual.len();
    let colors: Vec<ewa::Color> = (n.saturating_sub(cfg.score_window)..n)
        .filter(|i| fit.test_actual[*i] != 0.0)
        .map(|i| {
            color(
                (fit.test_actual[i] - fit.test_predictions[i]) / fit.test_actual[i] * 100.0,
                cfg.red_cut,
            )
        })
        .collect();
    let actuals = ingest.actuals();
    let w = cfg.projection_window as i32;
    let recent: Vec<f64> = (1..=w)
        .rev()
        .filter_map(|k| actuals.get(ingest.cycle - k))
        .collect();
    let next: Vec<f64> = (0..w)
        .filter_map(|k| {
            window
                .iter()
                .position(|m| m == ingest.cycle + k)
                .map(|i| forecast[i])
        })
        .collect();
    AlgorithmStats {
        algorithm: fit.row.algorithm.clone(),
        cum_sum_mean,
        cum_sum_sd,
        mape_score: mape_score(&colors, &cfg.weights),
        projection: ewa::projection(&recent, &next, cfg.projection_window).ok(),
    }
}

pub fn forecast(
    ingest: &IngestArtifact,
    analysis: &AnalysisArtifact,
    train: &TrainArtifact,
) -> Result<ForecastArtifact> {
    let window = ingest.window();
    let preds: Vec<FeatureSeries> = analysis
        .current
        .predictors
        .iter()
        .filter(|p| analysis.selected.contains(&p.name))
        .cloned()
        .collect();
    let table = align_predictors(&preds, window)?;
    let z = ingest.config.models.z;
    let mut algorithms = Vec::new();
    let mut stats = Vec::new();
    let mut series = None;
    for fit in &train.fits {
        let best = fit.full_model.predict(&table)?;
        stats.push(algorithm_stats(fit, &best, window, ingest));
        if series.is_none() {
            let (lci, uci) = interval_bands(&best, fit.residual_sd, z);
            series = Some(ForecastSeries {
                months: window,
                best_fit: best.clone(),
                lci,
                uci,
                model: fit.row.spec.clone(),
                test_mape: fit.row.mape_best_fit,
                test_correlation: fit.row.correlation,
                adjustments: vec![],
            });
        }
        algorithms.push(AlgorithmForecast {
            algorithm: fit.row.algorithm.clone(),
            best_fit: best,
        });
    }
    let forecast = series.ok_or_else(|| Error::numeric("no fitted model to forecast with"))?;
    forecast.check()?;
    Ok(ForecastArtifact {
        forecast,
        algorithms,
        stats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustArtifact {
    pub forecast: ForecastSeries,
    pub applied: Vec<AppliedAdjustment>,
}

pub fn adjust(
    ingest: &IngestArtifact,
    analysis: &AnalysisArtifact,
    fc: &ForecastArtifact,
) -> Result<AdjustArtifact> {
    let (forecast, applied) = adjust_forecast(
        &fc.forecast,
        &ingest.actuals(),
        analysis.seasonal.as_ref(),
        &ingest.calendar,
        &ingest.generation,
        ingest.cycle,
        &ingest.config.adjust,
    )?;
    Ok(AdjustArtifact { forecast, applied })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwaArtifact {
    pub previous_cycle: Option<MonthIndex>,
    pub report: EwaReport,
}

/// `previous` is the latest stored cycle before this one; `history` all earlier cycles.
pub fn ewa_stage(
    ingest: &IngestArtifact,
    adjusted: &AdjustArtifact,
    previous: Option<&CycleRecord>,
    history: &[CycleRecord],
) -> Result<EwaArtifact> {
    let input = EwaInput {
        as_of: ingest.cycle,
        previous: previous.map(|r| r.as_previous()),
        current_forecast: adjusted.forecast.clone(),
        actuals: ingest.actuals(),
        mape_history: history
            .iter()
            .filter_map(|r| r.ewa_window_pad.map(f64::abs))
            .collect(),
    };
    let report = run_ewa(&input, &ingest.config.ewa)?;
    Ok(EwaArtifact {
        previous_cycle: previous.map(|r| r.cycle_month),
        report,
    })
}

pub fn cycle_record(
    ingest: &IngestArtifact,
    adjusted: &AdjustArtifact,
    ewa: &EwaArtifact,
    select: SeriesChoice,
) -> Result<CycleRecord> {
    let entry = ingest
        .calendar
        .entry(&ingest.generation)
        .expect("checked at ingest");
    let id = GenerationId::new(&entry.generation.name, entry.generation.ordinal)?;
    let mut rec = CycleRecord::new(ingest.cycle, id, adjusted.forecast.clone(), select)
        .with_actuals(&ingest.actuals());
    rec.ewa_window_pad = ewa.report.step1.as_ref().map(|s| s.window_pad);
    rec.validate(Some(ingest.latest_month))?;
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleArtifacts {
    pub ingest: IngestArtifact,
    pub prepared: PreparedArtifact,
    pub analysis: AnalysisArtifact,
    pub train: TrainArtifact,
    pub forecast: ForecastArtifact,
    pub adjusted: AdjustArtifact,
    pub ewa: EwaArtifact,
}

/// Runs every stage in memory. Errors name the failing stage.
pub fn run_stages(ingest: IngestArtifact, store: Option<&CycleStore>) -> Result<CycleArtifacts> {
    let prepared = prepare(&ingest).map_err(|e| e.in_stage("prepare"))?;
    let analysis = analyze(&ingest, &prepared).map_err(|e| e.in_stage("analyze"))?;
    let train_a = train(&ingest, &analysis).map_err(|e| e.in_stage("train"))?;
    let forecast_a = forecast(&ingest, &analysis, &train_a).map_err(|e| e.in_stage("forecast"))?;
    let adjusted = adjust(&ingest, &analysis, &forecast_a).map_err(|e| e.in_stage("adjust"))?;
    let (previous, history) = match store {
        Some(s) => (
            s.load_previous_cycle(&ingest.generation, ingest.cycle)
                .map_err(|e| e.in_stage("ewa"))?,
            s.history_before(&ingest.generation, ingest.cycle)
                .map_err(|e| e.in_stage("ewa"))?,
        ),
        None => (None, vec![]),
    };
    let ewa = ewa_stage(&ingest, &adjusted, previous.as_ref(), &history)
        .map_err(|e| e.in_stage("ewa"))?;
    Ok(CycleArtifacts {
        ingest,
        prepared,
        analysis,
        train: train_a,
        forecast: forecast_a,
        adjusted,
        ewa,
    })
}

/// Stores this cycle's record and refreshes the realized actuals of earlier records.
pub fn record_cycle(
    store: &CycleStore,
    artifacts: &CycleArtifacts,
    select: SeriesChoice,
) -> Result<CycleRecord> {
    let ingest = &artifacts.ingest;
    let rec = cycle_record(ingest, &artifacts.adjusted, &artifacts.ewa, select)?;
    let actuals = ingest.actuals();
    for old in store.history_before(&ingest.generation, ingest.cycle)? {
        let updated = old.clone().with_actuals(&actuals);
        if updated != old {
            store.store_cycle(&updated)?;
        }
    }
    store.store_cycle(&rec)?;
    Ok(rec)
}

/// Pearson r of the current generation's observed returns against the analog over the same months.
pub fn analog_fit(analysis: &AnalysisArtifact) -> Option<f64> {
    let target = &analysis.current.target;
    let (a, b): (Vec<f64>, Vec<f64>) = target
        .defined()
        .filter_map(|(m, v)| analysis.target.get(m).map(|t| (v, t)))
        .unzip();
    pearson_values(&a, &b).ok()
}
