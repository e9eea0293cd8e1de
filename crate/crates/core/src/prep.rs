//! Business-rule filtering and feature transforms applied before modeling.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{
    FeatureSeries, GaCalendar, GenerationSeries, MonthRange, Provenance, SourceFeature,
};
use crate::error::{Error, Result};

/// Modeling view of one generation: the four raw features, possibly with undefined months.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationView {
    pub generation: String,
    pub shipments: FeatureSeries,
    pub upgrades: FeatureSeries,
    pub new_receipts: FeatureSeries,
    pub gross_returns: FeatureSeries,
}

impl GenerationView {
    pub fn of(series: &GenerationSeries) -> Self {
        GenerationView {
            generation: series.generation.clone(),
            shipments: series.feature(SourceFeature::Shipments),
            upgrades: series.feature(SourceFeature::Upgrades),
            new_receipts: series.feature(SourceFeature::NewReceipts),
            gross_returns: series.feature(SourceFeature::GrossReturns),
        }
    }
}

/// Restricts the returns target to months on or after GA of the next generation.
///
/// Predictors keep their full history so lagged features stay defined after GA.
pub fn filter_post_ga(view: &GenerationView, calendar: &GaCalendar) -> Result<GenerationView> {
    let trigger = calendar.trigger_ga(&view.generation)?;
    let returns = &view.gross_returns;
    if trigger >= returns.end() {
        return Err(Error::validation(format!(
            "no post-GA returns for `{}`: next GA {trigger} is after the last month {}",
            view.generation,
            returns.end() - 1
        )));
    }
    let mut out = view.clone();
    out.gross_returns =
        returns.restricted(MonthRange::new(trigger.max(returns.start), returns.end()));
    Ok(out)
}

/// Marks new receipts in the `window` months before GA of the next generation as undefined.
pub fn exclude_pre_ga_receipts(
    view: &GenerationView,
    calendar: &GaCalendar,
    window: u32,
) -> Result<GenerationView> {
    let trigger = calendar.trigger_ga(&view.generation)?;
    let excluded = MonthRange::new(trigger - window as i32, trigger);
    let mut out = view.clone();
    let start = out.new_receipts.start;
    for (i, v) in out.new_receipts.values.iter_mut().enumerate() {
        if excluded.contains(start + i as i32) {
            *v = None;
        }
    }
    Ok(out)
}

/// Value at month `m` becomes the input's value at `m - k`.
pub fn lag(feature: &FeatureSeries, k: u32) -> FeatureSeries {
    if k == 0 {
        return feature.clone();
    }
    FeatureSeries {
        name: format!("{}_lag_{k}", feature.name),
        start: feature.start + k as i32,
        values: feature.values.clone(),
        provenance: Provenance::Lagged(k),
    }
}

/// Trailing mean over the most recent `w` months.
///
/// The first `w - 1` months average the available prefix, so the output is as long as the
/// input. Undefined input months stay undefined and are skipped inside later windows.
pub fn moving_average(feature: &FeatureSeries, w: u32) -> Result<FeatureSeries> {
    if w == 0 {
        return Err(Error::validation(
            "moving-average window must be at least 1",
        ));
    }
    if w == 1 {
        return Ok(feature.clone());
    }
    let w = w as usize;
    let values = (0..feature.len())
        .map(|i| {
            feature.values[i]?;
            let lo = (i + 1).saturating_sub(w);
            let window: Vec<f64> = feature.values[lo..=i].iter().flatten().copied().collect();
            Some(window.iter().sum::<f64>() / window.len() as f64)
        })
        .collect();
    Ok(FeatureSeries {
        name: format!("{}_ma_{w}", feature.name),
        start: feature.start,
        values,
        provenance: Provenance::MovingAverage(w as u32),
    })
}

/// Running sum from the first defined month; undefined months contribute nothing.
pub fn cumulative_sum(feature: &FeatureSeries) -> FeatureSeries {
    let mut acc: Option<f64> = None;
    let values = feature
        .values
        .iter()
        .map(|v| {
            if let Some(v) = v {
                acc = Some(acc.unwrap_or(0.0) + v);
            }
            acc
        })
        .collect();
    FeatureSeries {
        name: format!("{}_cumsum", feature.name),
        start: feature.start,
        values,
        provenance: Provenance::CumulativeSum,
    }
}

/// Renames historical features so they line up with the current generation's names.
///
/// `mapping` pairs are `(source name, target name)`; every name in `required` must exist
/// after renaming.
pub fn map_features(
    source: &[FeatureSeries],
    required: &[String],
    mapping: &[(String, String)],
) -> Result<Vec<FeatureSeries>> {
    let mut targets = BTreeSet::new();
    let mut rename = BTreeMap::new();
    for (from, to) in mapping {
        if !targets.insert(to.as_str()) || rename.insert(from.as_str(), to.as_str()).is_some() {
            return Err(Error::validation(format!(
                "feature mapping is not one-to-one at `{from}` -> `{to}`"
            )));
        }
    }
    let out: Vec<FeatureSeries> = source
        .iter()
        .map(|f| match rename.get(f.name.as_str()) {
            Some(to) => f.renamed(*to),
            None => f.clone(),
        })
        .collect();
    let mut seen = BTreeSet::new();
    for f in &out {
        if !seen.insert(f.name.as_str()) {
            return Err(Error::DuplicateFeature(f.name.clone()));
        }
    }
    let missing: Vec<String> = required
        .iter()
        .filter(|r| !seen.contains(r.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingFeatures(missing));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub lags: Vec<u32>,
    pub ma_windows: Vec<u32>,
    pub exclude_pre_ga_receipts: bool,
    pub receipt_exclusion_months: u32,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            lags: vec![24, 30, 42, 48, 54],
            ma_windows: vec![3, 6],
            exclude_pre_ga_receipts: true,
            receipt_exclusion_months: 6,
        }
    }
}

/// Target plus the candidate predictor set for one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationFeatures {
    pub generation: String,
    pub target: FeatureSeries,
    /// Moving-average variants of the post-GA target, one per configured window.
    pub target_variants: Vec<FeatureSeries>,
    pub predictors: Vec<FeatureSeries>,
}

impl GenerationFeatures {
    pub fn shifted(&self, months: i32) -> GenerationFeatures {
        GenerationFeatures {
            generation: self.generation.clone(),
            target: self.target.shifted(months),
            target_variants: self
                .target_variants
                .iter()
                .map(|f| f.shifted(months))
                .collect(),
            predictors: self.predictors.iter().map(|f| f.shifted(months)).collect(),
        }
    }
}

/// Applies the data-preparation rules and builds raw, lagged and cumulative predictors.
///
/// The pre-GA receipt exclusion applies to the raw receipts predictor and its running sum.
/// Lagged receipts are taken from the unexcluded history: lags of 24-30 months would
/// otherwise move the excluded window into the post-GA modeling range.
pub fn build_features(
    series: &GenerationSeries,
    calendar: &GaCalendar,
    cfg: &PrepConfig,
) -> Result<GenerationFeatures> {
    let full = GenerationView::of(series);
    let mut view = filter_post_ga(&full, calendar)?;
    if cfg.exclude_pre_ga_receipts {
        view = exclude_pre_ga_receipts(&view, calendar, cfg.receipt_exclusion_months)?;
    }

    let mut predictors = Vec::new();
    for (raw, lag_source) in [
        (&view.shipments, &full.shipments),
        (&view.upgrades, &full.upgrades),
        (&view.new_receipts, &full.new_receipts),
    ] {
        predictors.push(raw.clone());
        for &k in cfg.lags.iter().filter(|k| **k > 0) {
            predictors.push(lag(lag_source, k));
        }
    }
    predictors.push(cumulative_sum(&view.new_receipts));

    let target_variants = cfg
        .ma_windows
        .iter()
        .filter(|w| **w > 1)
        .map(|&w| moving_average(&view.gross_returns, w))
        .collect::<Result<Vec<_>>>()?;

    Ok(GenerationFeatures {
        generation: series.generation.clone(),
        target: view.gross_returns,
        target_variants,
        predictors,
    })
}
