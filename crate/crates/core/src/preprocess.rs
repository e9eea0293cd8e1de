//! Data quality: sigma-band outlier detection, cross-generation magnitude normalization and
//! smoothing repair.

use serde::{Deserialize, Serialize};

use crate::domain::{FeatureSeries, GenerationSeries, MonthIndex, Provenance, SourceFeature};
use crate::error::{Error, Result};
use crate::prep;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Band half-width in standard deviations.
    pub sigma: f64,
    /// Divide by `n` rather than `n - 1` when estimating the band.
    pub population_sd: bool,
    /// Features with flagged outliers are replaced by their moving average of this width.
    pub smooth_window: u32,
    pub repair_outliers: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            sigma: 3.0,
            population_sd: true,
            smooth_window: 3,
            repair_outliers: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutlierAction {
    Reported,
    Smoothed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedValue {
    pub month: MonthIndex,
    pub value: f64,
    pub band_low: f64,
    pub band_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub feature: String,
    pub flagged: Vec<FlaggedValue>,
    pub action: OutlierAction,
}

/// Flags values strictly outside `mean ± sigma·SD`, with moments taken over the whole feature.
pub fn detect_outliers(feature: &FeatureSeries, cfg: &PreprocessConfig) -> Result<OutlierReport> {
    let values = feature.defined_values();
    if values.len() < 2 {
        return Err(Error::validation(format!(
            "outlier detection on `{}` needs at least 2 values, got {}",
            feature.name,
            values.len()
        )));
    }
    let mean = stats::mean(&values);
    let sd = stats::std_dev(&values, cfg.population_sd);
    let (low, high) = (mean - cfg.sigma * sd, mean + cfg.sigma * sd);
    let flagged = feature
        .defined()
        .filter(|(_, v)| *v < low || *v > high)
        .map(|(month, value)| FlaggedValue {
            month,
            value,
            band_low: low,
            band_high: high,
        })
        .collect();
    Ok(OutlierReport {
        feature: feature.name.clone(),
        flagged,
        action: OutlierAction::Reported,
    })
}

/// `Σ reference / Σ source`, the factor that brings the source to the reference magnitude.
pub fn normalization_factor(source: &[f64], reference: &[f64]) -> Result<f64> {
    let s: f64 = source.iter().sum();
    let r: f64 = reference.iter().sum();
    if !(s > 0.0) {
        return Err(Error::numeric("normalization source sums to zero"));
    }
    if !(r > 0.0) {
        return Err(Error::numeric("normalization reference sums to zero"));
    }
    Ok(r / s)
}

/// Scales a feature of the older generation so its total matches the reference generation.
pub fn normalize_generation(
    source: &GenerationSeries,
    reference: &GenerationSeries,
    feature: SourceFeature,
) -> Result<FeatureSeries> {
    let factor = normalization_factor(source.values(feature), reference.values(feature))?;
    Ok(normalize_feature(&source.feature(feature), factor))
}

pub fn normalize_feature(feature: &FeatureSeries, factor: f64) -> FeatureSeries {
    let mut out = feature.map_defined(|v| v * factor);
    out.provenance = Provenance::Normalized;
    out
}

/// Moving-average smoothing; the anomaly repair path.
pub fn smooth(feature: &FeatureSeries, w: u32) -> Result<FeatureSeries> {
    prep::moving_average(feature, w)
}

/// Detects outliers in every raw feature of a generation and repairs the flagged months.
///
/// Gross returns are screened from `returns_from` on when given, so the zero months before
/// returns start do not inflate the band. Repair replaces each flagged value with the
/// trailing moving average at that month.
pub fn clean_generation(
    series: &GenerationSeries,
    cfg: &PreprocessConfig,
    returns_from: Option<MonthIndex>,
) -> Result<(GenerationSeries, Vec<OutlierReport>)> {
    let mut out = series.clone();
    let mut reports = Vec::new();
    for f in SourceFeature::ALL {
        let mut raw = series.feature(f);
        if let (SourceFeature::GrossReturns, Some(from)) = (f, returns_from) {
            raw = raw.restricted(crate::domain::MonthRange::new(
                from.max(raw.start),
                raw.end(),
            ));
        }
        if raw.defined_count() < 2 {
            continue;
        }
        let mut report = detect_outliers(&raw, cfg)?;
        if !report.flagged.is_empty() && cfg.repair_outliers && cfg.smooth_window > 1 {
            let smoothed = smooth(&series.feature(f), cfg.smooth_window)?;
            let values = out.values_mut(f);
            for flag in &report.flagged {
                let i = (flag.month - series.start) as usize;
                values[i] = smoothed.values[i].unwrap_or(values[i]);
            }
            report.action = OutlierAction::Smoothed;
        }
        if !report.flagged.is_empty() {
            log::warn!(
                "{}: {} outlier(s) in {} ({:?})",
                series.generation,
                report.flagged.len(),
                report.feature,
                report.action
            );
        }
        reports.push(report);
    }
    Ok((out, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fs(values: Vec<f64>) -> FeatureSeries {
        FeatureSeries::from_values("x", MonthIndex(0), values, Provenance::Raw)
    }

    /// Recomputes the band directly and returns the flagged indices.
    pub(crate) fn oracle_flags(values: &[f64], k: f64) -> Vec<usize> {
        let n = values.len() as f64;
        let m = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        (0..values.len())
            .filter(|&i| (values[i] - m).abs() > k * sd)
            .collect()
    }

    fn flagged_indices(r: &OutlierReport) -> Vec<usize> {
        r.flagged.iter().map(|f| f.month.0 as usize).collect()
    }

    #[test]
    fn constant_series_has_no_outliers() {
        let r = detect_outliers(&fs(vec![7.0; 24]), &PreprocessConfig::default()).unwrap();
        assert!(r.flagged.is_empty());
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(detect_outliers(&fs(vec![1.0]), &PreprocessConfig::default()).is_err());
    }

    #[test]
    fn single_large_spike_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(100.0, 1.0).unwrap();
        let mut v: Vec<f64> = (0..24).map(|_| noise.sample(&mut rng)).collect();
        let sd = crate::stats::std_dev(&v, true);
        v[9] = 100.0 + 8.0 * sd;
        let r = detect_outliers(&fs(v.clone()), &PreprocessConfig::default()).unwrap();
        assert_eq!(flagged_indices(&r), vec![9]);
        assert_eq!(flagged_indices(&r), oracle_flags(&v, 3.0));
        for f in &r.flagged {
            assert!(f.value < f.band_low || f.value > f.band_high);
        }
    }

    #[test]
    fn five_spikes_in_returns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut v: Vec<f64> = (0..60)
            .map(|_| 200.0 + 2.0 * noise.sample(&mut rng))
            .collect();
        for (i, sign) in [(5, 1.0), (17, -1.0), (29, 1.0), (41, 1.0), (53, -1.0)] {
            v[i] = 200.0 + sign * 5.0 * 2.0 * 3.0;
        }
        let r = detect_outliers(&fs(v.clone()), &PreprocessConfig::default()).unwrap();
        assert_eq!(flagged_indices(&r), oracle_flags(&v, 3.0));
        assert_eq!(r.flagged.len(), 5);
    }

    #[test]
    fn normalization_examples() {
        let mk = |v: Vec<f64>| {
            GenerationSeries::new("g", MonthIndex(0), v.clone(), v.clone(), v.clone(), v).unwrap()
        };
        let out = normalize_generation(
            &mk(vec![1.0, 2.0, 3.0]),
            &mk(vec![2.0, 4.0, 6.0]),
            SourceFeature::Shipments,
        )
        .unwrap();
        assert_eq!(out.defined_values(), vec![2.0, 4.0, 6.0]);
        assert_eq!(out.provenance, Provenance::Normalized);

        let same = normalize_generation(
            &mk(vec![1.0, 5.0]),
            &mk(vec![3.0, 3.0]),
            SourceFeature::Upgrades,
        )
        .unwrap();
        assert_eq!(same.defined_values(), vec![1.0, 5.0]);

        let big = normalize_generation(
            &mk(vec![10.0, 20.0]),
            &mk(vec![35.0, 70.0]),
            SourceFeature::GrossReturns,
        )
        .unwrap();
        assert!((big.defined_values()[1] - 70.0).abs() < 1e-12);

        assert!(normalize_generation(
            &mk(vec![0.0, 0.0]),
            &mk(vec![1.0, 1.0]),
            SourceFeature::Shipments
        )
        .is_err());
        assert!(normalize_generation(
            &mk(vec![1.0, 1.0]),
            &mk(vec![0.0, 0.0]),
            SourceFeature::Shipments
        )
        .is_err());
    }

    #[test]
    fn smoothing_examples() {
        let s = smooth(&fs(vec![0.0, 100.0, 0.0]), 3)
            .unwrap()
            .defined_values();
        assert_eq!(s[0], 0.0);
        assert_eq!(s[1], 50.0);
        assert!((s[2] - 100.0 / 3.0).abs() < 1e-12);

        let ramp: Vec<f64> = (0..20).map(|i| 3.0 * i as f64 + 1.0).collect();
        let s3 = smooth(&fs(ramp.clone()), 3).unwrap().defined_values();
        for i in 2..20 {
            let brute = (ramp[i - 2] + ramp[i - 1] + ramp[i]) / 3.0;
            assert!((s3[i] - brute).abs() < 1e-12);
            assert!((s3[i] - (ramp[i] - 3.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn wider_window_is_smoother() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(50.0, 10.0).unwrap();
        let v: Vec<f64> = (0..120).map(|_| noise.sample(&mut rng)).collect();
        let var = |w| {
            let s = smooth(&fs(v.clone()), w).unwrap().defined_values();
            crate::stats::sample_sd(&s[6..]).powi(2)
        };
        assert!(var(6) < var(3));
    }

    #[test]
    fn clean_generation_smooths_flagged_features() {
        let mut returns = vec![10.0; 30];
        returns[12] = 500.0;
        let flat = vec![5.0; 30];
        let g = GenerationSeries::new(
            "g",
            MonthIndex(0),
            flat.clone(),
            flat.clone(),
            flat,
            returns,
        )
        .unwrap();
        let (cleaned, reports) = clean_generation(&g, &PreprocessConfig::default(), None).unwrap();
        let r = reports
            .iter()
            .find(|r| r.feature == "gross_returns")
            .unwrap();
        assert_eq!(r.action, OutlierAction::Smoothed);
        assert!((cleaned.gross_returns[12] - 520.0 / 3.0).abs() < 1e-9);
        assert_eq!(cleaned.gross_returns[13], 10.0);
        assert_eq!(cleaned.shipments, g.shipments);

        let mut ramp: Vec<f64> = vec![0.0; 30];
        ramp.extend((1..=6).map(f64::from));
        let f = vec![5.0; 36];
        let g = GenerationSeries::new("g", MonthIndex(0), f.clone(), f.clone(), f, ramp).unwrap();
        let (_, all) = clean_generation(&g, &PreprocessConfig::default(), None).unwrap();
        let (_, post) =
            clean_generation(&g, &PreprocessConfig::default(), Some(MonthIndex(30))).unwrap();
        let flags = |r: &[OutlierReport]| {
            r.iter()
                .find(|r| r.feature == "gross_returns")
                .unwrap()
                .flagged
                .len()
        };
        assert!(flags(&all) > 0);
        assert_eq!(flags(&post), 0);
    }

    proptest! {
        #[test]
        fn normalization_conserves_reference_total(
            src in prop::collection::vec(0.1f64..500.0, 2..40),
            refs in prop::collection::vec(0.1f64..2000.0, 2..40),
            c in 0.01f64..100.0,
        ) {
            let f = normalization_factor(&src, &refs).unwrap();
            let out = normalize_feature(&fs(src.clone()), f);
            let total: f64 = out.defined_values().iter().sum();
            let target: f64 = refs.iter().sum();
            prop_assert!((total - target).abs() <= 1e-9 * target);

            let scaled: Vec<f64> = src.iter().map(|v| v * c).collect();
            let f2 = normalization_factor(&scaled, &refs).unwrap();
            let out2 = normalize_feature(&fs(scaled), f2);
            for (a, b) in out.defined_values().iter().zip(out2.defined_values()) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn outliers_invariant_under_shift(
            v in prop::collection::vec(-50.0f64..50.0, 2..40),
            c in -1000.0f64..1000.0,
        ) {
            let cfg = PreprocessConfig::default();
            let a = detect_outliers(&fs(v.clone()), &cfg).unwrap();
            let b = detect_outliers(&fs(v.iter().map(|x| x + c).collect()), &cfg).unwrap();
            let fa = flagged_indices(&a);
            let fb = flagged_indices(&b);
            // Only points within rounding distance of the band edge may flip.
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = crate::stats::std_dev(&v, true);
            for i in fa.iter().filter(|i| !fb.contains(i)).chain(fb.iter().filter(|i| !fa.contains(i))) {
                let edge_gap = ((v[*i] - m).abs() / sd - 3.0).abs();
                prop_assert!(edge_gap < 1e-6);
            }
        }

        #[test]
        fn smoothing_stays_within_input_range(v in prop::collection::vec(0.0f64..1e3, 1..50), w in 1u32..8) {
            let s = smooth(&fs(v.clone()), w).unwrap().defined_values();
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for x in s {
                prop_assert!(x >= lo - 1e-9 && x <= hi + 1e-9);
            }
        }
    }
}
