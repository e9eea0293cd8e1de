use serde::{Deserialize, Serialize};

use crate::domain::{FeatureSeries, MonthIndex, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalDecomposition {
    pub period: u32,
    /// Centered moving average, defined on the interior only.
    pub trend: FeatureSeries,
    pub seasonal: FeatureSeries,
    pub residual: FeatureSeries,
    /// Seasonal effect by `month mod period`, zero mean.
    pub profile: Vec<f64>,
}

impl SeasonalDecomposition {
    /// Seasonal effect for any month, extending the profile periodically.
    pub fn seasonal_at(&self, m: MonthIndex) -> f64 {
        self.profile[m.0.rem_euclid(self.period as i32) as usize]
    }
}

/// Classical additive decomposition with a centered moving-average trend.
pub fn decompose_seasonal(feature: &FeatureSeries, period: u32) -> Result<SeasonalDecomposition> {
    if period < 2 {
        return Err(Error::validation(format!(
            "seasonal period must be at least 2, got {period}"
        )));
    }
    let p = period as usize;
    let x: Vec<f64> = feature
        .values
        .iter()
        .map(|v| {
            v.ok_or_else(|| Error::validation(format!("`{}` has undefined months", feature.name)))
        })
        .collect::<Result<_>>()?;
    let n = x.len();
    if n < 2 * p {
        return Err(Error::validation(format!(
            "series too short for seasonal decomposition: {n} months, need {}",
            2 * p
        )));
    }

    // Even periods use the 2×p average so the window stays centered.
    let half = p / 2;
    let weights: Vec<f64> = if p.is_multiple_of(2) {
        (0..=p)
            .map(|i| if i == 0 || i == p { 0.5 } else { 1.0 } / p as f64)
            .collect()
    } else {
        vec![1.0 / p as f64; p]
    };
    let mut trend = vec![None; n];
    for (t, slot) in trend.iter_mut().enumerate().take(n - half).skip(half) {
        *slot = Some(
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * x[t + i - half])
                .sum::<f64>(),
        );
    }

    let mut sums = vec![0.0; p];
    let mut counts = vec![0usize; p];
    for (t, tr) in trend.iter().enumerate() {
        if let Some(tr) = tr {
            let pos = (feature.start.0 + t as i32).rem_euclid(period as i32) as usize;
            sums[pos] += x[t] - tr;
            counts[pos] += 1;
        }
    }
    let raw: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| s / *c as f64)
        .collect();
    let centre = raw.iter().sum::<f64>() / p as f64;
    let profile: Vec<f64> = raw.iter().map(|v| v - centre).collect();

    let seasonal: Vec<f64> = (0..n)
        .map(|t| profile[(feature.start.0 + t as i32).rem_euclid(period as i32) as usize])
        .collect();
    let residual: Vec<Option<f64>> = trend
        .iter()
        .enumerate()
        .map(|(t, tr)| tr.map(|tr| x[t] - tr - seasonal[t]))
        .collect();

    let named = |suffix: &str| format!("{}_{suffix}", feature.name);
    Ok(SeasonalDecomposition {
        period,
        trend: FeatureSeries::new(named("trend"), feature.start, trend, Provenance::Raw),
        seasonal: FeatureSeries::from_values(
            named("seasonal"),
            feature.start,
            seasonal,
            Provenance::Raw,
        ),
        residual: FeatureSeries::new(named("residual"), feature.start, residual, Provenance::Raw),
        profile,
    })
}
