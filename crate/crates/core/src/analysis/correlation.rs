use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domain::FeatureSeries;
use crate::error::{Error, Result};

/// Pearson correlation over raw slices of equal length.
pub fn pearson_values(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "length mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(Error::validation(format!(
            "correlation needs at least 3 overlapping months, got {}",
            a.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    // Relative cut so near-constant columns with rounding noise count as degenerate.
    let scale_a = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    let scale_b = b.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    if saa <= 1e-24 * scale_a || sbb <= 1e-24 * scale_b {
        return Err(Error::numeric(
            "degenerate feature: zero variance on the overlap",
        ));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Paired defined values of two series over their common months.
pub fn overlap(a: &FeatureSeries, b: &FeatureSeries) -> (Vec<f64>, Vec<f64>) {
    a.range()
        .intersect(&b.range())
        .iter()
        .filter_map(|m| Some((a.get(m)?, b.get(m)?)))
        .unzip()
}

/// Pearson correlation of two features on their aligned overlap.
pub fn pearson(a: &FeatureSeries, b: &FeatureSeries) -> Result<f64> {
    let (x, y) = overlap(a, b);
    pearson_values(&x, &y).map_err(|e| match e {
        Error::Numeric(_) => Error::numeric(format!(
            "degenerate feature in `{}` vs `{}`",
            a.name, b.name
        )),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strength {
    Weak,
    Medium,
    Strong,
}

impl Strength {
    pub fn name(self) -> &'static str {
        match self {
            Strength::Weak => "Weak",
            Strength::Medium => "Medium",
            Strength::Strong => "Strong",
        }
    }
}

/// `|r| < weak_below` is Weak, `|r| >= strong_from` is Strong, Medium in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrengthThresholds {
    pub weak_below: f64,
    pub strong_from: f64,
}

impl Default for StrengthThresholds {
    fn default() -> Self {
        StrengthThresholds {
            weak_below: 0.15,
            strong_from: 0.186,
        }
    }
}

pub fn classify_strength(r: f64, t: &StrengthThresholds) -> Result<Strength> {
    let a = r.abs();
    if !(a <= 1.0) {
        return Err(Error::validation(format!(
            "correlation {r} outside [-1, 1]"
        )));
    }
    Ok(if a < t.weak_below {
        Strength::Weak
    } else if a < t.strong_from {
        Strength::Medium
    } else {
        Strength::Strong
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub predictor: String,
    pub target: String,
    pub pearson_r: f64,
    pub strength: Strength,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub rows: Vec<CorrelationRow>,
    /// Predictors with no usable overlap or zero variance.
    pub skipped: Vec<String>,
}

impl CorrelationTable {
    pub fn build(
        predictors: &[FeatureSeries],
        targets: &[&FeatureSeries],
        t: &StrengthThresholds,
    ) -> CorrelationTable {
        let mut table = CorrelationTable::default();
        for target in targets {
            for p in predictors {
                match pearson(p, target) {
                    Ok(r) => table.rows.push(CorrelationRow {
                        predictor: p.name.clone(),
                        target: target.name.clone(),
                        pearson_r: r,
                        strength: classify_strength(r, t).expect("pearson is bounded"),
                    }),
                    Err(_) => {
                        let tag = format!("{} ~ {}", p.name, target.name);
                        if !table.skipped.contains(&tag) {
                            table.skipped.push(tag);
                        }
                    }
                }
            }
        }
        table
    }

    pub fn for_target(&self, target: &str) -> CorrelationTable {
        CorrelationTable {
            rows: self
                .rows
                .iter()
                .filter(|r| r.target == target)
                .cloned()
                .collect(),
            skipped: self.skipped.clone(),
        }
    }
}

/// Every predictor labelled Strong.
pub fn select_predictors(table: &CorrelationTable) -> Result<BTreeSet<String>> {
    if table.rows.is_empty() {
        return Err(Error::validation("correlation table is empty"));
    }
    let selected: BTreeSet<String> = table
        .rows
        .iter()
        .filter(|r| r.strength == Strength::Strong)
        .map(|r| r.predictor.clone())
        .collect();
    if selected.is_empty() {
        log::warn!("no predictor is strongly correlated with the target");
    }
    Ok(selected)
}
