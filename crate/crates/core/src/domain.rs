//! Calendar, generation bookkeeping and the feature containers shared by every stage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Months since January 2000 (month 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MonthIndex(pub i32);

impl MonthIndex {
    pub const EPOCH_YEAR: i32 = 2000;

    pub fn from_year_month(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::validation(format!(
                "month {month} out of range 1..=12"
            )));
        }
        Ok(MonthIndex(
            (year - Self::EPOCH_YEAR) * 12 + month as i32 - 1,
        ))
    }

    pub fn year(self) -> i32 {
        Self::EPOCH_YEAR + self.0.div_euclid(12)
    }

    /// Calendar month, 1..=12.
    pub fn month(self) -> u32 {
        self.0.rem_euclid(12) as u32 + 1
    }

    /// Calendar quarter, 1..=4.
    pub fn quarter(self) -> u32 {
        (self.month() - 1) / 3 + 1
    }

    pub fn offset(self, months: i32) -> Self {
        MonthIndex(self.0 + months)
    }
}

impl Add<i32> for MonthIndex {
    type Output = MonthIndex;
    fn add(self, rhs: i32) -> MonthIndex {
        MonthIndex(self.0 + rhs)
    }
}

impl Sub<i32> for MonthIndex {
    type Output = MonthIndex;
    fn sub(self, rhs: i32) -> MonthIndex {
        MonthIndex(self.0 - rhs)
    }
}

impl Sub for MonthIndex {
    type Output = i32;
    fn sub(self, rhs: MonthIndex) -> i32 {
        self.0 - rhs.0
    }
}

impl fmt::Display for MonthIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

impl FromStr for MonthIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation(format!("invalid month `{s}`, expected YYYY-MM"));
        let s = s.trim();
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        MonthIndex::from_year_month(year, month).map_err(|_| bad())
    }
}

impl TryFrom<String> for MonthIndex {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MonthIndex> for String {
    fn from(m: MonthIndex) -> String {
        m.to_string()
    }
}

/// Half-open month interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthRange {
    pub start: MonthIndex,
    pub end: MonthIndex,
}

impl MonthRange {
    pub fn new(start: MonthIndex, end: MonthIndex) -> Self {
        // Inverted bounds collapse to an empty range anchored at start.
        let end = if end < start { start } else { end };
        MonthRange { start, end }
    }

    pub fn with_len(start: MonthIndex, len: usize) -> Self {
        MonthRange::new(start, start + len as i32)
    }

    pub fn empty_at(start: MonthIndex) -> Self {
        MonthRange { start, end: start }
    }

    pub fn len(&self) -> usize {
        (self.end - self.start).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, m: MonthIndex) -> bool {
        self.start <= m && m < self.end
    }

    pub fn intersect(&self, other: &MonthRange) -> MonthRange {
        MonthRange::new(self.start.max(other.start), self.end.min(other.end))
    }

    pub fn shift(&self, months: i32) -> MonthRange {
        MonthRange {
            start: self.start + months,
            end: self.end + months,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = MonthIndex> {
        (self.start.0..self.end.0).map(MonthIndex)
    }
}

impl fmt::Display for MonthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GenerationId {
    pub name: String,
    pub ordinal: i32,
}

impl GenerationId {
    pub fn new(name: impl Into<String>, ordinal: i32) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::validation("generation name must be non-empty"));
        }
        Ok(GenerationId { name, ordinal })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaEntry {
    pub generation: GenerationId,
    pub family: String,
    pub ga_month: MonthIndex,
}

/// General-availability months per generation, validated per family.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GaCalendar {
    entries: Vec<GaEntry>,
}

impl GaCalendar {
    pub fn new(mut entries: Vec<GaEntry>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for e in &entries {
            if !names.insert(e.generation.name.clone()) {
                return Err(Error::validation(format!(
                    "generation `{}` listed twice in GA calendar",
                    e.generation.name
                )));
            }
        }
        entries.sort_by(|a, b| {
            (a.family.as_str(), a.generation.ordinal)
                .cmp(&(b.family.as_str(), b.generation.ordinal))
        });
        for pair in entries.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.family != b.family {
                continue;
            }
            if a.generation.ordinal == b.generation.ordinal {
                return Err(Error::validation(format!(
                    "generations `{}` and `{}` share ordinal {} in family `{}`",
                    a.generation.name, b.generation.name, a.generation.ordinal, a.family
                )));
            }
            if b.ga_month <= a.ga_month {
                return Err(Error::validation(format!(
                    "GA ordering violation: `{}` (ordinal {}, GA {}) is not after `{}` (ordinal {}, GA {})",
                    b.generation.name,
                    b.generation.ordinal,
                    b.ga_month,
                    a.generation.name,
                    a.generation.ordinal,
                    a.ga_month
                )));
            }
        }
        Ok(GaCalendar { entries })
    }

    pub fn entries(&self) -> &[GaEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, name: &str) -> Option<&GaEntry> {
        self.entries.iter().find(|e| e.generation.name == name)
    }

    pub fn ga(&self, name: &str) -> Option<MonthIndex> {
        self.entry(name).map(|e| e.ga_month)
    }

    pub fn require_ga(&self, name: &str) -> Result<MonthIndex> {
        self.ga(name)
            .ok_or_else(|| Error::validation(format!("GA calendar has no entry for `{name}`")))
    }

    /// The generation `steps` ordinals after `name` in the same family.
    pub fn successor(&self, name: &str, steps: usize) -> Option<&GaEntry> {
        let me = self.entry(name)?;
        self.entries
            .iter()
            .filter(|e| e.family == me.family && e.generation.ordinal > me.generation.ordinal)
            .nth(steps.checked_sub(1)?)
    }

    /// GA of the next generation, which triggers returns of `name`.
    pub fn trigger_ga(&self, name: &str) -> Result<MonthIndex> {
        if self.entry(name).is_none() {
            return Err(Error::validation(format!(
                "GA calendar has no entry for `{name}`"
            )));
        }
        self.successor(name, 1).map(|e| e.ga_month).ok_or_else(|| {
            Error::validation(format!("GA calendar has no next generation after `{name}`"))
        })
    }

    /// GA two generations ahead, which triggers the ramp-down of `name`, if known.
    pub fn ramp_down_ga(&self, name: &str) -> Option<MonthIndex> {
        self.successor(name, 2).map(|e| e.ga_month)
    }

    /// Earlier generations of the same family, most recent first.
    pub fn predecessors(&self, name: &str) -> Vec<&GaEntry> {
        let Some(me) = self.entry(name) else {
            return Vec::new();
        };
        let mut out: Vec<_> = self
            .entries
            .iter()
            .filter(|e| e.family == me.family && e.generation.ordinal < me.generation.ordinal)
            .collect();
        out.reverse();
        out
    }
}

/// The four raw monthly quantities recorded per generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceFeature {
    Shipments,
    Upgrades,
    NewReceipts,
    GrossReturns,
}

impl SourceFeature {
    pub const ALL: [SourceFeature; 4] = [
        SourceFeature::Shipments,
        SourceFeature::Upgrades,
        SourceFeature::NewReceipts,
        SourceFeature::GrossReturns,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceFeature::Shipments => "shipments",
            SourceFeature::Upgrades => "upgrades",
            SourceFeature::NewReceipts => "new_receipts",
            SourceFeature::GrossReturns => "gross_returns",
        }
    }
}

/// Monthly history of one product generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSeries {
    pub generation: String,
    pub start: MonthIndex,
    pub shipments: Vec<f64>,
    pub upgrades: Vec<f64>,
    pub new_receipts: Vec<f64>,
    pub gross_returns: Vec<f64>,
}

impl GenerationSeries {
    pub fn new(
        generation: impl Into<String>,
        start: MonthIndex,
        shipments: Vec<f64>,
        upgrades: Vec<f64>,
        new_receipts: Vec<f64>,
        gross_returns: Vec<f64>,
    ) -> Result<Self> {
        let s = GenerationSeries {
            generation: generation.into(),
            start,
            shipments,
            upgrades,
            new_receipts,
            gross_returns,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.shipments.len();
        if n == 0 {
            return Err(Error::validation(format!(
                "generation `{}` has no months",
                self.generation
            )));
        }
        for feature in SourceFeature::ALL {
            let values = self.values(feature);
            if values.len() != n {
                return Err(Error::validation(format!(
                    "generation `{}`: {} has {} months, expected {n}",
                    self.generation,
                    feature.name(),
                    values.len()
                )));
            }
            if let Some((i, v)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| !v.is_finite() || **v < 0.0)
            {
                return Err(Error::validation(format!(
                    "generation `{}`: {} at {} is {v}, expected a finite non-negative quantity",
                    self.generation,
                    feature.name(),
                    self.start + i as i32
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.shipments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shipments.is_empty()
    }

    pub fn range(&self) -> MonthRange {
        MonthRange::with_len(self.start, self.len())
    }

    pub fn values(&self, feature: SourceFeature) -> &[f64] {
        match feature {
            SourceFeature::Shipments => &self.shipments,
            SourceFeature::Upgrades => &self.upgrades,
            SourceFeature::NewReceipts => &self.new_receipts,
            SourceFeature::GrossReturns => &self.gross_returns,
        }
    }

    pub fn values_mut(&mut self, feature: SourceFeature) -> &mut Vec<f64> {
        match feature {
            SourceFeature::Shipments => &mut self.shipments,
            SourceFeature::Upgrades => &mut self.upgrades,
            SourceFeature::NewReceipts => &mut self.new_receipts,
            SourceFeature::GrossReturns => &mut self.gross_returns,
        }
    }

    pub fn feature(&self, feature: SourceFeature) -> FeatureSeries {
        FeatureSeries::from_values(
            feature.name(),
            self.start,
            self.values(feature).to_vec(),
            Provenance::Raw,
        )
    }

    /// Keeps only months strictly before `end`. Returns `None` if nothing remains.
    pub fn truncated_before(&self, end: MonthIndex) -> Option<GenerationSeries> {
        let keep = (end - self.start).clamp(0, self.len() as i32) as usize;
        if keep == 0 {
            return None;
        }
        let mut out = self.clone();
        for f in SourceFeature::ALL {
            out.values_mut(f).truncate(keep);
        }
        Some(out)
    }

    /// Same history moved `months` along the calendar.
    pub fn shifted(&self, months: i32) -> GenerationSeries {
        GenerationSeries {
            start: self.start + months,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Raw,
    Lagged(u32),
    MovingAverage(u32),
    CumulativeSum,
    Normalized,
}

/// A named monthly series with possibly undefined months.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSeries {
    pub name: String,
    pub start: MonthIndex,
    pub values: Vec<Option<f64>>,
    pub provenance: Provenance,
}

impl FeatureSeries {
    pub fn new(
        name: impl Into<String>,
        start: MonthIndex,
        values: Vec<Option<f64>>,
        provenance: Provenance,
    ) -> Self {
        FeatureSeries {
            name: name.into(),
            start,
            values,
            provenance,
        }
    }

    pub fn from_values(
        name: impl Into<String>,
        start: MonthIndex,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Self {
        FeatureSeries::new(
            name,
            start,
            values.into_iter().map(Some).collect(),
            provenance,
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> MonthIndex {
        self.start + self.values.len() as i32
    }

    pub fn range(&self) -> MonthRange {
        MonthRange::with_len(self.start, self.values.len())
    }

    pub fn get(&self, m: MonthIndex) -> Option<f64> {
        let i = m - self.start;
        if i < 0 {
            return None;
        }
        self.values.get(i as usize).copied().flatten()
    }

    pub fn is_defined(&self, m: MonthIndex) -> bool {
        self.get(m).is_some()
    }

    pub fn defined(&self) -> impl Iterator<Item = (MonthIndex, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(move |(i, v)| v.map(|v| (self.start + i as i32, v)))
    }

    pub fn defined_values(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn defined_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// First-to-last defined month, or an empty range.
    pub fn defined_range(&self) -> MonthRange {
        let first = self.values.iter().position(|v| v.is_some());
        let last = self.values.iter().rposition(|v| v.is_some());
        match (first, last) {
            (Some(a), Some(b)) => MonthRange::new(self.start + a as i32, self.start + b as i32 + 1),
            _ => MonthRange::empty_at(self.start),
        }
    }

    /// Values over `range`, undefined outside the series.
    pub fn window(&self, range: MonthRange) -> Vec<Option<f64>> {
        range.iter().map(|m| self.get(m)).collect()
    }

    /// Trims the series to `range` (months outside the series stay out).
    pub fn restricted(&self, range: MonthRange) -> FeatureSeries {
        let r = self.range().intersect(&range);
        FeatureSeries {
            name: self.name.clone(),
            start: r.start,
            values: self.window(r),
            provenance: self.provenance,
        }
    }

    pub fn shifted(&self, months: i32) -> FeatureSeries {
        FeatureSeries {
            start: self.start + months,
            ..self.clone()
        }
    }

    pub fn renamed(&self, name: impl Into<String>) -> FeatureSeries {
        FeatureSeries {
            name: name.into(),
            ..self.clone()
        }
    }

    pub fn map_defined(&self, f: impl Fn(f64) -> f64) -> FeatureSeries {
        FeatureSeries {
            values: self.values.iter().map(|v| v.map(&f)).collect(),
            ..self.clone()
        }
    }
}

/// Predictor columns over a contiguous month range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorTable {
    pub months: MonthRange,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl PredictorTable {
    pub fn n_rows(&self) -> usize {
        self.months.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn month(&self, i: usize) -> MonthIndex {
        self.months.start + i as i32
    }

    pub fn slice(&self, rows: std::ops::Range<usize>) -> PredictorTable {
        PredictorTable {
            months: MonthRange::new(
                self.months.start + rows.start as i32,
                self.months.start + rows.end as i32,
            ),
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| c[rows.clone()].to_vec())
                .collect(),
        }
    }

    /// Reorders columns to `names`, failing with the list of absent features.
    pub fn select(&self, names: &[String]) -> Result<PredictorTable> {
        let missing: Vec<String> = names
            .iter()
            .filter(|n| self.column(n).is_none())
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingFeatures(missing));
        }
        Ok(PredictorTable {
            months: self.months,
            names: names.to_vec(),
            columns: names
                .iter()
                .map(|n| self.column(n).unwrap().to_vec())
                .collect(),
        })
    }
}

/// Target-aligned table; every row is complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub target_name: String,
    pub target: Vec<f64>,
    pub predictors: PredictorTable,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn months(&self) -> MonthRange {
        self.predictors.months
    }

    pub fn predictor_names(&self) -> &[String] {
        &self.predictors.names
    }

    pub fn slice(&self, rows: std::ops::Range<usize>) -> FeatureMatrix {
        FeatureMatrix {
            target_name: self.target_name.clone(),
            target: self.target[rows.clone()].to_vec(),
            predictors: self.predictors.slice(rows),
        }
    }

    /// Rows whose month falls inside `range`.
    pub fn restricted(&self, range: MonthRange) -> FeatureMatrix {
        let r = self.months().intersect(&range);
        if r.is_empty() {
            return self.slice(0..0);
        }
        let a = (r.start - self.months().start) as usize;
        self.slice(a..a + r.len())
    }
}

fn check_unique<'a>(names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::DuplicateFeature(n.to_string()));
        }
    }
    Ok(())
}

/// Longest run of months in `range` where `defined` holds; ties go to the latest run.
fn longest_run(range: MonthRange, defined: impl Fn(MonthIndex) -> bool) -> MonthRange {
    let mut best = MonthRange::empty_at(range.start);
    let mut run_start: Option<MonthIndex> = None;
    for m in range.iter().chain(std::iter::once(range.end)) {
        let ok = m < range.end && defined(m);
        match (ok, run_start) {
            (true, None) => run_start = Some(m),
            (false, Some(s)) => {
                let run = MonthRange::new(s, m);
                if run.len() >= best.len() && !run.is_empty() {
                    best = run;
                }
                run_start = None;
            }
            _ => {}
        }
    }
    best
}

/// Aligns predictors to a target over the longest contiguous month range where all are defined.
///
/// Disjoint inputs produce an empty matrix. Predictor columns are ordered by name, so the
/// result does not depend on input order.
pub fn align(predictors: &[FeatureSeries], target: &FeatureSeries) -> Result<FeatureMatrix> {
    check_unique(
        predictors
            .iter()
            .map(|p| p.name.as_str())
            .chain(std::iter::once(target.name.as_str())),
    )?;
    let mut ordered: Vec<&FeatureSeries> = predictors.iter().collect();
    ordered.sort_by(|a, b| a.name.cmp(&b.name));

    let span = ordered
        .iter()
        .fold(target.range(), |acc, p| acc.intersect(&p.range()));
    let run = longest_run(span, |m| {
        target.is_defined(m) && ordered.iter().all(|p| p.is_defined(m))
    });

    Ok(FeatureMatrix {
        target_name: target.name.clone(),
        target: run.iter().map(|m| target.get(m).unwrap()).collect(),
        predictors: PredictorTable {
            months: run,
            names: ordered.iter().map(|p| p.name.clone()).collect(),
            columns: ordered
                .iter()
                .map(|p| run.iter().map(|m| p.get(m).unwrap()).collect())
                .collect(),
        },
    })
}

/// Predictor table over an exact month range; every predictor must be defined on all of it.
pub fn align_predictors(
    predictors: &[FeatureSeries],
    months: MonthRange,
) -> Result<PredictorTable> {
    check_unique(predictors.iter().map(|p| p.name.as_str()))?;
    let mut ordered: Vec<&FeatureSeries> = predictors.iter().collect();
    ordered.sort_by(|a, b| a.name.cmp(&b.name));
    let mut columns = Vec::with_capacity(ordered.len());
    for p in &ordered {
        let col: Option<Vec<f64>> = months.iter().map(|m| p.get(m)).collect();
        match col {
            Some(c) => columns.push(c),
            None => {
                let gap = months.iter().find(|m| !p.is_defined(*m)).unwrap();
                return Err(Error::validation(format!(
                    "feature `{}` is undefined at {gap}",
                    p.name
                )));
            }
        }
    }
    Ok(PredictorTable {
        months,
        names: ordered.iter().map(|p| p.name.clone()).collect(),
        columns,
    })
}

/// Looks up series by name.
pub fn index_by_name(features: &[FeatureSeries]) -> BTreeMap<&str, &FeatureSeries> {
    features.iter().map(|f| (f.name.as_str(), f)).collect()
}
