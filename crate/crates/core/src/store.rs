//! Directory store of per-cycle planning records, one JSON file per generation and month.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{FeatureSeries, GenerationId, MonthIndex};
use crate::error::{Error, Result};
use crate::ewa::{PreviousCycle, SeriesChoice};
use crate::models::ForecastSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActualPoint {
    pub month: MonthIndex,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle_month: MonthIndex,
    pub generation: GenerationId,
    pub forecast: ForecastSeries,
    pub planner_selected: SeriesChoice,
    pub selected_series: Vec<f64>,
    /// Gross returns observed since the cycle ran.
    pub realized_actuals: Vec<ActualPoint>,
    /// Step-one window PAD from this cycle's EWA, if it was evaluated.
    #[serde(default)]
    pub ewa_window_pad: Option<f64>,
}

impl CycleRecord {
    pub fn new(
        cycle_month: MonthIndex,
        generation: GenerationId,
        forecast: ForecastSeries,
        planner_selected: SeriesChoice,
    ) -> CycleRecord {
        let selected_series = planner_selected.pick(&forecast).to_vec();
        CycleRecord {
            cycle_month,
            generation,
            forecast,
            planner_selected,
            selected_series,
            realized_actuals: vec![],
            ewa_window_pad: None,
        }
    }

    pub fn validate(&self, latest_data: Option<MonthIndex>) -> Result<()> {
        if self.selected_series != self.planner_selected.pick(&self.forecast) {
            return Err(Error::validation(format!(
                "cycle {}: selected series differs from the forecast's {}",
                self.cycle_month,
                self.planner_selected.name()
            )));
        }
        if let (Some(last), Some(p)) = (
            latest_data,
            self.realized_actuals
                .iter()
                .find(|p| Some(p.month) > latest_data),
        ) {
            return Err(Error::validation(format!(
                "cycle {}: actual for {} is after the latest data month {last}",
                self.cycle_month, p.month
            )));
        }
        Ok(())
    }

    /// Records the actuals in `series` from the cycle month on.
    pub fn with_actuals(mut self, series: &FeatureSeries) -> CycleRecord {
        self.realized_actuals = series
            .defined()
            .filter(|(m, _)| *m >= self.cycle_month)
            .map(|(month, value)| ActualPoint { month, value })
            .collect();
        self
    }

    pub fn as_previous(&self) -> PreviousCycle {
        PreviousCycle {
            cycle: self.cycle_month,
            forecast: self.forecast.clone(),
            selected: self.planner_selected,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CycleStore {
    root: PathBuf,
}

impl CycleStore {
    pub fn new(root: impl Into<PathBuf>) -> CycleStore {
        CycleStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, generation: &str) -> Result<PathBuf> {
        if generation.is_empty()
            || generation.contains(['/', '\\'])
            || generation == "."
            || generation == ".."
        {
            return Err(Error::validation(format!(
                "generation `{generation}` cannot name a store directory"
            )));
        }
        Ok(self.root.join(generation))
    }

    pub fn path_of(&self, generation: &str, cycle: MonthIndex) -> Result<PathBuf> {
        Ok(self.dir(generation)?.join(format!("{cycle}.json")))
    }

    /// Writes the record, replacing any earlier record for the same generation and month.
    pub fn store_cycle(&self, record: &CycleRecord) -> Result<PathBuf> {
        record.validate(None)?;
        let dir = self.dir(&record.generation.name)?;
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = self.path_of(&record.generation.name, record.cycle_month)?;
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(record)?;
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Stored cycle months for `generation`, ascending.
    pub fn cycles(&self, generation: &str) -> Result<Vec<MonthIndex>> {
        let dir = self.dir(generation)?;
        let rd = match std::fs::read_dir(&dir) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(vec![]),
            Err(e) => return Err(Error::io(&dir, e)),
        };
        let mut months = Vec::new();
        for entry in rd {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let name = entry.file_name();
            let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".json")) else {
                continue;
            };
            if let Ok(m) = stem.parse::<MonthIndex>() {
                months.push(m);
            }
        }
        months.sort();
        Ok(months)
    }

    pub fn load_cycle(&self, generation: &str, cycle: MonthIndex) -> Result<CycleRecord> {
        let path = self.path_of(generation, cycle)?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let rec: CycleRecord = serde_json::from_str(&text)
            .map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
        Ok(rec)
    }

    /// The most recent record strictly before `before`, if any.
    pub fn load_previous_cycle(
        &self,
        generation: &str,
        before: MonthIndex,
    ) -> Result<Option<CycleRecord>> {
        match self
            .cycles(generation)?
            .into_iter()
            .rev()
            .find(|m| *m < before)
        {
            Some(m) => self.load_cycle(generation, m).map(Some),
            None => Ok(None),
        }
    }

    /// All records before `before`, oldest first.
    pub fn history_before(&self, generation: &str, before: MonthIndex) -> Result<Vec<CycleRecord>> {
        self.cycles(generation)?
            .into_iter()
            .filter(|m| *m < before)
            .map(|m| self.load_cycle(generation, m))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MonthRange;
    use crate::models::{ModelKind, ModelSpec};
    use proptest::prelude::*;

    fn record(month: i32, level: f64) -> CycleRecord {
        let fc = ForecastSeries {
            months: MonthRange::with_len(MonthIndex(month), 3),
            best_fit: vec![level; 3],
            lci: vec![level - 1.0; 3],
            uci: vec![level + 1.0; 3],
            model: ModelSpec::new(ModelKind::LinearRegression),
            test_mape: 1.0,
            test_correlation: 0.5,
            adjustments: vec![],
        };
        CycleRecord::new(
            MonthIndex(month),
            GenerationId::new("g", 1).unwrap(),
            fc,
            SeriesChoice::Lci,
        )
    }

    #[test]
    fn previous_is_strictly_before() {
        let dir = tempfile::tempdir().unwrap();
        let store = CycleStore::new(dir.path());
        assert!(store
            .load_previous_cycle("g", MonthIndex(187))
            .unwrap()
            .is_none());
        store.store_cycle(&record(185, 10.0)).unwrap();
        store.store_cycle(&record(186, 10.0)).unwrap();
        assert_eq!(
            store
                .load_previous_cycle("g", MonthIndex(187))
                .unwrap()
                .unwrap()
                .cycle_month,
            MonthIndex(186)
        );
        assert_eq!(
            store
                .load_previous_cycle("g", MonthIndex(186))
                .unwrap()
                .unwrap()
                .cycle_month,
            MonthIndex(185)
        );
        assert!(dir.path().join("g/2015-06.json").exists());
    }

    #[test]
    fn second_write_replaces_first() {
        let dir = tempfile::tempdir().unwrap();
        let store = CycleStore::new(dir.path());
        store.store_cycle(&record(185, 10.0)).unwrap();
        store.store_cycle(&record(185, 20.0)).unwrap();
        let r = store.load_cycle("g", MonthIndex(185)).unwrap();
        assert_eq!(r.forecast.best_fit, vec![20.0; 3]);
        assert_eq!(r.selected_series, vec![19.0; 3]);
        assert_eq!(store.cycles("g").unwrap().len(), 1);
    }

    #[test]
    fn inconsistent_selection_rejected() {
        let mut r = record(185, 10.0);
        r.selected_series[0] = 0.0;
        assert!(r.validate(None).is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(CycleStore::new(dir.path()).store_cycle(&r).is_err());
        let late = record(10, 1.0).with_actuals(&FeatureSeries::from_values(
            "gross_returns",
            MonthIndex(9),
            vec![1.0, 2.0, 3.0],
            crate::domain::Provenance::Raw,
        ));
        assert_eq!(late.realized_actuals.len(), 2);
        assert!(late.validate(Some(MonthIndex(10))).is_err());
        assert!(late.validate(Some(MonthIndex(11))).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn previous_is_max_below(months in prop::collection::vec(100i32..140, 1..12), before in 100i32..145) {
            let dir = tempfile::tempdir().unwrap();
            let store = CycleStore::new(dir.path());
            for m in &months {
                store.store_cycle(&record(*m, *m as f64)).unwrap();
            }
            let want = months.iter().copied().filter(|m| *m < before).max();
            let got = store.load_previous_cycle("g", MonthIndex(before)).unwrap().map(|r| r.cycle_month.0);
            prop_assert_eq!(got, want);
        }
    }
}
