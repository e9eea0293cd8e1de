use serde::{Deserialize, Serialize};

use crate::domain::{GaCalendar, MonthIndex, MonthRange};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalKind {
    GaNext,
    GaNextNext,
    FireSale,
    EconomicEvent,
    EngineeringChange,
    CrossGenerationPart,
}

impl CausalKind {
    pub fn name(self) -> &'static str {
        match self {
            CausalKind::GaNext => "ga_next",
            CausalKind::GaNextNext => "ga_next_next",
            CausalKind::FireSale => "fire_sale",
            CausalKind::EconomicEvent => "economic_event",
            CausalKind::EngineeringChange => "engineering_change",
            CausalKind::CrossGenerationPart => "cross_generation_part",
        }
    }

    pub fn is_ga(self) -> bool {
        matches!(self, CausalKind::GaNext | CausalKind::GaNextNext)
    }
}

/// A manually entered event. `exclude` masks its months out of model training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEvent {
    pub kind: CausalKind,
    pub start: MonthIndex,
    /// Exclusive; a single-month event has `end = start + 1`.
    pub end: MonthIndex,
    #[serde(default)]
    pub exclude: bool,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthFlags {
    pub month: MonthIndex,
    pub kinds: Vec<CausalKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CausalFactorFlags {
    pub months: Vec<MonthFlags>,
    pub events: Vec<CausalEvent>,
}

impl CausalFactorFlags {
    /// GA markers come from the calendar; `events` may only carry the manual kinds.
    pub fn build(
        calendar: &GaCalendar,
        generation: &str,
        events: &[CausalEvent],
    ) -> Result<CausalFactorFlags> {
        if let Some(e) = events.iter().find(|e| e.kind.is_ga()) {
            return Err(Error::validation(format!(
                "`{}` markers are derived from the GA calendar and cannot be entered manually",
                e.kind.name()
            )));
        }
        if let Some(e) = events.iter().find(|e| e.end <= e.start) {
            return Err(Error::validation(format!(
                "causal event `{}` at {} has an empty span",
                e.kind.name(),
                e.start
            )));
        }
        let mut marks: Vec<(MonthIndex, CausalKind)> = Vec::new();
        if let Ok(m) = calendar.trigger_ga(generation) {
            marks.push((m, CausalKind::GaNext));
        }
        if let Some(m) = calendar.ramp_down_ga(generation) {
            marks.push((m, CausalKind::GaNextNext));
        }
        for e in events {
            marks.extend(MonthRange::new(e.start, e.end).iter().map(|m| (m, e.kind)));
        }
        marks.sort();
        marks.dedup();

        let mut months: Vec<MonthFlags> = Vec::new();
        for (m, k) in marks {
            match months.last_mut() {
                Some(last) if last.month == m => last.kinds.push(k),
                _ => months.push(MonthFlags {
                    month: m,
                    kinds: vec![k],
                }),
            }
        }
        Ok(CausalFactorFlags {
            months,
            events: events.to_vec(),
        })
    }

    pub fn kinds_at(&self, m: MonthIndex) -> &[CausalKind] {
        self.months
            .binary_search_by_key(&m, |f| f.month)
            .map(|i| self.months[i].kinds.as_slice())
            .unwrap_or(&[])
    }

    /// Months that should be dropped from training.
    pub fn excluded(&self, m: MonthIndex) -> bool {
        self.events
            .iter()
            .any(|e| e.exclude && MonthRange::new(e.start, e.end).contains(m))
    }

    /// Semicolon-joined marker names for report annotations.
    pub fn annotation(&self, m: MonthIndex) -> String {
        self.kinds_at(m)
            .iter()
            .map(|k| k.name())
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{GaEntry, GenerationId};

    fn cal() -> GaCalendar {
        GaCalendar::new(
            [("a", 0), ("b", 20), ("c", 45)]
                .iter()
                .enumerate()
                .map(|(i, (n, g))| GaEntry {
                    generation: GenerationId::new(*n, i as i32).unwrap(),
                    family: "f".into(),
                    ga_month: MonthIndex(*g),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ga_flags_follow_calendar() {
        let f = CausalFactorFlags::build(&cal(), "a", &[]).unwrap();
        assert_eq!(f.kinds_at(MonthIndex(20)), [CausalKind::GaNext]);
        assert_eq!(f.kinds_at(MonthIndex(45)), [CausalKind::GaNextNext]);
        assert!(f.kinds_at(MonthIndex(21)).is_empty());
    }

    #[test]
    fn manual_ga_is_rejected() {
        let e = CausalEvent {
            kind: CausalKind::GaNext,
            start: MonthIndex(3),
            end: MonthIndex(4),
            exclude: false,
            note: String::new(),
        };
        assert!(CausalFactorFlags::build(&cal(), "a", &[e]).is_err());
    }

    #[test]
    fn events_mark_and_mask() {
        let e = CausalEvent {
            kind: CausalKind::FireSale,
            start: MonthIndex(19),
            end: MonthIndex(22),
            exclude: true,
            note: "clearance".into(),
        };
        let f = CausalFactorFlags::build(&cal(), "a", &[e]).unwrap();
        assert_eq!(f.annotation(MonthIndex(20)), "ga_next;fire_sale");
        assert!(f.excluded(MonthIndex(21)) && !f.excluded(MonthIndex(22)));
    }
}
