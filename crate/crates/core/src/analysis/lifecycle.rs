use serde::{Deserialize, Serialize};

use crate::domain::{FeatureSeries, GaCalendar, MonthIndex, MonthRange};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseConfig {
    pub ramp_months: u32,
    /// Plateau length used when GA two generations ahead is not yet known.
    pub plateau_months: u32,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            ramp_months: 15,
            plateau_months: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    RampUp,
    Plateau,
    RampDown,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::RampUp, Phase::Plateau, Phase::RampDown];

    pub fn name(self) -> &'static str {
        match self {
            Phase::RampUp => "ramp_up",
            Phase::Plateau => "plateau",
            Phase::RampDown => "ramp_down",
        }
    }
}

/// Three consecutive, non-overlapping phases of the returns curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecyclePhases {
    pub ramp_up: MonthRange,
    pub plateau: MonthRange,
    pub ramp_down: MonthRange,
}

impl LifecyclePhases {
    pub fn get(&self, phase: Phase) -> MonthRange {
        match phase {
            Phase::RampUp => self.ramp_up,
            Phase::Plateau => self.plateau,
            Phase::RampDown => self.ramp_down,
        }
    }

    pub fn phase_of(&self, m: MonthIndex) -> Option<Phase> {
        Phase::ALL.into_iter().find(|p| self.get(*p).contains(m))
    }

    /// Phase governing `m`, extending the first and last non-empty phases outward.
    pub fn nearest_phase(&self, m: MonthIndex) -> Option<Phase> {
        if let Some(p) = self.phase_of(m) {
            return Some(p);
        }
        let non_empty: Vec<Phase> = Phase::ALL
            .into_iter()
            .filter(|p| !self.get(*p).is_empty())
            .collect();
        let first = *non_empty.first()?;
        let last = *non_empty.last()?;
        if m < self.get(first).start {
            Some(first)
        } else if m >= self.get(last).end {
            Some(last)
        } else {
            non_empty
                .into_iter()
                .rev()
                .find(|p| self.get(*p).start <= m)
        }
    }

    pub fn span(&self) -> MonthRange {
        MonthRange::new(
            self.ramp_up.start,
            self.ramp_down
                .end
                .max(self.plateau.end)
                .max(self.ramp_up.end),
        )
    }

    pub fn shifted(&self, months: i32) -> LifecyclePhases {
        LifecyclePhases {
            ramp_up: self.ramp_up.shift(months),
            plateau: self.plateau.shift(months),
            ramp_down: self.ramp_down.shift(months),
        }
    }
}

/// GA-anchored phase boundaries for the returns of `generation`.
///
/// Ramp-up starts at GA of the next generation and lasts `ramp_months`; the plateau runs to GA
/// two generations ahead when known, otherwise for `plateau_months`; ramp-down takes the rest
/// of the series. Every phase is cut at the end of the returns series.
pub fn segment_lifecycle(
    returns: &FeatureSeries,
    calendar: &GaCalendar,
    generation: &str,
    cfg: &PhaseConfig,
) -> Result<LifecyclePhases> {
    let trigger = calendar.trigger_ga(generation)?;
    let end = returns.end().max(trigger);
    let clip = |m: MonthIndex| m.min(end);

    let plateau_start = clip(trigger + cfg.ramp_months as i32);
    let plateau_end = match calendar.ramp_down_ga(generation) {
        Some(ga) => clip(ga.max(plateau_start)),
        None => clip(plateau_start + cfg.plateau_months as i32),
    };
    Ok(LifecyclePhases {
        ramp_up: MonthRange::new(trigger, plateau_start),
        plateau: MonthRange::new(plateau_start, plateau_end),
        ramp_down: MonthRange::new(plateau_end, end),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{GaEntry, GenerationId, Provenance};
    use proptest::prelude::*;

    fn cal(gas: &[i32]) -> GaCalendar {
        GaCalendar::new(
            gas.iter()
                .enumerate()
                .map(|(i, g)| GaEntry {
                    generation: GenerationId::new(format!("g{i}"), i as i32).unwrap(),
                    family: "f".into(),
                    ga_month: MonthIndex(*g),
                })
                .collect(),
        )
        .unwrap()
    }

    fn returns(start: i32, len: usize) -> FeatureSeries {
        FeatureSeries::from_values(
            "gross_returns",
            MonthIndex(start),
            vec![1.0; len],
            Provenance::Raw,
        )
    }

    fn r(a: i32, b: i32) -> MonthRange {
        MonthRange::new(MonthIndex(a), MonthIndex(b))
    }

    #[test]
    fn known_ramp_down_ga() {
        let p = segment_lifecycle(
            &returns(0, 32),
            &cal(&[-30, 0, 25]),
            "g0",
            &PhaseConfig::default(),
        )
        .unwrap();
        assert_eq!(
            (p.ramp_up, p.plateau, p.ramp_down),
            (r(0, 15), r(15, 25), r(25, 32))
        );
    }

    #[test]
    fn default_plateau_without_next_ga() {
        let p = segment_lifecycle(
            &returns(0, 40),
            &cal(&[-30, 0]),
            "g0",
            &PhaseConfig::default(),
        )
        .unwrap();
        assert_eq!(p.plateau, r(15, 25));
        assert_eq!(p.ramp_down, r(25, 40));
    }

    #[test]
    fn short_series_is_all_ramp_up() {
        let p = segment_lifecycle(
            &returns(0, 9),
            &cal(&[-30, 0, 25]),
            "g0",
            &PhaseConfig::default(),
        )
        .unwrap();
        assert_eq!(p.ramp_up, r(0, 9));
        assert!(p.plateau.is_empty() && p.ramp_down.is_empty());
    }

    #[test]
    fn missing_trigger_is_an_error() {
        assert!(
            segment_lifecycle(&returns(0, 9), &cal(&[0]), "g0", &PhaseConfig::default()).is_err()
        );
    }

    #[test]
    fn nearest_phase_extends_outward() {
        let p = LifecyclePhases {
            ramp_up: r(0, 15),
            plateau: r(15, 25),
            ramp_down: r(25, 25),
        };
        assert_eq!(p.nearest_phase(MonthIndex(-3)), Some(Phase::RampUp));
        assert_eq!(p.nearest_phase(MonthIndex(40)), Some(Phase::Plateau));
    }

    proptest! {
        #[test]
        fn phases_partition_post_ga_domain(
            len in 1usize..80, ramp in 1u32..30, plateau in 1u32..20, next in proptest::option::of(1i32..60)
        ) {
            let gas: Vec<i32> = match next { Some(n) => vec![-50, 0, n], None => vec![-50, 0] };
            let cfg = PhaseConfig { ramp_months: ramp, plateau_months: plateau };
            let p = segment_lifecycle(&returns(0, len), &cal(&gas), "g0", &cfg).unwrap();
            prop_assert_eq!(p.ramp_up.start, MonthIndex(0));
            prop_assert_eq!(p.ramp_up.end, p.plateau.start);
            prop_assert_eq!(p.plateau.end, p.ramp_down.start);
            prop_assert_eq!(p.ramp_down.end, MonthIndex(len as i32));
            for m in 0..len as i32 {
                let hits = Phase::ALL.iter().filter(|ph| p.get(**ph).contains(MonthIndex(m))).count();
                prop_assert_eq!(hits, 1);
            }
        }
    }
}
