//! Seeded multi-generation lifecycles with known ground truth.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::LifecyclePhases;
use crate::domain::{GaCalendar, GaEntry, GenerationId, GenerationSeries, MonthIndex, MonthRange};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Trapezoid,
    /// Scaled beta(2, 3) bump over the same total duration.
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeOverride {
    /// Zero-based generation index.
    pub generation: usize,
    pub ramp_months: u32,
    pub plateau_months: u32,
    pub decline_months: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelShift {
    pub month: MonthIndex,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub generations: usize,
    pub first_ga: MonthIndex,
    pub ga_spacing: u32,
    pub ramp_months: u32,
    pub plateau_months: u32,
    pub decline_months: u32,
    /// Returns peak of the first generation.
    pub peak: f64,
    pub scale_factor: f64,
    pub receipts_lag: u32,
    pub receipts_ratio: f64,
    /// Shipments peak relative to the returns peak.
    pub shipments_ratio: f64,
    pub shipments_months: u32,
    /// Seasonal amplitude as a fraction of each generation's peak.
    pub seasonal_amplitude: f64,
    /// Noise SD as a fraction of each generation's peak.
    pub noise_sd: f64,
    /// Observed months after the last generation's trigger.
    pub observed_months: u32,
    pub shape: Shape,
    pub overrides: Vec<ShapeOverride>,
    pub level_shift: Option<LevelShift>,
    pub family: String,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            generations: 3,
            first_ga: MonthIndex(120),
            ga_spacing: 25,
            ramp_months: 15,
            plateau_months: 10,
            decline_months: 9,
            peak: 100.0,
            scale_factor: 3.5,
            receipts_lag: 30,
            receipts_ratio: 1.0,
            shipments_ratio: 4.0,
            shipments_months: 30,
            seasonal_amplitude: 0.05,
            noise_sd: 0.02,
            observed_months: 24,
            shape: Shape::Trapezoid,
            overrides: vec![],
            level_shift: None,
            family: "family1".into(),
            seed: 42,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::validation(format!("scenario: {m}")));
        if self.generations == 0 {
            return bad("at least one generation");
        }
        if self.ga_spacing == 0
            || self.ramp_months == 0
            || self.plateau_months == 0
            || self.decline_months == 0
        {
            return bad("all durations must be at least 1 month");
        }
        if self.shipments_months == 0 {
            return bad("shipments_months must be at least 1");
        }
        if !(self.scale_factor > 0.0) || !(self.peak > 0.0) {
            return bad("peak and scale factor must be positive");
        }
        if !(self.noise_sd >= 0.0)
            || !(self.seasonal_amplitude >= 0.0)
            || !(self.receipts_ratio >= 0.0)
        {
            return bad("noise, seasonality and receipts ratio must be non-negative");
        }
        for o in &self.overrides {
            if o.generation >= self.generations {
                return bad("override names a generation outside the scenario");
            }
            if o.ramp_months == 0 || o.plateau_months == 0 || o.decline_months == 0 {
                return bad("override durations must be at least 1 month");
            }
        }
        Ok(())
    }

    pub fn name_of(&self, index: usize) -> String {
        format!("gen{}", index + 1)
    }

    fn durations(&self, index: usize) -> (u32, u32, u32) {
        self.overrides
            .iter()
            .find(|o| o.generation == index)
            .map(|o| (o.ramp_months, o.plateau_months, o.decline_months))
            .unwrap_or((self.ramp_months, self.plateau_months, self.decline_months))
    }

    pub fn ga_of(&self, index: usize) -> MonthIndex {
        self.first_ga + (index as u32 * self.ga_spacing) as i32
    }

    /// Last month (exclusive) with any observed data.
    pub fn data_end(&self) -> MonthIndex {
        self.ga_of(self.generations) + self.observed_months as i32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTruth {
    pub generation: String,
    pub trigger: MonthIndex,
    pub peak: f64,
    pub phases: LifecyclePhases,
    /// Aligned with the generated series.
    pub shape: Vec<f64>,
    pub seasonal: Vec<f64>,
    /// Shape plus seasonality (and level shift), before noise.
    pub noise_free_returns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub series: Vec<GenerationSeries>,
    pub calendar: GaCalendar,
    pub truth: Vec<GenerationTruth>,
}

impl Scenario {
    pub fn series_of(&self, name: &str) -> Option<&GenerationSeries> {
        self.series.iter().find(|s| s.generation == name)
    }

    pub fn truth_of(&self, name: &str) -> Option<&GenerationTruth> {
        self.truth.iter().find(|t| t.generation == name)
    }
}

fn shape_value(shape: Shape, (r, p, d): (u32, u32, u32), t: i32, peak: f64) -> f64 {
    let (r, p, d) = (r as i32, p as i32, d as i32);
    if t < 0 || t >= r + p + d {
        return 0.0;
    }
    match shape {
        Shape::Trapezoid => {
            if t < r {
                peak * (t + 1) as f64 / r as f64
            } else if t < r + p {
                peak
            } else {
                let j = t - r - p + 1;
                peak * (1.0 - j as f64 / (d + 1) as f64)
            }
        }
        Shape::Smooth => {
            let x = (t as f64 + 0.5) / (r + p + d) as f64;
            // beta(2, 3) kernel x(1-x)^2 peaks at x = 1/3 with value 4/27.
            peak * x * (1.0 - x).powi(2) * 27.0 / 4.0
        }
    }
}

/// Generates the scenario. Identical specs give bit-identical output.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let data_end = spec.data_end();

    let entries: Vec<GaEntry> = (0..=spec.generations)
        .map(|i| {
            Ok(GaEntry {
                generation: GenerationId::new(spec.name_of(i), i as i32 + 1)?,
                family: spec.family.clone(),
                ga_month: spec.ga_of(i),
            })
        })
        .collect::<Result<_>>()?;
    let calendar = GaCalendar::new(entries)?;

    let mut series = Vec::new();
    let mut truth = Vec::new();
    for g in 0..spec.generations {
        let name = spec.name_of(g);
        let ga = spec.ga_of(g);
        let trigger = spec.ga_of(g + 1);
        let peak = spec.peak * spec.scale_factor.powi(g as i32);
        let dur = spec.durations(g);
        let life = (dur.0 + dur.1 + dur.2) as i32;
        let lag = spec.receipts_lag as i32;
        let start = ga.min(trigger - lag);
        let end = (trigger + life).min(data_end).max(start + 1);
        let n = (end - start) as usize;
        let months: Vec<MonthIndex> = MonthRange::new(start, end).iter().collect();

        let noise_free = |m: MonthIndex| -> (f64, f64, f64) {
            let t = m - trigger;
            let base = shape_value(spec.shape, dur, t, peak);
            let in_life = (0..life).contains(&t);
            let season = if in_life {
                spec.seasonal_amplitude * peak * (2.0 * PI * (m.month() - 1) as f64 / 12.0).sin()
            } else {
                0.0
            };
            let shift = match &spec.level_shift {
                Some(s) if m >= s.month => s.factor,
                _ => 1.0,
            };
            (base, season, ((base + season) * shift).max(0.0))
        };

        let mut shape = Vec::with_capacity(n);
        let mut seasonal = Vec::with_capacity(n);
        let mut clean = Vec::with_capacity(n);
        for m in &months {
            let (b, s, c) = noise_free(*m);
            shape.push(b);
            seasonal.push(s);
            clean.push(c);
        }

        let sd = spec.noise_sd * peak;
        let mut noise = |scale: f64| -> f64 { scale * std_normal.sample(&mut rng) };
        let gross_returns: Vec<f64> = months
            .iter()
            .zip(&clean)
            .map(|(m, c)| {
                let t = *m - trigger;
                if (0..life).contains(&t) {
                    (c + noise(sd)).max(0.0)
                } else {
                    0.0
                }
            })
            .collect();

        let ship_peak = spec.shipments_ratio * peak;
        let ship_len = spec.shipments_months as i32;
        let shipments: Vec<f64> = months
            .iter()
            .map(|m| {
                let t = *m - ga;
                if (0..ship_len).contains(&t) {
                    let bell = (PI * (t as f64 + 0.5) / ship_len as f64).sin().powi(2);
                    (ship_peak * bell + noise(sd)).max(0.0)
                } else {
                    0.0
                }
            })
            .collect();

        let upgrades: Vec<f64> = months
            .iter()
            .map(|m| {
                let t = *m - ga;
                let k = *m - trigger;
                let base = if (0..ship_len + life).contains(&t) {
                    0.05 * ship_peak
                } else {
                    0.0
                };
                let spike = if (0..4).contains(&k) {
                    0.4 * ship_peak * 0.5f64.powi(k)
                } else {
                    0.0
                };
                if base + spike > 0.0 {
                    (base + spike + noise(0.5 * sd)).max(0.0)
                } else {
                    0.0
                }
            })
            .collect();

        let new_receipts: Vec<f64> = months
            .iter()
            .map(|m| {
                let (_, _, ahead) = noise_free(*m + lag);
                if ahead > 0.0 {
                    (spec.receipts_ratio * ahead + noise(spec.receipts_ratio * sd)).max(0.0)
                } else {
                    0.0
                }
            })
            .collect();

        let phase_end = |k: u32| (trigger + k as i32).min(end).max(trigger.min(end));
        let phases = LifecyclePhases {
            ramp_up: MonthRange::new(trigger.min(end), phase_end(dur.0)),
            plateau: MonthRange::new(phase_end(dur.0), phase_end(dur.0 + dur.1)),
            ramp_down: MonthRange::new(phase_end(dur.0 + dur.1), phase_end(dur.0 + dur.1 + dur.2)),
        };
        series.push(GenerationSeries::new(
            &name,
            start,
            shipments,
            upgrades,
            new_receipts,
            gross_returns,
        )?);
        truth.push(GenerationTruth {
            generation: name,
            trigger,
            peak,
            phases,
            shape,
            seasonal,
            noise_free_returns: clean,
        });
    }
    Ok(Scenario {
        spec: spec.clone(),
        series,
        calendar,
        truth,
    })
}
