use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::pearson_values;
use crate::domain::{GaCalendar, GenerationSeries, MonthIndex};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenealogyConfig {
    /// Post-trigger returns months the current generation must have.
    pub min_post_ga_months: usize,
    /// Aligned overlap months a candidate must share with the current series.
    pub min_overlap: usize,
}

impl Default for GenealogyConfig {
    fn default() -> Self {
        GenealogyConfig {
            min_post_ga_months: 6,
            min_overlap: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub generation: String,
    pub shipments_r: f64,
    pub returns_r: f64,
    pub score: f64,
    pub overlap_months: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenealogyMatch {
    pub generation: String,
    pub score: f64,
    /// Every scored candidate, in calendar order.
    pub candidates: Vec<CandidateScore>,
    /// Candidates skipped for short overlap or flat series, with the reason.
    pub rejected: Vec<(String, String)>,
}

/// Value of `series` at `anchor + offset`, None outside the series.
fn aligned(
    series: &GenerationSeries,
    values: &[f64],
    anchor: MonthIndex,
    offset: i32,
) -> Option<f64> {
    let idx = (anchor + offset) - series.start;
    (idx >= 0)
        .then(|| values.get(idx as usize).copied())
        .flatten()
}

fn score_candidate(
    current: &GenerationSeries,
    cur_trigger: MonthIndex,
    cand: &GenerationSeries,
    cand_trigger: MonthIndex,
    cfg: &GenealogyConfig,
) -> std::result::Result<CandidateScore, String> {
    let cur_end = current.range().end - cur_trigger;
    let ship_from = current.start - cur_trigger;

    let pairs = |cur_vals: &[f64], cand_vals: &[f64], from: i32| -> (Vec<f64>, Vec<f64>) {
        (from..cur_end)
            .filter_map(|k| {
                Some((
                    aligned(current, cur_vals, cur_trigger, k)?,
                    aligned(cand, cand_vals, cand_trigger, k)?,
                ))
            })
            .unzip()
    };
    let (rc, rk) = pairs(&current.gross_returns, &cand.gross_returns, 0);
    let (sc, sk) = pairs(&current.shipments, &cand.shipments, ship_from);
    if rc.len() < cfg.min_overlap {
        return Err(format!("only {} aligned returns months", rc.len()));
    }
    let returns_r = pearson_values(&rc, &rk).map_err(|e| format!("returns: {e}"))?;
    let shipments_r = pearson_values(&sc, &sk).map_err(|e| format!("shipments: {e}"))?;
    Ok(CandidateScore {
        generation: cand.generation.clone(),
        shipments_r,
        returns_r,
        score: 0.5 * (shipments_r + returns_r),
        overlap_months: rc.len(),
    })
}

/// Historical generation whose trigger-aligned shipments and returns best track the current
/// partial series. Score is the mean of the two correlations; ties go to the later generation.
pub fn genealogy_match(
    current: &GenerationSeries,
    candidates: &[GenerationSeries],
    calendar: &GaCalendar,
    cfg: &GenealogyConfig,
) -> Result<GenealogyMatch> {
    let cur_trigger = calendar.trigger_ga(&current.generation)?;
    let post = (current.range().end - cur_trigger).max(0) as usize;
    if post < cfg.min_post_ga_months {
        return Err(Error::validation(format!(
            "`{}` has {post} post-GA months of returns, need {}",
            current.generation, cfg.min_post_ga_months
        )));
    }

    let mut ordered: Vec<&GenerationSeries> = candidates
        .iter()
        .filter(|c| c.generation != current.generation)
        .collect();
    ordered.sort_by_key(|c| calendar.ga(&c.generation));

    let results: Vec<(String, std::result::Result<CandidateScore, String>)> = ordered
        .par_iter()
        .map(|c| {
            let res = match calendar.trigger_ga(&c.generation) {
                Ok(t) => score_candidate(current, cur_trigger, c, t, cfg),
                Err(e) => Err(e.to_string()),
            };
            (c.generation.clone(), res)
        })
        .collect();

    let mut scored = Vec::new();
    let mut rejected = Vec::new();
    for (name, res) in results {
        match res {
            Ok(s) => scored.push(s),
            Err(why) => rejected.push((name, why)),
        }
    }
    // Calendar order, so `>=` keeps the most recent among equals.
    let best = scored
        .iter()
        .fold(None::<&CandidateScore>, |acc, s| match acc {
            Some(b) if s.score < b.score => Some(b),
            _ => Some(s),
        })
        .ok_or_else(|| {
            Error::validation(format!(
                "no candidate has sufficient overlap with `{}`",
                current.generation
            ))
        })?;
    Ok(GenealogyMatch {
        generation: best.generation.clone(),
        score: best.score,
        candidates: scored.clone(),
        rejected,
    })
}
