use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::ModelSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ChaidConfig {
    pub alpha_merge: f64,
    pub alpha_split: f64,
    pub min_segment: usize,
    pub max_depth: usize,
    pub bins: usize,
}

impl ChaidConfig {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        ChaidConfig {
            alpha_merge: spec.param("alpha_merge", 0.05),
            alpha_split: spec.param("alpha_split", 0.05),
            min_segment: spec.param_usize("min_segment", 5).max(1),
            max_depth: spec.param_usize("max_depth", 3),
            bins: spec.param_usize("bins", 10).max(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChaidNode {
    Leaf {
        value: f64,
        n: usize,
    },
    /// Child `i` takes `x <= uppers[i]`; the last child takes everything above.
    Split {
        feature: usize,
        uppers: Vec<f64>,
        children: Vec<ChaidNode>,
        adjusted_p: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaidTree {
    pub root: ChaidNode,
}

impl ChaidTree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                ChaidNode::Leaf { value, .. } => return *value,
                ChaidNode::Split {
                    feature,
                    uppers,
                    children,
                    ..
                } => {
                    let i = uppers
                        .iter()
                        .position(|u| x[*feature] <= *u)
                        .unwrap_or(uppers.len());
                    node = &children[i];
                }
            }
        }
    }
}

/// One-way ANOVA F-test p-value across `groups`.
pub fn anova_p(groups: &[Vec<f64>]) -> f64 {
    let k = groups.len();
    let n: usize = groups.iter().map(|g| g.len()).sum();
    if k < 2 || n <= k {
        return 1.0;
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        between += g.len() as f64 * (m - grand).powi(2);
        within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let scale = groups
        .iter()
        .flatten()
        .map(|v| v * v)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let tiny = 1e-20 * scale;
    match (between > tiny, within > tiny) {
        (false, _) => 1.0,
        (true, false) => 0.0,
        (true, true) => {
            let (d1, d2) = ((k - 1) as f64, (n - k) as f64);
            let f = (between / d1) / (within / d2);
            FisherSnedecor::new(d1, d2).map(|d| d.sf(f)).unwrap_or(1.0)
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Ordinal bins: contiguous groups of row indices sorted by value, with their upper bound.
#[derive(Debug, Clone)]
struct Bin {
    rows: Vec<usize>,
    upper: f64,
}

fn decile_bins(col: &[f64], rows: &[usize], bins: usize) -> Vec<Bin> {
    let mut sorted: Vec<f64> = rows.iter().map(|&i| col[i]).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // Cut q is the largest value among the lowest q/bins share of rows.
    let mut cuts: Vec<f64> = (1..bins)
        .map(|q| sorted[(q * n).div_ceil(bins).saturating_sub(1)])
        .collect();
    cuts.dedup();
    let mut out: Vec<Bin> = cuts
        .iter()
        .map(|c| Bin {
            rows: vec![],
            upper: *c,
        })
        .collect();
    out.push(Bin {
        rows: vec![],
        upper: f64::INFINITY,
    });
    for &i in rows {
        let b = cuts.iter().position(|c| col[i] <= *c).unwrap_or(cuts.len());
        out[b].rows.push(i);
    }
    out.retain(|b| !b.rows.is_empty());
    out
}

fn values(y: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| y[i]).collect()
}

fn pair_p(y: &[f64], a: &Bin, b: &Bin) -> f64 {
    anova_p(&[values(y, &a.rows), values(y, &b.rows)])
}

fn merge_at(bins: &mut Vec<Bin>, i: usize) {
    let right = bins.remove(i + 1);
    bins[i].rows.extend(right.rows);
    bins[i].upper = right.upper;
}

struct Candidate {
    feature: usize,
    bins: Vec<Bin>,
    adjusted_p: f64,
}

fn candidate(
    feature: usize,
    col: &[f64],
    y: &[f64],
    rows: &[usize],
    cfg: &ChaidConfig,
) -> Option<Candidate> {
    let mut bins = decile_bins(col, rows, cfg.bins);
    let c = bins.len();
    while bins.len() >= 2 {
        let (i, p) = (0..bins.len() - 1)
            .map(|i| (i, pair_p(y, &bins[i], &bins[i + 1])))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        if p <= cfg.alpha_merge {
            break;
        }
        merge_at(&mut bins, i);
    }
    while bins.len() >= 2 {
        let Some(small) = bins.iter().position(|b| b.rows.len() < cfg.min_segment) else {
            break;
        };
        let j = if small == 0 {
            0
        } else if small == bins.len() - 1
            || pair_p(y, &bins[small - 1], &bins[small])
                >= pair_p(y, &bins[small], &bins[small + 1])
        {
            small - 1
        } else {
            small
        };
        merge_at(&mut bins, j);
    }
    let k = bins.len();
    if k < 2 {
        return None;
    }
    let groups: Vec<Vec<f64>> = bins.iter().map(|b| values(y, &b.rows)).collect();
    let adjusted_p = (anova_p(&groups) * binomial(c - 1, k - 1)).min(1.0);
    Some(Candidate {
        feature,
        bins,
        adjusted_p,
    })
}

fn grow(
    columns: &[&[f64]],
    y: &[f64],
    rows: Vec<usize>,
    depth: usize,
    cfg: &ChaidConfig,
) -> ChaidNode {
    let value = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
    let leaf = ChaidNode::Leaf {
        value,
        n: rows.len(),
    };
    if depth >= cfg.max_depth || rows.len() < 2 * cfg.min_segment {
        return leaf;
    }
    let best = columns
        .iter()
        .enumerate()
        .filter_map(|(f, col)| candidate(f, col, y, &rows, cfg))
        .fold(None::<Candidate>, |acc, c| match acc {
            Some(a) if a.adjusted_p <= c.adjusted_p => Some(a),
            _ => Some(c),
        });
    match best {
        Some(c) if c.adjusted_p < cfg.alpha_split => {
            let mut uppers: Vec<f64> = c.bins.iter().map(|b| b.upper).collect();
            uppers.pop();
            let children = c
                .bins
                .into_iter()
                .map(|b| grow(columns, y, b.rows, depth + 1, cfg))
                .collect();
            ChaidNode::Split {
                feature: c.feature,
                uppers,
                children,
                adjusted_p: c.adjusted_p,
            }
        }
        _ => leaf,
    }
}

pub fn fit_chaid(columns: &[&[f64]], y: &[f64], cfg: &ChaidConfig) -> Result<ChaidTree> {
    if y.is_empty() {
        return Err(Error::validation("CHAID on an empty matrix"));
    }
    Ok(ChaidTree {
        root: grow(columns, y, (0..y.len()).collect(), 0, cfg),
    })
}
