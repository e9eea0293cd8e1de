use serde::{Deserialize, Serialize};

use super::ModelSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CartConfig {
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl CartConfig {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        CartConfig {
            min_leaf: spec.param_usize("min_leaf", 5).max(1),
            max_depth: spec.param_usize("max_depth", 4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
        n: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: Node,
}

impl RegressionTree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }

    pub fn leaves(&self) -> usize {
        fn l(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 1,
                Node::Split { left, right, .. } => l(left) + l(right),
            }
        }
        l(&self.root)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestSplit {
    pub feature: usize,
    pub threshold: f64,
    pub sse: f64,
}

fn sse_of(y: &[f64], rows: &[usize]) -> f64 {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
    rows.iter().map(|&i| (y[i] - mean).powi(2)).sum()
}

/// Lowest-SSE split over every feature and every midpoint between consecutive distinct values.
/// Ties keep the first feature, then the lowest threshold.
pub fn best_split(
    columns: &[&[f64]],
    y: &[f64],
    rows: &[usize],
    min_leaf: usize,
) -> Option<BestSplit> {
    let n = rows.len();
    let mut best: Option<BestSplit> = None;
    for (f, col) in columns.iter().enumerate() {
        let mut order = rows.to_vec();
        order.sort_by(|a, b| col[*a].total_cmp(&col[*b]));
        let (mut s, mut s2) = (vec![0.0; n + 1], vec![0.0; n + 1]);
        for (k, &i) in order.iter().enumerate() {
            s[k + 1] = s[k] + y[i];
            s2[k + 1] = s2[k] + y[i] * y[i];
        }
        for k in min_leaf..=n.saturating_sub(min_leaf) {
            if k == 0 || k == n || col[order[k - 1]] == col[order[k]] {
                continue;
            }
            let (nl, nr) = (k as f64, (n - k) as f64);
            let left = (s2[k] - s[k] * s[k] / nl).max(0.0);
            let right = ((s2[n] - s2[k]) - (s[n] - s[k]).powi(2) / nr).max(0.0);
            let sse = left + right;
            if best.is_none_or(|b| sse < b.sse) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: 0.5 * (col[order[k - 1]] + col[order[k]]),
                    sse,
                });
            }
        }
    }
    best
}

fn grow(columns: &[&[f64]], y: &[f64], rows: Vec<usize>, depth: usize, cfg: &CartConfig) -> Node {
    let value = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
    let leaf = Node::Leaf {
        value,
        n: rows.len(),
    };
    if depth >= cfg.max_depth || rows.len() < 2 * cfg.min_leaf {
        return leaf;
    }
    let parent = sse_of(y, &rows);
    let scale = rows.iter().map(|&i| y[i] * y[i]).sum::<f64>();
    if parent <= 1e-12 * scale {
        return leaf;
    }
    let Some(split) = best_split(columns, y, &rows, cfg.min_leaf) else {
        return leaf;
    };
    if split.sse >= parent - 1e-12 * scale {
        return leaf;
    }
    let (l, r): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&i| columns[split.feature][i] <= split.threshold);
    Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(columns, y, l, depth + 1, cfg)),
        right: Box::new(grow(columns, y, r, depth + 1, cfg)),
    }
}

pub fn fit_cart(columns: &[&[f64]], y: &[f64], cfg: &CartConfig) -> Result<RegressionTree> {
    if y.is_empty() {
        return Err(Error::validation("C&R Tree on an empty matrix"));
    }
    Ok(RegressionTree {
        root: grow(columns, y, (0..y.len()).collect(), 0, cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Every (feature, threshold) pair, SSE computed directly from the two partitions.
    fn oracle_split(columns: &[Vec<f64>], y: &[f64], min_leaf: usize) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for (f, col) in columns.iter().enumerate() {
            let mut vals = col.clone();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                let l: Vec<f64> = (0..y.len())
                    .filter(|&i| col[i] <= t)
                    .map(|i| y[i])
                    .collect();
                let r: Vec<f64> = (0..y.len()).filter(|&i| col[i] > t).map(|i| y[i]).collect();
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let sse = |v: &[f64]| {
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
                };
                let s = sse(&l) + sse(&r);
                if best.is_none_or(|b| s < b.2 - 1e-9) {
                    best = Some((f, t, s));
                }
            }
        }
        best
    }

    #[test]
    fn two_plateau_step() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| if *v < 12.0 { 10.0 } else { 30.0 })
            .collect();
        let t = fit_cart(
            &[&x],
            &y,
            &CartConfig {
                min_leaf: 5,
                max_depth: 4,
            },
        )
        .unwrap();
        let (f, thr, _) = oracle_split(std::slice::from_ref(&x), &y, 5).unwrap();
        match &t.root {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                assert_eq!((*feature, *threshold), (f, thr));
                assert_eq!(**left, Node::Leaf { value: 10.0, n: 12 });
                assert_eq!(**right, Node::Leaf { value: 30.0, n: 8 });
            }
            n => panic!("{n:?}"),
        }
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn saturated_tree_memorizes() {
        let x: Vec<f64> = (0..16).map(|v| (v * 7 % 16) as f64).collect();
        let y: Vec<f64> = (0..16)
            .map(|v| ((v * 13) % 5) as f64 + 0.5 * v as f64)
            .collect();
        let t = fit_cart(
            &[&x],
            &y,
            &CartConfig {
                min_leaf: 1,
                max_depth: 64,
            },
        )
        .unwrap();
        for i in 0..16 {
            assert_eq!(t.predict_row(&[x[i]]), y[i]);
        }
    }

    fn small_matrix() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (6usize..24).prop_flat_map(|n| {
            (
                prop::collection::vec(prop::collection::vec(-100i32..100, n), 1..4),
                prop::collection::vec(-20i32..20, n),
            )
                .prop_map(|(cols, y)| {
                    (
                        cols.into_iter()
                            .map(|c| c.into_iter().map(f64::from).collect())
                            .collect(),
                        y.into_iter().map(|v| f64::from(v) * 1.37).collect(),
                    )
                })
        })
    }

    // Continuous targets, so no two distinct partitions tie on SSE.
    fn tie_free_matrix() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (6usize..24).prop_flat_map(|n| {
            (
                prop::collection::vec(prop::collection::vec(-100i32..100, n), 1..4),
                prop::collection::vec(-20.0f64..20.0, n),
            )
                .prop_map(|(cols, y)| {
                    (
                        cols.into_iter()
                            .map(|c| c.into_iter().map(f64::from).collect())
                            .collect(),
                        y,
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn split_sse_matches_oracle((cols, y) in small_matrix(), min_leaf in 1usize..4) {
            let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            let got = best_split(&refs, &y, &(0..y.len()).collect::<Vec<_>>(), min_leaf);
            let want = oracle_split(&cols, &y, min_leaf);
            match (got, want) {
                (None, None) => {}
                (Some(g), Some(w)) => prop_assert!((g.sse - w.2).abs() < 1e-6 * (1.0 + w.2), "{g:?} vs {w:?}"),
                (g, w) => prop_assert!(false, "{g:?} vs {w:?}"),
            }
        }

        #[test]
        fn monotone_transform_invariance((cols, y) in tie_free_matrix(), flip in any::<bool>()) {
            let cfg = CartConfig { min_leaf: 2, max_depth: 3 };
            let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            let base = fit_cart(&refs, &y, &cfg).unwrap();
            let warped: Vec<Vec<f64>> = cols
                .iter()
                .map(|c| c.iter().map(|v| if flip { -v.powi(3) } else { (v / 40.0).exp() }).collect())
                .collect();
            let wrefs: Vec<&[f64]> = warped.iter().map(|c| c.as_slice()).collect();
            let t2 = fit_cart(&wrefs, &y, &cfg).unwrap();
            let sse = |t: &RegressionTree, c: &[Vec<f64>]| -> f64 {
                (0..y.len()).map(|i| (t.predict_row(&c.iter().map(|col| col[i]).collect::<Vec<_>>()) - y[i]).powi(2)).sum()
            };
            let (a, b) = (sse(&base, &cols), sse(&t2, &warped));
            prop_assert!((a - b).abs() < 1e-6 * (1.0 + a), "{a} vs {b}");
        }
    }

    #[test]
    fn monotone_transform_same_predictions() {
        let x: Vec<f64> = (0..30).map(|v| ((v * 11) % 30) as f64).collect();
        let z: Vec<f64> = (0..30).map(|v| ((v * 7) % 30) as f64).collect();
        let y: Vec<f64> = (0..30)
            .map(|i| {
                if x[i] < 10.0 {
                    5.0
                } else if z[i] < 15.0 {
                    20.0
                } else {
                    40.0 + x[i]
                }
            })
            .collect();
        let cfg = CartConfig {
            min_leaf: 3,
            max_depth: 3,
        };
        let a = fit_cart(&[&x, &z], &y, &cfg).unwrap();
        let xw: Vec<f64> = x.iter().map(|v| -(v + 1.0).ln()).collect();
        let zw: Vec<f64> = z.iter().map(|v| v.powi(3)).collect();
        let b = fit_cart(&[&xw, &zw], &y, &cfg).unwrap();
        for i in 0..30 {
            assert_eq!(a.predict_row(&[x[i], z[i]]), b.predict_row(&[xw[i], zw[i]]));
        }
    }
}
