use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    evaluate_mape, fit_any, interval_bands, residual_sd, FittedModel, ModelKind, ModelSpec,
};
use crate::analysis::{pearson_values, LifecyclePhases};
use crate::domain::FeatureMatrix;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub algorithm: String,
    pub spec: ModelSpec,
    pub mape_best_fit: f64,
    pub mape_lci: f64,
    pub mape_uci: f64,
    /// Pearson r between test actuals and predictions.
    pub correlation: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelLeaderboard {
    pub rows: Vec<LeaderboardRow>,
}

impl ModelLeaderboard {
    pub fn best(&self) -> Option<&LeaderboardRow> {
        self.rows.first()
    }
}

fn rank_order(a: &LeaderboardRow, b: &LeaderboardRow) -> Ordering {
    let corr = |r: &LeaderboardRow| {
        if r.correlation.is_nan() {
            f64::NEG_INFINITY
        } else {
            r.correlation
        }
    };
    a.mape_best_fit
        .total_cmp(&b.mape_best_fit)
        .then_with(|| corr(b).total_cmp(&corr(a)))
}

/// Ascending best-fit MAPE, ties by descending correlation. Stable otherwise.
pub fn rank_models(mut rows: Vec<LeaderboardRow>) -> ModelLeaderboard {
    rows.sort_by(rank_order);
    ModelLeaderboard { rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub row: LeaderboardRow,
    pub model: FittedModel,
    pub test_predictions: Vec<f64>,
    pub test_lci: Vec<f64>,
    pub test_uci: Vec<f64>,
    pub residual_sd: f64,
}

fn evaluate_one(
    spec: &ModelSpec,
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    phases: Option<&LifecyclePhases>,
    fallback: Option<&FittedModel>,
    z: f64,
) -> Result<Evaluation> {
    let model = fit_any(spec, train, phases, fallback)?;
    let pred = model.predict(&test.predictors)?;
    let sd = residual_sd(&test.target, &pred)?;
    let (lci, uci) = interval_bands(&pred, sd, z);
    let correlation = pearson_values(&test.target, &pred).unwrap_or(0.0);
    Ok(Evaluation {
        row: LeaderboardRow {
            algorithm: spec.kind.label().to_string(),
            spec: spec.clone(),
            mape_best_fit: evaluate_mape(&test.target, &pred)?,
            mape_lci: evaluate_mape(&test.target, &lci)?,
            mape_uci: evaluate_mape(&test.target, &uci)?,
            correlation,
        },
        model,
        test_predictions: pred,
        test_lci: lci,
        test_uci: uci,
        residual_sd: sd,
    })
}

/// Fits every spec on `train`, scores it on `test` and ranks the results.
///
/// Single-model specs run in parallel. Phase-wise specs run afterwards so they can fall back to
/// the best single model. Specs that fail are returned with their error text.
pub fn evaluate_models(
    specs: &[ModelSpec],
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    phases: Option<&LifecyclePhases>,
    z: f64,
) -> (ModelLeaderboard, Vec<Evaluation>, Vec<(String, String)>) {
    let (composite, single): (Vec<&ModelSpec>, Vec<&ModelSpec>) =
        specs.iter().partition(|s| s.kind == ModelKind::PhaseWise);
    let mut results: Vec<(&ModelSpec, Result<Evaluation>)> = single
        .par_iter()
        .map(|s| (*s, evaluate_one(s, train, test, phases, None, z)))
        .collect();

    let best_single = results
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .min_by(|a, b| rank_order(&a.row, &b.row))
        .map(|e| e.model.clone());
    for s in composite {
        results.push((
            s,
            evaluate_one(s, train, test, phases, best_single.as_ref(), z),
        ));
    }

    let mut evaluations = Vec::new();
    let mut failures = Vec::new();
    for (spec, r) in results {
        match r {
            Ok(e) => evaluations.push(e),
            Err(e) => {
                log::warn!("{} failed: {e}", spec.kind.label());
                failures.push((spec.kind.label().to_string(), e.to_string()));
            }
        }
    }
    evaluations.sort_by(|a, b| rank_order(&a.row, &b.row));
    let board = ModelLeaderboard {
        rows: evaluations.iter().map(|e| e.row.clone()).collect(),
    };
    (board, evaluations, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testutil::matrix;
    use proptest::prelude::*;

    fn row(kind: ModelKind, mape: f64, corr: f64) -> LeaderboardRow {
        LeaderboardRow {
            algorithm: kind.label().into(),
            spec: ModelSpec::new(kind),
            mape_best_fit: mape,
            mape_lci: mape,
            mape_uci: mape,
            correlation: corr,
        }
    }

    #[test]
    fn reference_ranking() {
        let board = rank_models(vec![
            row(ModelKind::LinearRegression, 6.74, 0.673),
            row(ModelKind::CartTree, 8.96, 0.99),
            row(ModelKind::ChaidTree, 1.78, 0.973),
            row(ModelKind::NeuralNet, 8.20, 0.847),
            row(ModelKind::TimeSeries, 2.51, 0.958),
        ]);
        let order: Vec<&str> = board.rows.iter().map(|r| r.algorithm.as_str()).collect();
        assert_eq!(
            order,
            [
                "CHAID",
                "Time Series",
                "Linear Regression",
                "Neural Network",
                "C&R Tree"
            ]
        );
    }

    #[test]
    fn ties_prefer_correlation() {
        let board = rank_models(vec![
            row(ModelKind::CartTree, 3.0, 0.8),
            row(ModelKind::ChaidTree, 3.0, 0.9),
        ]);
        assert_eq!(board.best().unwrap().algorithm, "CHAID");
        assert_eq!(
            rank_models(vec![row(ModelKind::NeuralNet, 1.0, 0.1)])
                .rows
                .len(),
            1
        );
    }

    #[test]
    fn zoo_runs_and_is_deterministic() {
        let x: Vec<f64> = (0..40).map(f64::from).collect();
        let z: Vec<f64> = x.iter().map(|v| (v / 4.0).sin()).collect();
        let y: Vec<f64> = x
            .iter()
            .zip(&z)
            .map(|(a, b)| 100.0 + 3.0 * a + 10.0 * b)
            .collect();
        let m = matrix(vec![("x", x), ("z", z)], y);
        let (train, test) = crate::models::split_chronological(&m, 0.7).unwrap();
        let specs: Vec<ModelSpec> = ModelKind::ZOO
            .iter()
            .map(|k| ModelSpec::new(*k).with_seed(7))
            .collect();
        let (a, ev, failures) = evaluate_models(&specs, &train, &test, None, 1.96);
        assert!(failures.is_empty(), "{failures:?}");
        assert_eq!(a.rows.len(), 5);
        assert_eq!(a.best().unwrap().algorithm, "Linear Regression");
        assert!(ev[0].row.mape_best_fit < 1e-6);
        let (b, ..) = evaluate_models(&specs, &train, &test, None, 1.96);
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn ranking_is_a_sorted_permutation(items in prop::collection::vec((0.0f64..50.0, -1.0f64..1.0), 1..12)) {
            let rows: Vec<LeaderboardRow> = items.iter().map(|(m, c)| row(ModelKind::CartTree, *m, *c)).collect();
            let board = rank_models(rows.clone());
            prop_assert_eq!(board.rows.len(), rows.len());
            let mut a: Vec<(u64, u64)> = rows.iter().map(|r| (r.mape_best_fit.to_bits(), r.correlation.to_bits())).collect();
            let mut b: Vec<(u64, u64)> = board.rows.iter().map(|r| (r.mape_best_fit.to_bits(), r.correlation.to_bits())).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
            let min = rows.iter().map(|r| r.mape_best_fit).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(board.rows[0].mape_best_fit, min);
        }
    }
}
