use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y = intercept + Σ coefficients[j]·x_j^p`, with powers 1..=degree per input column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    /// Grouped by power: all first-power terms, then all squares.
    pub coefficients: Vec<f64>,
    pub degree: u32,
    pub ridge_used: bool,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut y = self.intercept;
        for p in 1..=self.degree {
            for (j, xj) in x.iter().enumerate() {
                y += self.coefficients[(p as usize - 1) * x.len() + j] * xj.powi(p as i32);
            }
        }
        y
    }
}

fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = a.clone().cholesky()?;
    let diag_max = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pivot_min = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v * v));
    if pivot_min < 1e-12 * diag_max.max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(chol.solve(b))
}

/// Ordinary least squares with intercept via standardized normal equations.
///
/// A singular or badly conditioned system is retried with `ridge_lambda` on the diagonal.
pub fn fit_linear(
    columns: &[&[f64]],
    y: &[f64],
    degree: u32,
    ridge_lambda: f64,
) -> Result<LinearModel> {
    let n = y.len();
    if n == 0 {
        return Err(Error::validation("linear regression on an empty matrix"));
    }
    let mut design: Vec<Vec<f64>> = Vec::new();
    for p in 1..=degree.max(1) {
        for c in columns {
            design.push(c.iter().map(|v| v.powi(p as i32)).collect());
        }
    }
    let k = design.len();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if k == 0 {
        return Ok(LinearModel {
            intercept: y_mean,
            coefficients: vec![],
            degree: degree.max(1),
            ridge_used: false,
        });
    }

    let means: Vec<f64> = design
        .iter()
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect();
    let sds: Vec<f64> = design
        .iter()
        .zip(&means)
        .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt())
        .collect();
    let z = DMatrix::from_fn(n, k, |i, j| {
        if sds[j] > 0.0 {
            (design[j][i] - means[j]) / sds[j]
        } else {
            0.0
        }
    });
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let zt = z.transpose();
    let a = &zt * &z;
    let b = &zt * &yc;

    let (gamma, ridge_used) = match solve(&a, &b) {
        Some(g) => (g, false),
        None => {
            let ridged = &a + DMatrix::identity(k, k) * ridge_lambda;
            let g = ridged
                .cholesky()
                .map(|c| c.solve(&b))
                .ok_or_else(|| Error::numeric("normal equations are singular even with ridge"))?;
            (g, true)
        }
    };
    let coefficients: Vec<f64> = (0..k)
        .map(|j| if sds[j] > 0.0 { gamma[j] / sds[j] } else { 0.0 })
        .collect();
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&means)
            .map(|(c, m)| c * m)
            .sum::<f64>();
    if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::numeric(
            "linear regression produced non-finite coefficients",
        ));
    }
    Ok(LinearModel {
        intercept,
        coefficients,
        degree: degree.max(1),
        ridge_used,
    })
}
