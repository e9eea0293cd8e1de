use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl MlpConfig {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        MlpConfig {
            hidden: spec.param_usize("hidden", 8).max(1),
            epochs: spec.param_usize("epochs", 2000),
            learning_rate: spec.param("learning_rate", 0.01),
            seed: spec.seed,
        }
    }
}

/// One tanh hidden layer, linear output. Parameters are laid out as `[w1 (h×d), b1 (h), w2 (h), b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    pub y_mean: f64,
    pub y_sd: f64,
}

pub fn n_params(d: usize, h: usize) -> usize {
    h * d + 2 * h + 1
}

fn forward(p: &[f64], d: usize, h: usize, x: &[f64], hidden: &mut [f64]) -> f64 {
    let (w1, rest) = p.split_at(h * d);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(h);
    let mut out = b2[0];
    for j in 0..h {
        let z = b1[j] + (0..d).map(|i| w1[j * d + i] * x[i]).sum::<f64>();
        hidden[j] = z.tanh();
        out += w2[j] * hidden[j];
    }
    out
}

/// Loss `(1/2n)·Σ(ŷ - y)²` and its gradient for standardized inputs.
pub fn loss_and_gradient(
    p: &[f64],
    d: usize,
    h: usize,
    xs: &[Vec<f64>],
    ys: &[f64],
) -> (f64, Vec<f64>) {
    let n = ys.len() as f64;
    let mut grad = vec![0.0; p.len()];
    let mut hidden = vec![0.0; h];
    let mut loss = 0.0;
    let w2_at = h * d + h;
    for (x, y) in xs.iter().zip(ys) {
        let e = forward(p, d, h, x, &mut hidden) - y;
        loss += e * e;
        grad[w2_at + h] += e;
        for j in 0..h {
            grad[w2_at + j] += e * hidden[j];
            let back = e * p[w2_at + j] * (1.0 - hidden[j] * hidden[j]);
            grad[h * d + j] += back;
            for i in 0..d {
                grad[j * d + i] += back * x[i];
            }
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / (2.0 * n), grad)
}

fn standardize(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    (m, if sd > 0.0 { sd } else { 1.0 })
}

pub fn fit_mlp(columns: &[&[f64]], y: &[f64], cfg: &MlpConfig) -> Result<Mlp> {
    let (d, h, n) = (columns.len(), cfg.hidden, y.len());
    if n == 0 {
        return Err(Error::validation("Neural Network on an empty matrix"));
    }
    let stats: Vec<(f64, f64)> = columns.iter().map(|c| standardize(c)).collect();
    let (y_mean, y_sd) = standardize(y);
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            stats
                .iter()
                .zip(columns)
                .map(|((m, s), c)| (c[r] - m) / s)
                .collect()
        })
        .collect();
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_sd).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut p = vec![0.0; n_params(d, h)];
    let lim1 = (6.0 / (d + h).max(1) as f64).sqrt();
    let lim2 = (6.0 / (h + 1) as f64).sqrt();
    for v in p.iter_mut().take(h * d) {
        *v = rng.random_range(-lim1..=lim1);
    }
    for v in p.iter_mut().skip(h * d + h).take(h) {
        *v = rng.random_range(-lim2..=lim2);
    }
    for _ in 0..cfg.epochs {
        let (_, g) = loss_and_gradient(&p, d, h, &xs, &ys);
        p.iter_mut()
            .zip(&g)
            .for_each(|(w, g)| *w -= cfg.learning_rate * g);
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("Neural Network training diverged"));
    }
    Ok(Mlp {
        inputs: d,
        hidden: h,
        params: p,
        x_mean: stats.iter().map(|s| s.0).collect(),
        x_sd: stats.iter().map(|s| s.1).collect(),
        y_mean,
        y_sd,
    })
}

impl Mlp {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = x
            .iter()
            .zip(self.x_mean.iter().zip(&self.x_sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let mut hidden = vec![0.0; self.hidden];
        self.y_mean + self.y_sd * forward(&self.params, self.inputs, self.hidden, &z, &mut hidden)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (d, h) in [(1, 1), (2, 3), (4, 5)] {
            let p: Vec<f64> = (0..n_params(d, h))
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let xs: Vec<Vec<f64>> = (0..7)
                .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let ys: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = loss_and_gradient(&p, d, h, &xs, &ys);
            for k in 0..p.len() {
                let eps = 1e-5;
                let (mut a, mut b) = (p.clone(), p.clone());
                a[k] += eps;
                b[k] -= eps;
                let fd = (loss_and_gradient(&a, d, h, &xs, &ys).0
                    - loss_and_gradient(&b, d, h, &xs, &ys).0)
                    / (2.0 * eps);
                let rel = (fd - g[k]).abs() / (fd.abs().max(g[k].abs()).max(1e-8));
                assert!(
                    rel <= 1e-4 || (fd - g[k]).abs() < 1e-10,
                    "d{d} h{h} k{k}: {fd} vs {}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| (v / 3.0).sin() * 10.0 + 20.0).collect();
        let cfg = MlpConfig {
            hidden: 4,
            epochs: 200,
            learning_rate: 0.05,
            seed: 5,
        };
        assert_eq!(
            fit_mlp(&[&x], &y, &cfg).unwrap(),
            fit_mlp(&[&x], &y, &cfg).unwrap()
        );
        let other = MlpConfig {
            seed: 6,
            ..cfg.clone()
        };
        assert_ne!(
            fit_mlp(&[&x], &y, &cfg).unwrap().params,
            fit_mlp(&[&x], &y, &other).unwrap().params
        );
    }

    #[test]
    fn training_reduces_loss() {
        let x: Vec<f64> = (0..30).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 4.0).collect();
        let short = fit_mlp(
            &[&x],
            &y,
            &MlpConfig {
                hidden: 8,
                epochs: 1,
                learning_rate: 0.01,
                seed: 1,
            },
        )
        .unwrap();
        let long = fit_mlp(
            &[&x],
            &y,
            &MlpConfig {
                hidden: 8,
                epochs: 2000,
                learning_rate: 0.01,
                seed: 1,
            },
        )
        .unwrap();
        let sse = |m: &Mlp| {
            x.iter()
                .zip(&y)
                .map(|(a, b)| (m.predict_row(&[*a]) - b).powi(2))
                .sum::<f64>()
        };
        assert!(sse(&long) < 0.1 * sse(&short));
    }

    #[test]
    fn constant_input_column() {
        let x = vec![2.0; 12];
        let y: Vec<f64> = (0..12).map(f64::from).collect();
        let m = fit_mlp(
            &[&x],
            &y,
            &MlpConfig {
                hidden: 3,
                epochs: 50,
                learning_rate: 0.01,
                seed: 0,
            },
        )
        .unwrap();
        assert!(m.predict_row(&[2.0]).is_finite());
    }

    proptest! {
        #[test]
        fn finite_far_outside_training_range(shift in -1e3f64..1e3, seed in 0u64..50) {
            let x: Vec<f64> = (0..15).map(f64::from).collect();
            let y: Vec<f64> = x.iter().map(|v| v * v).collect();
            let m = fit_mlp(&[&x], &y, &MlpConfig { hidden: 5, epochs: 100, learning_rate: 0.01, seed }).unwrap();
            let far = m.x_mean[0] + 3.0 * m.x_sd[0] + shift.abs() * m.x_sd[0];
            prop_assert!(m.predict_row(&[far]).is_finite());
            prop_assert!(m.predict_row(&[m.x_mean[0] - 3.0 * m.x_sd[0] - shift.abs()]).is_finite());
        }
    }
}
