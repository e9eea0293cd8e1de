//! Small descriptive-statistics helpers.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard deviation dividing by `n` (population) or `n - 1` (sample).
pub fn std_dev(xs: &[f64], population: bool) -> f64 {
    let n = xs.len();
    let denom = if population { n as f64 } else { n as f64 - 1.0 };
    if n == 0 || denom <= 0.0 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / denom).sqrt()
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    std_dev(xs, false)
}
