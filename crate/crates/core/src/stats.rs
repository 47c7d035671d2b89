//! Batch-means confidence intervals and distribution distances.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided 95% Student-t quantile with `df` degrees of freedom.
pub fn t_quantile_975(df: usize) -> f64 {
    let df = df.max(1) as f64;
    StudentsT::new(0.0, 1.0, df)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::INFINITY)
}

/// Mean and 95% half-width of i.i.d.-treated batch means.
pub fn batch_mean_ci(batches: &[f64]) -> (f64, f64) {
    let n = batches.len();
    if n == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let mean = batches.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = batches.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, t_quantile_975(n - 1) * (var / n as f64).sqrt())
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `sorted` and
/// `cdf`, checking both one-sided limits at each sample.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = cdf(x);
        // F(x−) is approximated from the left by F just below x
        let f_left = cdf(x - x.abs().max(1.0) * 1e-12);
        d = d.max((j as f64 / n - f).abs()).max((f_left - i as f64 / n).abs());
        i = j;
    }
    d
}
