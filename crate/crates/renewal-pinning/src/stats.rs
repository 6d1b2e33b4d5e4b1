//! Small estimators shared by the Monte Carlo and fitting code.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn within(&self, target: f64, n_sigma: f64) -> bool {
        (self.mean - target).abs() <= n_sigma * self.stderr
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Naive mean with standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    Estimate { mean: m, stderr: (var / n).sqrt() }
}

/// Delete-one jackknife for a statistic of the sample.
pub fn jackknife<F: Fn(&[f64]) -> f64>(xs: &[f64], stat: F) -> Estimate {
    let n = xs.len();
    assert!(n >= 2);
    let full = stat(xs);
    let mut buf = Vec::with_capacity(n - 1);
    let mut loo = Vec::with_capacity(n);
    for i in 0..n {
        buf.clear();
        buf.extend(xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| *x));
        loo.push(stat(&buf));
    }
    let lm = mean(&loo);
    let nf = n as f64;
    let var = (nf - 1.0) / nf * loo.iter().map(|x| (x - lm) * (x - lm)).sum::<f64>();
    Estimate { mean: nf * full - (nf - 1.0) * lm, stderr: var.sqrt() }
}

/// Ordinary least squares y = a + b x, returns (b, stderr(b), a).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (b, se, a)
}

/// Slope of log y against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (b, se, _) = linear_fit(&lx, &ly);
    (b, se)
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackknife_of_mean_is_naive_stderr() {
        let xs = [1.0, 2.5, 0.3, 4.0, 2.2, 1.9];
        let a = jackknife(&xs, mean);
        let b = mean_stderr(&xs);
        assert!((a.mean - b.mean).abs() < 1e-12);
        assert!((a.stderr - b.stderr).abs() < 1e-12);
    }

    #[test]
    fn exact_power_law_slope() {
        let xs = log_grid(1e-3, 1.0, 10);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.7)).collect();
        let (b, se) = loglog_slope(&xs, &ys);
        assert!((b - 1.7).abs() < 1e-12 && se < 1e-10);
    }
}
