//! Characteristic functions of recurrent inter-arrival laws and the Fourier
//! inversion of their mass functions.

use crate::error::{domain, PinningError, Result};
use crate::homogeneous::solve_free_energy;
use crate::renewal_core::{mass_function_of, DampedLaw, InterArrival, PowerLawRenewal};
use crate::special::{CompensatedSum, GradedRule};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// t ↦ φ(t) = E(e^{itτ_1}).
pub struct CharacteristicFunction<'a, L: InterArrival + ?Sized> {
    law: &'a L,
}

impl<'a, L: InterArrival + ?Sized> CharacteristicFunction<'a, L> {
    pub fn new(law: &'a L) -> Self {
        Self { law }
    }

    /// 1 − φ(t), computed without cancellation near t = 0.
    pub fn one_minus(&self, t: f64) -> Complex64 {
        self.law.deficit(Complex64::new(0.0, t))
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        1.0 - self.one_minus(t)
    }

    /// Partial sum over n ≤ terms, with the tail mass as an error bar.
    pub fn eval_direct(&self, t: f64, terms: u64) -> (Complex64, f64) {
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        for n in 1..=terms {
            let (s, c) = (t * n as f64).sin_cos();
            let k = self.law.mass(n);
            re.add(k * c);
            im.add(k * s);
        }
        (Complex64::new(re.value(), im.value()), self.law.tail(terms))
    }
}

/// e^{θ − F(θ) n} K(n), recurrent for θ ≥ 0.
pub fn tilted_recurrent(base: &PowerLawRenewal, theta: f64) -> Result<DampedLaw> {
    if theta < 0.0 || base.tilt() != 0.0 {
        return domain("tilted law needs θ ≥ 0 and a recurrent base");
    }
    let f = if theta == 0.0 { 0.0 } else { solve_free_energy(base, theta, 1e-15) };
    Ok(DampedLaw::calibrated(base, theta, f))
}

const T_MIN: f64 = 1e-40;

/// Nodes on (0, π]: geometric panels up to one panel width, then uniform panels
/// of width π/(n_max + 1) so each holds at most half a period of cos(n t).
#[derive(Debug, Clone)]
pub struct InversionRule {
    pub rule: GradedRule,
    pub n_max: u64,
}

impl InversionRule {
    pub fn for_range(n_max: u64) -> Self {
        let panels = n_max as usize + 1;
        let width = PI / panels as f64;
        let mut rule = GradedRule::geometric(T_MIN, width, 2.0, 16);
        rule.append(GradedRule::uniform(width, PI, panels - 1, 16));
        Self { rule, n_max }
    }

    pub fn len(&self) -> usize {
        self.rule.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.nodes.is_empty()
    }
}

/// u(n) for n = 0..=rule.n_max from
/// u(n) = 1/μ − 1{n=0} + (1/2π) ∫_{−π}^{π} e^{−int} 2 Re[(1 − φ(t))^{−1}] dt.
pub fn mass_by_inversion<L: InterArrival + ?Sized>(law: &L, rule: &InversionRule) -> Result<Vec<f64>> {
    if !law.is_recurrent() {
        return domain("inversion needs a recurrent law");
    }
    let mean = law.mean();
    if !mean.is_finite() {
        return domain("inversion needs a finite mean (exponent > 1)");
    }
    let cf = CharacteristicFunction::new(law);
    let g = |t: f64| 2.0 * (1.0 / cf.one_minus(t)).re;
    let nodes = &rule.rule.nodes;
    let weights: Vec<f64> = nodes
        .par_iter()
        .zip(&rule.rule.weights)
        .map(|(t, w)| w * g(*t))
        .collect();
    // below T_MIN the integrand is a power of t
    let (g0, g1) = (g(T_MIN), g(2.0 * T_MIN));
    let p = (g1 / g0).ln() / 2f64.ln();
    if !(p > -1.0) {
        return Err(PinningError::Horizon("inversion integrand not integrable at 0".into()));
    }
    let tail = g0 * T_MIN / (1.0 + p);
    let n_max = rule.n_max as usize;
    let chunks: Vec<Vec<f64>> = nodes
        .par_chunks(4096)
        .zip(weights.par_chunks(4096))
        .map(|(ts, ws)| {
            let mut acc = vec![0.0; n_max + 1];
            for (t, w) in ts.iter().zip(ws) {
                // cos(n t) by the three-term recurrence
                let two_c = 2.0 * t.cos();
                let (mut prev, mut cur) = (t.cos(), 1.0);
                for a in acc.iter_mut() {
                    *a += w * cur;
                    let next = two_c * cur - prev;
                    prev = cur;
                    cur = next;
                }
            }
            acc
        })
        .collect();
    Ok((0..=n_max)
        .map(|n| {
            let mut s = CompensatedSum::new();
            for c in &chunks {
                s.add(c[n]);
            }
            s.add(tail);
            let indicator = if n == 0 { 1.0 } else { 0.0 };
            1.0 / mean - indicator + s.value() / PI
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct InversionComparison {
    pub convolution: Vec<f64>,
    pub inversion: Vec<f64>,
    pub max_abs_diff: f64,
}

pub fn inversion_vs_convolution<L: InterArrival + ?Sized>(law: &L, n_max: u64) -> Result<InversionComparison> {
    let inversion = mass_by_inversion(law, &InversionRule::for_range(n_max))?;
    let convolution = mass_function_of(law, n_max)?.values;
    let max_abs_diff = convolution.iter().zip(&inversion).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(InversionComparison { convolution, inversion, max_abs_diff })
}

impl InversionComparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,u_convolution,u_inversion,abs_diff\n");
        for (n, (a, b)) in self.convolution.iter().zip(&self.inversion).enumerate() {
            out.push_str(&format!("{n},{a},{b},{}\n", (a - b).abs()));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PositivityReport {
    pub min_mass: f64,
    pub theta: f64,
    pub n: u64,
    pub positive: bool,
}

/// min over the θ grid and 1 ≤ n ≤ n_max of P_θ(n ∈ τ).
pub fn uniform_positivity_probe(base: &PowerLawRenewal, thetas: &[f64], n_max: u64) -> Result<PositivityReport> {
    if base.exponent() <= 1.0 {
        return domain("positivity probe needs exponent > 1");
    }
    let mins = thetas
        .par_iter()
        .map(|&theta| {
            let law = tilted_recurrent(base, theta)?;
            let u = mass_function_of(&law, n_max)?.values;
            let (n, m) = u.iter().enumerate().skip(1).fold((0, f64::INFINITY), |acc, (n, x)| {
                if *x < acc.1 { (n, *x) } else { acc }
            });
            Ok((theta, n as u64, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let (theta, n, min_mass) = mins
        .into_iter()
        .fold((f64::NAN, 0, f64::INFINITY), |acc, x| if x.2 < acc.2 { x } else { acc });
    Ok(PositivityReport { min_mass, theta, n, positive: min_mass > 0.0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct CfEstimateReport {
    /// smallest c with t/c ≤ |Im(1 − φ_θ(t))| ≤ c t on the grid
    pub im_constant: f64,
    /// smallest c with Re(1 − φ_θ(t)) ≤ c t^{2∧α}(1 + |log t| 1{α=2})
    pub re_constant: f64,
    pub re_nonnegative: bool,
    pub symmetric: bool,
    pub modulus_bounded: bool,
    /// (θ, log–log slope of Re(1 − φ_θ), slope of |Im(1 − φ_θ)|)
    pub slopes: Vec<(f64, f64, f64)>,
}

fn loglog_slope(t: &[f64], y: &[f64]) -> f64 {
    let xs: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = y.iter().map(|x| x.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn cf_estimate_probe(base: &PowerLawRenewal, thetas: &[f64], ts: &[f64]) -> Result<CfEstimateReport> {
    let alpha = base.exponent();
    if alpha <= 1.0 {
        return domain("characteristic-function estimates need exponent > 1");
    }
    if ts.len() < 2 || ts.iter().any(|t| !(*t > 0.0 && *t <= PI)) {
        return domain("t grid must hold at least two points in (0, π]");
    }
    let scale = |t: f64| {
        let log = if alpha == 2.0 { 1.0 + t.ln().abs() } else { 1.0 };
        t.powf(alpha.min(2.0)) * log
    };
    let mut report = CfEstimateReport {
        im_constant: 0.0,
        re_constant: 0.0,
        re_nonnegative: true,
        symmetric: true,
        modulus_bounded: true,
        slopes: Vec::new(),
    };
    for &theta in thetas {
        let law = tilted_recurrent(base, theta)?;
        let cf = CharacteristicFunction::new(&law);
        let mut re = Vec::with_capacity(ts.len());
        let mut im = Vec::with_capacity(ts.len());
        for &t in ts {
            let d = cf.one_minus(t);
            let back = cf.one_minus(-t);
            report.symmetric &= (d - back.conj()).norm() <= 1e-11 * d.norm().max(1e-300);
            report.modulus_bounded &= (1.0 - d).norm() <= 1.0 + 1e-14;
            report.re_nonnegative &= d.re >= 0.0;
            report.im_constant = report.im_constant.max(d.im.abs() / t).max(t / d.im.abs());
            report.re_constant = report.re_constant.max(d.re / scale(t));
            re.push(d.re);
            im.push(d.im.abs());
        }
        report.slopes.push((theta, loglog_slope(ts, &re), loglog_slope(ts, &im)));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal_core::{normalize_power_law, GeometricLaw};

    #[test]
    fn cf_basics() {
        let law = normalize_power_law(1.5, 1_000_000).unwrap();
        let cf = CharacteristicFunction::new(&law);
        assert_eq!(cf.one_minus(0.0).norm(), 0.0);
        for t in [0.01, 0.5, 2.0] {
            let (direct, bar) = cf.eval_direct(t, 200_000);
            assert!((direct - cf.eval(t)).norm() <= bar + 1e-12);
            assert!((cf.eval(-t) - cf.eval(t).conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn geometric_inversion() {
        // K(n) = (1 − q) q^{n−1} gives u(n) = 1 − q for n ≥ 1
        let g = GeometricLaw::new(0.3).unwrap();
        let u = mass_by_inversion(&g, &InversionRule::for_range(50)).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-12);
        for x in &u[1..] {
            assert!((x - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn power_law_inversion_small() {
        for (alpha, theta) in [(1.5, 0.0), (2.5, 0.2)] {
            let base = normalize_power_law(alpha, 1_000_000).unwrap();
            let law = tilted_recurrent(&base, theta).unwrap();
            let c = inversion_vs_convolution(&law, 200).unwrap();
            assert!(c.max_abs_diff < 1e-10, "{alpha} {theta} {}", c.max_abs_diff);
        }
        let d = normalize_power_law(0.8, 1000).unwrap();
        assert!(mass_by_inversion(&d, &InversionRule::for_range(10)).is_err());
    }

    #[test]
    fn positivity() {
        let base = normalize_power_law(2.5, 1_000_000).unwrap();
        let grid: Vec<f64> = (0..=10).map(|k| 0.005 * k as f64).collect();
        let r = uniform_positivity_probe(&base, &grid, 2000).unwrap();
        assert!(r.positive && r.min_mass > 0.1);
    }

    #[test]
    fn cf_bounds_and_slopes() {
        let base = normalize_power_law(1.5, 1_000_000).unwrap();
        let grid = |lo: f64, hi: f64| -> Vec<f64> {
            (0..20).map(|k| lo * (hi / lo).powf(k as f64 / 19.0)).collect()
        };
        let thetas = [0.0, 0.01, 0.025, 0.05];
        let r = cf_estimate_probe(&base, &thetas, &grid(1e-3, 0.3)).unwrap();
        assert!(r.re_nonnegative && r.symmetric && r.modulus_bounded);
        assert!(r.im_constant < 2.5 && r.re_constant < 1.5);
        // small-t exponents at θ = 0; any θ > 0 has finite variance and Re → t²
        let r = cf_estimate_probe(&base, &[0.0, 0.05], &grid(1e-5, 1e-3)).unwrap();
        let (_, re, im) = r.slopes[0];
        assert!((re - 1.5).abs() < 0.01 && (im - 1.0).abs() < 0.01);
        assert!((r.slopes[1].1 - 2.0).abs() < 0.01);
    }
}
