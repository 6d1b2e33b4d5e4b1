//! Homogeneous pinning: free energy, contact fraction, exponent fits and the
//! entropy rate of tilted renewals.

use crate::error::{domain, PinningError, Result};
use crate::renewal_core::{InterArrival, PowerLawRenewal};
use crate::special::{gamma_fn, zeta};
use crate::stats::loglog_slope;
use num_complex::Complex64;
use serde::Serialize;

/// 1 − Σ K(n) e^{−n x}, real.
fn laplace_deficit<L: InterArrival + ?Sized>(law: &L, x: f64) -> f64 {
    law.deficit(Complex64::new(-x, 0.0)).re
}

/// The root x ≥ 0 of Σ K(n) e^{−n x} = e^{−h}, or 0 when h is at or below
/// the critical value −log Σ K(n).
///
/// Bisection down to adjacent floating-point numbers; `tol` is only checked
/// afterwards (the returned point is as accurate as the deficit evaluation).
pub fn solve_free_energy<L: InterArrival + ?Sized>(law: &L, h: f64, tol: f64) -> f64 {
    assert!(tol > 0.0);
    let target = -(-h).exp_m1();
    // deficit at x = 0 is the defect K(∞)
    if target <= law.defect() {
        return 0.0;
    }
    let mut lo = 0.0f64;
    let mut hi = h.max(f64::MIN_POSITIVE);
    while laplace_deficit(law, hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if laplace_deficit(law, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    debug_assert!((laplace_deficit(law, x) - target).abs() <= tol.max(1e-12));
    x
}

/// F'(h) = e^{−h} / Σ n K(n) e^{−n F(h)} in the localized phase, 0 otherwise.
pub fn contact_fraction<L: InterArrival + ?Sized>(law: &L, h: f64) -> f64 {
    let f = solve_free_energy(law, h, 1e-14);
    if f == 0.0 {
        return 0.0;
    }
    (-h).exp() / law.damped_mean(f)
}

/// log Z^c_m, m = 0..=n, for Z^c_m = Σ_{j<m} Z^c_j w(m − j) with Z^c_0 = 1,
/// where `w` holds the one-step weights (index 0 unused).
pub fn pinned_log_partition(weights: &[f64], n: usize) -> Vec<f64> {
    assert!(weights.len() > n);
    // z_j e^{scale_j} is the true value; all entries share one scale after a rescale
    let mut z = vec![0.0f64; n + 1];
    let mut scale = vec![0.0f64; n + 1];
    z[0] = 1.0;
    let mut current = 0.0f64;
    for m in 1..=n {
        let mut s = 0.0;
        for j in 0..m {
            s += z[j] * (scale[j] - current).exp() * weights[m - j];
        }
        z[m] = s;
        scale[m] = current;
        if s > 1e100 || (s < 1e-100 && s > 0.0) {
            current += s.ln();
            for j in 0..=m {
                z[j] *= (scale[j] - current).exp();
                scale[j] = current;
            }
        }
    }
    z.iter().zip(&scale).map(|(v, s)| v.ln() + s).collect()
}

/// log of the homogeneous pinned partition function e^{h|τ∩[1,m]|} 1{m∈τ}.
pub fn homogeneous_pinned_log_partition<L: InterArrival + ?Sized>(law: &L, h: f64, n: usize) -> Vec<f64> {
    let eh = h.exp();
    let w: Vec<f64> = (0..=n).map(|k| if k == 0 { 0.0 } else { eh * law.mass(k as u64) }).collect();
    pinned_log_partition(&w, n)
}

#[derive(Debug, Clone, Serialize)]
pub struct FreeEnergyCurve {
    pub samples: Vec<(f64, f64)>,
    pub derivative_samples: Vec<(f64, f64)>,
}

pub fn free_energy_curve<L: InterArrival + ?Sized>(law: &L, hs: &[f64]) -> FreeEnergyCurve {
    let samples = hs.iter().map(|h| (*h, solve_free_energy(law, *h, 1e-14))).collect();
    let derivative_samples = hs.iter().map(|h| (*h, contact_fraction(law, *h))).collect();
    FreeEnergyCurve { samples, derivative_samples }
}

impl FreeEnergyCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,F,Fprime\n");
        for ((h, f), (_, d)) in self.samples.iter().zip(&self.derivative_samples) {
            out.push_str(&format!("{h},{f},{d}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares slope of log F against log h over samples in [lo, hi].
pub fn critical_exponent_fit(curve: &FreeEnergyCurve, h_range: (f64, f64)) -> Result<SlopeFit> {
    let (lo, hi) = h_range;
    if !(lo > 0.0 && lo < hi && hi <= 1.0) {
        return domain("fit range must satisfy 0 < lo < hi ≤ 1");
    }
    let pts: Vec<(f64, f64)> = curve
        .samples
        .iter()
        .copied()
        .filter(|(h, f)| *h >= lo && *h <= hi && *f > 0.0)
        .collect();
    if pts.len() < 8 {
        return Err(PinningError::Refused(format!(
            "need at least 8 points in range, have {}",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, stderr) = loglog_slope(&xs, &ys);
    Ok(SlopeFit { slope, stderr, points: pts.len() })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpansionReport {
    pub h: f64,
    pub excess: f64,
    pub leading: f64,
    pub ratio: f64,
}

/// F(h) − h/μ against its predicted leading order for exponent α > 1.
pub fn free_energy_expansion_check(law: &PowerLawRenewal, h: f64) -> Result<ExpansionReport> {
    let a = law.exponent();
    if a <= 1.0 {
        return domain("expansion requires exponent > 1");
    }
    if !(0.0..=0.05).contains(&h) {
        return domain("h must lie in [0, 0.05]");
    }
    if a == 2.0 {
        return Err(PinningError::Boundary("exponent 2 carries a log correction".into()));
    }
    let mu = law.mean();
    let c = law.prefactor();
    let leading = if a > 2.0 {
        let var = c * zeta(a - 1.0) - mu * mu;
        h * h * var / (2.0 * mu.powi(3))
    } else {
        // c_K ∫ (e^{−t} − 1 + t) t^{−1−α} dt = c_K Γ(−α)
        c * gamma_fn(-a) * h.powf(a) / mu.powf(a + 1.0)
    };
    if h == 0.0 {
        return Ok(ExpansionReport { h, excess: 0.0, leading: 0.0, ratio: f64::NAN });
    }
    let f = solve_free_energy(law, h, 1e-15);
    let excess = f - h / mu;
    Ok(ExpansionReport { h, excess, leading, ratio: excess / leading })
}

/// h_∞(θ) = θ F'(θ) − F(θ), with F' from a centred difference.
pub fn entropy_rate<L: InterArrival + ?Sized>(law: &L, theta: f64) -> Result<f64> {
    if theta < 0.0 || theta.is_nan() {
        return domain("θ must be non-negative");
    }
    if theta == 0.0 {
        return Ok(0.0);
    }
    let step = (theta / 100.0).max(1e-6);
    let fp = (solve_free_energy(law, theta + step, 1e-15)
        - solve_free_energy(law, theta - step, 1e-15))
        / (2.0 * step);
    let f = solve_free_energy(law, theta, 1e-15);
    Ok((theta * fp - f).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal_core::{normalize_power_law, tilt_law, GeometricLaw, TabulatedLaw};
    use crate::stats::log_grid;

    #[test]
    fn pinned_partition_small_cases() {
        let law = GeometricLaw::new(0.5).unwrap();
        let lz = homogeneous_pinned_log_partition(&law, 0.2, 3);
        // Z_1 = e^h/2, Z_2 = e^h/4 + e^{2h}/4
        assert!((lz[1] - (0.2f64.exp() / 2.0).ln()).abs() < 1e-15);
        let z2 = 0.2f64.exp() / 4.0 + 0.4f64.exp() / 4.0;
        assert!((lz[2] - z2.ln()).abs() < 1e-15);
    }

    #[test]
    fn pinned_partition_grows_at_free_energy_rate() {
        let law = normalize_power_law(1.5, 5000).unwrap();
        let h = 0.3;
        let lz = homogeneous_pinned_log_partition(&law, h, 4000);
        let slope = (lz[4000] - lz[2000]) / 2000.0;
        assert!((slope - solve_free_energy(&law, h, 1e-15)).abs() < 1e-6);
    }

    #[test]
    fn degenerate_law() {
        let law = TabulatedLaw::degenerate();
        for &h in &[-0.5, 0.0, 0.1, 1.7] {
            let f = solve_free_energy(&law, h, 1e-14);
            assert!((f - h.max(0.0)).abs() < 1e-15, "{h} {f}");
        }
    }

    #[test]
    fn geometric_golden() {
        let g = GeometricLaw::new(0.5).unwrap();
        let h: f64 = 0.3;
        let want = h + (1.0 - 0.5 + 0.5 * (-h).exp()).ln();
        let f = solve_free_energy(&g, h, 1e-14);
        assert!((f - want).abs() < 1e-15, "{f} {want}");
    }

    #[test]
    fn delocalized() {
        let law = normalize_power_law(0.5, 100).unwrap();
        assert_eq!(solve_free_energy(&law, -0.1, 1e-12), 0.0);
    }

    #[test]
    fn defective_law_threshold() {
        let law = tilt_law(&normalize_power_law(1.5, 100).unwrap(), -0.2).unwrap();
        // critical value is 0.2
        assert_eq!(solve_free_energy(&law, 0.19, 1e-12), 0.0);
        assert!(solve_free_energy(&law, 0.21, 1e-12) > 0.0);
        // shifting the tilt into h gives the same free energy
        let base = normalize_power_law(1.5, 100).unwrap();
        let a = solve_free_energy(&law, 0.5, 1e-14);
        let b = solve_free_energy(&base, 0.3, 1e-14);
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn equation_residual_against_direct_sum() {
        let law = normalize_power_law(0.7, 100).unwrap();
        let h = 0.05;
        let f = solve_free_energy(&law, h, 1e-14);
        let direct: f64 = (1..400_000u64).map(|n| law.mass(n) * (-(n as f64) * f).exp()).sum();
        assert!((direct - (-h).exp()).abs() < 1e-10);
    }

    #[test]
    fn exponent_fits() {
        for &(a, want) in &[(0.5, 2.0), (2.0, 1.0)] {
            let law = normalize_power_law(a, 100).unwrap();
            let curve = free_energy_curve(&law, &log_grid(1e-5, 1e-3, 12));
            let fit = critical_exponent_fit(&curve, (1e-5, 1e-3)).unwrap();
            assert!((fit.slope / want - 1.0).abs() < 0.05, "{a}: {}", fit.slope);
        }
    }

    #[test]
    fn too_few_points_refused() {
        let law = normalize_power_law(0.5, 100).unwrap();
        let curve = free_energy_curve(&law, &log_grid(1e-4, 1e-3, 5));
        assert!(matches!(
            critical_exponent_fit(&curve, (1e-4, 1e-3)),
            Err(PinningError::Refused(_))
        ));
    }

    #[test]
    fn expansion_ratios() {
        let law = normalize_power_law(3.0, 100).unwrap();
        let r = free_energy_expansion_check(&law, 1e-3).unwrap();
        assert!((r.ratio - 1.0).abs() < 0.1, "{r:?}");
        let law = normalize_power_law(1.5, 100).unwrap();
        let r = free_energy_expansion_check(&law, 1e-3).unwrap();
        assert!((r.ratio - 1.0).abs() < 0.1, "{r:?}");
        let z = free_energy_expansion_check(&law, 0.0).unwrap();
        assert_eq!((z.excess, z.leading), (0.0, 0.0));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let law = normalize_power_law(1.5, 100).unwrap();
        for &h in &[0.01, 0.1, 0.5] {
            let d = 1e-5;
            let fd = (solve_free_energy(&law, h + d, 1e-15) - solve_free_energy(&law, h - d, 1e-15))
                / (2.0 * d);
            assert!((fd - contact_fraction(&law, h)).abs() < 1e-4);
        }
    }

    #[test]
    fn entropy_rate_slopes() {
        assert_eq!(entropy_rate(&normalize_power_law(3.0, 10).unwrap(), 0.0).unwrap(), 0.0);
        for &(a, want) in &[(3.0, 2.0), (1.5, 1.5)] {
            let law = normalize_power_law(a, 100).unwrap();
            let ts = log_grid(1e-4, 1e-2, 10);
            let hs: Vec<f64> = ts.iter().map(|t| entropy_rate(&law, *t).unwrap()).collect();
            let (s, _) = loglog_slope(&ts, &hs);
            assert!((s / want - 1.0).abs() < 0.1, "{a}: {s}");
        }
    }
}
