use super::law::PowerLawRenewal;
use super::sampling::{rng_stream, InterArrivalSampler};
use crate::error::{domain, PinningError, Result};
use crate::special::{gamma_fn, hurwitz_tail, zeta, CompensatedSum};
use crate::stats::{mean_stderr, Estimate};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeriesVariant {
    /// Σ (1 − e^{−xk}) r_k
    OneMinusExp,
    /// Σ (e^{−xk} − 1 + xk) r_k
    ExpMinusOnePlus,
    /// Σ e^{−xk} r_k
    PlainExp,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesReport {
    pub sum: f64,
    pub constant: f64,
    pub predicted: f64,
    pub ratio: f64,
}

/// Σ_k k^{−λ} f(xk) next to the predicted leading term A x^{p}.
pub fn series_asymptotics(lambda: f64, variant: SeriesVariant, x: f64) -> Result<SeriesReport> {
    if !(lambda > 0.0) {
        return domain("sequence exponent must be positive");
    }
    if !(x > 0.0 && x <= 0.1) {
        return domain("x must lie in (0, 0.1]");
    }
    let (constant, power) = match variant {
        SeriesVariant::OneMinusExp if lambda > 2.0 => (zeta(lambda - 1.0), 1.0),
        SeriesVariant::OneMinusExp if lambda > 1.0 && lambda < 2.0 => {
            (-gamma_fn(1.0 - lambda), lambda - 1.0)
        }
        SeriesVariant::ExpMinusOnePlus if lambda > 3.0 => (0.5 * zeta(lambda - 2.0), 2.0),
        SeriesVariant::ExpMinusOnePlus if lambda > 2.0 && lambda < 3.0 => {
            (gamma_fn(1.0 - lambda), lambda - 1.0)
        }
        SeriesVariant::PlainExp if lambda < 1.0 => (gamma_fn(1.0 - lambda), lambda - 1.0),
        _ => {
            return Err(PinningError::Domain(format!(
                "no leading-order form for {variant:?} at lambda = {lambda}"
            )))
        }
    };
    let cutoff = (60.0 / x).ceil() as u64;
    let mut acc = CompensatedSum::new();
    for k in 1..=cutoff {
        let kf = k as f64;
        let y = x * kf;
        let f = match variant {
            SeriesVariant::OneMinusExp => -(-y).exp_m1(),
            SeriesVariant::ExpMinusOnePlus => (-y).exp_m1() + y,
            SeriesVariant::PlainExp => (-y).exp(),
        };
        acc.add(f * kf.powf(-lambda));
    }
    // beyond the cutoff e^{−xk} < e^{−60}
    match variant {
        SeriesVariant::OneMinusExp => acc.add(hurwitz_tail(lambda, cutoff + 1)),
        SeriesVariant::ExpMinusOnePlus => {
            acc.add(x * hurwitz_tail(lambda - 1.0, cutoff + 1));
            acc.add(-hurwitz_tail(lambda, cutoff + 1));
        }
        SeriesVariant::PlainExp => {}
    }
    let sum = acc.value();
    let predicted = constant * x.powf(power);
    Ok(SeriesReport { sum, constant, predicted, ratio: sum / predicted })
}

/// E(τ_1^{−r}) = Σ K(n) n^{−r}, exact.
pub fn first_negative_moment(law: &PowerLawRenewal, r: f64) -> f64 {
    law.prefactor() * zeta(1.0 + law.exponent() + r)
}

const BLOCK: usize = 256;

/// Monte Carlo E(τ_k^{−r}) with blocks of samples on independent streams.
pub fn negative_moment_tau_k(
    law: &PowerLawRenewal,
    k: u64,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if samples < 100 {
        return Err(PinningError::Refused("need at least 100 samples".into()));
    }
    if !(r > 0.0) || k == 0 {
        return domain("r must be positive and k ≥ 1");
    }
    let sampler = InterArrivalSampler::new(law)?;
    let blocks = samples.div_ceil(BLOCK);
    let values: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = rng_stream(seed, b as u64);
            let count = BLOCK.min(samples - b * BLOCK);
            let sampler = &sampler;
            (0..count)
                .map(move |_| {
                    let mut t: u64 = 0;
                    for _ in 0..k {
                        t = t.saturating_add(sampler.sample(&mut rng));
                    }
                    (t as f64).powf(-r)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(mean_stderr(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal_core::{normalize_power_law, InterArrival};
    use crate::special::GradedRule;

    #[test]
    fn one_minus_exp_fast_decay() {
        let r = series_asymptotics(3.0, SeriesVariant::OneMinusExp, 1e-4).unwrap();
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((r.constant - zeta2).abs() < 1e-14);
        assert!((r.ratio - 1.0).abs() < 0.02, "{}", r.ratio);
    }

    #[test]
    fn plain_exp_constant_is_gamma_integral() {
        let r = series_asymptotics(0.5, SeriesVariant::PlainExp, 1e-4).unwrap();
        // ∫_0^∞ e^{−t} t^{−1/2} dt by graded quadrature
        let rule = GradedRule::geometric(1e-30, 60.0, 1.5, 20);
        let q = rule.integrate(|t| (-t).exp() * t.powf(-0.5));
        assert!((q - r.constant).abs() < 1e-10, "{q} {}", r.constant);
        assert!((r.ratio - 1.0).abs() < 0.01);
    }

    #[test]
    fn middle_regimes() {
        let r = series_asymptotics(1.5, SeriesVariant::OneMinusExp, 1e-5).unwrap();
        assert!((r.ratio - 1.0).abs() < 0.02, "{}", r.ratio);
        let r = series_asymptotics(2.5, SeriesVariant::ExpMinusOnePlus, 1e-5).unwrap();
        assert!((r.ratio - 1.0).abs() < 0.02, "{}", r.ratio);
        let r = series_asymptotics(4.0, SeriesVariant::ExpMinusOnePlus, 1e-4).unwrap();
        assert!((r.ratio - 1.0).abs() < 0.02, "{}", r.ratio);
    }

    #[test]
    fn bad_inputs() {
        assert!(series_asymptotics(1.5, SeriesVariant::OneMinusExp, 0.0).is_err());
        assert!(series_asymptotics(0.0, SeriesVariant::PlainExp, 0.01).is_err());
    }

    #[test]
    fn first_moment_mc_matches_exact() {
        let law = normalize_power_law(1.5, 1 << 14).unwrap();
        let est = negative_moment_tau_k(&law, 1, 1.0, 20000, 5).unwrap();
        let exact = first_negative_moment(&law, 1.0);
        let direct: f64 = (1..200_000u64).map(|n| law.mass(n) / n as f64).sum();
        assert!((exact - direct).abs() < 1e-9);
        assert!(est.within(exact, 4.0), "{est:?} vs {exact}");
        assert!(negative_moment_tau_k(&law, 1, 1.0, 50, 5).is_err());
    }
}
