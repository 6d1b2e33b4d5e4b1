use crate::error::{domain, PinningError, Result};
use crate::special::{exp_m1_m_lin, hurwitz_tail, zeta, PolylogSeries};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

/// Inter-arrival distribution on {1, 2, ...} ∪ {∞}.
pub trait InterArrival: Send + Sync {
    /// K(n) for n ≥ 1.
    fn mass(&self, n: u64) -> f64;
    /// Σ_{m > n} K(m), finite part only.
    fn tail(&self, n: u64) -> f64;
    /// K(∞).
    fn defect(&self) -> f64;
    /// 1 − Σ_n K(n) e^{μ n} for Re μ ≤ 0.
    fn deficit(&self, mu: Complex64) -> Complex64;
    /// Σ_n n K(n) e^{−n x} for x ≥ 0; infinite when it diverges.
    fn damped_mean(&self, x: f64) -> f64;

    /// P(τ_1 > n), defect included.
    fn survival(&self, n: u64) -> f64 {
        self.tail(n) + self.defect()
    }

    fn is_recurrent(&self) -> bool {
        self.defect() == 0.0
    }

    fn mean(&self) -> f64 {
        if self.defect() > 0.0 {
            f64::INFINITY
        } else {
            self.damped_mean(0.0)
        }
    }
}

/// Reduce Im μ into (−π, π]; e^{μn} is 2π-periodic in Im μ.
pub(crate) fn reduce_phase(mu: Complex64) -> Complex64 {
    let mut im = mu.im.rem_euclid(2.0 * PI);
    if im > PI {
        im -= 2.0 * PI;
    }
    Complex64::new(mu.re, im)
}

/// 1 − e^{μ n} without cancellation at small |μ n|.
pub fn one_minus_exp(z: Complex64) -> Complex64 {
    let em1 = z.re.exp_m1();
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    let re = em1 * c - 2.0 * half * half;
    let im = z.re.exp() * s;
    -Complex64::new(re, im)
}

/// K(n) = e^{h} c n^{-(1+α)} with c = 1/ζ(1+α); K(∞) = 1 − e^{h}.
#[derive(Debug, Clone)]
pub struct PowerLawRenewal {
    exponent: f64,
    prefactor: f64,
    tilt: f64,
    horizon: u64,
    series: Arc<PolylogSeries>,
    mean_series: Arc<PolylogSeries>,
}

const SERIES_RADIUS: f64 = 4.0;

pub fn normalize_power_law(exponent: f64, horizon: u64) -> Result<PowerLawRenewal> {
    if !(exponent > 0.0) || !exponent.is_finite() {
        return domain(format!("exponent must be positive, got {exponent}"));
    }
    if horizon < 2 {
        return domain("horizon must be at least 2");
    }
    Ok(PowerLawRenewal {
        exponent,
        prefactor: 1.0 / zeta(1.0 + exponent),
        tilt: 0.0,
        horizon,
        series: Arc::new(PolylogSeries::new(1.0 + exponent)),
        mean_series: Arc::new(PolylogSeries::new(exponent)),
    })
}

pub fn tilt_law(law: &PowerLawRenewal, h: f64) -> Result<PowerLawRenewal> {
    if h > 0.0 || h.is_nan() {
        return domain(format!(
            "positive tilt {h} is not a law; use the free-energy solver"
        ));
    }
    let mut out = law.clone();
    out.tilt += h;
    Ok(out)
}

impl PowerLawRenewal {
    pub fn exponent(&self) -> f64 {
        self.exponent
    }
    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }
    pub fn tilt(&self) -> f64 {
        self.tilt
    }
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn with_horizon(&self, horizon: u64) -> Self {
        let mut out = self.clone();
        out.horizon = horizon.max(2);
        out
    }

    /// The same law with the tilt removed.
    pub fn untilted(&self) -> Self {
        let mut out = self.clone();
        out.tilt = 0.0;
        out
    }

    /// 1 − Σ c n^{-(1+α)} e^{μn} for the untilted law.
    pub fn base_deficit(&self, mu: Complex64) -> Complex64 {
        let mu = reduce_phase(mu);
        if mu.norm() <= SERIES_RADIUS {
            -(self.series.singular_part(mu) + self.series.regular_part(mu, 1)) * self.prefactor
        } else {
            let s = 1.0 + self.exponent;
            let mut acc = Complex64::new(0.0, 0.0);
            let mut n = 1u64;
            loop {
                let nf = n as f64;
                let term = (mu * nf).exp() * nf.powf(-s);
                acc += term;
                if term.norm() < 1e-20 {
                    break;
                }
                n += 1;
            }
            1.0 - acc * self.prefactor
        }
    }

    /// 1 − K(e^μ) + μ̂ μ for the untilted law, the part of the deficit
    /// beyond its linear term. Requires exponent > 1.
    pub fn base_deficit_nonlinear(&self, mu: Complex64) -> Complex64 {
        assert!(self.exponent > 1.0);
        let mean = self.prefactor * zeta(self.exponent);
        if mu.norm() <= SERIES_RADIUS && mu.im.abs() <= PI {
            -(self.series.singular_part(mu) + self.series.regular_part(mu, 2)) * self.prefactor
        } else {
            self.base_deficit(mu) + mu * mean
        }
    }

    /// Σ_n c n^{-α} e^{μ n}, i.e. the derivative of K(e^μ), untilted.
    pub fn base_mean_transform(&self, mu: Complex64) -> Complex64 {
        let mu = reduce_phase(mu);
        if mu.norm() <= SERIES_RADIUS {
            self.mean_series.eval(mu) * self.prefactor
        } else {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut n = 1u64;
            loop {
                let nf = n as f64;
                let term = (mu * nf).exp() * nf.powf(-self.exponent);
                acc += term;
                if term.norm() < 1e-20 {
                    break;
                }
                n += 1;
            }
            acc * self.prefactor
        }
    }

    pub fn log_mass(&self, n: u64) -> f64 {
        self.tilt + self.prefactor.ln() - (1.0 + self.exponent) * (n as f64).ln()
    }
}

impl InterArrival for PowerLawRenewal {
    fn mass(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        self.tilt.exp() * self.prefactor * (n as f64).powf(-(1.0 + self.exponent))
    }

    fn tail(&self, n: u64) -> f64 {
        self.tilt.exp() * self.prefactor * hurwitz_tail(1.0 + self.exponent, n + 1)
    }

    fn defect(&self) -> f64 {
        -self.tilt.exp_m1()
    }

    fn deficit(&self, mu: Complex64) -> Complex64 {
        let d0 = self.base_deficit(mu);
        if self.tilt == 0.0 {
            d0
        } else {
            -self.tilt.exp_m1() + d0 * self.tilt.exp()
        }
    }

    fn damped_mean(&self, x: f64) -> f64 {
        assert!(x >= 0.0);
        if x == 0.0 {
            return if self.exponent > 1.0 {
                self.tilt.exp() * self.prefactor * zeta(self.exponent)
            } else {
                f64::INFINITY
            };
        }
        self.tilt.exp() * self.base_mean_transform(Complex64::new(-x, 0.0)).re
    }
}

/// K(n) e^{w − n x} built on an untilted power law; `w` may be positive.
///
/// With `recurrent` set the caller asserts Σ K = 1 (a calibrated tilt such as
/// K̂_θ(n) = e^{θ − F̂(θ) n} K̂(n)) and the deficit carries no constant term.
#[derive(Debug, Clone)]
pub struct DampedLaw {
    base: PowerLawRenewal,
    log_weight: f64,
    damping: f64,
    recurrent: bool,
    cutoff: u64,
}

const DIRECT_DAMPING: f64 = 0.05;

impl DampedLaw {
    pub fn new(base: &PowerLawRenewal, log_weight: f64, damping: f64) -> Self {
        assert!(damping >= 0.0);
        let base = base.untilted();
        let cutoff = if damping > 0.0 { (45.0 / damping).ceil() as u64 + 64 } else { u64::MAX };
        Self { base, log_weight, damping, recurrent: false, cutoff }
    }

    /// The exponentially tilted recurrent law e^{θ − F n} K(n) where F solves
    /// Σ K(n) e^{−F n} = e^{−θ}.
    pub fn calibrated(base: &PowerLawRenewal, theta: f64, free_energy: f64) -> Self {
        let mut out = Self::new(base, theta, free_energy);
        out.recurrent = true;
        out
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }
    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    fn total_mass(&self) -> f64 {
        if self.recurrent {
            return 1.0;
        }
        let d = self.base.base_deficit(Complex64::new(-self.damping, 0.0)).re;
        self.log_weight.exp() * (1.0 - d)
    }

    fn direct(&self) -> bool {
        self.damping >= DIRECT_DAMPING
    }
}

impl InterArrival for DampedLaw {
    fn mass(&self, n: u64) -> f64 {
        (self.log_weight - self.damping * n as f64).exp() * self.base.mass(n)
    }

    fn tail(&self, n: u64) -> f64 {
        if self.damping == 0.0 {
            return self.log_weight.exp() * self.base.tail(n);
        }
        let mut acc = 0.0;
        let mut m = n + 1;
        loop {
            let t = self.mass(m);
            acc += t;
            if t < 1e-18 * acc.max(1e-300) || m > n + self.cutoff {
                break;
            }
            m += 1;
        }
        acc
    }

    fn defect(&self) -> f64 {
        if self.recurrent {
            0.0
        } else {
            (1.0 - self.total_mass()).max(0.0)
        }
    }

    fn deficit(&self, mu: Complex64) -> Complex64 {
        let mu = reduce_phase(mu);
        if self.direct() {
            let constant = if self.recurrent { 0.0 } else { 1.0 - self.total_mass() };
            let mut acc = Complex64::new(constant, 0.0);
            for n in 1..=self.cutoff {
                let k = self.mass(n);
                acc += one_minus_exp(mu * n as f64) * k;
                if k < 1e-22 {
                    break;
                }
            }
            acc
        } else {
            let shifted = mu - self.damping;
            let d0 = self.base.base_deficit(shifted);
            if self.recurrent {
                // e^{w}[D0(μ − x) − D0(−x)]
                if mu.norm() <= self.damping && self.damping <= SERIES_RADIUS / 2.0 {
                    let inc = self.base.series.increment(-self.damping, mu);
                    return -inc * self.base.prefactor * self.log_weight.exp();
                }
                let d00 = self.base.base_deficit(Complex64::new(-self.damping, 0.0));
                (d0 - d00) * self.log_weight.exp()
            } else {
                -self.log_weight.exp_m1() + d0 * self.log_weight.exp()
            }
        }
    }

    fn damped_mean(&self, x: f64) -> f64 {
        let y = x + self.damping;
        if y == 0.0 {
            return self.log_weight.exp() * self.base.damped_mean(0.0);
        }
        self.log_weight.exp() * self.base.damped_mean(y)
    }
}

/// Finitely supported law K(1..=len); the remaining mass sits at ∞.
#[derive(Debug, Clone)]
pub struct TabulatedLaw {
    masses: Vec<f64>,
    defect: f64,
}

impl TabulatedLaw {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.iter().any(|m| *m < 0.0 || !m.is_finite()) {
            return domain("masses must be finite and non-negative");
        }
        let total: f64 = masses.iter().sum();
        if total > 1.0 + 1e-12 {
            return domain(format!("total mass {total} exceeds 1"));
        }
        Ok(Self { masses, defect: (1.0 - total).max(0.0) })
    }

    /// K(1) = 1.
    pub fn degenerate() -> Self {
        Self { masses: vec![1.0], defect: 0.0 }
    }

    pub fn support_len(&self) -> u64 {
        self.masses.len() as u64
    }
}

impl InterArrival for TabulatedLaw {
    fn mass(&self, n: u64) -> f64 {
        self.masses.get(n as usize - 1).copied().unwrap_or(0.0)
    }

    fn tail(&self, n: u64) -> f64 {
        self.masses.iter().skip(n as usize).sum()
    }

    fn defect(&self) -> f64 {
        self.defect
    }

    fn deficit(&self, mu: Complex64) -> Complex64 {
        let mut acc = Complex64::new(self.defect, 0.0);
        for (i, k) in self.masses.iter().enumerate() {
            acc += one_minus_exp(mu * (i + 1) as f64) * *k;
        }
        acc
    }

    fn damped_mean(&self, x: f64) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, k)| (i + 1) as f64 * k * (-(i as f64 + 1.0) * x).exp())
            .sum()
    }
}

/// K(n) = (1 − q) q^{n−1}.
#[derive(Debug, Clone, Copy)]
pub struct GeometricLaw {
    pub q: f64,
}

impl GeometricLaw {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) {
            return Err(PinningError::Domain(format!("q must lie in [0,1), got {q}")));
        }
        Ok(Self { q })
    }
}

impl InterArrival for GeometricLaw {
    fn mass(&self, n: u64) -> f64 {
        (1.0 - self.q) * self.q.powi(n as i32 - 1)
    }

    fn tail(&self, n: u64) -> f64 {
        self.q.powi(n as i32)
    }

    fn defect(&self) -> f64 {
        0.0
    }

    fn deficit(&self, mu: Complex64) -> Complex64 {
        // 1 − (1−q)e^μ/(1 − q e^μ) = (1 − e^μ)/(1 − q e^μ)
        let one_m = one_minus_exp(mu);
        one_m / (1.0 - mu.exp() * self.q)
    }

    fn damped_mean(&self, x: f64) -> f64 {
        let z = (-x).exp();
        (1.0 - self.q) * z / (1.0 - self.q * z).powi(2)
    }
}

/// e^μ − 1 − μ, re-exported for spectral code.
pub fn exp_nonlinear(mu: Complex64) -> Complex64 {
    exp_m1_m_lin(mu)
}
