use super::law::{InterArrival, PowerLawRenewal};
use crate::error::{domain, PinningError, Result};
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Transient,
    AlphaBelowOne,
    AlphaEqualOne,
    AlphaAboveOne,
    /// Law not of power-law type (tabulated, geometric, damped).
    Other,
}

/// u(0..=N) with u(n) = P(n ∈ τ).
#[derive(Debug, Clone)]
pub struct MassFunctionTable {
    pub values: Vec<f64>,
    pub masses: Vec<f64>,
    /// 1/μ, zero when μ = ∞.
    pub mean_inverse: f64,
    pub regime: Regime,
}

/// u(n) = Σ_{j=1}^{n} K(j) u(n−j), with u(0) = 1.
fn convolve(masses: &[f64], n_max: usize) -> Vec<f64> {
    let mut u = vec![0.0; n_max + 1];
    u[0] = 1.0;
    // reversed copy of u so the inner product runs over two forward slices
    let mut rev = vec![0.0; n_max + 1];
    rev[n_max] = 1.0;
    for n in 1..=n_max {
        let k = &masses[1..=n];
        let r = &rev[n_max + 1 - n..=n_max];
        let mut acc = [0.0f64; 8];
        let chunks = n / 8;
        for c in 0..chunks {
            let kk = &k[8 * c..8 * c + 8];
            let rr = &r[8 * c..8 * c + 8];
            for l in 0..8 {
                acc[l] += kk[l] * rr[l];
            }
        }
        let mut s = 0.0;
        for j in 8 * chunks..n {
            s += k[j] * r[j];
        }
        let total = (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + s;
        u[n] = total;
        rev[n_max - n] = total;
    }
    u
}

pub fn mass_function(law: &PowerLawRenewal, n_max: u64) -> Result<MassFunctionTable> {
    if n_max > law.horizon() {
        return Err(PinningError::Range(format!(
            "n_max {n_max} exceeds horizon {}",
            law.horizon()
        )));
    }
    let a = law.exponent();
    let regime = if law.defect() > 0.0 {
        Regime::Transient
    } else if a < 1.0 {
        Regime::AlphaBelowOne
    } else if a == 1.0 {
        Regime::AlphaEqualOne
    } else {
        Regime::AlphaAboveOne
    };
    let mut t = mass_function_of(law, n_max)?;
    t.regime = regime;
    Ok(t)
}

/// Mass function of an arbitrary law, no horizon check.
pub fn mass_function_of<L: InterArrival + ?Sized>(law: &L, n_max: u64) -> Result<MassFunctionTable> {
    let n = n_max as usize;
    let mut masses = vec![0.0; n + 1];
    for (j, m) in masses.iter_mut().enumerate().skip(1) {
        *m = law.mass(j as u64);
    }
    let values = convolve(&masses, n);
    let mean = law.mean();
    Ok(MassFunctionTable {
        values,
        masses,
        mean_inverse: if mean.is_finite() { 1.0 / mean } else { 0.0 },
        regime: if law.defect() > 0.0 { Regime::Transient } else { Regime::Other },
    })
}

impl MassFunctionTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn u(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    /// Largest relative residual of the convolution identity, recomputed with
    /// a plain sequential sum.
    pub fn convolution_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 1..self.values.len() {
            let s: f64 = (1..=n).map(|j| self.masses[j] * self.values[n - j]).sum();
            worst = worst.max((s - self.values[n]).abs() / self.values[n]);
        }
        worst
    }

    /// Predicted leading behaviour of u(n) for a power law of the given
    /// exponent and prefactor.
    pub fn asymptote(&self, n: f64, exponent: f64, prefactor: f64, defect: f64) -> f64 {
        match self.regime {
            Regime::Transient => prefactor * n.powf(-1.0 - exponent) * (1.0 - defect) / defect.powi(2),
            Regime::AlphaBelowOne => {
                let c_alpha = exponent * (PI * exponent).sin() / PI;
                c_alpha / (prefactor * n.powf(1.0 - exponent))
            }
            _ => self.mean_inverse,
        }
    }

    /// CSV with columns n,K,u; n = 0 has an empty K column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,K,u\n");
        for (n, u) in self.values.iter().enumerate() {
            if n == 0 {
                writeln!(out, "0,,{u}").unwrap();
            } else {
                writeln!(out, "{n},{},{u}", self.masses[n]).unwrap();
            }
        }
        out
    }
}

/// (1/μ̂)(u(lag) − 1/μ̂) from a precomputed table.
pub fn covariance_decay(table: &MassFunctionTable, lag: usize) -> Result<f64> {
    if table.mean_inverse == 0.0 {
        return domain("requires a finite mean");
    }
    if lag > table.n_max() {
        return Err(PinningError::Range(format!("lag {lag} beyond table")));
    }
    let m = table.mean_inverse;
    Ok(m * (table.u(lag) - m))
}
