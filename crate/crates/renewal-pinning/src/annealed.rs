//! Annealed model: the intersection sum I(h), β₀, the annealed critical curve,
//! the intersection renewal and the annealed free energy.
//!
//! I(h) = Σ_n u_h(n) û(n) is evaluated through Parseval on the unit circle,
//! with the 1/μ̂ drift of û split off analytically when μ̂ < ∞.

use crate::error::{domain, PinningError, Result};
use crate::homogeneous::{pinned_log_partition, solve_free_energy, SlopeFit};
use crate::renewal_core::{
    mass_function, mass_function_of, one_minus_exp, DampedLaw, InterArrival, PowerLawRenewal,
};
use crate::special::{exp_m1_m_lin, hurwitz_tail, log_weighted_tail, GradedRule};
use crate::stats::loglog_slope;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

const T_MIN: f64 = 1e-120;
const ORDERS: [usize; 2] = [16, 10];

struct NodeSet {
    t: Vec<f64>,
    w: Vec<f64>,
    b: Vec<Complex64>,
}

/// Value of a pair sum with the disagreement of two quadrature rules.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairValue {
    pub value: f64,
    pub error: f64,
}

/// Quadrature for Σ_{n≥1} a_n û(n) given the generating function of a.
pub struct PairSum {
    sets: [NodeSet; 2],
    probes: [(f64, Complex64); 2],
    mean_inv: f64,
}

/// Fourier transform of û(n) − 1/μ̂ at e^{it}.
fn disorder_transform(disorder: &PowerLawRenewal, t: f64) -> Complex64 {
    let mu = Complex64::new(0.0, t);
    if disorder.exponent() > 1.0 {
        let m = disorder.mean();
        let d = disorder.base_deficit(mu);
        let num = -exp_m1_m_lin(mu) * m - disorder.base_deficit_nonlinear(mu);
        // divide in two steps: |d (1 − e^{it})|² underflows at the smallest nodes
        num / one_minus_exp(mu) / (d * m)
    } else {
        1.0 / disorder.base_deficit(mu)
    }
}

fn check_disorder(disorder: &PowerLawRenewal) -> Result<()> {
    if disorder.tilt() != 0.0 {
        return domain("disorder renewal must be recurrent");
    }
    if disorder.exponent() == 1.0 {
        return Err(PinningError::Unsupported(
            "disorder exponent 1: logarithmic singularity in the pair integral".into(),
        ));
    }
    Ok(())
}

impl PairSum {
    pub fn new(disorder: &PowerLawRenewal) -> Result<Self> {
        check_disorder(disorder)?;
        let sets = ORDERS.map(|order| {
            let rule = GradedRule::geometric(T_MIN, PI, 2.0, order);
            let b = rule.nodes.iter().map(|t| disorder_transform(disorder, *t)).collect();
            NodeSet { t: rule.nodes, w: rule.weights, b }
        });
        let probes = [T_MIN, 2.0 * T_MIN].map(|t| (t, disorder_transform(disorder, t)));
        let m = disorder.mean();
        Ok(Self { sets, probes, mean_inv: if m.is_finite() { 1.0 / m } else { 0.0 } })
    }

    pub fn nodes(&self, set: usize) -> &[f64] {
        &self.sets[set].t
    }

    pub fn probe_points(&self) -> [f64; 2] {
        [self.probes[0].0, self.probes[1].0]
    }

    /// `a_node(s, i)` is A(e^{it}) at node i of set s, `a_probe(k)` at the
    /// k-th probe point near 0, and `a_total` = Σ a_n.
    pub fn sum_with<N, P>(&self, a_node: N, a_probe: P, a_total: f64) -> Result<PairValue>
    where
        N: Fn(usize, usize) -> Complex64,
        P: Fn(usize) -> Complex64,
    {
        // integrand near 0 behaves like a power; integrate it analytically below T_MIN
        let g0 = (a_probe(0).conj() * self.probes[0].1).re;
        let g1 = (a_probe(1).conj() * self.probes[1].1).re;
        let tail = if g0 == 0.0 {
            0.0
        } else {
            let p = (g1 / g0).ln() / 2f64.ln();
            if !(g1 / g0 > 0.0) || !(p > -1.0) {
                return Err(PinningError::Horizon(
                    format!("pair integrand not integrable at the origin ({g0:e}, {g1:e})"),
                ));
            }
            g0 * T_MIN / (1.0 + p)
        };
        let drift = if self.mean_inv > 0.0 { self.mean_inv * a_total } else { 0.0 };
        let mut vals = [0.0; 2];
        for (s, set) in self.sets.iter().enumerate() {
            let mut acc = crate::special::CompensatedSum::new();
            for i in 0..set.t.len() {
                acc.add(set.w[i] * (a_node(s, i).conj() * set.b[i]).re);
            }
            vals[s] = drift + (acc.value() + tail) / PI;
        }
        let value = vals[0];
        if !value.is_finite() {
            return Err(PinningError::Horizon("pair sum overflowed".into()));
        }
        Ok(PairValue { value, error: (vals[0] - vals[1]).abs() })
    }

    /// Σ_{n≥1} a_n û(n) where a is the mass function of `law` with the n = 0
    /// term removed; requires `law` to be defective.
    pub fn renewal_sum<L: InterArrival + ?Sized>(&self, law: &L) -> Result<PairValue> {
        let d0 = law.deficit(Complex64::new(0.0, 0.0)).re;
        if !(d0 > 0.0) {
            return Err(PinningError::Domain("law must be defective".into()));
        }
        let a = |t: f64| {
            let d = law.deficit(Complex64::new(0.0, t));
            (1.0 - d) / d
        };
        let vals: [Vec<Complex64>; 2] = [0, 1].map(|s| self.sets[s].t.iter().map(|t| a(*t)).collect());
        let pr = self.probe_points().map(a);
        self.sum_with(|s, i| vals[s][i], |k| pr[k], (1.0 - d0) / d0)
    }
}

/// Pair sums for a fixed (base, disorder) with the base transform cached.
pub struct AnnealedSystem {
    base: PowerLawRenewal,
    disorder: PowerLawRenewal,
    pair: PairSum,
    d0: [Vec<Complex64>; 2],
    d0_probe: [Complex64; 2],
}

/// Σ u(n)û(n) at h = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum IAtZero {
    Finite(f64),
    Divergent,
    Boundary,
}

impl AnnealedSystem {
    pub fn new(base: &PowerLawRenewal, disorder: &PowerLawRenewal) -> Result<Self> {
        let pair = PairSum::new(disorder)?;
        let base = base.untilted();
        let d0 = [0, 1].map(|s| {
            pair.nodes(s).iter().map(|t| base.base_deficit(Complex64::new(0.0, *t))).collect()
        });
        let d0_probe = pair.probe_points().map(|t| base.base_deficit(Complex64::new(0.0, t)));
        Ok(Self { base, disorder: disorder.clone(), pair, d0, d0_probe })
    }

    pub fn base(&self) -> &PowerLawRenewal {
        &self.base
    }

    pub fn disorder(&self) -> &PowerLawRenewal {
        &self.disorder
    }

    /// I(h) − 1 for h < 0.
    pub fn excess(&self, h: f64) -> Result<PairValue> {
        if !(h < 0.0) {
            return domain("excess requires h < 0");
        }
        let eh = h.exp();
        let defect = -h.exp_m1();
        // U_h − 1 = e^h K(z) / (1 − e^h K(z))
        let a = |d0: Complex64| (1.0 - d0) * eh / (d0 * eh + defect);
        self.pair.sum_with(
            |s, i| a(self.d0[s][i]),
            |k| a(self.d0_probe[k]),
            eh / defect,
        )
    }

    pub fn i_value(&self, h: f64, rel_tol: f64) -> Result<f64> {
        let j = self.excess(h)?;
        if j.error > rel_tol * (1.0 + j.value) {
            return Err(PinningError::Horizon(format!(
                "quadrature disagreement {:e} above tolerance at h = {h}",
                j.error
            )));
        }
        Ok(1.0 + j.value)
    }

    pub fn i_at_zero(&self) -> IAtZero {
        let s = self.base.exponent().min(1.0) + self.disorder.exponent().min(1.0);
        if s > 1.0 {
            return IAtZero::Divergent;
        }
        if s == 1.0 {
            return IAtZero::Boundary;
        }
        let a = |d0: Complex64| (1.0 - d0) / d0;
        match self.pair.sum_with(|s, i| a(self.d0[s][i]), |k| a(self.d0_probe[k]), f64::INFINITY) {
            Ok(v) => IAtZero::Finite(1.0 + v.value),
            Err(_) => IAtZero::Divergent,
        }
    }

    pub fn beta_zero(&self) -> Result<f64> {
        match self.i_at_zero() {
            IAtZero::Finite(i) => Ok((1.0 / (i - 1.0)).ln_1p()),
            IAtZero::Divergent => Ok(0.0),
            IAtZero::Boundary => Err(PinningError::Boundary(
                "α + α̂ = 1 is excluded".into(),
            )),
        }
    }

    /// h_c^a(β): the h < 0 with I(h) = 1/(1 − e^{−β}), or 0 when β ≤ β₀.
    pub fn critical_point(&self, beta: f64, tol: f64) -> Result<f64> {
        if !(beta >= 0.0) {
            return domain("β must be non-negative");
        }
        if beta == 0.0 || beta <= self.beta_zero()? {
            return Ok(0.0);
        }
        let target = 1.0 / beta.exp_m1();
        let j = |s: f64| -> Result<f64> { Ok(self.excess(-s.exp())?.value) };
        // J decreases in s = ln|h|
        let mut hi = 0.0;
        while j(hi)? >= target {
            hi += 1.0;
            if hi > 8.0 {
                return Err(PinningError::Horizon("no bracket for large |h|".into()));
            }
        }
        let mut lo = hi - 1.0;
        while j(lo)? <= target {
            lo -= 1.0;
            if lo < -690.0 {
                return Err(PinningError::Horizon(
                    "critical point closer to 0 than 1e-300".into(),
                ));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if j(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = -(0.5 * (lo + hi)).exp();
        let i = 1.0 + j(h.abs().ln())?;
        let t = 1.0 + target;
        if (i - t).abs() > tol.max(1e-12) * i {
            return Err(PinningError::Horizon(format!(
                "critical point residual {:e} above tolerance",
                (i - t).abs() / i
            )));
        }
        Ok(h)
    }

    /// Σ u_{h,x}(n) û(n) for the damped law K(n) e^{h − n x}, n = 0 included.
    pub fn damped_sum(&self, h: f64, x: f64) -> Result<PairValue> {
        let law = DampedLaw::new(&self.base, h, x);
        let v = self.pair.renewal_sum(&law)?;
        Ok(PairValue { value: 1.0 + v.value, error: v.error })
    }

    /// F^a(β, h) as the x solving Σ u_h(n) û(n) e^{−n x} = 1/(1 − e^{−β}).
    pub fn free_energy(&self, beta: f64, h: f64) -> Result<f64> {
        if !(beta >= 0.0) {
            return domain("β must be non-negative");
        }
        if beta == 0.0 {
            return Ok(solve_free_energy(&self.base, h, 1e-15));
        }
        let target = 1.0 + 1.0 / beta.exp_m1();
        let g = |x: f64| -> Result<f64> {
            match self.damped_sum(h, x) {
                Ok(v) => Ok(v.value),
                Err(PinningError::Domain(_)) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            }
        };
        let floor = solve_free_energy(&self.base, h, 1e-15);
        if floor == 0.0 && h < 0.0 && 1.0 + self.excess(h)?.value <= target {
            return Ok(0.0);
        }
        let mut lo = floor;
        let mut hi = floor.max(1e-3);
        while g(hi)? > target {
            lo = hi;
            hi *= 2.0;
            if hi > 1e3 {
                return Err(PinningError::Horizon("no bracket for the annealed root".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

pub fn compute_i(base: &PowerLawRenewal, disorder: &PowerLawRenewal, h: f64, rel_tol: f64) -> Result<f64> {
    if !(h < 0.0) {
        return domain("h must be negative; use compute_i_at_zero");
    }
    AnnealedSystem::new(base, disorder)?.i_value(h + base.tilt(), rel_tol)
}

pub fn compute_i_at_zero(base: &PowerLawRenewal, disorder: &PowerLawRenewal) -> Result<IAtZero> {
    Ok(AnnealedSystem::new(base, disorder)?.i_at_zero())
}

/// p = 1 − 1/I; the infinite value maps to 1.
pub fn p_of_h(i: f64) -> Result<f64> {
    if !(i >= 1.0) {
        return domain(format!("I must be at least 1, got {i}"));
    }
    if i.is_infinite() {
        return Ok(1.0);
    }
    Ok(1.0 - 1.0 / i)
}

pub fn beta_zero(base: &PowerLawRenewal, disorder: &PowerLawRenewal) -> Result<f64> {
    AnnealedSystem::new(base, disorder)?.beta_zero()
}

pub fn annealed_critical_point(
    base: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    tol: f64,
) -> Result<f64> {
    AnnealedSystem::new(base, disorder)?.critical_point(beta, tol)
}

pub fn annealed_free_energy(
    base: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    h: f64,
) -> Result<f64> {
    AnnealedSystem::new(base, disorder)?.free_energy(beta, h + base.tilt())
}

/// Truncated n-sum for I(h) with the remainder handled through the exact
/// total Σ u_h = 1/(1 − e^h).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DirectEstimate {
    pub value: f64,
    pub bound: f64,
}

fn direct_from_tables(h: f64, u: &[f64], uh: &[f64], mean_inv: f64) -> DirectEstimate {
    let n = u.len() - 1;
    let mut s = 0.0;
    let mut su = 0.0;
    for k in 0..=n {
        s += u[k] * uh[k];
        su += u[k];
    }
    let rest = (1.0 / -h.exp_m1() - su).max(0.0);
    // û on the tail lies between its values around N and its limit
    let window = &uh[n / 2..=n];
    let (lo, hi) = window.iter().fold((mean_inv, mean_inv), |(a, b), x| (a.min(*x), b.max(*x)));
    let edge = uh[n] - mean_inv;
    DirectEstimate { value: s + rest * (mean_inv + edge), bound: rest * (hi - lo) }
}

pub fn compute_i_direct(
    base: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    h: f64,
    n_max: u64,
) -> Result<DirectEstimate> {
    let h = h + base.tilt();
    if !(h < 0.0) {
        return domain("h must be negative");
    }
    let law = DampedLaw::new(base, h, 0.0);
    let u = mass_function_of(&law, n_max)?;
    let uh = mass_function(&disorder.with_horizon(n_max.max(disorder.horizon())), n_max)?;
    Ok(direct_from_tables(h, &u.values, &uh.values, uh.mean_inverse))
}

/// f(n) = W(n) − Σ_{0<m<n} f(m) W(n − m) with W(n) = u_h(n) û(n).
pub fn first_passage(w: &[f64]) -> Vec<f64> {
    let n = w.len() - 1;
    let mut f = vec![0.0; n + 1];
    for k in 1..=n {
        let mut s = w[k];
        for m in 1..k {
            s -= f[m] * w[k - m];
        }
        f[k] = s;
    }
    f
}

/// The intersection renewal τ ∩ τ̂ under the tilted pair measure, rewarded by e^β.
#[derive(Debug, Clone, Serialize)]
pub struct IntersectionLaw {
    pub base_exponent: f64,
    pub disorder_exponent: f64,
    pub h: f64,
    pub beta_tilt: f64,
    /// K̃_β(n) for n = 0..=N (index 0 unused).
    pub masses: Vec<f64>,
    /// Σ_n K̃_β(n) with the tail beyond N included.
    pub total_mass: f64,
    pub total_bound: f64,
}

pub fn build_intersection_law(
    base_tilted: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    n_max: u64,
    tol: f64,
) -> Result<IntersectionLaw> {
    let h = base_tilted.tilt();
    if !(h < 0.0) {
        return domain("base must be tilted by h < 0");
    }
    let u = mass_function_of(base_tilted, n_max)?;
    let uh = mass_function(&disorder.with_horizon(n_max.max(disorder.horizon())), n_max)?;
    let w: Vec<f64> = u.values.iter().zip(&uh.values).map(|(a, b)| a * b).collect();
    let mut masses = first_passage(&w);
    let eb = beta.exp();
    for m in masses.iter_mut() {
        *m *= eb;
    }
    let est = direct_from_tables(h, &u.values, &uh.values, uh.mean_inverse);
    let total_mass = eb * (1.0 - 1.0 / est.value);
    let total_bound = eb * est.bound / (est.value * est.value);
    if (total_mass - 1.0).abs() > tol + total_bound {
        return Err(PinningError::Horizon(format!(
            "intersection law mass {total_mass} drifts from 1 by more than {tol}"
        )));
    }
    Ok(IntersectionLaw {
        base_exponent: base_tilted.exponent(),
        disorder_exponent: disorder.exponent(),
        h,
        beta_tilt: beta,
        masses,
        total_mass,
        total_bound,
    })
}

/// log Z^{a,c}_n for n = 0..=n_max, pinned on both renewals, by the pair DP.
pub fn annealed_pinned_log_partition(
    base: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    h: f64,
    n_max: u64,
) -> Result<Vec<f64>> {
    let law = DampedLaw::new(base, h + base.tilt(), 0.0);
    let u = mass_function_of(&law, n_max)?;
    let uh = mass_function(&disorder.with_horizon(n_max.max(disorder.horizon())), n_max)?;
    let w: Vec<f64> = u.values.iter().zip(&uh.values).map(|(a, b)| a * b).collect();
    let mut f = first_passage(&w);
    let eb = beta.exp();
    for x in f.iter_mut() {
        *x *= eb;
    }
    Ok(pinned_log_partition(&f, n_max as usize))
}

/// log Ê(Z^c_n): τ pinned at n, disorder free. Splits at the last common
/// point m: Ê Z^c_n = Σ_m Z^{a,c}_m G(n − m), with G(j) the weight of τ
/// reaching j without meeting τ̂ on (0, j].
pub fn annealed_tau_pinned_log_partition(
    base: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    h: f64,
    n: u64,
) -> Result<f64> {
    let lz = annealed_pinned_log_partition(base, disorder, beta, h, n)?;
    // damp every path by e^{−x·length} so the τ tables stay bounded
    let x = solve_free_energy(&base.untilted(), h + base.tilt(), 1e-15).max(0.0);
    let law = DampedLaw::new(base, h + base.tilt(), x);
    let u = mass_function_of(&law, n)?.values;
    let uh = mass_function(&disorder.with_horizon(n.max(disorder.horizon())), n)?.values;
    let w: Vec<f64> = u.iter().zip(&uh).map(|(a, b)| a * b).collect();
    let f = first_passage(&w);
    let n = n as usize;
    let g = |j: usize| u[j] - (1..=j).map(|m| f[m] * u[j - m]).sum::<f64>();
    let terms: Vec<f64> = (0..=n)
        .filter_map(|m| {
            let gj = g(n - m);
            (gj > 0.0).then(|| lz[m] - x * m as f64 + gj.ln())
        })
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln() + x * n as f64)
}

/// Slope of log Z^{a,c} between n/2 and n.
pub fn annealed_dp_slope(
    base: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    h: f64,
    n: u64,
) -> Result<f64> {
    let lz = annealed_pinned_log_partition(base, disorder, beta, h, n)?;
    let half = (n / 2) as usize;
    Ok((lz[n as usize] - lz[half]) / (n as f64 - half as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScalingRegime {
    /// μ̂ < ∞: fit −h_c^a(β) − β/μ̂ against β.
    FiniteMean,
    /// μ̂ = ∞ and α + α̂ > 1: fit −h_c^a(β) against β.
    InfiniteMean,
    /// α + α̂ < 1: fit −h_c^a(β) against β − β₀.
    PositiveBetaZero,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GammaFit {
    pub regime: ScalingRegime,
    pub fit: SlopeFit,
    pub beta_zero: f64,
}

pub fn scaling_regime(base: &PowerLawRenewal, disorder: &PowerLawRenewal) -> Result<ScalingRegime> {
    let (a, ah) = (base.exponent(), disorder.exponent());
    let refuse = || Err(PinningError::Refused("log-corrected regime".into()));
    if ah > 1.0 {
        if (ah - (1.0 + a.min(1.0))).abs() < 1e-12 {
            return refuse();
        }
        Ok(ScalingRegime::FiniteMean)
    } else if ah == 1.0 {
        refuse()
    } else if a + ah > 1.0 {
        Ok(ScalingRegime::InfiniteMean)
    } else if a + ah == 1.0 {
        Err(PinningError::Boundary("α + α̂ = 1 is excluded".into()))
    } else if (1.0 - ah - 2.0 * a).abs() < 1e-12 {
        refuse()
    } else {
        Ok(ScalingRegime::PositiveBetaZero)
    }
}

/// γ_ann from log–log fits of the critical curve near β₀; `grid` holds β
/// (or β − β₀ when β₀ > 0) in [1e−4, 1e−2].
pub fn gamma_ann_scaling_fit(
    base: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    grid: &[f64],
) -> Result<GammaFit> {
    let regime = scaling_regime(base, disorder)?;
    if grid.len() < 8 {
        return Err(PinningError::Refused("need at least 8 grid points".into()));
    }
    if grid.iter().any(|b| !(1e-4 * (1.0 - 1e-9)..=1e-2 * (1.0 + 1e-9)).contains(b)) {
        return domain("grid must lie in [1e-4, 1e-2]");
    }
    let sys = AnnealedSystem::new(base, disorder)?;
    let b0 = sys.beta_zero()?;
    let shift = if regime == ScalingRegime::PositiveBetaZero { b0 } else { 0.0 };
    let drift = if regime == ScalingRegime::FiniteMean { 1.0 / disorder.mean() } else { 0.0 };
    let ys: Vec<f64> = grid
        .par_iter()
        .map(|x| {
            let beta = shift + x;
            let h = sys.critical_point(beta, 1e-12)?;
            Ok(-h - beta * drift)
        })
        .collect::<Result<_>>()?;
    if ys.iter().any(|y| !(*y > 0.0)) {
        return Err(PinningError::Horizon("non-positive critical-curve excess".into()));
    }
    let (slope, stderr) = loglog_slope(grid, &ys);
    Ok(GammaFit { regime, fit: SlopeFit { slope, stderr, points: grid.len() }, beta_zero: b0 })
}

/// ν_a from F^a(β, h_c^a + δ) against δ.
pub fn nu_a_fit(
    base: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    deltas: &[f64],
) -> Result<SlopeFit> {
    if deltas.len() < 8 {
        return Err(PinningError::Refused("need at least 8 points".into()));
    }
    let sys = AnnealedSystem::new(base, disorder)?;
    let hc = sys.critical_point(beta, 1e-12)?;
    let fs: Vec<f64> = deltas
        .par_iter()
        .map(|d| sys.free_energy(beta, hc + d))
        .collect::<Result<_>>()?;
    if fs.iter().any(|f| !(*f > 0.0)) {
        return Err(PinningError::Horizon("free energy vanished on the fit grid".into()));
    }
    let (slope, stderr) = loglog_slope(deltas, &fs);
    Ok(SlopeFit { slope, stderr, points: deltas.len() })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RelevanceReport {
    /// P × P̂(τ_1 ∈ τ̂) = Σ K(n) û(n).
    pub hit_probability: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// −log p₁ against −(1/p₁) Σ û(n) K(n) log K(n), with p₁ = Σ K(n) û(n).
pub fn large_beta_relevance_check(
    base: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
) -> Result<RelevanceReport> {
    let m = disorder.mean();
    if !m.is_finite() {
        return domain("disorder mean must be finite");
    }
    let n = disorder.horizon().min(20_000);
    let uh = mass_function(&disorder.with_horizon(n), n)?;
    let base = base.untilted();
    let (a, c) = (base.exponent(), base.prefactor());
    let lc = c.ln();
    let mut p = crate::special::CompensatedSum::new();
    let mut q = crate::special::CompensatedSum::new();
    for k in 1..=n as usize {
        let kk = base.mass(k as u64);
        if kk == 0.0 {
            continue;
        }
        p.add(kk * uh.u(k));
        q.add(uh.u(k) * kk * base.log_mass(k as u64));
    }
    // û ≈ 1/μ̂ beyond the table
    let q0 = n + 1;
    let tail_k = c * hurwitz_tail(1.0 + a, q0);
    let tail_klogk = lc * tail_k - (1.0 + a) * c * log_weighted_tail(1.0 + a, q0);
    p.add(tail_k / m);
    q.add(tail_klogk / m);
    let p1 = p.value();
    let lhs = -p1.ln();
    let rhs = -q.value() / p1;
    Ok(RelevanceReport { hit_probability: p1, lhs, rhs, satisfied: lhs > rhs })
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnealedCurve {
    pub beta_grid: Vec<f64>,
    pub hca: Vec<f64>,
    pub beta0: f64,
    pub gamma_ann_fit: Option<f64>,
    pub nu_a_fit: Option<f64>,
}

pub fn annealed_curve(
    base: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta_grid: &[f64],
) -> Result<AnnealedCurve> {
    let sys = AnnealedSystem::new(base, disorder)?;
    let beta0 = sys.beta_zero()?;
    let hca = beta_grid
        .par_iter()
        .map(|b| sys.critical_point(*b, 1e-10))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnnealedCurve { beta_grid: beta_grid.to_vec(), hca, beta0, gamma_ann_fit: None, nu_a_fit: None })
}

impl AnnealedCurve {
    /// Three-point concavity defect, positive when violated.
    pub fn concavity_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 1..self.beta_grid.len().saturating_sub(1) {
            let (b0, b1, b2) = (self.beta_grid[i - 1], self.beta_grid[i], self.beta_grid[i + 1]);
            let lam = (b2 - b1) / (b2 - b0);
            let chord = lam * self.hca[i - 1] + (1.0 - lam) * self.hca[i + 1];
            worst = worst.max(chord - self.hca[i]);
        }
        worst
    }

    pub fn to_csv(&self, regime: &str) -> String {
        let mut out = String::from("beta,h_c_a,beta0,regime\n");
        for (b, h) in self.beta_grid.iter().zip(&self.hca) {
            out.push_str(&format!("{b},{h},{},{regime}\n", self.beta0));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal_core::{normalize_power_law, tilt_law};

    fn laws(a: f64, ah: f64) -> (PowerLawRenewal, PowerLawRenewal) {
        (normalize_power_law(a, 4000).unwrap(), normalize_power_law(ah, 4000).unwrap())
    }

    #[test]
    fn parseval_matches_direct_sum() {
        for &(a, ah, h) in &[(1.5, 2.5, -0.3), (0.6, 2.5, -0.5), (0.5, 0.5, -1.0), (1.2, 1.3, -0.7)] {
            let (b, d) = laws(a, ah);
            let i = compute_i(&b, &d, h, 1e-10).unwrap();
            let dir = compute_i_direct(&b, &d, h, 4000).unwrap();
            assert!(
                (i - dir.value).abs() <= dir.bound + 1e-9,
                "{a} {ah} {h}: {i} vs {dir:?}"
            );
        }
    }

    #[test]
    fn far_tilt_leaves_one() {
        let (b, d) = laws(0.3, 0.3);
        let i = compute_i(&b, &d, -50.0, 1e-10).unwrap();
        assert!((1.0..=1.0 + 1e-20).contains(&i));
    }

    #[test]
    fn increasing_in_h() {
        let (b, d) = laws(0.7, 1.5);
        let v: Vec<f64> = [-1.0, -0.5, -0.1].iter().map(|h| compute_i(&b, &d, *h, 1e-10).unwrap()).collect();
        assert!(v[0] < v[1] && v[1] < v[2]);
    }

    #[test]
    fn at_zero_classification() {
        let (b, d) = laws(0.3, 0.3);
        assert!(matches!(compute_i_at_zero(&b, &d).unwrap(), IAtZero::Finite(_)));
        let (b, d) = laws(0.7, 0.7);
        assert_eq!(compute_i_at_zero(&b, &d).unwrap(), IAtZero::Divergent);
        let (b, d) = laws(0.5, 0.5);
        assert_eq!(compute_i_at_zero(&b, &d).unwrap(), IAtZero::Boundary);
        assert!(matches!(beta_zero(&b, &d), Err(PinningError::Boundary(_))));
    }

    #[test]
    fn finite_at_zero_is_limit_from_below() {
        let (b, d) = laws(0.3, 0.3);
        let IAtZero::Finite(i0) = compute_i_at_zero(&b, &d).unwrap() else { panic!() };
        let near = compute_i(&b, &d, -1e-12, 1e-10).unwrap();
        assert!(near < i0 && (i0 - near) / i0 < 1e-3, "{near} {i0}");
    }

    #[test]
    fn p_values() {
        assert_eq!(p_of_h(1.0).unwrap(), 0.0);
        assert_eq!(p_of_h(2.0).unwrap(), 0.5);
        assert_eq!(p_of_h(f64::INFINITY).unwrap(), 1.0);
        assert!(p_of_h(0.5).is_err());
    }

    #[test]
    fn beta_zero_values() {
        let (b, d) = laws(0.7, 0.7);
        assert_eq!(beta_zero(&b, &d).unwrap(), 0.0);
        let (b, d) = laws(0.3, 0.3);
        let b0 = beta_zero(&b, &d).unwrap();
        assert!(b0 > 0.0);
        let IAtZero::Finite(i0) = compute_i_at_zero(&b, &d).unwrap() else { panic!() };
        assert!((b0 + (1.0 - 1.0 / i0).ln()).abs() < 1e-10);
    }

    #[test]
    fn critical_point_round_trip_and_jensen() {
        let (b, d) = laws(0.6, 2.5);
        let sys = AnnealedSystem::new(&b, &d).unwrap();
        assert_eq!(sys.critical_point(0.0, 1e-10).unwrap(), 0.0);
        for &beta in &[0.01, 0.1, 0.5, 2.0] {
            let h = sys.critical_point(beta, 1e-10).unwrap();
            let i = sys.i_value(h, 1e-10).unwrap();
            assert!((i * (1.0 - (-beta).exp()) - 1.0).abs() < 1e-10);
            assert!(h <= -beta / d.mean());
        }
    }

    #[test]
    fn intersection_law_normalized() {
        let (b, d) = laws(0.6, 2.5);
        let beta = 0.5;
        let hc = annealed_critical_point(&b, &d, beta, 1e-12).unwrap();
        let tilted = tilt_law(&b, hc).unwrap();
        let law = build_intersection_law(&tilted, &d, beta, 2000, 1e-6).unwrap();
        assert!((law.total_mass - 1.0).abs() < 1e-6, "{law:?}");
        let k1 = beta.exp() * hc.exp() * b.mass(1) * d.mass(1);
        assert!((law.masses[1] - k1).abs() < 1e-15);
        assert!(law.masses[1..].iter().all(|m| *m > 0.0));
    }

    #[test]
    fn free_energy_against_pair_dp() {
        let (b, d) = laws(0.6, 2.5);
        let beta = 0.5;
        let sys = AnnealedSystem::new(&b, &d).unwrap();
        let hc = sys.critical_point(beta, 1e-12).unwrap();
        let h = hc + 0.1;
        let f = sys.free_energy(beta, h).unwrap();
        let slope = annealed_dp_slope(&b, &d, beta, h, 2000).unwrap();
        assert!((f - slope).abs() < 1e-3, "{f} {slope}");
        assert_eq!(sys.free_energy(beta, hc - 1e-3).unwrap(), 0.0);
        assert!(f >= solve_free_energy(&b, h, 1e-15));
    }

    #[test]
    fn tau_pinned_annealed_matches_enumeration() {
        use crate::quenched::enumerate_pinned_partition;
        use crate::renewal_core::DisorderPath;
        let (b, d) = laws(0.6, 1.5);
        for &(beta, h) in &[(0.4, -0.2), (1.0, 0.3)] {
            for n in [1u64, 5, 9] {
                let mut total = 0.0;
                for mask in 0u32..(1 << n) {
                    let mut hits = vec![0];
                    let mut p = 1.0;
                    let mut last = 0;
                    for k in 1..=n {
                        if mask >> (k - 1) & 1 == 1 {
                            p *= d.mass(k - last);
                            last = k;
                            hits.push(k);
                        }
                    }
                    p *= d.survival(n - last);
                    let path = DisorderPath::from_hits(n, hits);
                    total += p * enumerate_pinned_partition(&path, &b, beta, h, n).unwrap();
                }
                let got = annealed_tau_pinned_log_partition(&b, &d, beta, h, n).unwrap();
                assert!((got - total.ln()).abs() < 1e-12, "{n}: {got} {}", total.ln());
            }
        }
    }

    #[test]
    fn relevance_at_large_exponent() {
        let b = normalize_power_law(50.0, 100).unwrap();
        let d = normalize_power_law(2.5, 5000).unwrap();
        let r = large_beta_relevance_check(&b, &d).unwrap();
        assert!(r.satisfied, "{r:?}");
        let again = large_beta_relevance_check(&b, &d).unwrap();
        assert_eq!(r.lhs, again.lhs);
    }
}
