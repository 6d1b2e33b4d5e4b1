//! Quenched partition functions for a fixed disorder path, Monte Carlo free
//! energies, tilted disorder measures and the monotonicity checker.

use crate::error::{domain, PinningError, Result};
use crate::homogeneous::homogeneous_pinned_log_partition;
use crate::renewal_core::{
    mass_function_of, rng_stream, stationary_delay, DampedLaw, DisorderPath, InterArrival,
    InterArrivalSampler, PowerLawRenewal,
};
use crate::homogeneous::solve_free_energy;
use crate::special::dot;
use crate::stats::{jackknife, mean, Estimate};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Refresh the common scale once a new entry exceeds it by this much.
const RESCALE_GAP: f64 = 50.0;

#[derive(Debug, Clone, Serialize)]
pub struct LogPartitionTable {
    /// log Z^c over [start, start + m] for m = 0..=len.
    pub log_z_pinned: Vec<f64>,
    /// log of the free partition function on the full block.
    pub log_z_free: f64,
    pub beta: f64,
    pub h: f64,
    pub start: u64,
}

impl LogPartitionTable {
    pub fn len(&self) -> usize {
        self.log_z_pinned.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pinned recursion Z^c(m) = Σ_{j<m} Z^c(j) K(m − j) e^{h + β δ̂_m} on
/// [start, end], in the log domain with a shared scale.
pub fn quenched_block_dp<L: InterArrival + ?Sized>(
    disorder: &DisorderPath,
    law: &L,
    beta: f64,
    h: f64,
    start: u64,
    end: u64,
) -> Result<LogPartitionTable> {
    if end > disorder.window() {
        return Err(PinningError::Range(format!(
            "n = {end} exceeds the disorder window {}",
            disorder.window()
        )));
    }
    if start > end {
        return domain("block start after its end");
    }
    let len = (end - start) as usize;
    // kernel reversed so that Σ_j v_j K(m − j) is a dot of two forward slices
    let mut krev = vec![0.0; len + 1];
    for d in 1..=len {
        krev[len - d] = law.mass(d as u64);
    }
    let ind = disorder.indicators();
    let mut logz = vec![0.0f64; len + 1];
    let mut v = vec![0.0f64; len + 1];
    v[0] = 1.0;
    let mut scale = 0.0f64;
    for m in 1..=len {
        let s = dot(&v[..m], &krev[len - m..len]);
        let hit = ind[start as usize + m];
        let l = scale + s.ln() + h + if hit { beta } else { 0.0 };
        logz[m] = l;
        if l > scale + RESCALE_GAP {
            let shift = (scale - l).exp();
            for x in v[..m].iter_mut() {
                *x *= shift;
            }
            scale = l;
        }
        v[m] = (l - scale).exp();
    }
    let surv: Vec<f64> = (0..=len).map(|k| law.survival(len as u64 - k as u64)).collect();
    let free = scale + dot(&v, &surv).ln();
    Ok(LogPartitionTable { log_z_pinned: logz, log_z_free: free, beta, h, start })
}

pub fn quenched_partition_dp<L: InterArrival + ?Sized>(
    disorder: &DisorderPath,
    law: &L,
    beta: f64,
    h: f64,
    n: u64,
) -> Result<LogPartitionTable> {
    quenched_block_dp(disorder, law, beta, h, 0, n)
}

/// Pinned partition function by summing over every renewal subset of
/// [1, n − 1]; exponential cost, n ≤ 24.
pub fn enumerate_pinned_partition<L: InterArrival + ?Sized>(
    disorder: &DisorderPath,
    law: &L,
    beta: f64,
    h: f64,
    n: u64,
) -> Result<f64> {
    if n > 24 {
        return Err(PinningError::Refused("enumeration limited to n ≤ 24".into()));
    }
    if n > disorder.window() {
        return Err(PinningError::Range("n exceeds the disorder window".into()));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let reward = |k: u64| (h + if disorder.contains(k) { beta } else { 0.0 }).exp();
    let inner = n - 1;
    let mut total = 0.0;
    for mask in 0u32..(1u32 << inner) {
        let mut w = 1.0;
        let mut last = 0;
        for k in 1..=n {
            if k == n || mask >> (k - 1) & 1 == 1 {
                w *= law.mass(k - last) * reward(k);
                last = k;
            }
        }
        total += w;
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct QuenchedEstimate {
    /// (1/n) log Z^c_n averaged over disorder, jackknife error.
    pub estimate: Estimate,
    /// The same at n/2, as a convergence diagnostic.
    pub half: Estimate,
    pub per_replica: Vec<f64>,
    pub per_replica_half: Vec<f64>,
    pub per_replica_quarter: Vec<f64>,
    pub n: u64,
    pub replicas: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DisorderStart {
    /// τ̂ starts at 0.
    Delayed0,
    /// τ̂ has the stationary delay.
    Stationary,
}

pub fn quenched_free_energy_mc(
    law: &PowerLawRenewal,
    disorder_law: &PowerLawRenewal,
    beta: f64,
    h: f64,
    n: u64,
    replicas: usize,
    seed: u64,
) -> Result<QuenchedEstimate> {
    quenched_free_energy_mc_with(law, disorder_law, beta, h, n, replicas, seed, DisorderStart::Delayed0)
}

#[allow(clippy::too_many_arguments)]
pub fn quenched_free_energy_mc_with(
    law: &PowerLawRenewal,
    disorder_law: &PowerLawRenewal,
    beta: f64,
    h: f64,
    n: u64,
    replicas: usize,
    seed: u64,
    start: DisorderStart,
) -> Result<QuenchedEstimate> {
    if replicas < 16 {
        return Err(PinningError::Refused(format!("need at least 16 replicas, got {replicas}")));
    }
    if n < 2 {
        return domain("n must be at least 2");
    }
    let sampler = InterArrivalSampler::new(disorder_law)?;
    let delay = match start {
        DisorderStart::Stationary => Some(stationary_delay(disorder_law)?),
        DisorderStart::Delayed0 => None,
    };
    let half = n / 2;
    let quarter = n / 4;
    let rows: Vec<(f64, f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_stream(seed, r as u64);
            let path = DisorderPath::sample_with(&sampler, n, delay.as_ref(), &mut rng);
            let t = quenched_partition_dp(&path, law, beta, h, n)?;
            let at = |m: u64| if m == 0 { 0.0 } else { t.log_z_pinned[m as usize] / m as f64 };
            Ok((at(n), at(half), at(quarter)))
        })
        .collect::<Result<_>>()?;
    let full: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let halves: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(QuenchedEstimate {
        estimate: jackknife(&full, mean),
        half: jackknife(&halves, mean),
        per_replica: full,
        per_replica_half: halves,
        per_replica_quarter: rows.iter().map(|r| r.2).collect(),
        n,
        replicas,
    })
}

impl QuenchedEstimate {
    pub fn csv_row(&self, beta: f64, h: f64, seed: u64) -> String {
        format!(
            "{},{beta},{h},{},{},{},{seed}\n",
            self.n, self.estimate.mean, self.estimate.stderr, self.replicas
        )
    }
}

/// Extrapolated limit of E(1/m)[log Z^c_m(β) − log Z^c_m(0)] when μ̂ = ∞.
///
/// The excess over the homogeneous value is fitted per replica as
/// L + A m^{α̂−1} + B/m through m = n, n/2, n/4; the first correction follows
/// the growth of |τ̂ ∩ [1, m]| and the second is the boundary term.
pub fn homogeneous_collapse(
    est: &QuenchedEstimate,
    law: &PowerLawRenewal,
    h: f64,
    disorder_exponent: f64,
) -> Result<Estimate> {
    if !(disorder_exponent < 1.0) {
        return domain("collapse applies to infinite disorder mean");
    }
    let n = est.n as usize;
    if n < 16 {
        return domain("n too small for a three-point extrapolation");
    }
    let hom = homogeneous_pinned_log_partition(law, h, n);
    let ms = [n, n / 2, n / 4];
    let g = |m: usize| (m as f64).powf(disorder_exponent - 1.0);
    let rows: [[f64; 3]; 3] = ms.map(|m| [1.0, g(m), 1.0 / m as f64]);
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(rows);
    let xs: Vec<f64> = (0..est.replicas)
        .map(|r| {
            let y = [
                est.per_replica[r] - hom[ms[0]] / ms[0] as f64,
                est.per_replica_half[r] - hom[ms[1]] / ms[1] as f64,
                est.per_replica_quarter[r] - hom[ms[2]] / ms[2] as f64,
            ];
            let mut a = rows;
            for i in 0..3 {
                a[i][0] = y[i];
            }
            det(a) / d
        })
        .collect();
    Ok(jackknife(&xs, mean))
}

pub const QUENCHED_CSV_HEADER: &str = "n,beta,h,logZ_mean,stderr,replicas,seed\n";

/// Exact pinned disorder measure on {0,1}^n with η_n = 1, weights
/// ∝ e^{θ Σ η_k} Π K̂(gaps). Configurations are bitmasks over sites 1..n−1.
#[derive(Debug, Clone, Serialize)]
pub struct TiltedDisorderMeasure {
    pub n: u32,
    pub theta: f64,
    pub weights: Vec<f64>,
    pub normalizer: f64,
}

pub fn tilted_disorder_enumerate<L: InterArrival + ?Sized>(
    disorder_law: &L,
    n: u32,
    theta: f64,
) -> Result<TiltedDisorderMeasure> {
    if n == 0 {
        return domain("n must be at least 1");
    }
    if n > 20 {
        return Err(PinningError::Refused("enumeration limited to n ≤ 20".into()));
    }
    let inner = n - 1;
    let mut weights = Vec::with_capacity(1 << inner);
    for mask in 0u32..(1u32 << inner) {
        let mut w = 1.0;
        let mut last = 0u32;
        for k in 1..=n {
            if k == n || mask >> (k - 1) & 1 == 1 {
                w *= theta.exp() * disorder_law.mass((k - last) as u64);
                last = k;
            }
        }
        weights.push(w);
    }
    let normalizer: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= normalizer;
    }
    Ok(TiltedDisorderMeasure { n, theta, weights, normalizer })
}

impl TiltedDisorderMeasure {
    /// P(k ∈ τ̂) for 1 ≤ k ≤ n.
    pub fn marginal(&self, k: u32) -> f64 {
        if k == self.n {
            return 1.0;
        }
        let bit = 1u32 << (k - 1);
        self.weights.iter().enumerate().filter(|(m, _)| *m as u32 & bit != 0).map(|(_, w)| w).sum()
    }
}

/// P̂_θ(k ∈ τ̂ | n ∈ τ̂) under the recurrent tilted law e^{θ − F̂(θ) m} K̂(m).
pub fn tilted_conditional_marginals(disorder_law: &PowerLawRenewal, n: u32, theta: f64) -> Result<Vec<f64>> {
    let f = solve_free_energy(disorder_law, theta, 1e-15);
    let law = DampedLaw::calibrated(disorder_law, theta, f);
    let u = mass_function_of(&law, n as u64)?;
    Ok((1..=n as usize).map(|k| u.u(k) * u.u(n as usize - k) / u.u(n as usize)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityWitness {
    pub site: u32,
    /// Configuration on the other sites (bit k−1 for site k).
    pub lower: u32,
    pub upper: u32,
    pub p_lower: f64,
    pub p_upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub monotone: bool,
    pub witness: Option<MonotonicityWitness>,
    pub pairs_checked: u64,
}

/// P(η_k = 1 | rest) must be non-decreasing in the rest. Comparable pairs are
/// checked along covering steps (one extra site), which implies every pair.
pub fn monotonicity_check(measure: &TiltedDisorderMeasure) -> MonotonicityReport {
    let inner = measure.n - 1;
    let w = &measure.weights;
    let cond = |k: u32, rest: u32| -> Option<f64> {
        let bit = 1u32 << (k - 1);
        let on = w[(rest | bit) as usize];
        let off = w[(rest & !bit) as usize];
        let tot = on + off;
        (tot > 0.0).then(|| on / tot)
    };
    let mut checked = 0u64;
    let mut worst: Option<(f64, MonotonicityWitness)> = None;
    for k in 1..=inner {
        let kbit = 1u32 << (k - 1);
        for rest in 0u32..(1u32 << inner) {
            if rest & kbit != 0 {
                continue;
            }
            let Some(p) = cond(k, rest) else { continue };
            for j in 1..=inner {
                let jbit = 1u32 << (j - 1);
                if j == k || rest & jbit != 0 {
                    continue;
                }
                let up = rest | jbit;
                let Some(q) = cond(k, up) else { continue };
                checked += 1;
                let gap = p - q;
                if gap > 1e-12 * p.max(q) && worst.as_ref().is_none_or(|(g, _)| gap > *g) {
                    worst = Some((
                        gap,
                        MonotonicityWitness { site: k, lower: rest, upper: up, p_lower: p, p_upper: q },
                    ));
                }
            }
        }
    }
    MonotonicityReport { monotone: worst.is_none(), witness: worst.map(|w| w.1), pairs_checked: checked }
}

/// Exact sampler of τ̂ ∩ [0, n] under the pinned tilted measure, drawn
/// backwards from n using the pinned partition functions Ẑ_{m,θ}.
pub struct PinnedTiltedSampler {
    n: usize,
    theta: f64,
    log_z: Vec<f64>,
    log_k: Vec<f64>,
}

impl PinnedTiltedSampler {
    pub fn new(disorder_law: &PowerLawRenewal, n: u64, theta: f64) -> Self {
        let n = n as usize;
        let log_z = homogeneous_pinned_log_partition(disorder_law, theta, n);
        let log_k = (0..=n).map(|d| if d == 0 { f64::NEG_INFINITY } else { disorder_law.mass(d as u64).ln() }).collect();
        Self { n, theta, log_z, log_k }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DisorderPath {
        let mut hits = vec![self.n as u64];
        let mut m = self.n;
        while m > 0 {
            // P(previous point = j) = Ẑ_j e^θ K̂(m − j) / Ẑ_m
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = 0;
            for j in (0..m).rev() {
                acc += (self.log_z[j] + self.theta + self.log_k[m - j] - self.log_z[m]).exp();
                if acc >= u {
                    chosen = j;
                    break;
                }
            }
            m = chosen;
            hits.push(m as u64);
        }
        DisorderPath::from_hits(self.n as u64, hits)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltShiftReport {
    pub theta: f64,
    /// F_n(β, h; θ).
    pub tilted: Estimate,
    /// (c, F_n(β, h + cβθ; 0)).
    pub shifted: Vec<(f64, Estimate)>,
    /// F_n(β, h; 0).
    pub untilted: Estimate,
    /// Mean of the per-replica difference tilted − untilted with its error.
    pub tilt_effect: Estimate,
}

#[allow(clippy::too_many_arguments)]
pub fn tilt_vs_shift_probe(
    law: &PowerLawRenewal,
    disorder_law: &PowerLawRenewal,
    beta: f64,
    h: f64,
    theta: f64,
    n: u64,
    replicas: usize,
    seed: u64,
) -> Result<TiltShiftReport> {
    if disorder_law.exponent() <= 1.0 {
        return domain("tilt/shift comparison requires a finite disorder mean");
    }
    if replicas < 16 {
        return Err(PinningError::Refused("need at least 16 replicas".into()));
    }
    let tilted_sampler = PinnedTiltedSampler::new(disorder_law, n, theta);
    let plain_sampler = PinnedTiltedSampler::new(disorder_law, n, 0.0);
    let cs = [0.1, 1.0];
    let run = |sampler: &PinnedTiltedSampler, hh: f64| -> Result<Vec<f64>> {
        (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng_stream(seed, r as u64);
                let path = sampler.sample(&mut rng);
                let t = quenched_partition_dp(&path, law, beta, hh, n)?;
                Ok(t.log_z_pinned[n as usize] / n as f64)
            })
            .collect()
    };
    let tilted = run(&tilted_sampler, h)?;
    let plain = run(&plain_sampler, h)?;
    let mut shifted = Vec::new();
    for c in cs {
        let xs = run(&plain_sampler, h + c * beta * theta)?;
        shifted.push((c, jackknife(&xs, mean)));
    }
    let diff: Vec<f64> = tilted.iter().zip(&plain).map(|(a, b)| a - b).collect();
    Ok(TiltShiftReport {
        theta,
        tilted: jackknife(&tilted, mean),
        shifted,
        untilted: jackknife(&plain, mean),
        tilt_effect: jackknife(&diff, mean),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal_core::{normalize_power_law, sample_path, tilt_law, TabulatedLaw};

    #[test]
    fn one_step() {
        let law = normalize_power_law(0.7, 100).unwrap();
        let path = DisorderPath::from_hits(5, vec![0, 1, 3]);
        let t = quenched_partition_dp(&path, &law, 0.4, -0.2, 5).unwrap();
        assert!((t.log_z_pinned[1] - (law.mass(1).ln() - 0.2 + 0.4)).abs() < 1e-15);
        assert_eq!(t.log_z_pinned[0], 0.0);
    }

    #[test]
    fn matches_enumeration() {
        let law = tilt_law(&normalize_power_law(0.6, 100).unwrap(), -0.1).unwrap();
        let d = normalize_power_law(1.4, 100).unwrap();
        let path = sample_path(&d, 12, 7).unwrap();
        for n in 1..=12 {
            let t = quenched_partition_dp(&path, &law, 0.8, 0.3, n).unwrap();
            let z = enumerate_pinned_partition(&path, &law, 0.8, 0.3, n).unwrap();
            assert!((t.log_z_pinned[n as usize].exp() / z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_beta_is_homogeneous() {
        let law = normalize_power_law(1.5, 3000).unwrap();
        let d = normalize_power_law(0.5, 100).unwrap();
        let path = sample_path(&d, 3000, 1).unwrap();
        let t = quenched_partition_dp(&path, &law, 0.0, 0.05, 3000).unwrap();
        let hom = homogeneous_pinned_log_partition(&law, 0.05, 3000);
        for n in [1usize, 10, 500, 3000] {
            assert!((t.log_z_pinned[n] - hom[n]).abs() < 1e-12 * hom[n].abs().max(1.0));
        }
    }

    #[test]
    fn large_rewards_stay_finite() {
        let law = normalize_power_law(0.5, 20_000).unwrap();
        let path = DisorderPath::from_hits(20_000, (0..=20_000).step_by(3).collect());
        let t = quenched_partition_dp(&path, &law, 5.0, 3.0, 20_000).unwrap();
        assert!(t.log_z_pinned.iter().all(|x| x.is_finite()));
        assert!(t.log_z_free >= t.log_z_pinned[20_000]);
    }

    #[test]
    fn window_checked() {
        let law = normalize_power_law(0.5, 100).unwrap();
        let path = DisorderPath::from_hits(10, vec![0]);
        assert!(matches!(
            quenched_partition_dp(&path, &law, 0.1, 0.0, 11),
            Err(PinningError::Range(_))
        ));
    }

    #[test]
    fn replicas_refused() {
        let law = normalize_power_law(0.5, 100).unwrap();
        assert!(matches!(
            quenched_free_energy_mc(&law, &law, 0.1, 0.0, 50, 8, 1),
            Err(PinningError::Refused(_))
        ));
    }

    #[test]
    fn tilted_measure_small_n() {
        let d = normalize_power_law(2.5, 100).unwrap();
        let m1 = tilted_disorder_enumerate(&d, 1, 0.3).unwrap();
        assert_eq!(m1.weights, vec![1.0]);
        let m2 = tilted_disorder_enumerate(&d, 2, 0.3).unwrap();
        let a = 0.3f64.exp() * d.mass(2);
        let b = 0.6f64.exp() * d.mass(1).powi(2);
        assert!((m2.weights[0] - a / (a + b)).abs() < 1e-15);
        assert!((m2.weights[1] - b / (a + b)).abs() < 1e-15);
        assert!(tilted_disorder_enumerate(&d, 21, 0.3).is_err());
    }

    #[test]
    fn normalizer_and_conditional_identity() {
        let d = normalize_power_law(2.5, 100).unwrap();
        let m = tilted_disorder_enumerate(&d, 12, 0.3).unwrap();
        let hom = homogeneous_pinned_log_partition(&d, 0.3, 12);
        assert!((m.normalizer.ln() - hom[12]).abs() < 1e-12);
        let cond = tilted_conditional_marginals(&d, 12, 0.3).unwrap();
        for k in 1..=12u32 {
            assert!((m.marginal(k) - cond[k as usize - 1]).abs() < 1e-12, "{k}");
        }
    }

    #[test]
    fn exact_power_law_is_monotone() {
        let d = normalize_power_law(0.8, 100).unwrap();
        for theta in [0.1, 0.3, 1.0] {
            let r = monotonicity_check(&tilted_disorder_enumerate(&d, 8, theta).unwrap());
            assert!(r.monotone, "{r:?}");
            assert!(r.pairs_checked > 0);
        }
        let r = monotonicity_check(&tilted_disorder_enumerate(&d, 1, 0.3).unwrap());
        assert!(r.monotone && r.pairs_checked == 0);
    }

    #[test]
    fn non_log_convex_law_has_witness() {
        let law = TabulatedLaw::new(vec![0.1, 0.5, 0.1, 0.3]).unwrap();
        let found = (3..=8).any(|n| !monotonicity_check(&tilted_disorder_enumerate(&law, n, 0.3).unwrap()).monotone);
        assert!(found);
    }

    #[test]
    fn backward_sampler_marginals() {
        let d = normalize_power_law(2.5, 100).unwrap();
        let s = PinnedTiltedSampler::new(&d, 10, 0.4);
        let exact = tilted_disorder_enumerate(&d, 10, 0.4).unwrap();
        let mut rng = rng_stream(3, 0);
        let reps = 40_000;
        let mut counts = [0usize; 11];
        for _ in 0..reps {
            let p = s.sample(&mut rng);
            for k in 1..=10u64 {
                counts[k as usize] += p.contains(k) as usize;
            }
        }
        for k in 1..=9u32 {
            let p = exact.marginal(k);
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((counts[k as usize] as f64 / reps as f64 - p).abs() < 4.0 * se + 1e-12, "{k}");
        }
    }
}
