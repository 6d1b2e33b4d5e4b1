//! The acceptance checks, shared by `verify` and the integration tests.

use super::config::{Command, ExperimentConfig, Grid, Suite};
use crate::annealed::{
    annealed_tau_pinned_log_partition, compute_i_at_zero, gamma_ann_scaling_fit, nu_a_fit, AnnealedSystem, IAtZero,
};
use crate::homogeneous::{critical_exponent_fit, entropy_rate, free_energy_curve, free_energy_expansion_check};
use crate::moments_gaps::{
    boundedness_probe, decoupling_check, decoupling_table, enumerate_disorder_moment, gap_decompose,
    moment_cluster_expansion, second_moment_dp,
};
use crate::quenched::{
    enumerate_pinned_partition, homogeneous_collapse, monotonicity_check, quenched_free_energy_mc,
    quenched_partition_dp, tilted_disorder_enumerate,
};
use crate::renewal_core::{normalize_power_law, rng_stream, sample_path, tilt_law, InterArrival, PowerLawRenewal};
use crate::spectral::{inversion_vs_convolution, tilted_recurrent};
use crate::stats::{log_grid, loglog_slope};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

/// Deliberate corruption used to confirm that a check can fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Fault {
    /// Multiply every û(n), n ≥ 1, by the factor before the decoupling fuzz.
    ScaleDisorderMass(f64),
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub seed: u64,
    pub measured: Value,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<34} {}  {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.measured
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn suite_members(suite: Suite) -> Vec<u8> {
    match suite {
        Suite::Oracles => vec![1, 2],
        Suite::Inequalities => vec![3, 4, 5, 9, 11],
        Suite::Asymptotics => vec![6, 8, 10],
        Suite::Spectral => vec![7],
        Suite::Determinism => vec![12],
        Suite::All => (1..=12).collect(),
    }
}

pub fn run_suite(suite: Suite, seed: u64, opts: &VerifyOptions) -> VerifyReport {
    let checks = suite_members(suite).into_iter().map(|id| run_check(id, seed, opts)).collect();
    VerifyReport { suite, seed, checks }
}

pub fn run_check(id: u8, seed: u64, opts: &VerifyOptions) -> CheckResult {
    let (name, outcome): (&'static str, crate::Result<(bool, Value)>) = match id {
        1 => ("partition-function oracles", check_partition_oracles(seed)),
        2 => ("moment oracles", check_moment_oracles()),
        3 => ("decoupling inequality", check_decoupling(seed, opts)),
        4 => ("gap identity", check_gap_identity(seed)),
        5 => ("annealed curve properties", check_annealed_curve()),
        6 => ("scaling exponents", check_scaling_exponents()),
        7 => ("fourier cross-check", check_fourier()),
        8 => ("homogeneous expansion", check_expansion()),
        9 => ("quenched consistency", check_quenched(seed)),
        10 => ("second-moment regime contrast", check_second_moment()),
        11 => ("monotonicity", check_monotonicity()),
        12 => ("determinism", check_determinism(seed)),
        _ => ("unknown", Ok((false, json!("no such criterion")))),
    };
    let (passed, measured) = outcome.unwrap_or_else(|e| (false, json!({ "error": e.to_string() })));
    CheckResult { id, name, passed, seed, measured }
}

fn law(a: f64) -> crate::Result<PowerLawRenewal> {
    normalize_power_law(a, 1_000_000)
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn check_partition_oracles(seed: u64) -> crate::Result<(bool, Value)> {
    let tuples = 120u64;
    let worst = (0..tuples)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_stream(seed, 1_000 + k);
            let a = rng.gen_range(0.2..1.8);
            let ah = rng.gen_range(0.3..2.8);
            let beta = rng.gen_range(0.0..2.0);
            let h = rng.gen_range(-1.0..1.0);
            let base = normalize_power_law(a, 100)?;
            let path = sample_path(&normalize_power_law(ah, 100)?, 12, rng.gen())?;
            let t = quenched_partition_dp(&path, &base, beta, h, 12)?;
            let mut worst = 0.0f64;
            for n in 1..=12u64 {
                let z = enumerate_pinned_partition(&path, &base, beta, h, n)?;
                worst = worst.max(rel(t.log_z_pinned[n as usize].exp(), z));
            }
            Ok(worst)
        })
        .collect::<crate::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst <= 1e-10, json!({ "tuples": tuples, "max_rel_err": worst })))
}

fn check_moment_oracles() -> crate::Result<(bool, Value)> {
    let sets = [(0.3, 2.5, 0.1, -0.05), (0.7, 2.5, 0.5, -0.3), (0.5, 0.5, 0.3, -0.2), (1.5, 1.3, 1.0, -1.0)];
    let mut expansion_err = 0.0f64;
    let mut dp_err = 0.0f64;
    for (a, ah, beta, h) in sets {
        let b = tilt_law(&normalize_power_law(a, 1000)?, h)?;
        let d = normalize_power_law(ah, 1000)?;
        let dp = second_moment_dp(&b, &d, beta, 10)?;
        for n in 1..=10u64 {
            for order in [1, 2] {
                let e = moment_cluster_expansion(order, &b, &d, beta, n)?;
                let o = enumerate_disorder_moment(order, &b, &d, beta, n)?;
                expansion_err = expansion_err.max(rel(e, o));
                if order == 2 {
                    dp_err = dp_err.max(rel(dp[n as usize], e));
                }
            }
        }
    }
    let ok = expansion_err <= 1e-10 && dp_err <= 1e-10;
    Ok((ok, json!({ "expansion_vs_enumeration": expansion_err, "dp_vs_expansion": dp_err })))
}

fn random_set<R: Rng>(rng: &mut R, horizon: u64) -> Vec<u64> {
    let k = rng.gen_range(0..=30);
    let mut v: Vec<u64> = (0..k).map(|_| rng.gen_range(1..=horizon)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn check_decoupling(seed: u64, opts: &VerifyOptions) -> crate::Result<(bool, Value)> {
    let horizon = 200;
    let pairs = 10_000u64;
    let mut violations = 0usize;
    let mut witness = Value::Null;
    for (s, ah) in [2.2, 2.5, 3.0].into_iter().enumerate() {
        let mut table = decoupling_table(&law(ah)?, horizon)?;
        if let Some(Fault::ScaleDisorderMass(f)) = opts.fault {
            table.u.iter_mut().skip(1).for_each(|x| *x *= f);
        }
        let found: Vec<(u64, Vec<u64>, Vec<u64>, f64, f64)> = (0..pairs)
            .into_par_iter()
            .map(|k| {
                let mut rng = rng_stream(seed, 10_000 * (s as u64 + 1) + k);
                let (i, j) = (random_set(&mut rng, horizon), random_set(&mut rng, horizon));
                let r = decoupling_check(&table, &i, &j)?;
                Ok(if r.holds { None } else { Some((k, i, j, r.lhs, r.rhs)) })
            })
            .collect::<crate::Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        violations += found.len();
        if witness.is_null() {
            if let Some((k, i, j, lhs, rhs)) = found.into_iter().next() {
                witness = json!({ "alpha_hat": ah, "pair": k, "I": i, "J": j, "lhs": lhs, "rhs": rhs });
            }
        }
    }
    Ok((violations == 0, json!({ "pairs": 3 * pairs, "violations": violations, "witness": witness })))
}

fn check_gap_identity(seed: u64) -> crate::Result<(bool, Value)> {
    let mut rng = rng_stream(seed, 20_000);
    let mut bad = 0;
    for _ in 0..1000 {
        let (i, j) = (random_set(&mut rng, 60), random_set(&mut rng, 60));
        let g = gap_decompose(&i, &j);
        let shared = i.iter().filter(|x| j.binary_search(x).is_ok()).count();
        let mut a = g.gaps.clone();
        let mut b = gap_decompose(&j, &i).gaps;
        a.sort_unstable();
        b.sort_unstable();
        if g.zero_gaps() != shared || a != b {
            bad += 1;
        }
    }
    Ok((bad == 0, json!({ "pairs": 1000, "violations": bad })))
}

fn check_annealed_curve() -> crate::Result<(bool, Value)> {
    let betas: Vec<f64> = (0..=30).map(|k| 0.1 * k as f64).collect();
    let mut worst_concavity = f64::NEG_INFINITY;
    let mut worst_round_trip = 0.0f64;
    let mut drift_ok = true;
    let mut zero_ok = true;
    for (a, ah) in [(0.5, 1.3), (0.7, 0.5), (0.3, 0.3), (0.6, 2.5), (1.5, 2.5)] {
        let sys = AnnealedSystem::new(&law(a)?, &law(ah)?)?;
        zero_ok &= sys.critical_point(0.0, 1e-12)? == 0.0;
        let hs = betas.par_iter().map(|b| sys.critical_point(*b, 1e-12)).collect::<crate::Result<Vec<_>>>()?;
        for i in 1..betas.len() - 1 {
            worst_concavity = worst_concavity.max(0.5 * (hs[i - 1] + hs[i + 1]) - hs[i]);
        }
        let mean = sys.disorder().mean();
        for (b, h) in betas.iter().zip(&hs).skip(1) {
            if mean.is_finite() {
                drift_ok &= *h <= -b / mean;
            }
            if *h < 0.0 {
                let i = sys.i_value(*h, 1e-10)?;
                worst_round_trip = worst_round_trip.max((i * -(-b).exp_m1() - 1.0).abs());
            }
        }
    }
    let regime: Vec<(f64, f64)> = vec![(0.3, 0.3), (0.2, 0.5), (0.4, 0.4), (0.7, 0.7), (0.5, 0.8), (0.6, 1.5)];
    let mut regime_ok = true;
    let mut b0s = Vec::new();
    for (a, ah) in regime {
        let b0 = AnnealedSystem::new(&law(a)?, &law(ah)?)?.beta_zero()?;
        regime_ok &= (b0 > 0.0) == (a + ah < 1.0);
        b0s.push(json!([a, ah, b0]));
    }
    let finite = matches!(compute_i_at_zero(&law(0.3)?, &law(0.3)?)?, IAtZero::Finite(_));
    let ok = zero_ok && worst_concavity <= 1e-9 && drift_ok && worst_round_trip <= 1e-8 && regime_ok && finite;
    Ok((
        ok,
        json!({
            "h_c_a_at_zero": zero_ok,
            "max_concavity_defect": worst_concavity,
            "drift_bound": drift_ok,
            "max_round_trip_err": worst_round_trip,
            "beta0": b0s,
        }),
    ))
}

fn check_scaling_exponents() -> crate::Result<(bool, Value)> {
    let mut ok = true;
    let mut gammas = Vec::new();
    for (a, ah, want) in [(0.5, 1.3, 1.6), (0.7, 0.5, 3.5), (0.2, 0.3, 1.0)] {
        let g = gamma_ann_scaling_fit(&law(a)?, &law(ah)?, &log_grid(1e-4, 1e-2, 12))?;
        ok &= rel(g.fit.slope, want) <= 0.1;
        gammas.push(json!([a, ah, g.fit.slope, want]));
    }
    let mut nus = Vec::new();
    for (a, want) in [(0.5, 2.0), (2.0, 1.0)] {
        let curve = free_energy_curve(&law(a)?, &log_grid(1e-5, 1e-3, 12));
        let fit = critical_exponent_fit(&curve, (1e-5, 1e-3))?;
        ok &= rel(fit.slope, want) <= 0.05;
        nus.push(json!([a, fit.slope, want]));
    }
    let (b, d) = (law(0.3)?, law(0.5)?);
    let b0 = AnnealedSystem::new(&b, &d)?.beta_zero()?;
    let nu_a = nu_a_fit(&b, &d, b0 + 2.0, &log_grid(1e-6, 1e-4, 10))?;
    let nu_a_want = 1.0 / 0.8;
    ok &= rel(nu_a.slope, nu_a_want) <= 0.1;
    let mut entropy = Vec::new();
    for (ah, want) in [(1.5, 1.5), (3.0, 2.0)] {
        let l = law(ah)?;
        let ts = log_grid(1e-4, 1e-2, 10);
        let hs = ts.iter().map(|t| entropy_rate(&l, *t)).collect::<crate::Result<Vec<_>>>()?;
        let (s, _) = loglog_slope(&ts, &hs);
        ok &= rel(s, want) <= 0.1;
        entropy.push(json!([ah, s, want]));
    }
    Ok((
        ok,
        json!({
            "gamma_ann": gammas,
            "nu_hom": nus,
            "nu_a": [nu_a.slope, nu_a_want],
            "entropy_slope": entropy,
        }),
    ))
}

fn check_fourier() -> crate::Result<(bool, Value)> {
    let cases = [(1.5, 0.0), (1.5, 0.2), (2.5, 0.0), (2.5, 0.2)];
    let errs = cases
        .par_iter()
        .map(|&(a, th)| Ok(inversion_vs_convolution(&tilted_recurrent(&law(a)?, th)?, 2000)?.max_abs_diff))
        .collect::<crate::Result<Vec<f64>>>()?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok((worst < 1e-8, json!({ "max_abs_err": worst, "per_case": errs })))
}

fn check_expansion() -> crate::Result<(bool, Value)> {
    let mut ok = true;
    let mut ratios = Vec::new();
    for a in [1.5, 3.0] {
        let r = free_energy_expansion_check(&law(a)?, 1e-3)?;
        ok &= (r.ratio - 1.0).abs() <= 0.1;
        ratios.push(json!([a, r.ratio]));
    }
    Ok((ok, json!({ "ratios": ratios })))
}

fn check_quenched(seed: u64) -> crate::Result<(bool, Value)> {
    let n = 5000u64;
    let (b, d) = (law(0.6)?, law(2.5)?);
    let sys = AnnealedSystem::new(&b, &d)?;
    let mut jensen_ok = true;
    let mut rows = Vec::new();
    for beta in [0.2, 0.5, 1.0] {
        let hc = sys.critical_point(beta, 1e-12)?;
        for dh in [-0.05, 0.05, 0.2] {
            let h = hc + dh;
            let q = quenched_free_energy_mc(&b, &d, beta, h, n, 64, seed)?;
            let ann = annealed_tau_pinned_log_partition(&b, &d, beta, h, n)? / n as f64;
            let ok = q.estimate.mean <= ann + 2.0 * q.estimate.stderr;
            jensen_ok &= ok;
            rows.push(json!([beta, h, q.estimate.mean, q.estimate.stderr, ann]));
        }
    }
    let (bc, dc) = (law(0.6)?, law(0.5)?);
    let est = quenched_free_energy_mc(&bc, &dc, 0.5, 0.05, n, 64, seed)?;
    let collapse = homogeneous_collapse(&est, &bc, 0.05, 0.5)?;
    let collapse_ok = collapse.within(0.0, 2.0);
    Ok((
        jensen_ok && collapse_ok,
        json!({
            "jensen": rows,
            "collapse_excess": [collapse.mean, collapse.stderr],
        }),
    ))
}

fn check_second_moment() -> crate::Result<(bool, Value)> {
    let d = law(2.5)?;
    let grid: Vec<u64> = (1..=300).collect();
    let flat = boundedness_probe(&law(0.3)?, &d, 0.05, &grid, (150, 300))?;
    let grow = boundedness_probe(&law(0.7)?, &d, 0.05, &grid, (150, 300))?;
    let ok = flat.window_growth <= 0.01 && grow.window_growth > 0.05 && flat.first_within_two && grow.first_within_two;
    Ok((
        ok,
        json!({
            "growth_alpha_0.3": flat.window_growth,
            "growth_alpha_0.7": grow.window_growth,
            "max_first_moment_alpha_0.3": flat.max_first_moment,
            "max_first_moment_alpha_0.7": grow.max_first_moment,
            "ratio_growth_alpha_0.3": flat.ratio_window_growth,
            "ratio_growth_alpha_0.7": grow.ratio_window_growth,
        }),
    ))
}

fn check_monotonicity() -> crate::Result<(bool, Value)> {
    let mut ok = true;
    let mut pairs = 0;
    let mut witness = Value::Null;
    for ah in [0.5, 1.5, 2.5] {
        let d = normalize_power_law(ah, 100)?;
        for theta in [0.1, 0.3, 1.0] {
            for n in 1..=8 {
                let r = monotonicity_check(&tilted_disorder_enumerate(&d, n, theta)?);
                pairs += r.pairs_checked;
                if !r.monotone {
                    ok = false;
                    witness = json!({ "alpha_hat": ah, "theta": theta, "n": n, "witness": r.witness });
                }
            }
        }
    }
    Ok((ok, json!({ "pairs_checked": pairs, "witness": witness })))
}

/// Stochastic commands rerun with the same config on 1 and 4 threads.
fn check_determinism(seed: u64) -> crate::Result<(bool, Value)> {
    let mut q = ExperimentConfig::defaults(Command::QuenchedMc);
    q.seed = Some(seed);
    q.n = 1500;
    q.replicas = 32;
    q.beta_grid = Grid::new(0.2, 0.6, 2)?;
    q.h_grid = Grid::new(-0.2, 0.1, 2)?;
    let mut v = ExperimentConfig::defaults(Command::Verify);
    v.seed = Some(seed);
    v.suite = Suite::Oracles;
    let mut same = Vec::new();
    for cfg in [&q, &v] {
        let a = super::run(cfg, Some(1))?;
        let b = super::run(cfg, Some(4))?;
        let c = super::run(cfg, Some(4))?;
        let eq = a.files == b.files && b.files == c.files && a.manifest_json() == b.manifest_json();
        same.push(json!([cfg.command.name(), eq]));
        if !eq {
            return Ok((false, json!({ "runs": same })));
        }
    }
    Ok((true, json!({ "runs": same })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injected_fault_is_caught() {
        let opts = VerifyOptions { fault: Some(Fault::ScaleDisorderMass(0.2)) };
        let r = run_check(3, 5, &opts);
        assert!(!r.passed);
        assert!(!r.measured["witness"].is_null());
        assert!(run_check(3, 5, &VerifyOptions::default()).passed);
    }
}
