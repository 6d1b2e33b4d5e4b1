//! Moments of the modified partition function Z̄_n = E_h(e^{β Σ δ_k δ̂_k}),
//! the gap decomposition of two finite sets and the decoupling inequality.

use crate::annealed::first_passage;
use crate::error::{domain, PinningError, Result};
use crate::renewal_core::{mass_function_of, InterArrival, PowerLawRenewal};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GapDecomposition {
    pub gaps: Vec<u64>,
}

impl GapDecomposition {
    pub fn count(&self) -> usize {
        self.gaps.len()
    }

    pub fn zero_gaps(&self) -> usize {
        self.gaps.iter().filter(|g| **g == 0).count()
    }
}

/// Backward exploration: take the last gap between the two sets, cut both at
/// its right end, and repeat until one side is empty.
pub fn gap_decompose(i: &[u64], j: &[u64]) -> GapDecomposition {
    let mut a: Vec<u64> = i.to_vec();
    let mut b: Vec<u64> = j.to_vec();
    a.sort_unstable();
    a.dedup();
    b.sort_unstable();
    b.dedup();
    let mut gaps = Vec::new();
    while let (Some(&ia), Some(&jb)) = (a.last(), b.last()) {
        let (gap, p) = if ia == jb {
            (0, ia)
        } else {
            let (lo, hi_set) = if ia < jb { (ia, &b) } else { (jb, &a) };
            let p = hi_set[hi_set.partition_point(|x| *x <= lo)];
            (p - lo, p)
        };
        gaps.push(gap);
        a.truncate(a.partition_point(|x| *x < p));
        b.truncate(b.partition_point(|x| *x < p));
    }
    GapDecomposition { gaps }
}

/// û(0..=H) of a recurrent disorder law with r(i) = sup_{j ≥ i} |1 − û(i)/û(j)|,
/// the supremum taken over [i, H] and the limit 1/μ̂.
#[derive(Debug, Clone)]
pub struct DecouplingTable {
    pub u: Vec<f64>,
    pub r: Vec<f64>,
    pub mean_inverse: f64,
}

pub fn decoupling_table<L: InterArrival + ?Sized>(disorder: &L, horizon: u64) -> Result<DecouplingTable> {
    let mean = disorder.mean();
    if !mean.is_finite() {
        return domain("r(i) needs a finite disorder mean");
    }
    let u = mass_function_of(disorder, horizon)?.values;
    let lim = 1.0 / mean;
    let n = u.len();
    let mut r = vec![0.0; n];
    let (mut lo, mut hi) = (lim, lim);
    for i in (0..n).rev() {
        lo = lo.min(u[i]);
        hi = hi.max(u[i]);
        r[i] = (1.0 - u[i] / lo).abs().max((1.0 - u[i] / hi).abs());
    }
    Ok(DecouplingTable { u, r, mean_inverse: lim })
}

pub fn r_function(disorder: &PowerLawRenewal, i: u64, horizon: u64) -> Result<f64> {
    if disorder.exponent() <= 1.0 {
        return domain("r(i) needs α̂ > 1");
    }
    if i > horizon {
        return Err(PinningError::Range("i beyond horizon".into()));
    }
    Ok(decoupling_table(disorder, horizon)?.r[i as usize])
}

impl DecouplingTable {
    /// Û(I) = P̂(I ⊆ τ̂) for a sorted set.
    pub fn joint(&self, set: &[u64]) -> f64 {
        let mut last = 0;
        let mut p = 1.0;
        for &k in set {
            p *= self.u[(k - last) as usize];
            last = k;
        }
        p
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecouplingResult {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn decoupling_check(table: &DecouplingTable, i: &[u64], j: &[u64]) -> Result<DecouplingResult> {
    let h = (table.u.len() - 1) as u64;
    if i.iter().chain(j).any(|k| *k == 0 || *k > h) {
        return Err(PinningError::Range("sets must lie in [1, horizon]".into()));
    }
    let mut a = i.to_vec();
    a.sort_unstable();
    a.dedup();
    let mut b = j.to_vec();
    b.sort_unstable();
    b.dedup();
    let mut union: Vec<u64> = a.iter().chain(&b).copied().collect();
    union.sort_unstable();
    union.dedup();
    let lhs = table.joint(&union);
    let factor: f64 = gap_decompose(&a, &b).gaps.iter().map(|g| 1.0 + table.r[*g as usize]).product();
    let rhs = table.joint(&a) * table.joint(&b) * factor;
    Ok(DecouplingResult { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) })
}

fn check_small(n: u64, limit: u64) -> Result<()> {
    if n > limit {
        return Err(PinningError::Refused(format!("n = {n} above the enumeration limit {limit}")));
    }
    Ok(())
}

/// Σ_{I ⊆ [n]} z^{|I|} U_h(I) Û(I) (order 1) or
/// Σ_{I,J} z^{|I|+|J|} U_h(I) U_h(J) Û(I ∪ J) (order 2), z = e^β − 1.
pub fn moment_cluster_expansion(
    order: u32,
    base_tilted: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    n: u64,
) -> Result<f64> {
    check_small(n, 12)?;
    if !(order == 1 || order == 2) {
        return domain("order must be 1 or 2");
    }
    let uh = mass_function_of(base_tilted, n)?.values;
    let ud = mass_function_of(disorder, n)?.values;
    let z = beta.exp_m1();
    let size = 1usize << n;
    let joint = |u: &[f64], mask: usize| {
        let mut last = 0;
        let mut p = 1.0;
        for k in 1..=n as usize {
            if mask >> (k - 1) & 1 == 1 {
                p *= u[k - last];
                last = k;
            }
        }
        p
    };
    let uhat: Vec<f64> = (0..size).map(|m| joint(&ud, m)).collect();
    let a: Vec<f64> = (0..size).map(|m| z.powi(m.count_ones() as i32) * joint(&uh, m)).collect();
    if order == 1 {
        return Ok((0..size).map(|m| a[m] * uhat[m]).sum());
    }
    let mut total = 0.0;
    for mi in 0..size {
        let mut row = 0.0;
        for mj in 0..size {
            row += a[mj] * uhat[mi | mj];
        }
        total += a[mi] * row;
    }
    Ok(total)
}

/// P(τ ∩ [1, n] = S) for every S ⊆ [1, n], free at n; indexed by bitmask.
fn configuration_weights<L: InterArrival + ?Sized>(law: &L, n: u64) -> Vec<f64> {
    let size = 1usize << n;
    (0..size)
        .map(|mask| {
            let mut last = 0u64;
            let mut p = 1.0;
            for k in 1..=n {
                if mask >> (k - 1) & 1 == 1 {
                    p *= law.mass(k - last);
                    last = k;
                }
            }
            p * law.survival(n - last)
        })
        .collect()
}

/// Ê[(Z̄_n | τ̂)^order] by enumerating the configurations of both renewals.
pub fn enumerate_disorder_moment(
    order: u32,
    base_tilted: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    n: u64,
) -> Result<f64> {
    check_small(n, 12)?;
    let pw = configuration_weights(base_tilted, n);
    let dw = configuration_weights(disorder, n);
    let size = 1usize << n;
    let eb: Vec<f64> = (0..=n).map(|k| (beta * k as f64).exp()).collect();
    let mut total = 0.0;
    for (s, ps) in dw.iter().enumerate() {
        let zbar: f64 = (0..size).map(|a| pw[a] * eb[(a & s).count_ones() as usize]).sum();
        total += ps * zbar.powi(order as i32);
    }
    Ok(total)
}

/// Z̄^a_m for m = 0..=n through the intersection renewal:
/// Z̄^a_m = Σ_{j ≤ m} Z^{a,c}_j P(τ̃_1 > m − j).
pub fn annealed_first_moment_dp(
    base_tilted: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    n: u64,
) -> Result<Vec<f64>> {
    let uh = mass_function_of(base_tilted, n)?.values;
    let ud = mass_function_of(disorder, n)?.values;
    let w: Vec<f64> = uh.iter().zip(&ud).map(|(a, b)| a * b).collect();
    let f = first_passage(&w);
    let n = n as usize;
    let eb = beta.exp();
    let mut zc = vec![0.0; n + 1];
    zc[0] = 1.0;
    for m in 1..=n {
        zc[m] = eb * (0..m).map(|j| zc[j] * f[m - j]).sum::<f64>();
    }
    // P(τ̃_1 > k), defect included
    let mut surv = vec![1.0; n + 1];
    for k in 1..=n {
        surv[k] = surv[k - 1] - f[k];
    }
    Ok((0..=n).map(|m| (0..=m).map(|j| zc[j] * surv[m - j]).sum()).collect())
}

/// Ê(Z̄_m²) for m = 0..=n. Walks the points of I ∪ J in the order-2 expansion
/// keeping (last point of I, last point of J); S is symmetric.
pub fn second_moment_dp(
    base_tilted: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    n: u64,
) -> Result<Vec<f64>> {
    if n > 300 {
        return Err(PinningError::Refused("second-moment DP limited to n ≤ 300".into()));
    }
    let uh = mass_function_of(base_tilted, n)?.values;
    let ud = mass_function_of(disorder, n)?.values;
    let n = n as usize;
    let z = beta.exp_m1();
    let side = n + 1;
    let mut s = vec![0.0f64; side * side];
    s[0] = 1.0;
    let mut out = vec![1.0; n + 1];
    let mut scratch = vec![0.0; side];
    for p in 1..=n {
        // one side lands on p, the other stays at j < p
        for j in 0..p {
            let mut acc = 0.0;
            for i in 0..p {
                acc += s[i * side + j] * uh[p - i] * ud[p - i.max(j)];
            }
            scratch[j] = z * acc;
        }
        // both land on p
        let mut both = 0.0;
        for i in 0..p {
            let row = &s[i * side..i * side + p];
            let mut acc = 0.0;
            for (j, x) in row.iter().enumerate() {
                acc += x * uh[p - j] * ud[p - i.max(j)];
            }
            both += uh[p - i] * acc;
        }
        let mut added = z * z * both;
        for j in 0..p {
            s[p * side + j] = scratch[j];
            s[j * side + p] = scratch[j];
            added += 2.0 * scratch[j];
        }
        s[p * side + p] = z * z * both;
        out[p] = out[p - 1] + added;
    }
    Ok(out)
}

/// Same quantity through the forward chain on the ages of τ, τ′ and τ̂. O(n⁴);
/// kept as a cross-check.
pub fn second_moment_age_chain(
    base_tilted: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    n: u64,
) -> Result<Vec<f64>> {
    if n > 300 {
        return Err(PinningError::Refused("second-moment DP limited to n ≤ 300".into()));
    }
    let n = n as usize;
    let hazard = |law: &PowerLawRenewal| -> Vec<f64> {
        (0..=n)
            .map(|a| {
                let s = law.survival(a as u64);
                if s > 0.0 { law.mass(a as u64 + 1) / s } else { 0.0 }
            })
            .collect()
    };
    let hb = hazard(base_tilted);
    let hd = hazard(disorder);
    let side = n + 1;
    let idx = |a: usize, b: usize, c: usize| (a * side + b) * side + c;
    let mut v = vec![0.0f64; side * side * side];
    v[0] = 1.0;
    let e1 = beta.exp();
    let e2 = (2.0 * beta).exp();
    let mut out = vec![1.0; n + 1];
    for k in 0..n {
        // ages are at most k before the step
        // disorder axis (contiguous)
        for a in 0..=k {
            for b in 0..=k {
                let row = &mut v[idx(a, b, 0)..idx(a, b, 0) + k + 2];
                let mut fresh = 0.0;
                for c in (0..=k).rev() {
                    let x = row[c];
                    fresh += x * hd[c];
                    row[c + 1] = x * (1.0 - hd[c]);
                }
                row[0] = fresh;
            }
        }
        // second replica axis
        for a in 0..=k {
            for c in 0..=k + 1 {
                let mut fresh = 0.0;
                for b in (0..=k).rev() {
                    let x = v[idx(a, b, c)];
                    fresh += x * hb[b];
                    v[idx(a, b + 1, c)] = x * (1.0 - hb[b]);
                }
                v[idx(a, 0, c)] = fresh;
            }
        }
        // first replica axis
        for b in 0..=k + 1 {
            for c in 0..=k + 1 {
                let mut fresh = 0.0;
                for a in (0..=k).rev() {
                    let x = v[idx(a, b, c)];
                    fresh += x * hb[a];
                    v[idx(a + 1, b, c)] = x * (1.0 - hb[a]);
                }
                v[idx(0, b, c)] = fresh;
            }
        }
        // reward e^{β δ̂ (δ + δ′)} at time k + 1
        for b in 0..=k + 1 {
            let f = if b == 0 { e2 } else { e1 };
            v[idx(0, b, 0)] *= f;
        }
        for a in 1..=k + 1 {
            v[idx(a, 0, 0)] *= e1;
        }
        let mut total = crate::special::CompensatedSum::new();
        for a in 0..=k + 1 {
            for b in 0..=k + 1 {
                for x in &v[idx(a, b, 0)..idx(a, b, 0) + k + 2] {
                    total.add(*x);
                }
            }
        }
        out[k + 1] = total.value();
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundednessReport {
    pub beta: f64,
    pub h: f64,
    pub n_grid: Vec<u64>,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub max_first_moment: f64,
    pub first_within_two: bool,
    /// (M(n_hi) − M(n_lo)) / M(n_lo) for the second moment over the window.
    pub window_growth: f64,
    /// Same growth for Ê(Z̄²)/(Ê Z̄)².
    pub ratio_window_growth: f64,
    pub window: (u64, u64),
}

/// First and second moments at the annealed critical point h_c^a(β).
pub fn boundedness_probe(
    base: &PowerLawRenewal,
    disorder: &PowerLawRenewal,
    beta: f64,
    n_grid: &[u64],
    window: (u64, u64),
) -> Result<BoundednessReport> {
    let hc = crate::annealed::annealed_critical_point(base, disorder, beta, 1e-12)?;
    if hc >= 0.0 {
        return domain("probe needs h_c^a(β) < 0");
    }
    let tilted = crate::renewal_core::tilt_law(base, hc)?;
    let n_max = n_grid.iter().copied().chain([window.1]).max().unwrap_or(0);
    let first = annealed_first_moment_dp(&tilted, disorder, beta, n_max)?;
    let second = second_moment_dp(&tilted, disorder, beta, n_max)?;
    let pick = |v: &[f64]| n_grid.iter().map(|n| v[*n as usize]).collect::<Vec<_>>();
    let (lo, hi) = window;
    let growth = (second[hi as usize] - second[lo as usize]) / second[lo as usize];
    let ratio = |m: u64| second[m as usize] / first[m as usize].powi(2);
    let max_first = first.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BoundednessReport {
        beta,
        h: hc,
        n_grid: n_grid.to_vec(),
        first_moment: pick(&first),
        second_moment: pick(&second),
        max_first_moment: max_first,
        first_within_two: max_first <= 2.0,
        window_growth: growth,
        ratio_window_growth: (ratio(hi) - ratio(lo)) / ratio(lo),
        window,
    })
}

impl BoundednessReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,beta,first_moment,second_moment\n");
        for ((n, f), s) in self.n_grid.iter().zip(&self.first_moment).zip(&self.second_moment) {
            out.push_str(&format!("{n},{},{f},{s}\n", self.beta));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal_core::{normalize_power_law, tilt_law, TabulatedLaw};

    #[test]
    fn gap_examples() {
        assert_eq!(gap_decompose(&[], &[1, 2]).count(), 0);
        assert_eq!(gap_decompose(&[3], &[3]).gaps, vec![0]);
        assert_eq!(gap_decompose(&[2, 5], &[3, 7]).gaps, vec![2, 2, 1]);
        assert_eq!(gap_decompose(&[3, 7], &[2, 5]).gaps, vec![2, 2, 1]);
    }

    #[test]
    fn degenerate_r_vanishes() {
        let t = decoupling_table(&TabulatedLaw::degenerate(), 50).unwrap();
        assert!(t.r.iter().all(|r| *r == 0.0));
        let d = normalize_power_law(0.8, 100).unwrap();
        assert!(r_function(&d, 3, 100).is_err());
    }

    #[test]
    fn equal_sets_bound() {
        let d = normalize_power_law(2.5, 200).unwrap();
        let t = decoupling_table(&d, 200).unwrap();
        let r = decoupling_check(&t, &[2, 5], &[2, 5]).unwrap();
        let ui = t.joint(&[2, 5]);
        assert!((r.lhs - ui).abs() < 1e-16);
        assert!((r.rhs - ui * ui * (1.0 + t.r[0]).powi(2)).abs() < 1e-15);
        assert!(r.holds);
        let e = decoupling_check(&t, &[4, 9], &[]).unwrap();
        assert_eq!(e.lhs, e.rhs);
    }

    #[test]
    fn single_site_second_order() {
        let b = tilt_law(&normalize_power_law(0.4, 100).unwrap(), -0.3).unwrap();
        let d = normalize_power_law(2.5, 100).unwrap();
        let beta: f64 = 0.7;
        let z = beta.exp_m1();
        let u1 = b.mass(1);
        let uh1 = d.mass(1);
        let want = 1.0 + 2.0 * z * u1 * uh1 + z * z * u1 * u1 * uh1;
        let got = moment_cluster_expansion(2, &b, &d, beta, 1).unwrap();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn expansions_match_enumeration() {
        let b = tilt_law(&normalize_power_law(0.3, 100).unwrap(), -0.2).unwrap();
        let d = normalize_power_law(2.5, 100).unwrap();
        for n in [1, 4, 8] {
            for order in [1, 2] {
                let e = moment_cluster_expansion(order, &b, &d, 0.4, n).unwrap();
                let o = enumerate_disorder_moment(order, &b, &d, 0.4, n).unwrap();
                assert!((e / o - 1.0).abs() < 1e-12, "{n} {order}");
            }
            let dp = annealed_first_moment_dp(&b, &d, 0.4, n).unwrap();
            let e = moment_cluster_expansion(1, &b, &d, 0.4, n).unwrap();
            assert!((dp[n as usize] / e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn first_moment_at_critical_point_counts_intersections() {
        // Z̄_n = (1 − e^{−β}) Σ_{m ≤ n} ũ(m) + e^{−β}, ũ the mass function of e^β f
        let base = normalize_power_law(0.7, 1_000_000).unwrap();
        let d = normalize_power_law(2.5, 1_000_000).unwrap();
        let beta: f64 = 0.05;
        let hc = crate::annealed::annealed_critical_point(&base, &d, beta, 1e-13).unwrap();
        let b = tilt_law(&base, hc).unwrap();
        let first = annealed_first_moment_dp(&b, &d, beta, 400).unwrap();
        let uh = mass_function_of(&b, 400).unwrap().values;
        let ud = mass_function_of(&d, 400).unwrap().values;
        let w: Vec<f64> = uh.iter().zip(&ud).map(|(x, y)| x * y).collect();
        let f: Vec<f64> = first_passage(&w).iter().map(|x| x * beta.exp()).collect();
        let mut ut = vec![1.0; 401];
        let mut cum = 1.0;
        for m in 1..=400 {
            ut[m] = (1..=m).map(|k| f[k] * ut[m - k]).sum();
            cum += ut[m];
            let want = -(-beta).exp_m1() * cum + (-beta).exp();
            assert!((first[m] / want - 1.0).abs() < 1e-8, "{m}");
        }
        assert!(first[400] > 2.0);
    }

    #[test]
    fn second_moment_dp_matches_expansion() {
        let b = tilt_law(&normalize_power_law(0.3, 100).unwrap(), -0.4).unwrap();
        let d = normalize_power_law(2.5, 100).unwrap();
        let dp = second_moment_dp(&b, &d, 0.1, 10).unwrap();
        let chain = second_moment_age_chain(&b, &d, 0.1, 40).unwrap();
        let long = second_moment_dp(&b, &d, 0.1, 40).unwrap();
        for (x, y) in chain.iter().zip(&long) {
            assert!((x / y - 1.0).abs() < 1e-12);
        }
        for n in 0..=10u64 {
            let e = moment_cluster_expansion(2, &b, &d, 0.1, n).unwrap();
            assert!((dp[n as usize] / e - 1.0).abs() < 1e-12, "{n}: {} {e}", dp[n as usize]);
        }
        let zero = second_moment_dp(&b, &d, 0.0, 10).unwrap();
        assert!(zero.iter().all(|x| (x - 1.0).abs() < 1e-13));
    }
}
