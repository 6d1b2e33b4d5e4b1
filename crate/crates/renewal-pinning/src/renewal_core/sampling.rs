use super::law::{InterArrival, PowerLawRenewal};
use crate::error::{domain, PinningError, Result};
use crate::special::hurwitz_tail;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent stream `index` of master seed `master`.
///
/// The master seed keys ChaCha8; the index is mixed through SplitMix64 and
/// used as the ChaCha stream id, so streams never overlap and results do not
/// depend on which worker runs which index.
pub fn rng_stream(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(splitmix64(index));
    rng
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverse-CDF sampler on the tabulated head with a continuous Pareto tail.
///
/// Draws beyond the horizon N use P(X > y) = (N/y)^{tail exponent} rounded up,
/// which matches the discrete tail only to leading order.
#[derive(Debug, Clone)]
pub struct InterArrivalSampler {
    cdf: Vec<f64>,
    head_mass: f64,
    tail_mass: f64,
    tail_exponent: f64,
    horizon: u64,
    offset: u64,
}

impl InterArrivalSampler {
    pub fn new(law: &PowerLawRenewal) -> Result<Self> {
        if !law.is_recurrent() {
            return Err(PinningError::Unsupported(
                "disorder must be a recurrent renewal".into(),
            ));
        }
        let n = law.horizon();
        let mut cdf = Vec::with_capacity(n as usize);
        let mut acc = 0.0;
        for j in 1..=n {
            acc += law.mass(j);
            cdf.push(acc);
        }
        let tail_mass = law.tail(n);
        Ok(Self {
            head_mass: acc,
            cdf,
            tail_mass,
            tail_exponent: law.exponent(),
            horizon: n,
            offset: 1,
        })
    }

    fn from_weights(weights: Vec<f64>, tail_mass: f64, tail_exponent: f64, offset: u64) -> Self {
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cdf.push(acc);
        }
        Self {
            head_mass: acc,
            horizon: weights.len() as u64 + offset - 1,
            cdf,
            tail_mass,
            tail_exponent,
            offset,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let total = self.head_mass + self.tail_mass;
        let u: f64 = rng.gen::<f64>() * total;
        if u < self.head_mass {
            // first index with cdf > u: half-open [cdf(n−1), cdf(n))
            let idx = self.cdf.partition_point(|c| *c <= u);
            return idx.min(self.cdf.len() - 1) as u64 + self.offset;
        }
        let v = ((u - self.head_mass) / self.tail_mass).clamp(0.0, 1.0);
        let n = self.horizon as f64;
        let x = n * (1.0 - v).max(f64::MIN_POSITIVE).powf(-1.0 / self.tail_exponent);
        let k = x.ceil();
        if k >= 9.0e18 {
            return u64::MAX / 4;
        }
        (k as u64).max(self.horizon + 1)
    }
}

/// Hit set of τ̂ restricted to [0, window].
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderPath {
    window: u64,
    hits: Vec<u64>,
    indicator: Vec<bool>,
}

impl DisorderPath {
    pub fn from_hits(window: u64, mut hits: Vec<u64>) -> Self {
        hits.retain(|h| *h <= window);
        hits.sort_unstable();
        hits.dedup();
        let mut indicator = vec![false; window as usize + 1];
        for h in &hits {
            indicator[*h as usize] = true;
        }
        Self { window, hits, indicator }
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn hits(&self) -> &[u64] {
        &self.hits
    }

    pub fn contains(&self, k: u64) -> bool {
        self.indicator.get(k as usize).copied().unwrap_or(false)
    }

    pub fn indicators(&self) -> &[bool] {
        &self.indicator
    }

    /// |τ̂ ∩ [1, n]|.
    pub fn count_up_to(&self, n: u64) -> usize {
        self.hits.partition_point(|h| *h <= n) - usize::from(self.contains(0))
    }

    pub fn sample_with<R: Rng + ?Sized>(
        sampler: &InterArrivalSampler,
        window: u64,
        delay: Option<&StationaryDelay>,
        rng: &mut R,
    ) -> Self {
        let mut hits = Vec::new();
        let mut pos = match delay {
            Some(d) => d.sampler.sample(rng),
            None => 0,
        };
        while pos <= window {
            hits.push(pos);
            pos = pos.saturating_add(sampler.sample(rng));
        }
        Self::from_hits(window, hits)
    }
}

pub fn sample_path(law: &PowerLawRenewal, window: u64, seed: u64) -> Result<DisorderPath> {
    let sampler = InterArrivalSampler::new(law)?;
    let mut rng = rng_stream(seed, 0);
    Ok(DisorderPath::sample_with(&sampler, window, None, &mut rng))
}

/// Delay law of the stationary renewal: P(τ̂_0 = n) = P̂(τ̂_1 > n)/μ̂, n ≥ 0.
#[derive(Debug, Clone)]
pub struct StationaryDelay {
    pub weights: Vec<f64>,
    pub tail_mass: f64,
    sampler: InterArrivalSampler,
}

pub fn stationary_delay(law: &PowerLawRenewal) -> Result<StationaryDelay> {
    let a = law.exponent();
    if a <= 1.0 || !law.is_recurrent() {
        return domain("stationary delay requires a finite mean");
    }
    let mean = law.mean();
    let n = law.horizon();
    let mut weights = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        weights.push(law.survival(k) / mean);
    }
    // Σ_{k>N} P(τ_1 > k) = Σ_{j ≥ N+2} (j − N − 1) K(j)
    let c = law.prefactor();
    let tail_mass = c * (hurwitz_tail(a, n + 2) - (n + 1) as f64 * hurwitz_tail(1.0 + a, n + 2)) / mean;
    let sampler = InterArrivalSampler::from_weights(weights.clone(), tail_mass, a - 1.0, 0);
    Ok(StationaryDelay { weights, tail_mass, sampler })
}

impl StationaryDelay {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.tail_mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sampler.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal_core::{normalize_power_law, tilt_law};

    #[test]
    fn zero_window_is_origin() {
        let law = normalize_power_law(1.5, 100).unwrap();
        let p = sample_path(&law, 0, 3).unwrap();
        assert_eq!(p.hits(), &[0]);
    }

    #[test]
    fn same_seed_same_path() {
        let law = normalize_power_law(0.6, 1000).unwrap();
        let a = sample_path(&law, 5000, 42).unwrap();
        let b = sample_path(&law, 5000, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_path(&law, 5000, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn transient_law_refused() {
        let law = tilt_law(&normalize_power_law(1.5, 100).unwrap(), -0.1).unwrap();
        assert!(matches!(sample_path(&law, 10, 1), Err(PinningError::Unsupported(_))));
    }

    #[test]
    fn streams_differ() {
        let a: u64 = rng_stream(7, 0).gen();
        let b: u64 = rng_stream(7, 1).gen();
        assert_ne!(a, b);
    }

    #[test]
    fn delay_normalized() {
        let law = normalize_power_law(2.5, 4000).unwrap();
        let d = stationary_delay(&law).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-12, "{}", d.total() - 1.0);
        assert!((d.weights[0] - 1.0 / law.mean()).abs() < 1e-15);
        assert!(stationary_delay(&normalize_power_law(0.8, 100).unwrap()).is_err());
    }
}
