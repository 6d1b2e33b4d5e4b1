//! Flat `key=value` experiment configuration.

use crate::error::{PinningError, Result};
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    AnnealedCurve,
    PhasePortrait,
    QuenchedMc,
    SecondMoment,
    SpectralCheck,
    Verify,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::AnnealedCurve,
        Command::PhasePortrait,
        Command::QuenchedMc,
        Command::SecondMoment,
        Command::SpectralCheck,
        Command::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::AnnealedCurve => "annealed-curve",
            Command::PhasePortrait => "phase-portrait",
            Command::QuenchedMc => "quenched-mc",
            Command::SecondMoment => "second-moment",
            Command::SpectralCheck => "spectral-check",
            Command::Verify => "verify",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| PinningError::Config(format!("unknown command `{s}`")))
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Command::QuenchedMc | Command::Verify)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Oracles,
    Inequalities,
    Asymptotics,
    Spectral,
    Determinism,
    All,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Oracles, Suite::Inequalities, Suite::Asymptotics, Suite::Spectral, Suite::Determinism, Suite::All];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Oracles => "oracles",
            Suite::Inequalities => "inequalities",
            Suite::Asymptotics => "asymptotics",
            Suite::Spectral => "spectral",
            Suite::Determinism => "determinism",
            Suite::All => "all",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| PinningError::Config(format!("unknown suite `{s}`")))
    }
}

/// `lo:hi:points`, evenly spaced and inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        let g = Self { lo, hi, points };
        g.validate("grid")?;
        Ok(g)
    }

    pub fn single(x: f64) -> Self {
        Self { lo: x, hi: x, points: 1 }
    }

    fn validate(&self, key: &str) -> Result<()> {
        let ok = self.points >= 1
            && self.lo.is_finite()
            && self.hi.is_finite()
            && self.lo <= self.hi
            && (self.points > 1 || self.lo == self.hi);
        if ok {
            Ok(())
        } else {
            Err(PinningError::Config(format!("{key}: empty or malformed range")))
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }

    fn parse(key: &str, s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let g = match parts.as_slice() {
            [x] => Self::single(parse_f64(key, x)?),
            [lo, hi, n] => Self {
                lo: parse_f64(key, lo)?,
                hi: parse_f64(key, hi)?,
                points: n.trim().parse().map_err(|_| bad(key, s))?,
            },
            _ => return Err(bad(key, s)),
        };
        g.validate(key)?;
        Ok(g)
    }

    fn text(&self) -> String {
        format!("{:?}:{:?}:{}", self.lo, self.hi, self.points)
    }
}

fn bad(key: &str, value: &str) -> PinningError {
    PinningError::Config(format!("{key}: cannot parse `{value}`"))
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    let x: f64 = s.trim().parse().map_err(|_| bad(key, s))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad(key, s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub alpha: f64,
    pub alpha_hat: f64,
    pub beta_grid: Grid,
    pub h_grid: Grid,
    pub alpha_grid: Grid,
    pub alpha_hat_grid: Grid,
    pub theta: f64,
    pub n: u64,
    pub replicas: usize,
    pub horizon: u64,
    pub seed: Option<u64>,
    pub tol: f64,
    pub suite: Suite,
    pub evidence: bool,
}

const KEYS: [&str; 15] = [
    "command",
    "alpha",
    "alpha_hat",
    "beta_grid",
    "h_grid",
    "alpha_grid",
    "alpha_hat_grid",
    "theta",
    "n",
    "replicas",
    "horizon",
    "seed",
    "tol",
    "suite",
    "evidence",
];

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            alpha: 0.6,
            alpha_hat: 2.5,
            beta_grid: Grid { lo: 0.0, hi: 3.0, points: 31 },
            h_grid: Grid::single(0.0),
            alpha_grid: Grid { lo: 0.1, hi: 1.9, points: 10 },
            alpha_hat_grid: Grid { lo: 0.1, hi: 2.9, points: 15 },
            theta: 0.0,
            n: 1000,
            replicas: 64,
            horizon: 1_000_000,
            seed: None,
            tol: 1e-10,
            suite: Suite::All,
            evidence: false,
        }
    }

    /// Parses the text form. `command` must come first; every other key is
    /// optional, unknown and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut cfg: Option<Self> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PinningError::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(PinningError::Config(format!("unknown key `{key}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(PinningError::Config(format!("duplicate key `{key}`")));
            }
            if key == "command" {
                if cfg.is_some() {
                    return Err(PinningError::Config("`command` must be the first key".into()));
                }
                cfg = Some(Self::defaults(Command::parse(value)?));
                continue;
            }
            let c = cfg
                .as_mut()
                .ok_or_else(|| PinningError::Config("`command` must be the first key".into()))?;
            let int = |v: &str| v.parse::<u64>().map_err(|_| bad(key, v));
            match key {
                "alpha" => c.alpha = parse_f64(key, value)?,
                "alpha_hat" => c.alpha_hat = parse_f64(key, value)?,
                "beta_grid" => c.beta_grid = Grid::parse(key, value)?,
                "h_grid" => c.h_grid = Grid::parse(key, value)?,
                "alpha_grid" => c.alpha_grid = Grid::parse(key, value)?,
                "alpha_hat_grid" => c.alpha_hat_grid = Grid::parse(key, value)?,
                "theta" => c.theta = parse_f64(key, value)?,
                "n" => c.n = int(value)?,
                "replicas" => c.replicas = int(value)? as usize,
                "horizon" => c.horizon = int(value)?,
                "seed" => c.seed = Some(int(value)?),
                "tol" => c.tol = parse_f64(key, value)?,
                "suite" => c.suite = Suite::parse(value)?,
                "evidence" => {
                    c.evidence = match value {
                        "true" => true,
                        "false" => false,
                        _ => return Err(bad(key, value)),
                    }
                }
                _ => unreachable!(),
            }
        }
        let c = cfg.ok_or_else(|| PinningError::Config("missing `command`".into()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(PinningError::Config(m.into()));
        if !(self.alpha > 0.0 && self.alpha_hat > 0.0) {
            return err("exponents must be positive");
        }
        if !(self.tol > 0.0) {
            return err("tol must be positive");
        }
        if self.horizon == 0 {
            return err("horizon must be positive");
        }
        for (k, g) in [
            ("beta_grid", &self.beta_grid),
            ("h_grid", &self.h_grid),
            ("alpha_grid", &self.alpha_grid),
            ("alpha_hat_grid", &self.alpha_hat_grid),
        ] {
            g.validate(k)?;
        }
        if self.command.is_stochastic() && self.seed.is_none() {
            return err("a seed is required for stochastic commands");
        }
        Ok(())
    }

    /// Every key in fixed order; floats in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        put("command", self.command.name().into());
        put("alpha", format!("{:?}", self.alpha));
        put("alpha_hat", format!("{:?}", self.alpha_hat));
        put("beta_grid", self.beta_grid.text());
        put("h_grid", self.h_grid.text());
        put("alpha_grid", self.alpha_grid.text());
        put("alpha_hat_grid", self.alpha_hat_grid.text());
        put("theta", format!("{:?}", self.theta));
        put("n", self.n.to_string());
        put("replicas", self.replicas.to_string());
        put("horizon", self.horizon.to_string());
        if let Some(s) = self.seed {
            put("seed", s.to_string());
        }
        put("tol", format!("{:?}", self.tol));
        put("suite", self.suite.name().into());
        put("evidence", self.evidence.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::defaults(Command::QuenchedMc);
        c.seed = Some(u64::MAX);
        c.alpha = 0.1 + 0.2;
        c.h_grid = Grid::new(-0.3, 1e-300, 7).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn strictness() {
        assert!(ExperimentConfig::parse("command=verify\nseed=1\nbogus=2\n").is_err());
        assert!(ExperimentConfig::parse("command=verify\nseed=1\nseed=2\n").is_err());
        assert!(ExperimentConfig::parse("alpha=0.3\ncommand=verify\n").is_err());
        assert!(ExperimentConfig::parse("command=quenched-mc\n").is_err());
        assert!(ExperimentConfig::parse("command=annealed-curve\nbeta_grid=1:0:3\n").is_err());
        assert!(ExperimentConfig::parse("command=annealed-curve\nbeta_grid=1:2:1\n").is_err());
        assert!(ExperimentConfig::parse("command=verify\nseed=3\nsuite=everything\n").is_err());
        let c = ExperimentConfig::parse("# sweep\ncommand=annealed-curve\n\nbeta_grid = 0:1:3\n").unwrap();
        assert_eq!(c.beta_grid.values(), vec![0.0, 0.5, 1.0]);
    }
}
