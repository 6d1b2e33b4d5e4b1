//! Experiment orchestration: one entry point per CLI subcommand, each
//! producing CSV files plus a JSON manifest.

pub mod config;
pub mod verify;

pub use config::{Command, ExperimentConfig, Grid, Suite};

use crate::annealed::{annealed_curve, gamma_ann_scaling_fit, scaling_regime, ScalingRegime};
use crate::error::{PinningError, Result};
use crate::moments_gaps::boundedness_probe;
use crate::quenched::{quenched_free_energy_mc, QUENCHED_CSV_HEADER};
use crate::renewal_core::{normalize_power_law, PowerLawRenewal};
use crate::spectral::{inversion_vs_convolution, tilted_recurrent};
use crate::stats::log_grid;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: String,
    pub outputs: Vec<FileDigest>,
    pub summary: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<OutputFile>,
    pub manifest: Manifest,
    pub exit_code: i32,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunOutput {
    pub fn manifest_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for f in &self.files {
            std::fs::write(dir.join(&f.name), &f.contents)?;
        }
        std::fs::write(dir.join("manifest.json"), self.manifest_json())
    }
}

struct Produced {
    files: Vec<OutputFile>,
    summary: Value,
    exit_code: i32,
}

fn file(name: &str, contents: String) -> OutputFile {
    OutputFile { name: name.into(), contents }
}

/// Runs the configured command, on a pool of `threads` workers when given.
pub fn run(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunOutput> {
    config.validate()?;
    let produced = match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| PinningError::Config(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(config))?
        }
        None => dispatch(config)?,
    };
    let text = config.to_text();
    let manifest = Manifest {
        command: config.command.name().into(),
        version: VERSION.into(),
        seed: config.seed,
        config_sha256: sha256_hex(text.as_bytes()),
        config: text,
        outputs: produced
            .files
            .iter()
            .map(|f| FileDigest { name: f.name.clone(), sha256: sha256_hex(f.contents.as_bytes()) })
            .collect(),
        summary: produced.summary,
    };
    Ok(RunOutput { files: produced.files, manifest, exit_code: produced.exit_code })
}

fn dispatch(c: &ExperimentConfig) -> Result<Produced> {
    match c.command {
        Command::AnnealedCurve => run_annealed_curve(c),
        Command::PhasePortrait => run_phase_portrait(c),
        Command::QuenchedMc => run_quenched_mc(c),
        Command::SecondMoment => run_second_moment(c),
        Command::SpectralCheck => run_spectral_check(c),
        Command::Verify => run_verify(c),
    }
}

fn laws(c: &ExperimentConfig) -> Result<(PowerLawRenewal, PowerLawRenewal)> {
    Ok((normalize_power_law(c.alpha, c.horizon)?, normalize_power_law(c.alpha_hat, c.horizon)?))
}

fn regime_label(r: &Result<ScalingRegime>) -> &'static str {
    match r {
        Ok(ScalingRegime::FiniteMean) => "finite-mean",
        Ok(ScalingRegime::InfiniteMean) => "infinite-mean",
        Ok(ScalingRegime::PositiveBetaZero) => "positive-beta0",
        Err(PinningError::Boundary(_)) => "boundary",
        Err(_) => "log-corrected",
    }
}

fn run_annealed_curve(c: &ExperimentConfig) -> Result<Produced> {
    let (base, disorder) = laws(c)?;
    let betas = c.beta_grid.values();
    if betas.iter().any(|b| *b < 0.0) {
        return Err(PinningError::Config("beta_grid must be non-negative".into()));
    }
    let curve = annealed_curve(&base, &disorder, &betas)?;
    let regime = scaling_regime(&base, &disorder);
    let label = regime_label(&regime);
    let gamma = match &regime {
        Ok(_) => match gamma_ann_scaling_fit(&base, &disorder, &log_grid(1e-4, 1e-2, 12)) {
            Ok(f) => json!({ "slope": f.fit.slope, "stderr": f.fit.stderr }),
            Err(e) => json!(format!("not fitted: {e}")),
        },
        Err(_) => json!("log-corrected, not fitted"),
    };
    let violation = curve.concavity_violation();
    let summary = json!({
        "beta0": curve.beta0,
        "regime": label,
        "concavity_violation": if violation.is_finite() { json!(violation) } else { Value::Null },
        "concave": !(violation > c.tol),
        "gamma_ann": gamma,
    });
    Ok(Produced { files: vec![file("annealed_curve.csv", curve.to_csv(label))], summary, exit_code: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    RelevantSmoothing,
    TriviallyRelevant,
    Irrelevant,
    Unknown,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::RelevantSmoothing => "relevant-smoothing",
            Classification::TriviallyRelevant => "trivially-relevant",
            Classification::Irrelevant => "irrelevant",
            Classification::Unknown => "unknown",
        }
    }
}

/// Proven statements only; boundaries of every region are left unknown.
pub fn classify(alpha: f64, alpha_hat: f64) -> Classification {
    let (a, ah) = (alpha, alpha_hat);
    if a + ah < 1.0 {
        Classification::Irrelevant
    } else if ah < 1.0 && a + ah > 1.0 {
        Classification::TriviallyRelevant
    } else if ah > 2.0 && a < 0.5 {
        Classification::Irrelevant
    } else if (ah > 2.0 && a > 0.5) || (ah > 1.0 && ah < 2.0 && a > 1.0 / ah) {
        Classification::RelevantSmoothing
    } else {
        Classification::Unknown
    }
}

/// Chaos-expansion boundary α = 1 − 1/(α̂ ∧ 2); only claims irrelevance
/// inside α ∈ (0, 1), α̂ ∈ (1, 2).
pub fn conjecture(alpha: f64, alpha_hat: f64) -> &'static str {
    let line = 1.0 - 1.0 / alpha_hat.min(2.0);
    if alpha > line {
        "relevant"
    } else if alpha < line && alpha < 1.0 && alpha_hat > 1.0 && alpha_hat < 2.0 {
        "irrelevant"
    } else {
        "none"
    }
}

fn run_phase_portrait(c: &ExperimentConfig) -> Result<Produced> {
    let alphas = c.alpha_grid.values();
    let alpha_hats = c.alpha_hat_grid.values();
    if alphas.iter().chain(&alpha_hats).any(|x| *x <= 0.0) {
        return Err(PinningError::Config("exponent grids must be positive".into()));
    }
    let cells: Vec<(f64, f64)> =
        alphas.iter().flat_map(|a| alpha_hats.iter().map(move |ah| (*a, *ah))).collect();
    let beta = c.beta_grid.lo;
    let n = c.n.min(300);
    let rows: Vec<String> = cells
        .par_iter()
        .map(|&(a, ah)| {
            let evidence = if c.evidence && n >= 4 {
                normalize_power_law(a, c.horizon)
                    .and_then(|b| Ok((b, normalize_power_law(ah, c.horizon)?)))
                    .and_then(|(b, d)| boundedness_probe(&b, &d, beta, &[n], (n / 2, n)))
                    .map(|r| r.window_growth.to_string())
                    .unwrap_or_default()
            } else {
                String::new()
            };
            format!("{a},{ah},{},{},{evidence}\n", classify(a, ah).name(), conjecture(a, ah))
        })
        .collect();
    let mut csv = String::from("alpha,alpha_hat,classification,conjecture,second_moment_growth\n");
    rows.iter().for_each(|r| csv.push_str(r));
    let mut counts = serde_json::Map::new();
    for (a, ah) in &cells {
        let k = classify(*a, *ah).name();
        let v = counts.get(k).and_then(Value::as_u64).unwrap_or(0);
        counts.insert(k.into(), json!(v + 1));
    }
    Ok(Produced {
        files: vec![file("phase_portrait.csv", csv)],
        summary: json!({ "cells": cells.len(), "counts": counts }),
        exit_code: 0,
    })
}

fn run_quenched_mc(c: &ExperimentConfig) -> Result<Produced> {
    let (base, disorder) = laws(c)?;
    let seed = c.seed.expect("validated");
    let mut csv = String::from(QUENCHED_CSV_HEADER);
    let mut cells = 0;
    for beta in c.beta_grid.values() {
        for h in c.h_grid.values() {
            let est = quenched_free_energy_mc(&base, &disorder, beta, h, c.n, c.replicas, seed)?;
            csv.push_str(&est.csv_row(beta, h, seed));
            cells += 1;
        }
    }
    Ok(Produced {
        files: vec![file("quenched_mc.csv", csv)],
        summary: json!({ "cells": cells, "n": c.n, "replicas": c.replicas }),
        exit_code: 0,
    })
}

fn run_second_moment(c: &ExperimentConfig) -> Result<Produced> {
    let (base, disorder) = laws(c)?;
    if c.n < 4 {
        return Err(PinningError::Config("second-moment needs n ≥ 4".into()));
    }
    let grid: Vec<u64> = (1..=c.n).collect();
    let mut csv = String::from("n,beta,first_moment,second_moment\n");
    let mut per_beta = Vec::new();
    for beta in c.beta_grid.values() {
        let r = boundedness_probe(&base, &disorder, beta, &grid, (c.n / 2, c.n))?;
        csv.push_str(r.to_csv().split_once('\n').map(|x| x.1).unwrap_or(""));
        per_beta.push(json!({
            "beta": beta,
            "h_c_a": r.h,
            "max_first_moment": r.max_first_moment,
            "first_within_two": r.first_within_two,
            "window": [r.window.0, r.window.1],
            "window_growth": r.window_growth,
            "ratio_window_growth": r.ratio_window_growth,
        }));
    }
    Ok(Produced { files: vec![file("second_moment.csv", csv)], summary: json!({ "probes": per_beta }), exit_code: 0 })
}

fn run_spectral_check(c: &ExperimentConfig) -> Result<Produced> {
    let base = normalize_power_law(c.alpha, c.horizon)?;
    let law = tilted_recurrent(&base, c.theta)?;
    let cmp = inversion_vs_convolution(&law, c.n)?;
    let summary = json!({
        "alpha": c.alpha,
        "theta": c.theta,
        "n_max": c.n,
        "max_abs_diff": cmp.max_abs_diff,
    });
    Ok(Produced { files: vec![file("spectral_check.csv", cmp.to_csv())], summary, exit_code: 0 })
}

fn run_verify(c: &ExperimentConfig) -> Result<Produced> {
    let report = verify::run_suite(c.suite, c.seed.expect("validated"), &verify::VerifyOptions::default());
    let mut csv = String::from("id,name,passed\n");
    for r in &report.checks {
        csv.push_str(&format!("{},{},{}\n", r.id, r.name, r.passed));
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    Ok(Produced {
        files: vec![file("verify.csv", csv), file("verify_report.json", json)],
        summary: json!({ "suite": c.suite.name(), "passed": report.all_passed() }),
        exit_code: if report.all_passed() { 0 } else { 1 },
    })
}
