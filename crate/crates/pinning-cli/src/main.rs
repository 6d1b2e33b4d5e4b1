use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use renewal_pinning::runner::{self, Command, ExperimentConfig, Suite};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pinning", version, about = "Pinning models with renewal disorder")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Annealed critical curve h_c^a(β) with β₀ and the regime.
    AnnealedCurve(Common),
    /// Phase classification over an (α, α̂) grid.
    PhasePortrait(Common),
    /// Monte Carlo quenched free energy over an h grid.
    QuenchedMc(Common),
    /// First and second annealed moments at h_c^a.
    SecondMoment(Common),
    /// Fourier inversion against convolution for a tilted law.
    SpectralCheck(Common),
    /// Runs a verification suite; exits 1 when a check fails.
    Verify {
        #[command(flatten)]
        common: Common,
        /// oracles, inequalities, asymptotics, spectral, determinism or all
        #[arg(long)]
        suite: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// key=value config file; its `command` must match the subcommand
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// overrides the config seed
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

fn load(command: Command, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let cfg = ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
            if cfg.command != command {
                bail!("config is for `{}`, not `{}`", cfg.command.name(), command.name());
            }
            cfg
        }
        None => ExperimentConfig::defaults(command),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let (command, common, suite) = match &cli.command {
        Sub::AnnealedCurve(c) => (Command::AnnealedCurve, c, None),
        Sub::PhasePortrait(c) => (Command::PhasePortrait, c, None),
        Sub::QuenchedMc(c) => (Command::QuenchedMc, c, None),
        Sub::SecondMoment(c) => (Command::SecondMoment, c, None),
        Sub::SpectralCheck(c) => (Command::SpectralCheck, c, None),
        Sub::Verify { common, suite } => (Command::Verify, common, suite.as_deref()),
    };
    let mut cfg = load(command, common)?;
    if let Some(s) = suite {
        cfg.suite = Suite::parse(s)?;
    }
    if common.threads == Some(0) {
        bail!("--threads must be at least 1");
    }
    let output = runner::run(&cfg, common.threads)?;
    output
        .write_to(&common.out)
        .with_context(|| format!("writing to {}", common.out.display()))?;
    if command == Command::Verify {
        if let Some(f) = output.files.iter().find(|f| f.name == "verify.csv") {
            for row in f.contents.lines().skip(1) {
                let cols: Vec<&str> = row.split(',').collect();
                let verdict = if cols.get(2) == Some(&"true") { "PASS" } else { "FAIL" };
                println!("check {:>2} {:<34} {verdict}", cols[0], cols.get(1).unwrap_or(&""));
            }
        }
    }
    println!("{}", output.manifest.summary);
    for f in &output.files {
        eprintln!("wrote {}", common.out.join(&f.name).display());
    }
    eprintln!("wrote {}", common.out.join("manifest.json").display());
    Ok(ExitCode::from(output.exit_code as u8))
}
