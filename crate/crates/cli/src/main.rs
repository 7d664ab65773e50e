use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sqlab_cli::commands;
use sqlab_cli::report::write_transcripts;
use sqlab_cli::{ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "sqlab", version, about = "Statistical-query experiments on quantum states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exhaustive and Monte Carlo checks of the correlation and loss identities.
    VerifyLemmas(Common),
    /// Learn random product (or basis) states through the SQ oracle.
    LearnProduct(Common),
    /// Planted LPN through the parity-measurement embedding.
    Lpn(Common),
    /// Average correlation and statistical dimension of the stabilizer class.
    Sda(Common),
    /// Noisy oracles with and without correction, plus the rate search.
    NoiseDemo(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Number of qubits, when no config is given.
    #[arg(long)]
    n: Option<usize>,
    /// Write oracle transcripts as JSON lines.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let (kind, args) = match cli.command {
        Command::VerifyLemmas(a) => (ExperimentKind::VerifyLemmas, a),
        Command::LearnProduct(a) => (ExperimentKind::LearnProduct, a),
        Command::Lpn(a) => (ExperimentKind::Lpn, a),
        Command::Sda(a) => (ExperimentKind::Sda, a),
        Command::NoiseDemo(a) => (ExperimentKind::NoiseDemo, a),
    };
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(kind),
    };
    if cfg.experiment != kind {
        bail!("config is for {:?}, not {kind:?}", cfg.experiment);
    }
    if let Some(n) = args.n {
        if args.config.is_some() && n != cfg.n {
            bail!("--n {n} conflicts with n = {} in the config", cfg.n);
        }
        cfg.n = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    if args.print_config {
        println!("{}", cfg.to_json());
        return Ok(true);
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        if j == 0 {
            bail!("--jobs must be positive");
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().context("starting worker pool")?;
    let start = Instant::now();
    let mut outcome = pool.install(|| commands::run(&cfg))?;
    outcome.report.runtime_ms = start.elapsed().as_millis() as u64;

    let text = outcome.report.to_json();
    match args.out.as_ref().or(cfg.output.as_ref()) {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    if let Some(p) = &args.transcripts {
        let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_transcripts(&outcome.transcripts, BufWriter::new(f))?;
    }
    for a in &outcome.report.assertions {
        eprintln!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    Ok(outcome.report.passed)
}
