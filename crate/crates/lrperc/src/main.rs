use clap::Parser;
use lrperc::cli::{self, ExperimentConfig};
use lrperc::exploration::AssertLevel;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Long-range percolation experiments driven by a declarative config.
#[derive(Parser, Debug)]
#[command(name = "lrperc", version)]
struct Args {
    /// Path to the experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed override, decimal or 0x-prefixed hex.
    #[arg(long)]
    seed: Option<String>,
    /// Worker pool size (defaults to the number of cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Assertion level override: off, lemma-checks, full-trace.
    #[arg(long = "assert", value_enum)]
    assert_level: Option<AssertLevelArg>,
    /// Output path override ("-" for stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum AssertLevelArg {
    Off,
    LemmaChecks,
    FullTrace,
}

impl From<AssertLevelArg> for AssertLevel {
    fn from(a: AssertLevelArg) -> Self {
        match a {
            AssertLevelArg::Off => AssertLevel::Off,
            AssertLevelArg::LemmaChecks => AssertLevel::LemmaChecks,
            AssertLevelArg::FullTrace => AssertLevel::FullTrace,
        }
    }
}

fn run(args: Args) -> lrperc::Result<bool> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut config = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = &args.seed {
        config.seed = Some(cli::parse_seed(seed)?);
    }
    if let Some(level) = args.assert_level {
        config.assert_level = Some(level.into());
    }
    if let Some(workers) = args.workers.or(config.workers) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| lrperc::Error::Config(format!("worker pool: {e}")))?;
    }
    let started = Instant::now();
    let doc = cli::run_command(&config)?;
    let wall = started.elapsed();
    let out = args.out.as_ref().or(config.out.as_ref());
    cli::write_document(&doc, out)?;
    eprintln!(
        "lrperc: {:?} finished in {:.3}s (digest {})",
        config.command,
        wall.as_secs_f64(),
        doc.config_digest
    );
    let accept_ok = doc
        .results
        .get("all_passed")
        .and_then(|v| v.as_bool())
        .unwrap_or(true);
    Ok(accept_ok)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("lrperc: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
