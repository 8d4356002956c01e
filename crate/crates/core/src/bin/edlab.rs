use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use edlab::evolution::Backend;
use edlab::io::run::write_failure_summary;
use edlab::io::{parse_config, run_experiment, run_verify, Command, ExperimentConfig, IoError, EXIT_CHECK};

#[derive(Parser)]
#[command(name = "edlab", version, about = "Shifted Schrödinger evolution, best matching and ontic sampling on periodic grids")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configured one.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Sampler seed, overriding the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 picks the core count. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true)]
    backend: Option<BackendArg>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Evolve the configured state and record observables.
    Evolve,
    /// Compute the best-matching shift of the initial state.
    BestMatch,
    /// Evolve and sample an ontic trajectory ensemble.
    Sample,
    /// Evolve in label time under the configured lapse.
    Parametrized,
    /// Run the invariant suite (built-in, or run-specific with --config).
    Verify,
    /// Print the fully resolved configuration.
    DescribeConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Cn,
    Split,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Cn => Backend::CrankNicolson,
            BackendArg::Split => Backend::SplitStep,
        }
    }
}

fn init_logging() {
    let level = std::env::var("ED_LOG_LEVEL").unwrap_or_else(|_| "warn".into());
    env_logger::Builder::new().parse_filters(&level).format_timestamp(None).init();
}

fn load(cli: &Cli) -> Result<Option<ExperimentConfig>, IoError> {
    let Some(path) = &cli.config else { return Ok(None) };
    let mut cfg = parse_config(path)?;
    if let Some(dir) = &cli.output {
        cfg.output.directory = std::path::absolute(dir).unwrap_or_else(|_| dir.clone());
    }
    if let Some(b) = cli.backend {
        cfg.solver.backend = b.into();
    }
    if let (Some(seed), Some(s)) = (cli.seed, cfg.sampler.as_mut()) {
        s.seed = seed;
    }
    Ok(Some(cfg))
}

fn require(cfg: Option<ExperimentConfig>) -> Result<ExperimentConfig, IoError> {
    cfg.ok_or_else(|| IoError::Validation(vec![edlab::io::Violation {
        field: "--config".into(),
        constraint: "required for this subcommand".into(),
    }]))
}

fn run(cli: &Cli) -> Result<(), IoError> {
    let cfg = load(cli)?;
    let command = match cli.command {
        Sub::DescribeConfig => {
            print!("{}", require(cfg)?.to_toml());
            return Ok(());
        }
        Sub::Verify => {
            let out = match (&cli.output, &cfg) {
                (Some(dir), _) => dir.clone(),
                (None, Some(c)) => c.resolve_path(&c.output.directory),
                (None, None) => PathBuf::from("verify-output"),
            };
            std::fs::create_dir_all(&out).map_err(|e| IoError::Io { path: out.clone(), message: e.to_string() })?;
            let seed = cli.seed.or(cfg.as_ref().and_then(|c| c.sampler.as_ref().map(|s| s.seed))).unwrap_or(0);
            let outcome = run_verify(cfg.as_ref(), seed, &out)?;
            for c in &outcome.checks {
                println!(
                    "{} {:<24} value {:.3e} bound {:.1e}  {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.bound,
                    c.detail
                );
            }
            return if outcome.passed() { Ok(()) } else { Err(IoError::CheckFailed(outcome.failures())) };
        }
        Sub::Evolve => Command::Evolve,
        Sub::BestMatch => Command::BestMatch,
        Sub::Sample => Command::Sample,
        Sub::Parametrized => Command::Parametrized,
    };
    let cfg = require(cfg)?;
    let dir = cfg.resolve_path(&cfg.output.directory);
    match run_experiment(&cfg, command) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string(&outcome.summary).unwrap_or_default());
            Ok(())
        }
        Err(e) => {
            // summary.json already records failed checks
            if e.exit_code() != EXIT_CHECK {
                write_failure_summary(&dir, command.name(), &e);
            }
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "status": "error", "kind": e.kind(), "exit_code": e.exit_code(), "message": e.to_string() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
