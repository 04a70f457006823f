use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fqscale::config::{parse_seeds, ExperimentConfig, StrategyChoice};
use fqscale::formats::{self, QSnapshot};
use fqscale::harness::{self, HarnessError};
use fqscale_core::workload::Pattern;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Fuzzy Q-learning auto-scaling experiments on a simulated cluster.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a strategy x pattern x seed grid and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Restrict to one strategy: S1..S5 or azure.
        #[arg(long)]
        strategy: Option<StrategyChoice>,
        /// Restrict to one workload pattern.
        #[arg(long)]
        pattern: Option<Pattern>,
        /// Seeds as `a..b`, `a..=b` or a comma list.
        #[arg(long, value_parser = |s: &str| parse_seeds(s).map(Seeds))]
        seeds: Option<Seeds>,
        /// Output directory, overriding `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute reports from archived run logs.
    Report {
        #[arg(long)]
        logs: PathBuf,
        /// Also write the report files here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the greedy rule base of a Q-table snapshot.
    ExportRules {
        #[arg(long)]
        snapshot: PathBuf,
        /// Config whose rule base the snapshot belongs to; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

/// Parsed `--seeds`; a newtype so clap treats the list as one value.
#[derive(Clone)]
struct Seeds(Vec<u64>);

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path).map_err(|e| Failure::Config(e.to_string()))
}

fn run(
    config: &Path,
    strategy: Option<StrategyChoice>,
    pattern: Option<Pattern>,
    seeds: Option<Seeds>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut cfg = load(config)?;
    if let Some(s) = strategy {
        cfg.strategies = vec![s];
    }
    if let Some(p) = pattern {
        cfg.workload.pattern = Some(p);
    }
    if let Some(Seeds(s)) = seeds {
        cfg.seeds = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let cells = cfg.strategies.len() * cfg.patterns().len() * cfg.seeds.len();
    eprintln!("running {cells} runs into {}", cfg.out_dir.display());
    let archive = cfg.archive_logs.then_some(cfg.out_dir.as_path());
    let reports = harness::run_grid(&cfg, archive)?;
    harness::emit(&reports, Some(&cfg), &cfg.out_dir)?;
    print!("{}", harness::text_table(&reports));
    let failed: usize = reports.iter().map(|r| r.failures.len()).sum();
    if failed > 0 {
        for r in &reports {
            for (seed, e) in &r.failures {
                eprintln!("{} {} seed {seed}: {e}", r.strategy, r.pattern);
            }
        }
        return Err(Failure::Runtime(format!("{failed} of {cells} runs failed")));
    }
    Ok(())
}

fn report(logs: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let reports = harness::reports_from_logs(logs)?;
    if let Some(dir) = out {
        harness::emit(&reports, None, &dir)?;
    }
    print!("{}", harness::text_table(&reports));
    Ok(())
}

fn export_rules(snapshot: &Path, config: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = match config {
        Some(p) => load(&p)?,
        None => ExperimentConfig::default(),
    };
    let rules = cfg.rule_base().map_err(|e| Failure::Config(e.to_string()))?;
    let text = std::fs::read_to_string(snapshot)
        .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", snapshot.display())))?;
    let snap = QSnapshot::parse(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", snapshot.display())))?;
    let listing = formats::export_rules(&rules, &snap).map_err(|e| Failure::Runtime(e.to_string()))?;
    print!("{listing}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run { config, strategy, pattern, seeds, out } => run(&config, strategy, pattern, seeds, out),
        Command::Report { logs, out } => report(&logs, out),
        Command::ExportRules { snapshot, config } => export_rules(&snapshot, config),
        Command::DefaultConfig => {
            print!("{}", ExperimentConfig::default().to_toml());
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
