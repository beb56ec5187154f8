use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sysrel::config::AnalysisConfig;
use sysrel::report::{reference_estimate, repeat_runs, run_config};
use sysrel::Result;

#[derive(Parser)]
#[command(name = "sysrel", version, about = "Active-learning system reliability analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run the active-learning analysis.
    Run {
        config: PathBuf,
        /// Replace the configured seeds by the split of this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// `json` writes the full report, `csv` the iteration history.
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Output file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Subset simulation on the true limit states with the `sus_final` settings.
    Reference {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Independent repetitions to average.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run with seeds `seed, seed + 1, …` and summarise the spread.
    Repeat {
        config: PathBuf,
        #[arg(long, short = 'n', default_value_t = 15)]
        n: usize,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `json` prints the table and writes the full summary to `--out`; `csv` prints one row per seed.
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| sysrel::Error::Io(format!("{}: {e}", path.display()))),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<AnalysisConfig> {
    let mut cfg = AnalysisConfig::load(path)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, seed, format, out } => {
            let cfg = load(&config, seed)?;
            cfg.validate()?;
            let doc = run_config(&cfg)?;
            let r = &doc.report;
            eprintln!(
                "{}: beta {:.4} pf {:.4e} evaluations {} ({:?}) iterations {} converged {}",
                r.problem, r.beta, r.pf, r.total_evaluations, r.evaluations, r.iterations, r.converged
            );
            let text = match format {
                Format::Json => doc.to_json(),
                Format::Csv => doc.history_csv(),
            };
            emit(&text, out.as_deref())?;
            Ok(if r.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Reference { config, seed, repeats, out } => {
            let cfg = load(&config, seed)?;
            let est = reference_estimate(&cfg, repeats)?;
            emit(&serde_json::to_string_pretty(&est).expect("estimate serialises"), out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Repeat { config, n, seed, format, out } => {
            let cfg = load(&config, None)?;
            cfg.validate()?;
            let summary = repeat_runs(&cfg, n, seed)?;
            match format {
                Format::Json => {
                    println!("{}", summary.table().trim_end());
                    if let Some(path) = out {
                        emit(&serde_json::to_string_pretty(&summary).expect("summary serialises"), Some(&path))?;
                    }
                }
                Format::Csv => emit(&summary.csv(), out.as_deref())?,
            }
            let all = summary.runs.iter().all(|r| r.converged);
            Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Validate { config } => {
            let cfg = load(&config, None)?;
            let (problem, _) = cfg.build()?;
            println!(
                "ok: {} with {} inputs and {} components",
                problem.name,
                problem.input_names.len(),
                problem.n_components()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
