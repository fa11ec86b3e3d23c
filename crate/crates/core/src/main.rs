use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rlwindow::harness::{self, ConfigError, HarnessError, RunConfig, StreamConfig, ABLATION_NAMES};
use rlwindow::stream::write_csv_stream;

#[derive(Parser)]
#[command(name = "rlwindow", version, about = "Learned sliding-window sizing for data streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Replace the configured seed list with this single seed.
    #[arg(long)]
    seed_override: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method over every seed.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write per-tick logs.
        #[arg(long)]
        ticks: bool,
    },
    /// Run the ablation variants of RL-Window.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Restrict to these variants (repeatable).
        #[arg(long = "variant", value_parser = clap::builder::PossibleValuesParser::new(ABLATION_NAMES))]
        variants: Vec<String>,
    },
    /// Merge aggregate tables into one report.
    Report {
        /// aggregate.csv files to merge.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Write the configured synthetic stream as CSV.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(config: &PathBuf, seed_override: Option<u64>) -> Result<RunConfig, HarnessError> {
    let mut cfg = RunConfig::from_file(config)?;
    if let Some(s) = seed_override {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { common, ticks } => {
            let mut cfg = load(&common.config, common.seed_override)?;
            cfg.output.ticks |= ticks;
            let out = harness::run(&cfg, Some(&common.out_dir))?;
            print!("{}", harness::markdown_report(&cfg.name, &out.rows)?);
        }
        Command::Ablate { common, variants } => {
            let cfg = load(&common.config, common.seed_override)?;
            let only: Vec<&str> = variants.iter().map(String::as_str).collect();
            let out = harness::run_ablation(&cfg, &only, Some(&common.out_dir))?;
            print!("{}", harness::markdown_report(&format!("{} ablation", cfg.name), &out.rows)?);
        }
        Command::Report { inputs, out_dir } => {
            let (csv, md) = harness::report(&inputs, &out_dir)?;
            eprintln!("wrote {} and {}", csv.display(), md.display());
        }
        Command::GenData { config, seed_override, out } => {
            let cfg = load(&config, seed_override)?;
            let StreamConfig::Synthetic(_) = &cfg.stream else {
                return Err(ConfigError::Invalid(vec!["gen-data needs a synthetic stream".into()]).into());
            };
            let (events, _) = cfg.stream.load(cfg.seeds[0])?;
            let file = std::fs::File::create(&out).map_err(|source| HarnessError::Io {
                path: out.display().to_string(),
                source,
            })?;
            write_csv_stream(std::io::BufWriter::new(file), &events)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // --help / --version are not failures
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
