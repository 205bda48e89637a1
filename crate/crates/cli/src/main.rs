use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rff_dokl_cli::{analyze, list_experiments, load_config, run_experiment, RunError, RunSettings};

#[derive(Parser)]
#[command(name = "rffdokl", version, about = "Distributed online kernel learning with random Fourier features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write traces and summary.csv.
    Run {
        /// Config file or bundled experiment name.
        config: String,
        #[command(flatten)]
        common: Common,
        /// Output directory (default: the config's `output`, else out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of realizations.
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// List bundled experiments.
    List,
    /// Print the stability report for a config's first realization.
    Analyze {
        config: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Base directory for relative dataset paths.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::List => {
            for name in list_experiments() {
                println!("{name}");
            }
        }
        Command::Run { config, common, out, realizations } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            if let Some(r) = realizations {
                if r == 0 {
                    return Err(RunError::Config(rff_dokl_cli::ConfigError {
                        key: Some("realizations".into()),
                        line: None,
                        message: "must be at least 1".into(),
                    }));
                }
                cfg.realizations = r;
            }
            let out = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
            let settings = RunSettings { out: Some(out.clone()), data_dir: common.data_dir };
            let summary = run_experiment(&cfg, &settings)?;
            print!("{}", summary.to_csv());
            eprintln!("wrote {}", out.display());
        }
        Command::Analyze { config, common } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let settings = RunSettings { out: None, data_dir: common.data_dir };
            print!("{}", analyze(&cfg, &settings)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rffdokl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
