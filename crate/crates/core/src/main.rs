use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hemskit::hub::{exit_code, run, Command, RunConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    /// Train and evaluate the PV quantile forecasters.
    Forecast,
    /// Fit VAR-LASSO centrally and with both distributed ADMM schemes.
    Collab,
    /// Sample flexibility trajectories and fit the surrogates.
    Flex,
    /// Optimize a day-ahead appliance schedule.
    Schedule,
    /// Score a forecast CSV against observations.
    Evaluate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Forecast => Command::Forecast,
            Cmd::Collab => Command::Collab,
            Cmd::Flex => Command::Flex,
            Cmd::Schedule => Command::Schedule,
            Cmd::Evaluate => Command::Evaluate,
        }
    }
}

/// Forecasting, flexibility and scheduling tools for home energy
/// management systems.
#[derive(Parser, Debug)]
#[command(name = "hemskit", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON run configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed, overriding the one in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if needed.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = Command::from(cli.command);
    let result = (|| {
        let mut cfg = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let seed = cfg.resolve_seed(cli.seed);
        let output = run(command, &cfg, seed)?;
        output.files.commit(&cli.out)?;
        Ok::<_, hemskit::Error>((seed, output.summary))
    })();
    match result {
        Ok((seed, summary)) => {
            println!("hemskit {} (seed {seed})", command.name());
            for line in summary {
                println!("  {line}");
            }
            println!("  outputs in {}", cli.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hemskit {}: {e}", command.name());
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
