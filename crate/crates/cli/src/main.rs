use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use levy_tc_cli::config::{RunConfig, Task};
use levy_tc_cli::{exit, exit_code, run};
use levy_tc_core::Error;

/// Worker threads for the parallel estimators; defaults to the number of cores.
const THREADS_ENV: &str = "LEVY_TC_THREADS";

#[derive(Parser)]
#[command(name = "levy-tc", version, about = "Simulate Lévy-type processes, solve time change equations and verify symbols")]
struct Cli {
    #[arg(value_enum)]
    task: Task,
    /// TOML run configuration, or the manifest of an earlier run.
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `sim.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("levy-tc: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn real_main(cli: &Cli) -> Result<u8, Error> {
    if let Ok(n) = std::env::var(THREADS_ENV) {
        let n: usize = n
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {n:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("cannot size the worker pool: {e}")))?;
    }
    let text = std::fs::read_to_string(&cli.config).map_err(|e| Error::Parse {
        offset: 0,
        message: format!("cannot read {}: {e}", cli.config.display()),
    })?;
    let mut config = RunConfig::parse(&text)?;
    if let Some(seed) = cli.seed {
        match config.sim.as_mut() {
            Some(sim) => sim.master_seed = seed,
            None => return Err(Error::InvalidParameter("--seed given but the config has no [sim] section".into())),
        }
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| config.output.clone())
        .ok_or_else(|| Error::InvalidParameter("no output directory: pass --out or set `output`".into()))?;
    let outputs = run::execute(cli.task, &config)?;
    run::write_outputs(&dir, cli.task, &config, &outputs)?;
    Ok(if outputs.verify_failed { exit::VERIFY_FAILED } else { exit::SUCCESS })
}
