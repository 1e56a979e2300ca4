mod args;
mod commands;
mod manifest;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// A bad or inconsistent command line (exit code 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_MODEL: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<patchwood::Error>() {
            return match e {
                patchwood::Error::InvalidConfig(_)
                | patchwood::Error::DepthOutOfRange { .. }
                | patchwood::Error::TooManyVariables { .. } => EXIT_USAGE,
                e if e.is_data_error() => EXIT_DATA,
                _ => EXIT_MODEL,
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_DATA;
        }
    }
    EXIT_MODEL
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Usage("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let seed = cli.seed;
    let run = match &cli.command {
        Command::GenData(a) => commands::gen_data(a, seed)?,
        Command::Train(a) => commands::train(a, seed)?,
        Command::Predict(a) => commands::predict(a, seed)?,
        Command::Importance(a) => commands::importance(a, seed)?,
        Command::Biasvar(a) => commands::biasvar(a, seed)?,
        Command::DepthExp(a) => commands::depth_exp(a, seed)?,
        Command::MiBias(a) => commands::mi_bias(a, seed)?,
        Command::Sweep(a) => commands::sweep(a, seed)?,
    };
    run.finish(cli.manifest.as_deref())
}

fn main() -> ExitCode {
    // clap exits with status 2 on its own parse errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
