mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] layoutsim::Error),

    #[error("{0}")]
    Usage(String),

    #[error("server: {0}")]
    Server(std::io::Error),
}

impl CliError {
    fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Usage(_) => "Usage",
            CliError::Server(_) => "Server",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let sim = &cli.sim;
    match cli.command {
        Command::Init { input, out, report } => {
            commands::init(&input, sim, &out, report.as_deref())
        }
        Command::Simulate { input, out } => commands::simulate(&input, sim, &out),
        Command::Optimize {
            input,
            opt,
            out,
            history,
            initial_out,
        } => commands::optimize(
            &input,
            sim,
            &opt,
            &out,
            history.as_deref(),
            initial_out.as_deref(),
        ),
        Command::Metrics {
            scene,
            trajectory,
            out,
        } => commands::metrics(&scene, &trajectory, out.as_deref()),
        Command::Edit {
            input,
            delete,
            add,
            mesh,
            parent,
            kind,
            at,
            density,
            out,
            trajectory,
        } => {
            let add = match (&add, &mesh) {
                (Some(id), Some(mesh)) => Some(commands::AddArgs {
                    id,
                    mesh,
                    parent: parent.as_deref(),
                    kind,
                    at,
                    density,
                }),
                _ => None,
            };
            commands::edit(
                &input,
                sim,
                delete.as_deref(),
                add,
                &out,
                trajectory.as_deref(),
            )
        }
        Command::Gradcheck {
            input,
            coords,
            h,
            interval,
        } => commands::gradcheck(&input, sim, coords as usize, h, interval as usize, cli.seed),
        Command::Serve {
            input,
            assets,
            addr,
        } => commands::serve(&input, sim, assets, addr),
        Command::GenScenes { out, random } => commands::gen_scenes(&out, random, cli.seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PAT3D_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": { "category": e.category(), "message": e.to_string() } });
            eprintln!("{body}");
            ExitCode::from(e.exit_code())
        }
    }
}
