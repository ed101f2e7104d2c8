//! The `morale` command line.
//!
//! Each subcommand resolves its flags, `MORALE_*` environment variables and
//! the optional TOML config into an [`invocation::Invocation`], runs it and
//! writes a [`manifest::RunManifest`] beside the outputs. Exit codes: 0
//! success, 1 usage error, 2 data or validation error, 3 runtime failure.

pub mod args;
pub mod config;
mod error;
pub mod invocation;
pub mod manifest;
pub mod report;
pub mod resolve;

use std::ffi::OsString;
use std::io::Write;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::Parser;
use morale_core::exec::Exec;
use morale_service::{Service, ServiceConfig};

pub use error::{CliError, CliResult, ExitKind};

use args::{Cli, Command, ReplayArgs, ServeArgs};
use manifest::RunManifest;

/// Parses `args` (including the program name), runs and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => ExitKind::Usage as i32,
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    match dispatch(cli.command, exec) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn dispatch(command: Command, exec: Exec) -> CliResult<()> {
    let invocation = match command {
        Command::GenSynth(a) => resolve::gen_synth(a)?,
        Command::Train(a) => resolve::train(a)?,
        Command::Eval(a) => resolve::eval(a)?,
        Command::Ablate(a) => resolve::ablate(a)?,
        Command::Agree(a) => resolve::agree(a)?,
        Command::Serve(a) => return serve(a),
        Command::Replay(a) => replay_invocation(a)?,
    };
    let outcome = invocation.execute(exec)?;
    print!("{}", outcome.stdout);
    eprintln!("manifest: {}", outcome.manifest.display());
    Ok(())
}

fn replay_invocation(a: ReplayArgs) -> CliResult<invocation::Invocation> {
    let m = RunManifest::load(&a.manifest)?;
    let changed = m.changed_inputs();
    if !changed.is_empty() {
        let list: Vec<String> = changed.iter().map(|p| p.display().to_string()).collect();
        return Err(CliError::data(format!("inputs changed since the run: {}", list.join(", "))));
    }
    Ok(m.invocation.with_out(a.out))
}

fn serve(a: ServeArgs) -> CliResult<()> {
    let mut cfg = ServiceConfig::load(a.config.as_deref(), std::env::vars())?;
    if let Some(b) = a.bind {
        cfg.bind = b;
    }
    let service = Arc::new(Service::from_config(&cfg)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::runtime(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&cfg.bind)
            .await
            .map_err(|e| CliError::runtime(format!("bind {}: {e}", cfg.bind)))?;
        let addr = listener.local_addr().map_err(|e| CliError::runtime(e.to_string()))?;
        println!("listening on {addr}");
        let _ = std::io::stdout().flush();
        morale_service::server::serve(service, listener, morale_service::server::shutdown_signal())
            .await
            .map_err(CliError::from)
    })
}
