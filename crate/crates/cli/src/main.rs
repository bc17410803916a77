use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rlframe_cli::commands::{self, Overrides};
use rlframe_plugin::mirror::{serve, MirrorOptions};
use rlframe_plugin::{PROTOCOL_VERSION, REGISTRY_ENV};

#[derive(Parser)]
#[command(name = "rlframe", version, about = "Train, evaluate and play reinforcement-learning agents")]
struct Cli {
    /// More log output; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Plugin registry file.
    #[arg(long, global = true, env = REGISTRY_ENV)]
    registry: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory, replacing the manifest's.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for both environment and learner.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the manifest's learner.
    Train(RunArgs),
    /// Run greedy episodes without updates.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Let a person control one agent over a WebSocket.
    Play {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        /// Stop after this many episodes instead of running until interrupted.
        #[arg(long)]
        episodes: Option<u64>,
    },
    /// Inspect the plugin registry.
    Plugins {
        #[command(subcommand)]
        action: PluginsAction,
    },
    /// Serve the reference plugin on stdin/stdout.
    #[command(hide = true)]
    MirrorPlugin {
        #[arg(long, default_value_t = PROTOCOL_VERSION)]
        protocol_version: u32,
        #[arg(long)]
        exit_after_steps: Option<u64>,
        #[arg(long)]
        stall_after_steps: Option<u64>,
    },
}

#[derive(Subcommand)]
enum PluginsAction {
    List,
}

fn overrides(run: &RunArgs, registry: &Option<PathBuf>) -> Overrides {
    Overrides {
        out: run.out.clone(),
        seed: run.seed,
        registry: registry.clone(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Info,
        1 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    let mut stdout = io::stdout().lock();
    let result = match &cli.command {
        Command::Train(run) => commands::train(&run.manifest, &overrides(run, &cli.registry), &mut stdout),
        Command::Eval { run, checkpoint } => commands::eval(
            &run.manifest,
            checkpoint.as_deref(),
            &overrides(run, &cli.registry),
            &mut stdout,
        ),
        Command::Play {
            run,
            checkpoint,
            port,
            episodes,
        } => commands::play(
            &run.manifest,
            checkpoint.as_deref(),
            *port,
            *episodes,
            &overrides(run, &cli.registry),
            &mut stdout,
        ),
        Command::Plugins {
            action: PluginsAction::List,
        } => commands::list_plugins(
            &Overrides {
                registry: cli.registry.clone(),
                ..Default::default()
            },
            &mut stdout,
        ),
        Command::MirrorPlugin {
            protocol_version,
            exit_after_steps,
            stall_after_steps,
        } => {
            drop(stdout);
            let options = MirrorOptions {
                protocol_version: *protocol_version,
                exit_after_steps: *exit_after_steps,
                stall_after_steps: *stall_after_steps,
            };
            return match serve(io::stdin().lock(), io::stdout().lock(), options) {
                Ok(()) => ExitCode::SUCCESS,
                Err(_) => ExitCode::FAILURE,
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
