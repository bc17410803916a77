//! Reference plugin process. Speaks the frame protocol on stdin/stdout.

use std::io;

use clap::Parser;

use rlframe_plugin::mirror::{serve, MirrorOptions};
use rlframe_plugin::PROTOCOL_VERSION;

#[derive(Parser)]
#[command(about = "Mirror GridWorld, random learner and sample network configurations")]
struct Args {
    /// Protocol version to accept at handshake.
    #[arg(long, default_value_t = PROTOCOL_VERSION)]
    protocol_version: u32,
    /// Exit abruptly on the N-th step request.
    #[arg(long)]
    exit_after_steps: Option<u64>,
    /// Stop answering on the N-th step request.
    #[arg(long)]
    stall_after_steps: Option<u64>,
}

fn main() -> io::Result<()> {
    let args = Args::parse();
    let options = MirrorOptions {
        protocol_version: args.protocol_version,
        exit_after_steps: args.exit_after_steps,
        stall_after_steps: args.stall_after_steps,
    };
    serve(io::stdin().lock(), io::stdout().lock(), options)
}
