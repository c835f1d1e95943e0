use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use flow_core::engine::InstanceState;
use flow_tui::{HttpTransport, Session};

/// Terminal client for a flow coordinator.
#[derive(Parser)]
#[command(name = "flow-tui", version)]
struct Args {
    /// Base URL of the coordinator, e.g. http://127.0.0.1:8080
    #[arg(long)]
    server: String,
    #[arg(long)]
    app: String,
    /// Read answers from this file, one per line, instead of the terminal.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Start this launcher instead of asking.
    #[arg(long)]
    launcher: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let input: Box<dyn BufRead> = match &args.script {
        Some(path) => match File::open(path) {
            Ok(f) => Box::new(BufReader::new(f)),
            Err(e) => {
                eprintln!("flow-tui: {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        },
        None => Box::new(io::stdin().lock()),
    };
    let mut session =
        Session::new(HttpTransport::new(&args.server), &args.app, input, io::stdout()).with_echo(args.script.is_some());
    match session.run(args.launcher.as_deref()) {
        Ok(InstanceState::Finalized) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("flow-tui: {e}");
            ExitCode::FAILURE
        }
    }
}
