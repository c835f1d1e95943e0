use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use flow_core::engine::InstanceState;
use flow_core::model::load_repository;
use flow_tui::Session;
use flowd::{ApiConfig, LocalTransport, Server};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "flowd", version, about = "Cloud coordinator for server-executed flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Storage backend: jsonl or memory.
        #[arg(long, default_value = "jsonl")]
        store: String,
        /// Use this RFC 3339 instant for every timestamp.
        #[arg(long)]
        fixed_clock: Option<DateTime<Utc>>,
    },
    /// Load and cross-check a model repository.
    Validate {
        #[arg(long)]
        repo: PathBuf,
    },
    /// Run one launcher in the terminal client against an in-process engine.
    Run {
        app_id: String,
        launcher_id: String,
        #[arg(long, default_value = ".")]
        repo: PathBuf,
        /// Data directory; a temporary one is used when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "memory")]
        store: String,
        /// Read answers from this file instead of the terminal.
        #[arg(long)]
        script: Option<PathBuf>,
    },
}

fn init_logging() -> String {
    let level = std::env::var("FLOWD_LOG").unwrap_or_else(|_| "info".into());
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_new(&level).unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .init();
    level
}

fn serve(config: ApiConfig) -> Result<(), String> {
    let server = Arc::new(Server::open(&config).map_err(|e| e.to_string())?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.bind_address)
            .await
            .map_err(|e| format!("cannot bind {}: {e}", config.bind_address))?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        // tests and scripts read the bound address from this line
        println!("listening on {addr}");
        io::stdout().flush().ok();
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        flowd::serve(server, listener, shutdown)
            .await
            .map_err(|e| e.to_string())
    })
}

fn validate(repo: PathBuf) -> ExitCode {
    match load_repository(&repo) {
        Ok(r) => {
            let (d, f, a) = r.sizes();
            println!("ok: {d} domains, {f} flows, {a} apps");
            ExitCode::SUCCESS
        }
        Err(e) => {
            for cause in e.causes() {
                eprintln!("error: {cause}");
            }
            // file-level context is lost in causes(); print the whole chain too
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn run(
    app_id: String,
    launcher_id: String,
    mut config: ApiConfig,
    script: Option<PathBuf>,
) -> Result<ExitCode, String> {
    let scratch = config.data_dir.as_os_str().is_empty();
    if scratch {
        config.data_dir = std::env::temp_dir().join(format!("flowd-run-{}", std::process::id()));
    }
    let result = run_session(&app_id, &launcher_id, &config, script);
    if scratch {
        let _ = std::fs::remove_dir_all(&config.data_dir);
    }
    result
}

fn run_session(
    app_id: &str,
    launcher_id: &str,
    config: &ApiConfig,
    script: Option<PathBuf>,
) -> Result<ExitCode, String> {
    let server = Arc::new(Server::open(config).map_err(|e| e.to_string())?);
    let input: Box<dyn BufRead> = match &script {
        Some(path) => Box::new(BufReader::new(
            File::open(path).map_err(|e| format!("{}: {e}", path.display()))?,
        )),
        None => Box::new(io::stdin().lock()),
    };
    let mut session = Session::new(LocalTransport(server), app_id, input, io::stdout()).with_echo(script.is_some());
    match session.run(Some(launcher_id)) {
        Ok(InstanceState::Finalized) => Ok(ExitCode::SUCCESS),
        Ok(_) => Ok(ExitCode::FAILURE),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log_level = init_logging();
    let result = match cli.command {
        Command::Serve {
            repo,
            data,
            bind,
            store,
            fixed_clock,
        } => {
            let config = ApiConfig {
                bind_address: bind,
                store,
                fixed_clock,
                log_level,
                ..ApiConfig::new(repo, data)
            };
            serve(config).map(|()| ExitCode::SUCCESS)
        }
        Command::Validate { repo } => Ok(validate(repo)),
        Command::Run {
            app_id,
            launcher_id,
            repo,
            data,
            store,
            script,
        } => {
            let config = ApiConfig {
                store,
                log_level,
                ..ApiConfig::new(repo, data.unwrap_or_default())
            };
            run(app_id, launcher_id, config, script)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("flowd: {e}");
        ExitCode::FAILURE
    })
}
