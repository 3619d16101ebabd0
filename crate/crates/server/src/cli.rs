use std::path::PathBuf;

use backchannel_core::replay::{diff_golden, load_trace, replay_trace};
use backchannel_core::Ladder;
use clap::{Parser, Subcommand};

use crate::config::ServerConfig;
use crate::http::{router, AppState};
use crate::hub::Hub;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIFF: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "backchannel", version, about = "Anonymous meeting backchannel facilitator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the meeting server.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write each meeting's event trace here (FILE, FILE.2, ...).
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Replay an event trace and write the cue log.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Policy file; replaces the policy in the trace header.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a cue log with a golden file.
    DiffGolden { out: PathBuf, golden: PathBuf },
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Serve {
            port,
            config,
            record,
        } => serve(port, config, record),
        Command::Replay { trace, policy, out } => replay(trace, policy, out),
        Command::DiffGolden { out, golden } => match diff_golden(&out, &golden) {
            Ok(report) if report.is_identical() => EXIT_OK,
            Ok(report) => {
                print!("{}", report.render());
                EXIT_DIFF
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_ERROR
            }
        },
    }
}

fn replay(trace: PathBuf, policy: Option<PathBuf>, out: PathBuf) -> i32 {
    let result = (|| -> Result<(), String> {
        let (policy, ladder) = match policy {
            Some(p) => {
                let cfg = ServerConfig::load(&p).map_err(|e| e.to_string())?;
                (Some(cfg.policy), cfg.ladder)
            }
            None => (None, Ladder::default()),
        };
        let trace = load_trace(&trace).map_err(|e| e.to_string())?;
        let outcome = replay_trace(&trace, policy.as_ref(), &ladder).map_err(|e| e.to_string())?;
        std::fs::write(&out, outcome.log.to_text())
            .map_err(|e| format!("cannot write {}: {e}", out.display()))
    })();
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn serve(port: u16, config: Option<PathBuf>, record: Option<PathBuf>) -> i32 {
    let config = match config.map(|p| ServerConfig::load(&p)).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let mut hub = Hub::new(config.policy, config.ladder);
    if let Some(path) = record {
        hub.record_to(path);
    }
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let result = runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        tracing::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(AppState::new(hub))).await
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
