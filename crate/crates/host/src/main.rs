use std::io::BufRead;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pocket_core::device::{Gesture, IntentMsg};
use pocket_core::fixtures;
use pocket_core::memory::memory_query;
use pocket_host::store::to_json;
use pocket_host::{run_scenario, server, Host, HostError, ModelEndpointConfig, Scenario, Store};
use serde_json::json;

#[derive(Parser)]
#[command(name = "pocket", about = "Mobile agent runtime on a simulated device")]
struct Cli {
    /// Persistence root.
    #[arg(long, global = true, default_value = "pocket-data")]
    root: PathBuf,
    /// Build the device from this scenario's apps, media and config instead
    /// of the built-in fixtures.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario script; exits 1 if any expectation fails.
    Run { scenario: PathBuf },
    /// Record gestures read from stdin, one per line: a gesture as JSON or
    /// `tap <text>`.
    Record {
        session: String,
        /// Launch `app/Activity` before recording starts.
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        bookmark: Option<String>,
        #[arg(long)]
        no_clone: bool,
    },
    Replay { bookmark: String },
    Memory {
        #[command(subcommand)]
        cmd: MemoryCmd,
    },
    Skills {
        #[command(subcommand)]
        cmd: SkillsCmd,
    },
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
    },
}

#[derive(Subcommand)]
enum MemoryCmd {
    Sync,
    Query { query: String },
}

#[derive(Subcommand)]
enum SkillsCmd {
    List,
}

fn host(cli: &Cli) -> Result<Host, HostError> {
    let store = Store::new(&cli.root);
    let endpoint = ModelEndpointConfig::from_env();
    match &cli.scenario {
        Some(p) => {
            let s = Scenario::load(p)?;
            Host::new(s.device()?, s.config.clone(), store, &endpoint)
        }
        None => Host::new(fixtures::device(cli.seed)?, fixtures::config(), store, &endpoint),
    }
}

fn print<T: serde::Serialize>(v: &T) -> Result<(), HostError> {
    print!("{}", to_json(v)?);
    Ok(())
}

fn record(h: &mut Host, session: &str, from: Option<&str>, clone: bool, bookmark: Option<&str>) -> Result<(), HostError> {
    if let Some(from) = from {
        let (app, activity) = from
            .split_once('/')
            .ok_or_else(|| HostError::Invalid(format!("--from wants app/Activity, got {from}")))?;
        h.rt.device.launch_intent(&IntentMsg::component(app, activity), false)?;
    }
    h.record_start(session)?;
    for (i, line) in std::io::stdin().lock().lines().enumerate() {
        let line = line.map_err(|e| HostError::Invalid(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let r = match line.strip_prefix("tap ") {
            Some(text) => h.tap_text(text.trim()),
            None => serde_json::from_str::<Gesture>(line)
                .map_err(|e| HostError::Parse(format!("line {}: {e}", i + 1)))
                .and_then(|g| h.rt.gesture(&g).map(|_| ()).map_err(HostError::from)),
        };
        r.map_err(|e| HostError::Invalid(format!("line {}: {e}", i + 1)))?;
    }
    print(&h.record_stop(clone, bookmark)?)
}

async fn serve(h: Host, port: u16) -> Result<(), HostError> {
    let listener = server::bind(port).await?;
    eprintln!("listening on http://127.0.0.1:{port}");
    server::serve(listener, h).await
}

fn main_inner(cli: Cli) -> Result<ExitCode, HostError> {
    match &cli.cmd {
        Cmd::Run { scenario } => {
            let report = run_scenario(scenario, Store::new(&cli.root), &ModelEndpointConfig::from_env())?;
            print!("{}", report.render());
            return Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Cmd::Record {
            session,
            from,
            bookmark,
            no_clone,
        } => record(&mut host(&cli)?, session, from.as_deref(), !no_clone, bookmark.as_deref())?,
        Cmd::Replay { bookmark } => print(&host(&cli)?.replay(bookmark)?)?,
        Cmd::Memory { cmd: MemoryCmd::Sync } => {
            let mut h = host(&cli)?;
            let out = h.rt.sync_memory()?;
            print(&json!({
                "appended": out.appended,
                "entries": h.rt.memory.entries.len(),
            }))?;
        }
        Cmd::Memory {
            cmd: MemoryCmd::Query { query },
        } => {
            let h = host(&cli)?;
            let hits: Vec<_> = memory_query(query, &h.rt.memory)
                .into_iter()
                .map(|(id, score)| json!({ "asset_id": id, "score": score }))
                .collect();
            print(&hits)?;
        }
        Cmd::Skills { cmd: SkillsCmd::List } => print(&host(&cli)?.rt.skills.cards())?,
        Cmd::Serve { port } => {
            let h = host(&cli)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| HostError::Invalid(e.to_string()))?;
            rt.block_on(serve(h, *port))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
