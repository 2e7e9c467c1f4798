//! Command-line front end and HTTP service for `hiliter-core`.

pub mod cli;
pub mod commands;
pub mod server;

use std::net::SocketAddr;
use std::time::Duration;

use anyhow::{Context, Result};
use hiliter_core::service::ModelSet;

use cli::{Cli, Command};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse(a) => commands::parse(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::BuildDataset(a) => commands::build(&a),
        Command::Train(a) => commands::train_model(&a),
        Command::Evaluate(a) => commands::evaluate_model(&a),
        Command::AnalyzeFailures(a) => commands::analyze_failures(&a),
        Command::Suggest(a) => {
            println!("{}", commands::suggest_output(&a)?);
            Ok(())
        }
        Command::Render(a) => {
            print!("{}", commands::render_output(&a)?);
            Ok(())
        }
        Command::Synthetic(a) => commands::synthetic(&a),
        Command::Serve(a) => {
            let models = ModelSet::load_dir(&a.models)
                .with_context(|| format!("reading model directory {}", a.models.display()))?;
            for info in models.info() {
                match &info.warning {
                    Some(w) => eprintln!("warning: {}: {w}", info.file),
                    None => eprintln!("loaded {}", info.file),
                }
            }
            let addr: SocketAddr = format!("{}:{}", a.host, a.port)
                .parse()
                .with_context(|| format!("bad address {}:{}", a.host, a.port))?;
            let options = server::ServerOptions {
                max_body_bytes: a.max_body_bytes,
                max_in_flight: a.max_in_flight,
                timeout: Duration::from_secs(a.timeout_secs),
                static_dir: a.static_dir,
            };
            tokio::runtime::Runtime::new()?.block_on(server::serve(models, addr, options))
        }
    }
}
