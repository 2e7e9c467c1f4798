use clap::Parser;

fn main() -> anyhow::Result<()> {
    hiliter_cli::run(hiliter_cli::cli::Cli::parse())
}
