use std::process::ExitCode;

use clap::Parser;
use mapbench_cli::{execute, load_config, serve, Cli, Command};
use mapbench_core::mock::{self, MockEnv};
use mapbench_core::service::Service;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::MockAdapter { args } = &cli.command {
        let code = match MockEnv::from_env(args).and_then(|env| mock::run(&env)) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("mock-adapter: {e}");
                2
            }
        };
        return ExitCode::from(code.clamp(0, 255) as u8);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match cli.command {
        Command::Serve => serve_blocking(&cli),
        _ => execute(&cli, &mut std::io::stdout().lock()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn serve_blocking(cli: &Cli) -> anyhow::Result<()> {
    let service = Service::open(load_config(cli)?)?;
    tokio::runtime::Runtime::new()?.block_on(serve(service))
}
