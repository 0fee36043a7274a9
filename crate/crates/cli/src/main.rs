use clap::Parser;
use rfwave_cli::config::{env_overrides, parse_config_with, Operation};
use rfwave_cli::error::{io_context, CliError};
use rfwave_cli::runner::run;
use std::path::PathBuf;
use std::process::ExitCode;

/// Riesz-Feller bistable front experiments.
#[derive(Parser)]
#[command(name = "rfwave", version)]
struct Args {
    operation: Operation,
    /// TOML config; keys can be overridden with RFWAVE_<KEY> variables.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep workers; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(args: &Args) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(io_context(format!("reading {}", args.config.display())))?;
    let table: toml::Table = text.parse()?;
    let op = args.operation.name();
    if let Some(v) = table.get("operation") {
        if v.as_str() != Some(op) {
            return Err(CliError::Config(format!("config says operation = {v}, command line says {op}")));
        }
    }
    let mut overrides = env_overrides(std::env::vars());
    overrides.push(("operation".into(), format!("\"{op}\"")));
    if let Some(out) = &args.out {
        overrides.push(("out".into(), out.display().to_string()));
    }
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let config = parse_config_with(&text, &overrides)?;
    let rec = run(&config, args.jobs)?;
    println!("{}", rec.to_json()?.trim_end());
    let failures = rec.failures();
    for f in &failures {
        eprintln!("FAILED {f}");
    }
    Ok(failures.is_empty())
}
