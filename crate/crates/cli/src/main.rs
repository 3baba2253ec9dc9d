use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use levqsim_cli::{CliError, CommandKind, Format, Overrides, Profile};

/// Simulation pipelines for electrons on a levitated solid-neon sphere.
///
/// Flags take precedence over the corresponding keys in the config file:
/// `--out` over `output.dir`, `--format` over `output.format` and
/// `--profile` over `figures.profile`.
#[derive(Parser, Debug)]
#[command(name = "levqsim", version)]
struct Args {
    command: CommandKind,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads for sweeps and scans.
    #[arg(long)]
    threads: Option<usize>,
    /// Parameter density for `figures`.
    #[arg(long, value_enum)]
    profile: Option<Profile>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::validation(e.to_string())),
    };
    if let Some(n) = args.threads {
        if n == 0 {
            return fail(&CliError::validation("--threads must be ≥ 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&CliError::validation(e.to_string()));
        }
    }
    let flags = Overrides {
        out: args.out,
        format: args.format,
        profile: args.profile,
    };
    let result = levqsim_cli::load_config(args.config.as_deref())
        .and_then(|c| levqsim_cli::resolve(c, args.command, &flags))
        .and_then(|c| levqsim_cli::execute(&c));
    match result {
        Ok(files) => {
            let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
            println!("{}", serde_json::json!({ "written": names }));
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}
