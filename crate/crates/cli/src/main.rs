mod args;
mod run;

use std::io::Write as _;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use run::{Failure, Output, EXIT_INPUT, EXIT_VALIDATION};

fn emit(cli: &Cli, out: &Output) -> Result<(), Failure> {
    let text = match out {
        Output::Json { value, .. } => {
            let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure { code: 1, message: e.to_string() })?;
            s.push('\n');
            s
        }
        Output::Text(s) => s.clone(),
    };
    let io = |e: std::io::Error| Failure { code: 1, message: e.to_string() };
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(io),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_INPUT as u8),
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = run::run(&cli.command).and_then(|out| {
        emit(&cli, &out)?;
        Ok(out)
    });
    match result {
        Ok(Output::Json { ok: false, diagnostics, .. }) => {
            eprintln!("validation failed: {}", diagnostics.unwrap_or_default());
            ExitCode::from(EXIT_VALIDATION as u8)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
