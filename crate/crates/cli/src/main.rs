mod args;
mod commands;
mod manifest;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

/// Exit codes: 2 input, 3 configuration, 4 schema mismatch, 5 single-class
/// labels.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    /// Prefixes the message with `path` unless it already names it.
    pub fn context(mut self, path: &Path) -> Self {
        let shown = path.display().to_string();
        if !self.message.contains(&shown) {
            self.message = format!("{shown}: {}", self.message);
        }
        self
    }
}

impl From<rfod::Error> for CliError {
    fn from(e: rfod::Error) -> Self {
        use rfod::Error::*;
        let code = match &e {
            Config(_) => 3,
            SchemaMismatch(_) => 4,
            SingleClass => 5,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    match &cli.command {
        Command::Fit(a) => commands::fit(a, threads),
        Command::Detect(a) => commands::detect(a, threads),
        Command::Eval(a) => commands::eval(a, threads),
        Command::Bench(a) => commands::bench(a, threads),
        Command::ExportHeatmap(a) => commands::export_heatmap(a, threads),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(CliError::config("--threads must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(CliError::config(format!("--threads: {e}"))),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
