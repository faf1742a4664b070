// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! `conflictsync`: run the synchronization benchmark grid, summarize the CSV
//! it produces and chart it.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 bad input data.

mod bench;
mod plot;
mod record;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("session failed: {0}")]
    Session(String),
    #[error("plotting failed: {0}")]
    Plot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Session(_) | CliError::Plot(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "conflictsync", version, about = "Digest-driven CRDT synchronization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate sessions over a grid of algorithms and similarities; writes CSV.
    Bench(bench::BenchArgs),
    /// Print averaged byte tables and ratios from a bench CSV.
    Report(report::ReportArgs),
    /// Draw metadata, redundancy and total charts (SVG) from a bench CSV.
    Plot(plot::PlotArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bench(args) => bench::run(args),
        Command::Report(args) => report::run(args),
        Command::Plot(args) => plot::run(args).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
