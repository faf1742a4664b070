// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use conflictsync::simnet::human_bytes;

use crate::record::{read_records, CellMean, Summary};
use crate::CliError;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// CSV produced by `bench`.
    pub csv: PathBuf,
}

pub fn run(args: &ReportArgs) -> Result<(), CliError> {
    let records = read_records(std::fs::File::open(&args.csv)?)?;
    print!("{}", render(&Summary::new(&records)));
    Ok(())
}

pub fn render(summary: &Summary) -> String {
    let mut out = String::new();
    let trials = summary.max_trials();
    let _ = writeln!(out, "Cells show the mean of {trials} trial(s). Byte units are decimal (1 kB = 1000 B).\n");
    if summary.unconverged() > 0 {
        let _ = writeln!(out, "WARNING: {} cell(s) contain sessions that did not converge.\n", summary.unconverged());
    }
    let bytes = |f: fn(&CellMean) -> f64| move |c: &CellMean| human_bytes(f(c).round() as u64);
    let percent = |f: fn(&CellMean) -> f64| move |c: &CellMean| format!("{:.1}%", f(c));
    table(&mut out, summary, "Transmitted total", bytes(|c| c.total));
    table(&mut out, summary, "Transmitted metadata", bytes(|c| c.metadata));
    table(&mut out, summary, "Transmitted redundancy", bytes(|c| c.redundant));
    table(&mut out, summary, "Metadata ratio (metadata / total)", percent(CellMean::metadata_ratio));
    table(&mut out, summary, "Redundancy ratio (redundancy / total)", percent(CellMean::redundancy_ratio));
    out
}

fn table(out: &mut String, summary: &Summary, title: &str, cell: impl Fn(&CellMean) -> String) {
    let width = summary.labels.iter().map(String::len).max().unwrap_or(0);
    let _ = writeln!(out, "{title}");
    let _ = write!(out, "{:<width$}", "");
    for s in &summary.similarities {
        let _ = write!(out, " {:>10}", format!("{}%", (s * 1000.0).round() / 10.0));
    }
    let _ = writeln!(out);
    for (row, label) in summary.labels.iter().enumerate() {
        let _ = write!(out, "{label:<width$}");
        for &s in &summary.similarities {
            let text = summary.cell(row, s).map_or_else(|| "-".to_string(), &cell);
            let _ = write!(out, " {text:>10}");
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out);
}
