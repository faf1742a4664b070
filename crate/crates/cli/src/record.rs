// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

//! The CSV row schema shared by `bench`, `report` and `plot`, and the
//! per-cell averaging the latter two build on.

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub algo: String,
    pub params: String,
    pub similarity: f64,
    pub trial: u32,
    pub cardinality: usize,
    pub metadata_bytes: u64,
    pub redundant_bytes: u64,
    pub necessary_bytes: u64,
    pub total_bytes: u64,
    pub messages: usize,
    pub symbols: u64,
    pub converged: bool,
}

impl Record {
    /// `Bu[f_ld=0.2]` style label combining name and parameters.
    pub fn label(&self) -> String {
        if self.params.is_empty() {
            self.algo.clone()
        } else {
            format!("{}[{}]", self.algo, self.params.replace(';', ", "))
        }
    }
}

pub fn read_records(input: impl Read) -> Result<Vec<Record>, CliError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut records = Vec::new();
    for (line, row) in reader.deserialize::<Record>().enumerate() {
        let r = row.map_err(|e| CliError::Data(format!("row {}: {e}", line + 1)))?;
        if r.metadata_bytes + r.redundant_bytes + r.necessary_bytes != r.total_bytes {
            return Err(CliError::Data(format!("row {}: byte classes do not sum to total_bytes", line + 1)));
        }
        if !(0.0..=1.0).contains(&r.similarity) {
            return Err(CliError::Data(format!("row {}: similarity {} outside [0, 1]", line + 1, r.similarity)));
        }
        records.push(r);
    }
    if records.is_empty() {
        return Err(CliError::Data("no rows".into()));
    }
    Ok(records)
}

/// Trial means of one (configuration, similarity) cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellMean {
    pub metadata: f64,
    pub redundant: f64,
    pub necessary: f64,
    pub total: f64,
    pub trials: usize,
    pub all_converged: bool,
}

impl CellMean {
    pub fn metadata_ratio(&self) -> f64 {
        ratio(self.metadata, self.total)
    }

    pub fn redundancy_ratio(&self) -> f64 {
        ratio(self.redundant, self.total)
    }
}

fn ratio(part: f64, total: f64) -> f64 {
    if total == 0.0 {
        0.0
    } else {
        100.0 * part / total
    }
}

/// Records averaged per cell, with rows in first-seen order and similarity
/// columns ascending.
#[derive(Clone, Debug)]
pub struct Summary {
    pub labels: Vec<String>,
    pub similarities: Vec<f64>,
    cells: HashMap<(usize, u64), CellMean>,
}

impl Summary {
    pub fn new(records: &[Record]) -> Self {
        let mut labels: Vec<String> = Vec::new();
        let mut similarities: Vec<f64> = Vec::new();
        let mut sums: HashMap<(usize, u64), CellMean> = HashMap::new();
        for r in records {
            let label = r.label();
            let row = labels.iter().position(|l| *l == label).unwrap_or_else(|| {
                labels.push(label);
                labels.len() - 1
            });
            if !similarities.contains(&r.similarity) {
                similarities.push(r.similarity);
            }
            let cell = sums.entry((row, r.similarity.to_bits())).or_insert(CellMean { all_converged: true, ..Default::default() });
            cell.metadata += r.metadata_bytes as f64;
            cell.redundant += r.redundant_bytes as f64;
            cell.necessary += r.necessary_bytes as f64;
            cell.total += r.total_bytes as f64;
            cell.trials += 1;
            cell.all_converged &= r.converged;
        }
        for cell in sums.values_mut() {
            let n = cell.trials as f64;
            cell.metadata /= n;
            cell.redundant /= n;
            cell.necessary /= n;
            cell.total /= n;
        }
        similarities.sort_by(f64::total_cmp);
        Summary { labels, similarities, cells: sums }
    }

    pub fn cell(&self, row: usize, similarity: f64) -> Option<&CellMean> {
        self.cells.get(&(row, similarity.to_bits()))
    }

    pub fn max_trials(&self) -> usize {
        self.cells.values().map(|c| c.trials).max().unwrap_or(0)
    }

    pub fn unconverged(&self) -> usize {
        self.cells.values().filter(|c| !c.all_converged).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(algo: &str, params: &str, s: f64, trial: u32, meta: u64, red: u64, nec: u64) -> Record {
        Record {
            algo: algo.into(),
            params: params.into(),
            similarity: s,
            trial,
            cardinality: 10,
            metadata_bytes: meta,
            redundant_bytes: red,
            necessary_bytes: nec,
            total_bytes: meta + red + nec,
            messages: 2,
            symbols: 0,
            converged: true,
        }
    }

    #[test]
    fn labels_render_parameters() {
        assert_eq!(row("BlBu", "eps=0.01;f_ld=1", 0.0, 0, 0, 0, 0).label(), "BlBu[eps=0.01, f_ld=1]");
        assert_eq!(row("Ra", "", 0.0, 0, 0, 0, 0).label(), "Ra");
    }

    #[test]
    fn summary_averages_trials() {
        let rows = vec![
            row("Ra", "", 0.5, 0, 10, 0, 90),
            row("Ra", "", 0.5, 1, 30, 0, 70),
            row("Baseline", "", 0.5, 0, 0, 50, 50),
            row("Ra", "", 0.0, 0, 5, 0, 5),
        ];
        let s = Summary::new(&rows);
        assert_eq!(s.labels, vec!["Ra", "Baseline"]);
        assert_eq!(s.similarities, vec![0.0, 0.5]);
        let c = s.cell(0, 0.5).unwrap();
        assert_eq!((c.metadata, c.total, c.trials), (20.0, 100.0, 2));
        assert_eq!(c.metadata_ratio(), 20.0);
        assert_eq!(s.cell(1, 0.5).unwrap().redundancy_ratio(), 50.0);
        assert!(s.cell(1, 0.0).is_none());
    }
}
