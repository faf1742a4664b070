// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use conflictsync::digest::{keyed_hash, mix64};
use conflictsync::workload::DEFAULT_CARDINALITY;
use conflictsync::{generate_pair, run_session, Algorithm, PairSpec};
use rayon::prelude::*;

use crate::record::Record;
use crate::CliError;

pub const QUICK_CARDINALITY: usize = 10_000;
const DEFAULT_EPS: [f64; 2] = [0.01, 0.25];
const DEFAULT_LOAD_FACTORS: [f64; 3] = [0.2, 1.0, 5.0];

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Algorithms to run (Baseline, Bu, Ra, BlBu, BlRa, BuRa, BlBuRa). When
    /// none of --algos, --eps and --load-factors is given, the standard
    /// 19-configuration grid runs; otherwise each algorithm is crossed with
    /// the parameter lists it uses.
    #[arg(long, value_delimiter = ',')]
    pub algos: Option<Vec<String>>,

    /// Bloom false-positive rates [default: 0.01,0.25].
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,

    /// Bucketing load factors [default: 0.2,1,5].
    #[arg(long = "load-factors", value_delimiter = ',')]
    pub load_factors: Option<Vec<f64>>,

    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 0.9, 0.95, 1.0])]
    pub similarities: Vec<f64>,

    /// Items per replica [default: 100000, or 10000 with --quick].
    #[arg(long, conflicts_with = "quick")]
    pub cardinality: Option<usize>,

    /// Use 10,000 items per replica.
    #[arg(long)]
    pub quick: bool,

    /// Item length bounds in bytes, inclusive.
    #[arg(long = "item-len", default_value = "5:80", value_parser = parse_item_len)]
    pub item_len: (usize, usize),

    /// Trials per cell; report and plot average over them.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub trials: u32,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_item_len(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if lo == 0 || lo > hi {
        return Err(format!("need 1 <= lo <= hi, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

impl BenchArgs {
    pub fn configurations(&self) -> Result<Vec<Algorithm>, CliError> {
        if self.algos.is_none() && self.eps.is_none() && self.load_factors.is_none() {
            return Ok(Algorithm::standard_grid());
        }
        let names: Vec<String> = match &self.algos {
            Some(names) => names.clone(),
            None => Algorithm::NAMES.iter().map(|n| n.to_string()).collect(),
        };
        let eps = self.eps.clone().unwrap_or_else(|| DEFAULT_EPS.to_vec());
        let lfs = self.load_factors.clone().unwrap_or_else(|| DEFAULT_LOAD_FACTORS.to_vec());
        if eps.is_empty() || lfs.is_empty() {
            return Err(CliError::Usage("parameter lists must not be empty".into()));
        }
        let mut out: Vec<Algorithm> = Vec::new();
        for name in &names {
            for &e in &eps {
                for &lf in &lfs {
                    let algo = Algorithm::from_parts(name.trim(), Some(e), Some(lf))
                        .map_err(|err| CliError::Usage(err.to_string()))?;
                    if !out.contains(&algo) {
                        out.push(algo);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn cardinality(&self) -> usize {
        match (self.cardinality, self.quick) {
            (Some(c), _) => c,
            (None, true) => QUICK_CARDINALITY,
            (None, false) => DEFAULT_CARDINALITY,
        }
    }
}

/// Seed of the replica pair shared by every configuration in a (similarity, trial) cell.
fn pair_seed(master: u64, similarity: f64, trial: u32) -> u64 {
    mix64(master ^ mix64(similarity.to_bits() ^ mix64(u64::from(trial) + 1)))
}

fn session_seed(pair_seed: u64, algo: &Algorithm) -> u64 {
    mix64(pair_seed ^ keyed_hash(algo.to_string().as_bytes(), 0))
}

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    let configs = args.configurations()?;
    let cardinality = args.cardinality();
    if cardinality == 0 {
        return Err(CliError::Usage("cardinality must be at least 1".into()));
    }
    if args.similarities.is_empty() {
        return Err(CliError::Usage("at least one similarity is required".into()));
    }
    if let Some(s) = args.similarities.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(CliError::Usage(format!("similarity {s} outside [0, 1]")));
    }
    let (lo, hi) = args.item_len;

    let cells = args.similarities.len() * args.trials as usize;
    let mut rows: Vec<(usize, usize, u32, Record)> = Vec::with_capacity(cells * configs.len());
    for (si, &similarity) in args.similarities.iter().enumerate() {
        for trial in 0..args.trials {
            eprintln!(
                "[{}/{cells}] similarity {similarity}, trial {trial}: {} configurations",
                si * args.trials as usize + trial as usize + 1,
                configs.len()
            );
            let seed = pair_seed(args.seed, similarity, trial);
            let spec = PairSpec::new(cardinality, similarity, seed).with_item_len(lo, hi);
            let (a, b) = generate_pair(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
            let results: Vec<_> = configs
                .par_iter()
                .enumerate()
                .map(|(ai, algo)| {
                    run_session(*algo, &a, &b, session_seed(seed, algo))
                        .map(|out| (ai, out.report))
                        .map_err(|e| CliError::Session(format!("{algo} at similarity {similarity}: {e}")))
                })
                .collect::<Result<_, _>>()?;
            for (ai, r) in results {
                rows.push((
                    ai,
                    si,
                    trial,
                    Record {
                        algo: r.algorithm.name().to_string(),
                        params: r.algorithm.params(),
                        similarity,
                        trial,
                        cardinality,
                        metadata_bytes: r.metadata_bytes,
                        redundant_bytes: r.redundant_bytes,
                        necessary_bytes: r.necessary_bytes,
                        total_bytes: r.total_bytes(),
                        messages: r.messages,
                        symbols: r.symbols,
                        converged: r.converged,
                    },
                ));
            }
        }
    }
    rows.sort_by_key(|(ai, si, trial, _)| (*ai, *si, *trial));

    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut writer = csv::Writer::from_writer(sink);
    for (_, _, _, record) in &rows {
        writer.serialize(record).map_err(|e| CliError::Io(e.into()))?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Wrapper {
        #[command(flatten)]
        bench: BenchArgs,
    }

    fn parse(args: &[&str]) -> BenchArgs {
        Wrapper::try_parse_from(std::iter::once("bench").chain(args.iter().copied())).unwrap().bench
    }

    #[test]
    fn default_grid_is_standard() {
        assert_eq!(parse(&[]).configurations().unwrap(), Algorithm::standard_grid());
    }

    #[test]
    fn explicit_flags_cross_product() {
        let c = parse(&["--algos", "Ra,BlRa,Bu", "--eps", "0.01,0.1", "--load-factors", "1"]).configurations().unwrap();
        assert_eq!(
            c,
            vec![
                Algorithm::Rateless,
                Algorithm::BloomRateless { epsilon: 0.01 },
                Algorithm::BloomRateless { epsilon: 0.1 },
                Algorithm::Bucketing { load_factor: 1.0 },
            ]
        );
    }

    #[test]
    fn bad_parameters_are_usage_errors() {
        assert!(matches!(parse(&["--algos", "Nope"]).configurations(), Err(CliError::Usage(_))));
        assert!(matches!(parse(&["--algos", "BlRa", "--eps", "1.5"]).configurations(), Err(CliError::Usage(_))));
        assert!(Wrapper::try_parse_from(["bench", "--item-len", "9:3"]).is_err());
        assert!(Wrapper::try_parse_from(["bench", "--trials", "0"]).is_err());
        assert!(Wrapper::try_parse_from(["bench", "--quick", "--cardinality", "5"]).is_err());
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let base = pair_seed(1, 0.5, 0);
        assert_ne!(base, pair_seed(2, 0.5, 0));
        assert_ne!(base, pair_seed(1, 0.75, 0));
        assert_ne!(base, pair_seed(1, 0.5, 1));
        assert_ne!(session_seed(base, &Algorithm::Rateless), session_seed(base, &Algorithm::Baseline));
    }
}
