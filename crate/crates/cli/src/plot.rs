// Copyright (c) The ConflictSync Authors
// SPDX-License-Identifier: Apache-2.0

use std::ops::Range;
use std::path::{Path, PathBuf};

use clap::Args;
use plotters::coord::types::RangedCoordf64;
use plotters::prelude::*;

use crate::record::{read_records, CellMean, Summary};
use crate::CliError;

const HIGH_SIMILARITY: f64 = 0.9;

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV produced by `bench`.
    pub csv: PathBuf,

    /// Directory for the SVG charts; created if missing.
    #[arg(long = "out-dir", default_value = "plots")]
    pub out_dir: PathBuf,

    /// Only plot these algorithms (names as in the CSV `algo` column).
    #[arg(long, value_delimiter = ',')]
    pub algos: Option<Vec<String>>,
}

#[derive(Clone, Copy)]
enum Scale {
    Log,
    Linear,
}

struct Chart<'a> {
    file: &'a str,
    title: &'a str,
    metric: fn(&CellMean) -> f64,
    scale: Scale,
    min_similarity: f64,
}

const CHARTS: [Chart<'static>; 4] = [
    Chart { file: "metadata.svg", title: "Transmitted metadata", metric: |c| c.metadata, scale: Scale::Log, min_similarity: 0.0 },
    Chart { file: "redundancy.svg", title: "Transmitted redundancy", metric: |c| c.redundant, scale: Scale::Linear, min_similarity: 0.0 },
    Chart { file: "total.svg", title: "Transmitted total", metric: |c| c.total, scale: Scale::Log, min_similarity: 0.0 },
    Chart {
        file: "high_similarity.svg",
        title: "Transmitted total, high similarity",
        metric: |c| c.total,
        scale: Scale::Log,
        min_similarity: HIGH_SIMILARITY,
    },
];

pub fn run(args: &PlotArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut records = read_records(std::fs::File::open(&args.csv)?)?;
    if let Some(wanted) = &args.algos {
        records.retain(|r| wanted.iter().any(|w| w.trim().eq_ignore_ascii_case(&r.algo)));
    }
    if records.is_empty() {
        return Err(CliError::Data("selection matches no rows".into()));
    }
    let summary = Summary::new(&records);
    std::fs::create_dir_all(&args.out_dir)?;
    let mut written = Vec::new();
    for chart in &CHARTS {
        let path = args.out_dir.join(chart.file);
        if draw(&summary, chart, &path)? {
            written.push(path);
        } else {
            eprintln!("skipping {}: no similarities >= {}", chart.file, chart.min_similarity);
        }
    }
    Ok(written)
}

type Series = (String, Vec<(f64, f64)>);

fn draw(summary: &Summary, chart: &Chart, path: &Path) -> Result<bool, CliError> {
    let sims: Vec<f64> = summary.similarities.iter().copied().filter(|&s| s >= chart.min_similarity).collect();
    if sims.is_empty() {
        return Ok(false);
    }
    let series: Vec<Series> = summary
        .labels
        .iter()
        .enumerate()
        .map(|(row, label)| {
            let points =
                sims.iter().filter_map(|&s| summary.cell(row, s).map(|c| (s * 100.0, (chart.metric)(c)))).collect();
            (label.clone(), points)
        })
        .collect();
    let x_range = {
        let (lo, hi) = (sims[0] * 100.0, sims[sims.len() - 1] * 100.0);
        if hi > lo { lo..hi } else { lo - 1.0..hi + 1.0 }
    };
    let max = series.iter().flat_map(|(_, p)| p.iter().map(|&(_, y)| y)).fold(0.0, f64::max);
    let plotted = render(path, chart, &series, x_range, max).map_err(|e| CliError::Plot(format!("{}: {e}", path.display())));
    plotted.map(|()| true)
}

fn render(
    path: &Path,
    chart: &Chart,
    series: &[Series],
    x_range: Range<f64>,
    max: f64,
) -> Result<(), Box<dyn std::error::Error>> {
    let root = SVGBackend::new(path, (1100, 700)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut builder = ChartBuilder::on(&root);
    builder.caption(chart.title, ("sans-serif", 26)).margin(16).x_label_area_size(48).y_label_area_size(90);
    match chart.scale {
        Scale::Log => {
            // Zero-byte cells sit on the 1 B floor of the log axis.
            let top = (max.max(10.0) * 2.0).log10().ceil();
            let mut ctx = builder.build_cartesian_2d(x_range, (1.0..10f64.powf(top)).log_scale())?;
            ctx.configure_mesh()
                .x_desc("similarity (%)")
                .x_label_formatter(&|v| format!("{v:.0}"))
                .y_desc("bytes (log scale; 0 B drawn at 1 B)")
                .y_label_formatter(&|v| conflictsync::simnet::human_bytes(v.round() as u64))
                .draw()?;
            for (i, (label, points)) in series.iter().enumerate() {
                let color = Palette99::pick(i).to_rgba();
                ctx.draw_series(LineSeries::new(points.iter().map(|&(x, y)| (x, y.max(1.0))), color.stroke_width(2)))?
                    .label(label)
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
            }
            ctx.configure_series_labels()
                .position(SeriesLabelPosition::LowerLeft)
                .background_style(WHITE.mix(0.85))
                .border_style(BLACK)
                .draw()?;
        }
        Scale::Linear => {
            let mut ctx: ChartContext<_, Cartesian2d<RangedCoordf64, RangedCoordf64>> =
                builder.build_cartesian_2d(x_range, 0.0..(max * 1.05).max(1.0))?;
            ctx.configure_mesh()
                .x_desc("similarity (%)")
                .x_label_formatter(&|v| format!("{v:.0}"))
                .y_desc("bytes")
                .y_label_formatter(&|v| conflictsync::simnet::human_bytes(v.round() as u64))
                .draw()?;
            for (i, (label, points)) in series.iter().enumerate() {
                let color = Palette99::pick(i).to_rgba();
                ctx.draw_series(LineSeries::new(points.iter().copied(), color.stroke_width(2)))?
                    .label(label)
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
            }
            ctx.configure_series_labels()
                .position(SeriesLabelPosition::UpperLeft)
                .background_style(WHITE.mix(0.85))
                .border_style(BLACK)
                .draw()?;
        }
    }
    root.present()?;
    Ok(())
}
