//! Static SVG plots regenerated from `results.csv` alone.
//!
//! Fixed confidence: median per-agent samples against the gap, with 2.5/97.5
//! percentile whiskers over the runs, one panel per task-kernel regime.
//! Fixed budget: error rate against the per-agent budget, one panel per
//! regime. Nothing here recomputes any experiment quantity.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Result;
use plotters::prelude::*;

use crate::experiment::{known_regime, read_results, CsvRow};
use crate::PlotArgs;

const PALETTE: [RGBColor; 5] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
];

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn fc_panel(out: &Path, regime: &str, rows: &[&CsvRow]) -> Result<()> {
    // per (algorithm, delta): median and percentile whiskers
    let mut series: BTreeMap<&str, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for row in rows {
        series
            .entry(row.algorithm.as_str())
            .or_default()
            .entry(row.delta_min.to_bits())
            .or_default()
            .push(row.mean_samples_per_agent);
    }
    let xs: Vec<f64> = {
        let mut v: Vec<f64> = rows.iter().map(|r| r.delta_min).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    };
    let y_max = rows
        .iter()
        .map(|r| r.mean_samples_per_agent)
        .fold(1.0f64, f64::max);

    let path = out.join(format!("fc_{regime}.svg"));
    let root = SVGBackend::new(&path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let x_range = (xs[0] * 0.9)..(xs[xs.len() - 1] * 1.1);
    let mut chart = ChartBuilder::on(&root)
        .caption(
            format!("fixed confidence, {regime} task kernel"),
            ("sans-serif", 20),
        )
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x_range, (1.0..y_max * 1.3).log_scale())?;
    chart
        .configure_mesh()
        .x_desc("minimum gap")
        .y_desc("samples per agent (median, 95% band)")
        .draw()?;

    for (idx, (algo, by_delta)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut points = Vec::new();
        for (&bits, values) in by_delta {
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let x = f64::from_bits(bits);
            let med = percentile(&sorted, 0.5);
            let lo = percentile(&sorted, 0.025).max(1.0);
            let hi = percentile(&sorted, 0.975);
            points.push((x, med));
            chart.draw_series(std::iter::once(PathElement::new(
                vec![(x, lo), (x, hi)],
                color.stroke_width(1),
            )))?;
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        chart
            .draw_series(LineSeries::new(points.clone(), color.stroke_width(2)))?
            .label(algo.to_string())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2))
            });
        chart.draw_series(
            points
                .iter()
                .map(|&(x, y)| Circle::new((x, y), 3, color.filled())),
        )?;
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.85))
        .draw()?;
    root.present()?;
    Ok(())
}

fn fb_panel(out: &Path, regime: &str, rows: &[&CsvRow]) -> Result<()> {
    let mut series: BTreeMap<&str, BTreeMap<u64, (usize, usize)>> = BTreeMap::new();
    for row in rows {
        let entry = series
            .entry(row.algorithm.as_str())
            .or_default()
            .entry(row.budget)
            .or_insert((0, 0));
        entry.1 += 1;
        if !row.all_correct {
            entry.0 += 1;
        }
    }
    let budgets: Vec<u64> = {
        let mut v: Vec<u64> = rows.iter().map(|r| r.budget).collect();
        v.sort_unstable();
        v.dedup();
        v
    };

    let path = out.join(format!("fb_{regime}.svg"));
    let root = SVGBackend::new(&path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let x_range =
        (budgets[0] as f64 * 0.9)..(budgets[budgets.len() - 1] as f64 * 1.1);
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("fixed budget, {regime} task kernel"), ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x_range.log_scale(), 0.0..1.0f64)?;
    chart
        .configure_mesh()
        .x_desc("per-agent budget")
        .y_desc("error rate")
        .draw()?;

    for (idx, (algo, by_budget)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut points: Vec<(f64, f64)> = by_budget
            .iter()
            .map(|(&t, &(fails, total))| (t as f64, fails as f64 / total.max(1) as f64))
            .collect();
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        chart
            .draw_series(LineSeries::new(points.clone(), color.stroke_width(2)))?
            .label(algo.to_string())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2))
            });
        chart.draw_series(
            points
                .iter()
                .map(|&(x, y)| Circle::new((x, y), 3, color.filled())),
        )?;
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.85))
        .draw()?;
    root.present()?;
    Ok(())
}

/// Regenerates every plot from `<out>/results.csv` into `<out>/plots/`.
pub fn emit(out: &Path) -> Result<()> {
    let rows = read_results(&out.join("results.csv"))?;
    let plots_dir = out.join("plots");
    std::fs::create_dir_all(&plots_dir)?;
    let mut regimes: Vec<String> = rows.iter().map(|r| r.regime.clone()).collect();
    regimes.sort();
    regimes.dedup();
    for regime in regimes.iter().filter(|r| known_regime(r)) {
        let fc_rows: Vec<&CsvRow> = rows
            .iter()
            .filter(|r| r.setting == "fc" && &r.regime == regime)
            .collect();
        if !fc_rows.is_empty() {
            fc_panel(&plots_dir, regime, &fc_rows)?;
        }
        let fb_rows: Vec<&CsvRow> = rows
            .iter()
            .filter(|r| r.setting == "fb" && &r.regime == regime)
            .collect();
        if !fb_rows.is_empty() {
            fb_panel(&plots_dir, regime, &fb_rows)?;
        }
    }
    Ok(())
}

pub fn run(args: PlotArgs) -> ExitCode {
    match emit(&args.out) {
        Ok(()) => {
            println!("plots written to {}", args.out.join("plots").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
