//! Summary tables and static plots derived from a run-record CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{summarize, CgBetterRow, Method, RunRecord, SummaryRow};

const COLORS: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Plot(e.to_string())
}

/// Line plot of one series per label over a numeric x axis.
fn line_plot(path: &Path, title: &str, x_label: &str, y_label: &str, series: &BTreeMap<String, Vec<(f64, f64)>>) -> Result<()> {
    let points = series.values().flatten();
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let y1 = if y1 > 0.0 { y1 * 1.1 } else { 1.0 };
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, 0.0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(plot_err)?;
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
        chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(plot_err)?;
    }
    chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.2}")
    }
}

/// Markdown rendering of the summary tables.
pub fn markdown(summary: &[SummaryRow], better: &[CgBetterRow]) -> String {
    let mut out = String::from("# Run summary\n\n");
    out.push_str("| trips | method | scenario | step (s) | runs | solved | optimal | gap % mean | gap % sd | wall s mean | wall s sd | objective mean |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|---|---|---|\n");
    for r in summary {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.trips,
            r.method.name(),
            r.scenario,
            r.time_step_s,
            r.runs,
            r.solved,
            r.optimal,
            fmt(r.mean_gap_percent),
            fmt(r.sd_gap_percent),
            fmt(r.mean_wall_time_s),
            fmt(r.sd_wall_time_s),
            fmt(r.mean_objective)
        );
    }
    out.push_str("\n## CG Better\n\n`100 (1 - ub_cg / ub_exact)` where the exact model stopped without proving optimality.\n\n");
    if better.is_empty() {
        out.push_str("No instance without a proven exact optimum.\n");
    } else {
        out.push_str("| trips | scenario | step (s) | instances | mean % | sd % |\n|---|---|---|---|---|---|\n");
        for r in better {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                r.trips,
                r.scenario,
                r.time_step_s,
                r.instances,
                fmt(r.mean_percent),
                fmt(r.sd_percent)
            );
        }
    }
    out
}

/// Writes `summary.csv`, `cg_better.csv`, `report.md` and the SVG plots into
/// `out_dir`; returns the paths written.
pub fn write_report(records: &[RunRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let (summary, better) = summarize(records);
    let mut written = Vec::new();

    let path = out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &summary {
        w.serialize(r)?;
    }
    w.flush()?;
    written.push(path);

    let path = out_dir.join("cg_better.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &better {
        w.serialize(r)?;
    }
    w.flush()?;
    written.push(path);

    let path = out_dir.join("report.md");
    fs::write(&path, markdown(&summary, &better))?;
    written.push(path);

    let mut wall: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut gap: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in summary.iter().filter(|r| r.solved > 0) {
        if r.method == Method::Exact {
            wall.entry(format!("|I| = {} {}", r.trips, r.scenario)).or_default().push((r.time_step_s, r.mean_wall_time_s));
        }
        gap.entry(format!("{} {} dt {}", r.method.name(), r.scenario, r.time_step_s))
            .or_default()
            .push((r.trips as f64, r.mean_gap_percent));
    }
    let path = out_dir.join("wall_time_by_step.svg");
    line_plot(&path, "Exact solve time by time step", "time step (s)", "mean wall time (s)", &wall)?;
    written.push(path);
    let path = out_dir.join("gap_by_size.svg");
    line_plot(&path, "Optimality gap by instance size", "trips", "mean gap (%)", &gap)?;
    written.push(path);
    Ok(written)
}
