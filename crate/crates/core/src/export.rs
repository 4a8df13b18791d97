//! Columnar text and portable-pixmap heatmaps.
//!
//! Floating-point values are written with Rust's shortest round-trip
//! formatting, so text exports parse back to the same bits.

use std::io::{self, Write};

use crate::ensemble::TrajectoryRecord;
use crate::stats::{ComparisonReport, DensitySeries};

/// `t x beta` per sample.
pub fn write_trajectory(record: &TrajectoryRecord, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "# seed {}", record.seed)?;
    writeln!(w, "# t x beta")?;
    for ((t, x), b) in record.times.iter().zip(&record.positions).zip(&record.betas) {
        writeln!(w, "{t} {x} {b}")?;
    }
    Ok(())
}

/// `t x density` per grid point, blank line between times.
pub fn write_density(series: &DensitySeries, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "# t x density")?;
    for (t, row) in series.times.iter().zip(&series.densities) {
        for (x, p) in series.x_centers.iter().zip(row) {
            writeln!(w, "{t} {x} {p}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `t l2 pearson tv` per time.
pub fn write_report(report: &ComparisonReport, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "# t l2_distance pearson_r total_variation")?;
    for i in 0..report.times.len() {
        writeln!(
            w,
            "{} {} {} {}",
            report.times[i], report.l2_distance[i], report.pearson_r[i], report.total_variation[i]
        )?;
    }
    Ok(())
}

/// TOML summary of a comparison: global medians, extremes and counts.
pub fn report_summary(report: &ComparisonReport) -> String {
    let min_r = report.pearson_r.iter().copied().fold(f64::INFINITY, f64::min);
    let max_tv = report.total_variation.iter().copied().fold(0.0, f64::max);
    format!(
        "n_times = {}\nmedian_l2_distance = {}\nmedian_pearson_r = {}\nmin_pearson_r = {}\nmedian_total_variation = {}\nmax_total_variation = {}\n",
        report.times.len(),
        report.median_l2(),
        report.median_pearson(),
        min_r,
        report.median_total_variation(),
        max_tv
    )
}

fn lerp(a: [f64; 3], b: [f64; 3], s: f64) -> [u8; 3] {
    let c = |i: usize| ((a[i] + (b[i] - a[i]) * s) * 255.0).round().clamp(0.0, 255.0) as u8;
    [c(0), c(1), c(2)]
}

/// Black → purple → orange → pale yellow, for non-negative data in `[0, 1]`.
fn sequential(v: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 4] = [
        [0.0, 0.0, 0.02],
        [0.47, 0.11, 0.43],
        [0.93, 0.41, 0.15],
        [0.99, 1.0, 0.64],
    ];
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let pos = v * (STOPS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(STOPS.len() - 2);
    lerp(STOPS[i], STOPS[i + 1], pos - i as f64)
}

/// Blue → white → red, for data in `[−1, 1]`.
fn diverging(v: f64) -> [u8; 3] {
    let v = if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 };
    if v < 0.0 {
        lerp([1.0, 1.0, 1.0], [0.13, 0.27, 0.75], -v)
    } else {
        lerp([1.0, 1.0, 1.0], [0.75, 0.12, 0.12], v)
    }
}

fn ppm(rows: &[Vec<f64>], color: impl Fn(f64) -> [u8; 3]) -> Vec<u8> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    // The first row (earliest time) goes at the bottom of the image.
    for row in rows.iter().rev() {
        for j in 0..width {
            out.extend_from_slice(&color(row.get(j).copied().unwrap_or(0.0)));
        }
    }
    out
}

/// Heatmap of non-negative rows, scaled by the global maximum.
pub fn density_heatmap(rows: &[Vec<f64>]) -> Vec<u8> {
    let max = rows.iter().flatten().copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    ppm(rows, |v| sequential(v * scale))
}

/// Heatmap of signed rows, symmetric about zero.
pub fn signed_heatmap(rows: &[Vec<f64>]) -> Vec<u8> {
    let max = rows.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    ppm(rows, |v| diverging(v * scale))
}

/// Occupancy heatmap of trajectories: counts per (sample, x-bin).
pub fn trajectory_heatmap(records: &[TrajectoryRecord], x_lo: f64, x_hi: f64, bins: usize) -> Vec<u8> {
    let n = records.iter().map(TrajectoryRecord::len).max().unwrap_or(0);
    let mut rows = vec![vec![0.0; bins]; n];
    let h = (x_hi - x_lo) / bins as f64;
    for r in records {
        for (k, x) in r.positions.iter().enumerate() {
            let b = ((x - x_lo) / h).floor();
            if b >= 0.0 && (b as usize) < bins {
                rows[k][b as usize] += 1.0;
            }
        }
    }
    density_heatmap(&rows)
}
