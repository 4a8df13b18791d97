//! Empirical densities, trajectory speeds, local wavelengths and density
//! comparisons.

use rayon::prelude::*;

use crate::analytic::{AnalyticParams, AnalyticSolution, DEFAULT_MODES};
use crate::config::{Grid, PhysicalParams, RunConfig};
use crate::ensemble::{EnsembleResult, FieldSnapshot, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::wavefield::FieldState;

/// Tolerance on the unit integral of a density row.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;

/// Shortest window accepted by [`quasi_steady_speed`], in Compton periods.
pub const MIN_SPEED_WINDOW: f64 = 10.0;

/// Speed below which [`de_broglie_check`] refuses to measure.
pub const MIN_DE_BROGLIE_SPEED: f64 = 0.05;

/// Trapezoidal integral of samples `ys` at abscissae `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::GridMismatch(format!(
            "{} abscissae for {} values",
            xs.len(),
            ys.len()
        )));
    }
    Ok(xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum())
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * h).collect()
}

fn check_uniform(xs: &[f64]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::GridMismatch("a density grid needs at least two points".into()));
    }
    let h = xs[1] - xs[0];
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::GridMismatch("density grid must be increasing".into()));
    }
    for w in xs.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::GridMismatch(format!(
                "density grid is not uniform near x = {}",
                w[0]
            )));
        }
    }
    Ok(())
}

/// Normalized densities on a uniform grid, one row per time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySeries {
    pub times: Vec<f64>,
    pub x_centers: Vec<f64>,
    /// `densities[i][j]` is the density at `times[i]`, `x_centers[j]`.
    pub densities: Vec<Vec<f64>>,
}

impl DensitySeries {
    /// Validated series: uniform grid, non-negative rows with unit integral.
    pub fn new(times: Vec<f64>, x_centers: Vec<f64>, densities: Vec<Vec<f64>>) -> Result<DensitySeries> {
        check_uniform(&x_centers)?;
        if times.len() != densities.len() {
            return Err(Error::GridMismatch(format!(
                "{} times for {} density rows",
                times.len(),
                densities.len()
            )));
        }
        for (t, row) in times.iter().zip(&densities) {
            if row.len() != x_centers.len() {
                return Err(Error::GridMismatch(format!(
                    "row at t = {t} has {} values for {} points",
                    row.len(),
                    x_centers.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(Error::Normalization(format!("density {v} at t = {t}")));
            }
            let mass = trapezoid(&x_centers, row)?;
            if (mass - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::Normalization(format!("density at t = {t} integrates to {mass}")));
            }
        }
        Ok(DensitySeries {
            times,
            x_centers,
            densities,
        })
    }

    pub fn row(&self, t: f64) -> Option<&[f64]> {
        self.times
            .iter()
            .position(|&s| s == t)
            .map(|i| self.densities[i].as_slice())
    }

    /// Mean and variance of row `i`.
    pub fn moments(&self, i: usize) -> Result<(f64, f64)> {
        let row = &self.densities[i];
        let xs = &self.x_centers;
        let first: Vec<f64> = xs.iter().zip(row).map(|(x, p)| x * p).collect();
        let mean = trapezoid(xs, &first)?;
        let second: Vec<f64> = xs.iter().zip(row).map(|(x, p)| (x - mean) * (x - mean) * p).collect();
        Ok((mean, trapezoid(xs, &second)?))
    }
}

fn normalize(xs: &[f64], mut row: Vec<f64>, t: f64) -> Result<Vec<f64>> {
    let mass = trapezoid(xs, &row)?;
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::Normalization(format!("density at t = {t} has integral {mass}")));
    }
    for v in &mut row {
        *v /= mass;
    }
    Ok(row)
}

/// Positions of every record at time `t`, sorted.
fn positions_at(result: &EnsembleResult, t: f64) -> Result<Vec<f64>> {
    if result.records.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut out = result
        .records
        .iter()
        .map(|r| r.index_of(t).map(|k| r.positions[k]).ok_or(Error::NotSampled(t)))
        .collect::<Result<Vec<f64>>>()?;
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Gaussian kernel density of `positions` on `xs`, before renormalization.
pub fn kernel_density(positions: &[f64], bandwidth: f64, xs: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (bandwidth * (2.0 * std::f64::consts::PI).sqrt() * positions.len() as f64);
    xs.iter()
        .map(|&x| {
            positions
                .iter()
                .map(|&p| {
                    let s = (x - p) / bandwidth;
                    (-0.5 * s * s).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Kernel density estimate of the particle position at each of `times`.
///
/// Positions are sorted before summation, so the result does not depend on
/// the order of the records.
pub fn pdf_series(result: &EnsembleResult, bandwidth: f64, x_grid: &[f64], times: &[f64]) -> Result<DensitySeries> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::Parameter(format!(
            "bandwidth must be positive (got {bandwidth})"
        )));
    }
    check_uniform(x_grid)?;
    let rows = times
        .par_iter()
        .map(|&t| {
            let p = positions_at(result, t)?;
            normalize(x_grid, kernel_density(&p, bandwidth, x_grid), t)
        })
        .collect::<Result<Vec<_>>>()?;
    DensitySeries::new(times.to_vec(), x_grid.to_vec(), rows)
}

/// Histogram estimate with one bin per grid point, as a cross-check of
/// [`pdf_series`].
pub fn histogram_series(result: &EnsembleResult, x_grid: &[f64], times: &[f64]) -> Result<DensitySeries> {
    check_uniform(x_grid)?;
    let h = x_grid[1] - x_grid[0];
    let lo = x_grid[0] - 0.5 * h;
    let rows = times
        .iter()
        .map(|&t| {
            let mut row = vec![0.0; x_grid.len()];
            for p in positions_at(result, t)? {
                let b = ((p - lo) / h).floor();
                if b >= 0.0 && (b as usize) < row.len() {
                    row[b as usize] += 1.0;
                }
            }
            normalize(x_grid, row, t)
        })
        .collect::<Result<Vec<_>>>()?;
    DensitySeries::new(times.to_vec(), x_grid.to_vec(), rows)
}

/// Least-squares slope of `x(t)` over `[t_a, t_b]`, divided by `c`.
pub fn quasi_steady_speed(record: &TrajectoryRecord, t_a: f64, t_b: f64, params: &PhysicalParams) -> Result<f64> {
    let min = MIN_SPEED_WINDOW * params.tau_c();
    let slack = 1e-9 * params.tau_c();
    if !(t_b - t_a >= min - slack) {
        return Err(Error::WindowTooShort { t_a, t_b, min });
    }
    let last = record.times.last().copied().ok_or(Error::EmptyEnsemble)?;
    if t_a < -slack || t_b > last + slack {
        return Err(Error::Parameter(format!(
            "window [{t_a}, {t_b}] outside the record [0, {last}]"
        )));
    }
    let (ts, xs): (Vec<f64>, Vec<f64>) = record
        .times
        .iter()
        .zip(&record.positions)
        .filter(|(t, _)| **t >= t_a - slack && **t <= t_b + slack)
        .map(|(t, x)| (*t, *x))
        .unzip();
    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let x_mean = xs.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, x) in ts.iter().zip(&xs) {
        sxy += (t - t_mean) * (x - x_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    Ok(sxy / sxx / params.c)
}

/// First sampled time at which `|x − x0|` exceeds `distance`.
pub fn first_departure(record: &TrajectoryRecord, x0: f64, distance: f64) -> Option<f64> {
    record
        .positions
        .iter()
        .position(|x| (x - x0).abs() > distance)
        .map(|k| record.times[k])
}

/// Twice the mean spacing of zero crossings of `phi` in
/// `[x_p − half_window, x_p + half_window]`.
pub fn local_wavelength(field: &FieldState, x_p: f64, half_window: f64) -> Result<f64> {
    local_wavelength_on(&field.grid, &field.phi_curr, x_p, half_window)
}

/// [`local_wavelength`] on a bare array of nodal values.
pub fn local_wavelength_on(grid: &Grid, phi: &[f64], x_p: f64, half_window: f64) -> Result<f64> {
    if phi.len() != grid.nx {
        return Err(Error::GridMismatch(format!(
            "{} values on a grid of {} nodes",
            phi.len(),
            grid.nx
        )));
    }
    let lo = x_p - half_window;
    let hi = x_p + half_window;
    if !(half_window > 0.0) || lo < grid.x_min || hi > grid.x_max {
        return Err(Error::OutOfDomain {
            x: x_p,
            lo: grid.x_min + half_window,
            hi: grid.x_max - half_window,
        });
    }
    let dx = grid.dx();
    let j0 = ((lo - grid.x_min) / dx).ceil() as usize;
    let j1 = (((hi - grid.x_min) / dx).floor() as usize).min(grid.nx - 1);
    let mut crossings = Vec::new();
    for j in j0..j1 {
        let (a, b) = (phi[j], phi[j + 1]);
        if (a < 0.0) != (b < 0.0) {
            crossings.push(grid.x(j) + dx * (a / (a - b)));
        }
    }
    if crossings.len() < 2 {
        return Err(Error::InsufficientCrossings { found: crossings.len() });
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Ok(2.0 * span / (crossings.len() - 1) as f64)
}

/// Ratios `r = λ_local γ|β| / λ_c` at every snapshot where `|β|` exceeds
/// `min_speed`.
///
/// `min_speed` may not be below [`MIN_DE_BROGLIE_SPEED`]; slower samples are
/// skipped.
pub fn de_broglie_check(
    record: &TrajectoryRecord,
    snapshots: &[FieldSnapshot],
    grid: &Grid,
    params: &PhysicalParams,
    half_window: f64,
    min_speed: f64,
) -> Result<Vec<f64>> {
    if !(min_speed >= MIN_DE_BROGLIE_SPEED) {
        return Err(Error::Parameter(format!(
            "minimum speed must be at least {MIN_DE_BROGLIE_SPEED} (got {min_speed})"
        )));
    }
    let mut out = Vec::new();
    for snap in snapshots {
        let k = record.index_of(snap.t).ok_or(Error::NotSampled(snap.t))?;
        let beta = record.betas[k];
        if beta.abs() <= min_speed {
            continue;
        }
        let lambda = local_wavelength_on(grid, &snap.phi, record.positions[k], half_window)?;
        let gamma = 1.0 / (1.0 - beta * beta).sqrt();
        out.push(lambda * gamma * beta.abs() / params.lambda_c());
    }
    Ok(out)
}

/// Per-time agreement between two density series.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    pub l2_distance: Vec<f64>,
    pub pearson_r: Vec<f64>,
    pub total_variation: Vec<f64>,
}

impl ComparisonReport {
    pub fn median_l2(&self) -> f64 {
        median(&self.l2_distance)
    }

    pub fn median_pearson(&self) -> f64 {
        median(&self.pearson_r)
    }

    pub fn median_total_variation(&self) -> f64 {
        median(&self.total_variation)
    }
}

fn pearson(p: &[f64], q: &[f64]) -> f64 {
    if p == q {
        return 1.0;
    }
    let n = p.len() as f64;
    let pm = p.iter().sum::<f64>() / n;
    let qm = q.iter().sum::<f64>() / n;
    let mut spq = 0.0;
    let mut spp = 0.0;
    let mut sqq = 0.0;
    for (a, b) in p.iter().zip(q) {
        spq += (a - pm) * (b - qm);
        spp += (a - pm) * (a - pm);
        sqq += (b - qm) * (b - qm);
    }
    if spp == 0.0 || sqq == 0.0 {
        return 0.0;
    }
    (spq / (spp.sqrt() * sqq.sqrt())).clamp(-1.0, 1.0)
}

/// L2 distance, Pearson correlation and total variation per time.
///
/// Both series must share times and grid exactly.
pub fn compare(empirical: &DensitySeries, analytic: &DensitySeries) -> Result<ComparisonReport> {
    if empirical.times != analytic.times {
        return Err(Error::GridMismatch("density series have different times".into()));
    }
    if empirical.x_centers != analytic.x_centers {
        return Err(Error::GridMismatch("density series have different grids".into()));
    }
    let xs = &empirical.x_centers;
    let mut report = ComparisonReport {
        times: empirical.times.clone(),
        l2_distance: Vec::with_capacity(xs.len()),
        pearson_r: Vec::with_capacity(xs.len()),
        total_variation: Vec::with_capacity(xs.len()),
    };
    for (p, q) in empirical.densities.iter().zip(&analytic.densities) {
        let sq: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).collect();
        let abs: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a - b).abs()).collect();
        report.l2_distance.push(trapezoid(xs, &sq)?.sqrt());
        report.pearson_r.push(pearson(p, q));
        report
            .total_variation
            .push((0.5 * trapezoid(xs, &abs)?).clamp(0.0, 1.0));
    }
    Ok(report)
}

/// Analytic parameters matched to an empirical series: the Born density at
/// `t = 0` gets the variance of the first empirical row, centred on `x0`, on
/// the simulation domain.
///
/// Analytic coordinates are measured from the domain midpoint.
pub fn fit_analytic_params(empirical: &DensitySeries, config: &RunConfig) -> Result<AnalyticParams> {
    if empirical.times.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let (_, variance) = empirical.moments(0)?;
    // |ψ₀|² = exp(−2(x/a)²) has variance a²/4.
    let a = 2.0 * variance.sqrt();
    let grid = &config.grid;
    AnalyticParams::new(
        1.0,
        a,
        config.x0 - grid.midpoint(),
        0.5 * (grid.x_max - grid.x_min),
        DEFAULT_MODES,
        &config.params,
    )
}

/// Born densities on the grid and times of `empirical`, with parameters from
/// [`fit_analytic_params`].
pub fn born_reference(empirical: &DensitySeries, config: &RunConfig) -> Result<(AnalyticParams, DensitySeries)> {
    let params = fit_analytic_params(empirical, config)?;
    let series = born_series_at(params, config, &empirical.x_centers, &empirical.times)?;
    Ok((params, series))
}

/// Born densities at simulation coordinates `xs`; analytic coordinates are
/// measured from the domain midpoint of `config`.
pub fn born_series_at(params: AnalyticParams, config: &RunConfig, xs: &[f64], times: &[f64]) -> Result<DensitySeries> {
    let sol = AnalyticSolution::new(params)?;
    let mid = config.grid.midpoint();
    let shifted: Vec<f64> = xs.iter().map(|x| x - mid).collect();
    let rows = times
        .iter()
        .map(|&t| sol.born_density(&shifted, t))
        .collect::<Result<Vec<_>>>()?;
    DensitySeries::new(times.to_vec(), xs.to_vec(), rows)
}

/// Median of a non-empty slice; `NaN` for an empty one.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
