//! Parameter sweeps and finite-size scaling of `[chi]_ave ~ L^{Delta_chi}`.

use serde::{Deserialize, Serialize};

use crate::ensemble::{run_point, EnsembleOptions, EnsembleStats, GridPoint, PointStatus};
use crate::error::{Error, Result};
use crate::model::ChainSpec;
use crate::spectral::DriveAxis;

/// Log-log least-squares fit of `chi_ave` against `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Fitted exponent.
    pub delta_chi: f64,
    pub stderr: f64,
    /// Intercept of `ln chi_ave` at `ln L = 0`.
    pub intercept: f64,
    pub r_squared: f64,
    pub sizes_used: Vec<usize>,
}

fn prepare(points: &[(usize, f64, f64)]) -> Result<Vec<(usize, f64, f64)>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut distinct = pts.iter().map(|p| p.0).collect::<Vec<_>>();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "scaling fit needs at least 3 distinct sizes, got {}",
            distinct.len()
        )));
    }
    if let Some(p) = pts.iter().find(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "chi_ave must be positive and finite, got {} at L = {}",
            p.1, p.0
        )));
    }
    if pts.iter().any(|p| p.0 == 0) {
        return Err(Error::InvalidInput("size 0 in scaling fit".into()));
    }
    Ok(pts)
}

fn weighted_line(points: &[(usize, f64, f64)], use_weights: bool) -> ScalingFit {
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let ws: Vec<f64> = points
        .iter()
        .map(|p| if use_weights { (p.1 / p.2).powi(2) } else { 1.0 })
        .collect();
    let wsum: f64 = ws.iter().sum();
    let xbar = xs.iter().zip(&ws).map(|(x, w)| w * x).sum::<f64>() / wsum;
    let ybar = ys.iter().zip(&ws).map(|(y, w)| w * y).sum::<f64>() / wsum;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for ((x, y), w) in xs.iter().zip(&ys).zip(&ws) {
        let (dx, dy) = (x - xbar, y - ybar);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let dof = (points.len() - 2) as f64;
    let stderr = if use_weights {
        // Absolute weights: the covariance is (sum w dx^2)^{-1}.
        (1.0 / sxx).sqrt()
    } else if dof > 0.0 {
        (ssr / dof / sxx).sqrt()
    } else {
        0.0
    };
    let mut sizes_used: Vec<usize> = points.iter().map(|p| p.0).collect();
    sizes_used.dedup();
    ScalingFit {
        delta_chi: slope,
        stderr,
        intercept,
        r_squared: if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 },
        sizes_used,
    }
}

/// Ordinary least squares of `ln chi_ave` on `ln L`; `stderr` from the residual variance.
pub fn fit_scaling_dimension(points: &[(usize, f64)]) -> Result<ScalingFit> {
    let pts: Vec<_> = points.iter().map(|&(l, c)| (l, c, 1.0)).collect();
    Ok(weighted_line(&prepare(&pts)?, false))
}

/// Weighted least squares with `(L, chi_ave, stderr of chi_ave)` triples;
/// the weight of a point is `(chi_ave / stderr)^2`.
pub fn fit_scaling_dimension_weighted(points: &[(usize, f64, f64)]) -> Result<ScalingFit> {
    let pts = prepare(points)?;
    if let Some(p) = pts.iter().find(|p| !(p.2 > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "weighted fit needs positive standard errors, got {} at L = {}",
            p.2, p.0
        )));
    }
    Ok(weighted_line(&pts, true))
}

/// One-axis sweep over mean values and system sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    /// Template; its length and driven mean are overwritten per point.
    pub base: ChainSpec,
    pub drive: DriveAxis,
    pub values: Vec<f64>,
    pub sizes: Vec<usize>,
    pub n_realizations: usize,
    /// Sizes strictly above `.0` use `.1` realizations instead.
    pub large_size_override: Option<(usize, usize)>,
    pub weighted_fit: bool,
}

impl SweepPlan {
    pub fn realizations_for(&self, length: usize) -> usize {
        match self.large_size_override {
            Some((threshold, n)) if length > threshold => n,
            _ => self.n_realizations,
        }
    }

    pub fn grid_point(&self, value: f64, length: usize) -> GridPoint {
        GridPoint {
            spec: self.drive.set_mean(&self.base.with_length(length), value),
            drive: self.drive,
            n_realizations: self.realizations_for(length),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.sizes.is_empty() {
            return Err(Error::InvalidInput("sweep needs at least one value and one size".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("sweep values must be strictly increasing".into()));
        }
        for &l in &self.sizes {
            self.grid_point(self.values[0], l).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub drive_value: f64,
    pub length: usize,
    pub stats: EnsembleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub drive_value: f64,
    pub fit: Option<ScalingFit>,
    /// Why the fit is missing, if it is.
    pub error: Option<String>,
    /// Some input point exceeded the failure tolerance.
    pub unreliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub drive: DriveAxis,
    pub master_seed: u64,
    /// Long format, ordered by drive value then size.
    pub rows: Vec<SweepRow>,
    /// One per drive value; empty when fewer than 3 sizes were swept.
    pub fits: Vec<FitRow>,
}

impl SweepTable {
    pub fn rows_for_size(&self, length: usize) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.length == length)
    }

    /// `(x, chi_ave)` curve at one size.
    pub fn curve(&self, length: usize) -> (Vec<f64>, Vec<f64>) {
        self.rows_for_size(length)
            .map(|r| (r.drive_value, r.stats.chi_ave))
            .unzip()
    }

    pub fn any_unreliable(&self) -> bool {
        self.rows.iter().any(|r| r.stats.status == PointStatus::Unreliable)
    }
}

pub fn fit_rows(rows: &[SweepRow], weighted: bool) -> ScalingFitOutcome {
    let unreliable = rows.iter().any(|r| r.stats.status == PointStatus::Unreliable);
    let fit = if weighted {
        let pts: Vec<_> = rows
            .iter()
            .map(|r| (r.length, r.stats.chi_ave, r.stats.chi_stderr))
            .collect();
        fit_scaling_dimension_weighted(&pts)
    } else {
        let pts: Vec<_> = rows.iter().map(|r| (r.length, r.stats.chi_ave)).collect();
        fit_scaling_dimension(&pts)
    };
    ScalingFitOutcome { fit, unreliable }
}

pub struct ScalingFitOutcome {
    pub fit: Result<ScalingFit>,
    pub unreliable: bool,
}

/// Runs every `(value, size)` point of the plan and fits `Delta_chi` per value.
/// Unreliable points are kept and marked; they do not abort the sweep.
pub fn sweep(plan: &SweepPlan, master_seed: u64, opts: &EnsembleOptions) -> Result<SweepTable> {
    sweep_with_progress(plan, master_seed, opts, |_| {})
}

pub fn sweep_with_progress(
    plan: &SweepPlan,
    master_seed: u64,
    opts: &EnsembleOptions,
    mut progress: impl FnMut(&SweepRow),
) -> Result<SweepTable> {
    plan.validate()?;
    let mut sizes = plan.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let mut rows = Vec::with_capacity(plan.values.len() * sizes.len());
    for &value in &plan.values {
        for &length in &sizes {
            let stats = run_point(&plan.grid_point(value, length), master_seed, opts)?;
            let row = SweepRow {
                drive_value: value,
                length,
                stats,
            };
            progress(&row);
            rows.push(row);
        }
    }
    let mut fits = Vec::new();
    if sizes.len() >= 3 {
        for chunk in rows.chunks(sizes.len()) {
            let outcome = fit_rows(chunk, plan.weighted_fit);
            fits.push(FitRow {
                drive_value: chunk[0].drive_value,
                unreliable: outcome.unreliable,
                error: outcome.fit.as_ref().err().map(|e| e.to_string()),
                fit: outcome.fit.ok(),
            });
        }
    }
    Ok(SweepTable {
        drive: plan.drive,
        master_seed,
        rows,
        fits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    /// Grid location of the maximum.
    pub x_grid: f64,
    /// Vertex of the parabola through the maximum and its two neighbours.
    pub x_refined: f64,
    pub value: f64,
}

fn refine(xs: &[f64], ys: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= xs.len() {
        return xs[i];
    }
    let (x0, x1, x2) = (xs[i - 1], xs[i], xs[i + 1]);
    let (y0, y1, y2) = (ys[i - 1], ys[i], ys[i + 1]);
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 {
        x1
    } else {
        (x1 - 0.5 * num / den).clamp(x0, x2)
    }
}

/// Global maximum of a sampled curve with parabolic refinement. NaNs are ignored.
pub fn peak(xs: &[f64], ys: &[f64]) -> Option<Peak> {
    let index = ys
        .iter()
        .enumerate()
        .filter(|(_, y)| y.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))?
        .0;
    Some(Peak {
        index,
        x_grid: xs[index],
        x_refined: refine(xs, ys, index),
        value: ys[index],
    })
}

/// Strict interior local maxima, with parabolic refinement.
pub fn local_maxima(xs: &[f64], ys: &[f64]) -> Vec<Peak> {
    (1..ys.len().saturating_sub(1))
        .filter(|&i| ys[i] > ys[i - 1] && ys[i] > ys[i + 1])
        .map(|i| Peak {
            index: i,
            x_grid: xs[i],
            x_refined: refine(xs, ys, i),
            value: ys[i],
        })
        .collect()
}

/// Evenly spaced grid `start, start + step, ...` up to `stop` inclusive,
/// computed as `start + k * step` to avoid accumulated drift.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(Error::InvalidInput(format!(
            "bad grid: start {start}, stop {stop}, step {step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| {
            let x = start + k as f64 * step;
            // Trim representation noise such as 0.30000000000000004.
            (x * 1e12).round() / 1e12
        })
        .collect())
}
