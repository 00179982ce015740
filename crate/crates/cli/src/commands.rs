//! `sweep`, `hist` and `oracle-check`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use xyfid::ensemble::{histogram_ln_chi, run_point, EnsembleStats, Histogram, PointStatus, Summary};
use xyfid::model::build_quadratic_form;
use xyfid::oracle::gates::{run_gates, GateConfig, GateResult};
use xyfid::scaling::{peak, sweep_with_progress, FitRow, ScalingFit, SweepPlan, SweepTable};

use crate::config::{ConfigError, Format, HistTarget, RunConfig};
use crate::output::{
    label_value, write_file, Header, HistCsvRow, HistSummaryRow, JsonDocument, OutputError,
    ScalingCsvRow, SweepCsvRow, Table,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Numerics(#[from] xyfid::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Output(_) => "output",
            CliError::Numerics(xyfid::Error::InvalidInput(_)) => "config",
            CliError::Numerics(_) => "numerics",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "numerics" => 1,
            _ => exit::CONFIG,
        }
    }
}

pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const GATE_FAILURE: i32 = 3;
    pub const UNRELIABLE: i32 = 4;
}

/// What a command produced; `unreliable` decides between exit codes 0 and 4.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub unreliable: Vec<String>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.unreliable.is_empty() {
            exit::SUCCESS
        } else {
            exit::UNRELIABLE
        }
    }
}

/// Per-point progress callback: `(sigma, drive value, L, stats)`.
pub type Progress<'a> = &'a mut dyn FnMut(f64, f64, usize, &EnsembleStats);

fn sigma_dir(cfg: &RunConfig, sigma: f64) -> PathBuf {
    if cfg.model.sigmas.len() > 1 {
        cfg.output.directory.join(format!("sigma_{}", label_value(sigma)))
    } else {
        cfg.output.directory.clone()
    }
}

fn header(cfg: &RunConfig, kind: &str, sigma: f64) -> Header {
    Header {
        kind: kind.to_string(),
        master_seed: cfg.ensemble.master_seed,
        sigma,
        config: cfg.to_json(),
    }
}

fn emit<T: Serialize>(
    cfg: &RunConfig,
    report: &mut Report,
    dir: &Path,
    stem: &str,
    csv: impl FnOnce() -> String,
    json: impl FnOnce() -> JsonDocument<T>,
) -> Result<(), OutputError> {
    if cfg.output.formats.contains(&Format::Csv) {
        let path = dir.join(format!("{stem}.csv"));
        write_file(&path, &csv())?;
        report.files.push(path);
    }
    if cfg.output.formats.contains(&Format::Json) {
        let path = dir.join(format!("{stem}.json"));
        write_file(&path, &json().render())?;
        report.files.push(path);
    }
    Ok(())
}

pub fn sweep_rows(table: &SweepTable) -> Vec<SweepCsvRow> {
    table
        .rows
        .iter()
        .map(|r| SweepCsvRow {
            drive_value: r.drive_value,
            length: r.length,
            chi_ave: r.stats.chi_ave,
            ln_chi_mean: r.stats.ln_chi.mean,
            ln_chi_sd: r.stats.ln_chi.sd,
            n_failed: r.stats.n_failed,
            n_realizations: r.stats.grid_point.n_realizations,
        })
        .collect()
}

pub fn scaling_rows(table: &SweepTable) -> Vec<ScalingCsvRow> {
    table
        .fits
        .iter()
        .map(|f| ScalingCsvRow {
            drive_value: f.drive_value,
            delta_chi: f.fit.as_ref().map(|x| x.delta_chi),
            stderr: f.fit.as_ref().map(|x| x.stderr),
            r_squared: f.fit.as_ref().map(|x| x.r_squared),
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct SweepPointJson<'a> {
    drive_value: f64,
    length: usize,
    n_realizations: usize,
    chi_ave: f64,
    chi_stderr: f64,
    ln_chi: &'a Summary,
    n_failed: usize,
    failures: &'a [xyfid::ensemble::Failure],
    status: PointStatus,
}

#[derive(Debug, Serialize)]
struct ScalingJson<'a> {
    drive_value: f64,
    fit: Option<&'a ScalingFit>,
    error: Option<&'a str>,
    unreliable: bool,
}

/// Runs the sweep for every disorder strength and writes `sweep.*` and `scaling.*`.
pub fn cmd_sweep(cfg: &RunConfig, progress: Progress<'_>) -> Result<(Report, Vec<(f64, SweepTable)>), CliError> {
    cfg.validate()?;
    let opts = cfg.ensemble_options();
    let mut report = Report::default();
    let mut tables = Vec::new();
    for &sigma in &cfg.model.sigmas {
        let plan = cfg.plan(sigma)?;
        let table = sweep_with_progress(&plan, cfg.ensemble.master_seed, &opts, |row| {
            progress(sigma, row.drive_value, row.length, &row.stats)
        })?;
        let dir = sigma_dir(cfg, sigma);
        let h = header(cfg, "sweep", sigma);
        emit(
            cfg,
            &mut report,
            &dir,
            "sweep",
            || Table { header: h.clone(), rows: sweep_rows(&table) }.render(),
            || {
                let points: Vec<_> = table
                    .rows
                    .iter()
                    .map(|r| SweepPointJson {
                        drive_value: r.drive_value,
                        length: r.length,
                        n_realizations: r.stats.grid_point.n_realizations,
                        chi_ave: r.stats.chi_ave,
                        chi_stderr: r.stats.chi_stderr,
                        ln_chi: &r.stats.ln_chi,
                        n_failed: r.stats.n_failed,
                        failures: &r.stats.failures,
                        status: r.stats.status,
                    })
                    .collect();
                JsonDocument::new(&h, serde_json::to_value(points).expect("points serialize"))
            },
        )?;
        let h = header(cfg, "scaling", sigma);
        emit(
            cfg,
            &mut report,
            &dir,
            "scaling",
            || Table { header: h.clone(), rows: scaling_rows(&table) }.render(),
            || {
                let fits: Vec<_> = table.fits.iter().map(scaling_json).collect();
                JsonDocument::new(&h, serde_json::to_value(fits).expect("fits serialize"))
            },
        )?;
        for row in &table.rows {
            if row.stats.status == PointStatus::Unreliable {
                report.unreliable.push(format!(
                    "sigma={sigma} {}={} L={}: {} of {} realizations failed",
                    plan.drive.name(),
                    row.drive_value,
                    row.length,
                    row.stats.n_failed,
                    row.stats.grid_point.n_realizations
                ));
            }
        }
        tables.push((sigma, table));
    }
    Ok((report, tables))
}

fn scaling_json(f: &FitRow) -> ScalingJson<'_> {
    ScalingJson {
        drive_value: f.drive_value,
        fit: f.fit.as_ref(),
        error: f.error.as_deref(),
        unreliable: f.unreliable,
    }
}

#[derive(Debug, Serialize)]
struct HistJson<'a> {
    label: &'a str,
    drive_value: f64,
    length: usize,
    n_realizations: usize,
    chi_ave: f64,
    chi_stderr: f64,
    ln_chi: &'a Summary,
    n_failed: usize,
    status: PointStatus,
    histogram: &'a Histogram,
}

/// Resolves every histogram location, runs the points and writes
/// `hist_<point>.*` plus `hist_summary.*`.
pub fn cmd_hist(cfg: &RunConfig, progress: Progress<'_>) -> Result<(Report, Vec<HistSummaryRow>), CliError> {
    cfg.validate()?;
    let targets = cfg.hist_targets()?;
    let binning = cfg.ensemble_options().binning;
    let opts = cfg.ensemble_options();
    let mut report = Report::default();
    let mut summaries = Vec::new();
    for &sigma in &cfg.model.sigmas {
        let plan = cfg.plan(sigma)?;
        let dir = sigma_dir(cfg, sigma);
        let mut rows = Vec::new();
        let mut argmax_cache: BTreeMap<usize, f64> = BTreeMap::new();
        for &length in &cfg.hist_sizes() {
            for target in &targets {
                let (value, label) = match *target {
                    HistTarget::At(v) => (v, format!("{}{}_L{length}", plan.drive.name(), label_value(v))),
                    HistTarget::Argmax => {
                        let v = match argmax_cache.get(&length) {
                            Some(&v) => v,
                            None => {
                                let v = argmax_value(&plan, length, cfg, &mut *progress, sigma)?;
                                argmax_cache.insert(length, v);
                                v
                            }
                        };
                        (v, format!("{}argmax_L{length}", plan.drive.name()))
                    }
                };
                let gp = plan.grid_point(value, length);
                let stats = run_point(&gp, cfg.ensemble.master_seed, &opts)?;
                progress(sigma, value, length, &stats);
                if stats.status == PointStatus::Unreliable {
                    report.unreliable.push(format!(
                        "sigma={sigma} {label}: {} of {} realizations failed",
                        stats.n_failed, gp.n_realizations
                    ));
                }
                let histogram = match &stats.histogram {
                    Some(h) if binning == opts.binning => h.clone(),
                    _ => histogram_ln_chi(&stats, binning)?,
                };
                let h = header(cfg, "hist", sigma);
                emit(
                    cfg,
                    &mut report,
                    &dir,
                    &format!("hist_{label}"),
                    || Table { header: h.clone(), rows: hist_rows(&histogram) }.render(),
                    || {
                        let doc = HistJson {
                            label: &label,
                            drive_value: value,
                            length,
                            n_realizations: gp.n_realizations,
                            chi_ave: stats.chi_ave,
                            chi_stderr: stats.chi_stderr,
                            ln_chi: &stats.ln_chi,
                            n_failed: stats.n_failed,
                            status: stats.status,
                            histogram: &histogram,
                        };
                        JsonDocument::new(&h, serde_json::to_value(doc).expect("histogram serializes"))
                    },
                )?;
                rows.push(HistSummaryRow {
                    label,
                    drive_value: value,
                    length,
                    count: stats.ln_chi.count,
                    n_failed: stats.n_failed,
                    chi_ave: stats.chi_ave,
                    ln_chi_mean: stats.ln_chi.mean,
                    ln_chi_sd: stats.ln_chi.sd,
                    ln_chi_skewness: stats.ln_chi.skewness,
                    ln_chi_median: stats.ln_chi.median,
                });
            }
        }
        let h = header(cfg, "hist-summary", sigma);
        emit(
            cfg,
            &mut report,
            &dir,
            "hist_summary",
            || Table { header: h.clone(), rows: rows.clone() }.render(),
            || JsonDocument::new(&h, serde_json::to_value(&rows).expect("rows serialize")),
        )?;
        summaries.extend(rows);
    }
    Ok((report, summaries))
}

fn hist_rows(h: &Histogram) -> Vec<HistCsvRow> {
    h.edges
        .windows(2)
        .zip(&h.density)
        .map(|(e, &density)| HistCsvRow {
            bin_left: e[0],
            bin_right: e[1],
            density,
        })
        .collect()
}

/// Grid location of the largest `[chi]_ave` at one size.
fn argmax_value(
    plan: &SweepPlan,
    length: usize,
    cfg: &RunConfig,
    progress: Progress<'_>,
    sigma: f64,
) -> Result<f64, CliError> {
    let single = SweepPlan {
        sizes: vec![length],
        ..plan.clone()
    };
    let table = sweep_with_progress(&single, cfg.ensemble.master_seed, &cfg.ensemble_options(), |row| {
        progress(sigma, row.drive_value, row.length, &row.stats)
    })?;
    let (xs, ys) = table.curve(length);
    peak(&xs, &ys)
        .map(|p| p.x_grid)
        .ok_or_else(|| CliError::Config(ConfigError::Invalid("argmax over an empty curve".into())))
}

/// Runs every oracle gate; the caller maps a failed gate to exit code 3.
pub fn cmd_oracle_check(gates: &GateConfig) -> Result<Vec<GateResult>, CliError> {
    Ok(run_gates(gates, build_quadratic_form)?)
}

pub fn render_gate_table(results: &[GateResult]) -> String {
    let mut out = format!(
        "{:<26} {:>12} {:>10} {:>8} {:>8}  {}\n",
        "gate", "measured", "tolerance", "checked", "skipped", "result"
    );
    for g in results {
        out.push_str(&format!(
            "{:<26} {:>12.3e} {:>10.0e} {:>8} {:>8}  {}\n",
            g.name,
            g.measured,
            g.tolerance,
            g.checked,
            g.skipped,
            if g.passed { "pass" } else { "FAIL" }
        ));
    }
    out
}
