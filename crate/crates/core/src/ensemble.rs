//! Disorder ensembles at a single parameter point.
//!
//! Realizations are evaluated in parallel on the current rayon pool and
//! gathered into an index-ordered buffer; every reduction afterwards is a
//! serial left-to-right pass. Results are therefore identical for any worker
//! count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{rectified, sample_realization, SeedPolicy};
use crate::error::{Error, Result};
use crate::model::ChainSpec;
use crate::spectral::{susceptibility, susceptibility_along, DriveAxis, Numerics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub spec: ChainSpec,
    pub drive: DriveAxis,
    pub n_realizations: usize,
}

impl GridPoint {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.n_realizations == 0 {
            return Err(Error::InvalidInput("n_realizations must be at least 1".into()));
        }
        Ok(())
    }

    /// Value of the driven mean parameter.
    pub fn drive_value(&self) -> f64 {
        self.drive.mean(&self.spec)
    }
}

/// Histogram bin-width rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    /// `h = 2 IQR n^{-1/3}`; Sturges' rule if the interquartile range vanishes.
    #[default]
    FreedmanDiaconis,
    FixedWidth(f64),
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub numerics: Numerics,
    /// Largest tolerated fraction of failed realizations.
    pub fail_tol: f64,
    /// Use `|x + sigma z|` for every field and anisotropy instead of raw
    /// Gaussian samples.
    pub rectify: bool,
    pub binning: Binning,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        Self {
            numerics: Numerics::default(),
            fail_tol: 0.01,
            rectify: false,
            binning: Binning::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    Gapless,
    NonConvergedDerivative,
    NonPositive,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub index: u64,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointStatus {
    Ok,
    Unreliable,
}

/// Normalized density over equal-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `sum density * width`; 1 up to rounding.
    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }
}

/// Moments and quantiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator).
    pub sd: f64,
    /// Moment coefficient of skewness `m3 / m2^{3/2}`.
    pub skewness: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                count: 0,
                mean: f64::NAN,
                sd: f64::NAN,
                skewness: f64::NAN,
                min: f64::NAN,
                q25: f64::NAN,
                median: f64::NAN,
                q75: f64::NAN,
                max: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let (mut m2, mut m3) = (0.0, 0.0);
        for v in values {
            let d = v - mean;
            m2 += d * d;
            m3 += d * d * d;
        }
        let sd = if n > 1 { (m2 / (nf - 1.0)).sqrt() } else { 0.0 };
        let (m2n, m3n) = (m2 / nf, m3 / nf);
        let skewness = if m2n > 0.0 { m3n / m2n.powf(1.5) } else { 0.0 };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            count: n,
            mean,
            sd,
            skewness,
            min: sorted[0],
            q25: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
            max: sorted[n - 1],
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub grid_point: GridPoint,
    pub master_seed: u64,
    /// Susceptibility of every successful realization, in realization order.
    pub chi_values: Vec<f64>,
    /// Arithmetic mean of `chi_values`, summed left to right.
    pub chi_ave: f64,
    /// Standard error of `chi_ave`.
    pub chi_stderr: f64,
    pub ln_chi: Summary,
    pub histogram: Option<Histogram>,
    pub n_failed: usize,
    pub failures: Vec<Failure>,
    pub status: PointStatus,
}

impl EnsembleStats {
    pub fn n_realizations(&self) -> usize {
        self.grid_point.n_realizations
    }

    pub fn ln_chi_values(&self) -> Vec<f64> {
        self.chi_values.iter().map(|c| c.ln()).collect()
    }

    /// `Err(PointUnreliable)` if more than `fail_tol` of the realizations failed.
    pub fn check_reliable(&self, fail_tol: f64) -> Result<()> {
        let total = self.n_realizations();
        if self.n_failed as f64 > fail_tol * total as f64 || self.chi_values.is_empty() {
            return Err(Error::PointUnreliable {
                failed: self.n_failed,
                total,
                fail_tol,
            });
        }
        Ok(())
    }
}

fn classify(e: &Error) -> FailureKind {
    match e {
        Error::GaplessRealization { .. } => FailureKind::Gapless,
        Error::NonConvergedDerivative { .. } => FailureKind::NonConvergedDerivative,
        _ => FailureKind::Other,
    }
}

/// Susceptibility of realization `index` at a grid point.
pub fn realization_chi(gp: &GridPoint, master_seed: u64, index: u64, opts: &EnsembleOptions) -> Result<f64> {
    let r = sample_realization(&gp.spec, SeedPolicy::new(master_seed, index));
    if opts.rectify {
        // d|x + sigma z|/dx = sign(x + sigma z): differentiate the folded sample
        // along those slopes so the stencil never straddles the kink at zero.
        let folded = rectified(&r);
        let slopes: Vec<f64> = gp.drive.values(&r).iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
        susceptibility_along(&gp.spec, &opts.numerics, &|s| gp.drive.shift_with_slopes(&folded, s, &slopes))
    } else {
        susceptibility(&gp.spec, &r, gp.drive, &opts.numerics)
    }
}

pub fn run_point(gp: &GridPoint, master_seed: u64, opts: &EnsembleOptions) -> Result<EnsembleStats> {
    gp.validate()?;
    opts.numerics.validate()?;
    if !(opts.fail_tol >= 0.0) {
        return Err(Error::InvalidInput(format!("fail_tol must be nonnegative, got {}", opts.fail_tol)));
    }
    let outcomes: Vec<Result<f64>> = (0..gp.n_realizations as u64)
        .into_par_iter()
        .map(|index| realization_chi(gp, master_seed, index, opts))
        .collect();

    let mut chi_values = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (index, outcome) in outcomes.into_iter().enumerate() {
        let index = index as u64;
        match outcome {
            Ok(chi) if chi > 0.0 && chi.is_finite() => chi_values.push(chi),
            Ok(_) => failures.push(Failure {
                index,
                kind: FailureKind::NonPositive,
            }),
            Err(e @ Error::InvalidInput(_)) => return Err(e),
            Err(e) => failures.push(Failure {
                index,
                kind: classify(&e),
            }),
        }
    }
    Ok(assemble_stats(*gp, master_seed, chi_values, failures, opts))
}

fn assemble_stats(
    grid_point: GridPoint,
    master_seed: u64,
    chi_values: Vec<f64>,
    failures: Vec<Failure>,
    opts: &EnsembleOptions,
) -> EnsembleStats {
    let chi_summary = Summary::of(&chi_values);
    let ln: Vec<f64> = chi_values.iter().map(|c| c.ln()).collect();
    let ln_chi = Summary::of(&ln);
    let histogram = histogram(&ln, opts.binning).ok();
    let n_failed = failures.len();
    let mut stats = EnsembleStats {
        grid_point,
        master_seed,
        chi_ave: chi_summary.mean,
        chi_stderr: if chi_summary.count > 1 {
            chi_summary.sd / (chi_summary.count as f64).sqrt()
        } else {
            0.0
        },
        chi_values,
        ln_chi,
        histogram,
        n_failed,
        failures,
        status: PointStatus::Ok,
    };
    if stats.check_reliable(opts.fail_tol).is_err() {
        stats.status = PointStatus::Unreliable;
    }
    stats
}

/// Density histogram of `ln chi` for an ensemble.
pub fn histogram_ln_chi(stats: &EnsembleStats, binning: Binning) -> Result<Histogram> {
    if stats.chi_values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "histogram needs at least 2 successful realizations, have {}",
            stats.chi_values.len()
        )));
    }
    histogram(&stats.ln_chi_values(), binning)
}

/// Density histogram with equal-width bins starting at the sample minimum.
/// A constant sample gets one unit-width bin centred on the value.
pub fn histogram(values: &[f64], binning: Binning) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::InvalidInput("histogram of an empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("histogram of non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let n = values.len();
    if hi == lo {
        return Ok(Histogram {
            edges: vec![lo - 0.5, lo + 0.5],
            counts: vec![n],
            density: vec![1.0],
        });
    }
    let range = hi - lo;
    let bins = match binning {
        Binning::Count(k) => {
            if k == 0 {
                return Err(Error::InvalidInput("bin count must be positive".into()));
            }
            k
        }
        Binning::FixedWidth(w) => {
            if !(w > 0.0) {
                return Err(Error::InvalidInput(format!("bin width must be positive, got {w}")));
            }
            ((range / w).floor() as usize + 1).max(1)
        }
        Binning::FreedmanDiaconis => {
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            let h = 2.0 * iqr / (n as f64).cbrt();
            if h > 0.0 {
                ((range / h).ceil() as usize).clamp(1, 10_000)
            } else {
                ((n as f64).log2().ceil() as usize + 1).max(1)
            }
        }
    };
    let width = match binning {
        Binning::FixedWidth(w) => w,
        _ => range / bins as f64,
    };
    let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &v in &sorted {
        let k = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    let density = counts
        .iter()
        .map(|&c| c as f64 / (n as f64 * width))
        .collect();
    Ok(Histogram {
        edges,
        counts,
        density,
    })
}
