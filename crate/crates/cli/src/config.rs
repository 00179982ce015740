//! Run configuration: TOML on disk, fully resolved JSON in every output file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use xyfid::ensemble::{Binning, EnsembleOptions};
use xyfid::model::{Boundary, ChainSpec};
use xyfid::scaling::{linear_grid, SweepPlan};
use xyfid::spectral::{DriveAxis, Numerics};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unknown preset {0:?} (expected fig1, fig2 or fig3)")]
    UnknownPreset(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl From<xyfid::Error> for ConfigError {
    fn from(e: xyfid::Error) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

/// Grid of the driven mean, either as an inclusive range or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range { start: f64, stop: f64, step: f64 },
    Values(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        let values = match self {
            Grid::Range { start, stop, step } => linear_grid(*start, *stop, *step)?,
            Grid::Values(v) => v.clone(),
        };
        if values.is_empty() {
            return Err(ConfigError::Invalid("grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::Invalid("grid values must be finite".into()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ConfigError::Invalid("grid must be strictly increasing".into()));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub sizes: Vec<usize>,
    pub drive: DriveAxis,
    pub grid: Grid,
    /// Mean of the parameter that is not driven.
    pub fixed_mean: f64,
    /// One sweep per entry; several entries write one subdirectory each.
    pub sigmas: Vec<f64>,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

fn default_boundary() -> Boundary {
    Boundary::PeriodicEvenSector
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LargeSizes {
    /// Sizes strictly above this use `n_realizations` below.
    pub threshold: usize,
    pub n_realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    #[serde(default = "default_n")]
    pub n_realizations: usize,
    #[serde(default)]
    pub large_sizes: Option<LargeSizes>,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_fail_tol")]
    pub fail_tol: f64,
    /// Fold every sample to `|mean + sigma z|`; off means raw Gaussians.
    #[serde(default)]
    pub rectify: bool,
    #[serde(default)]
    pub weighted_fit: bool,
}

fn default_n() -> usize {
    2000
}
fn default_seed() -> u64 {
    20_130_701
}
fn default_fail_tol() -> f64 {
    0.01
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        Self {
            n_realizations: default_n(),
            large_sizes: None,
            master_seed: default_seed(),
            fail_tol: default_fail_tol(),
            rectify: false,
            weighted_fit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Displacement of the log-fidelity cross-check.
    #[serde(default = "default_dx")]
    pub logfidelity_dx: f64,
    #[serde(default = "default_sv_tol")]
    pub sv_tol: f64,
    #[serde(default = "default_richardson_tol")]
    pub richardson_tol: f64,
}

fn default_delta() -> f64 {
    Numerics::default().delta
}
fn default_dx() -> f64 {
    1e-4
}
fn default_sv_tol() -> f64 {
    Numerics::default().sv_tol
}
fn default_richardson_tol() -> f64 {
    Numerics::default().richardson_tol
}

impl Default for NumericsBlock {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            logfidelity_dx: default_dx(),
            sv_tol: default_sv_tol(),
            richardson_tol: default_richardson_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

/// Where a histogram is taken along the drive axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HistAt {
    Value(f64),
    /// `"argmax"`: grid maximum of `[chi]_ave` at the histogram size.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistBlock {
    pub points: Vec<HistAt>,
    /// Defaults to the model sizes.
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
    #[serde(default)]
    pub binning: BinningSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum BinningSpec {
    #[default]
    FreedmanDiaconis,
    FixedWidth {
        width: f64,
    },
    Count {
        bins: usize,
    },
}

impl From<&BinningSpec> for Binning {
    fn from(b: &BinningSpec) -> Self {
        match *b {
            BinningSpec::FreedmanDiaconis => Binning::FreedmanDiaconis,
            BinningSpec::FixedWidth { width } => Binning::FixedWidth(width),
            BinningSpec::Count { bins } => Binning::Count(bins),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub ensemble: EnsembleBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub hist: Option<HistBlock>,
}

/// A resolved histogram location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HistTarget {
    At(f64),
    Argmax,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Canonical single-line JSON of the resolved config.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes to JSON")
    }

    pub fn numerics(&self) -> Numerics {
        Numerics {
            delta: self.numerics.delta,
            sv_tol: self.numerics.sv_tol,
            richardson_tol: self.numerics.richardson_tol,
            richardson_check: true,
        }
    }

    pub fn ensemble_options(&self) -> EnsembleOptions {
        EnsembleOptions {
            numerics: self.numerics(),
            fail_tol: self.ensemble.fail_tol,
            rectify: self.ensemble.rectify,
            binning: self
                .hist
                .as_ref()
                .map(|h| Binning::from(&h.binning))
                .unwrap_or_default(),
        }
    }

    /// Sweep plan for one disorder strength.
    pub fn plan(&self, sigma: f64) -> Result<SweepPlan, ConfigError> {
        let m = &self.model;
        let (field, gamma) = match m.drive {
            DriveAxis::Field => (0.0, m.fixed_mean),
            DriveAxis::Anisotropy => (m.fixed_mean, 0.0),
        };
        let length = m.sizes.first().copied().unwrap_or(0);
        let base = ChainSpec::new(length, field, gamma, sigma, m.boundary)?;
        Ok(SweepPlan {
            base,
            drive: m.drive,
            values: m.grid.values()?,
            sizes: m.sizes.clone(),
            n_realizations: self.ensemble.n_realizations,
            large_size_override: self
                .ensemble
                .large_sizes
                .as_ref()
                .map(|l| (l.threshold, l.n_realizations)),
            weighted_fit: self.ensemble.weighted_fit,
        })
    }

    pub fn hist_targets(&self) -> Result<Vec<HistTarget>, ConfigError> {
        let Some(h) = &self.hist else {
            return Err(ConfigError::Invalid("no [hist] block".into()));
        };
        h.points
            .iter()
            .map(|p| match p {
                HistAt::Value(v) if v.is_finite() => Ok(HistTarget::At(*v)),
                HistAt::Value(v) => Err(ConfigError::Invalid(format!("histogram point {v} is not finite"))),
                HistAt::Named(s) if s == "argmax" => Ok(HistTarget::Argmax),
                HistAt::Named(s) => Err(ConfigError::Invalid(format!(
                    "histogram point {s:?} is neither a number nor \"argmax\""
                ))),
            })
            .collect()
    }

    pub fn hist_sizes(&self) -> Vec<usize> {
        self.hist
            .as_ref()
            .and_then(|h| h.sizes.clone())
            .unwrap_or_else(|| self.model.sizes.clone())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if m.sizes.is_empty() {
            return Err(ConfigError::Invalid("model.sizes is empty".into()));
        }
        if m.sizes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ConfigError::Invalid("model.sizes must be strictly increasing".into()));
        }
        if m.sigmas.is_empty() {
            return Err(ConfigError::Invalid("model.sigmas is empty".into()));
        }
        if !m.fixed_mean.is_finite() {
            return Err(ConfigError::Invalid("model.fixed_mean must be finite".into()));
        }
        for &sigma in &m.sigmas {
            let plan = self.plan(sigma)?;
            plan.validate()?;
        }
        let e = &self.ensemble;
        if e.n_realizations == 0 {
            return Err(ConfigError::Invalid("ensemble.n_realizations must be positive".into()));
        }
        if let Some(l) = &e.large_sizes {
            if l.n_realizations == 0 {
                return Err(ConfigError::Invalid("ensemble.large_sizes.n_realizations must be positive".into()));
            }
        }
        if !(e.fail_tol >= 0.0 && e.fail_tol <= 1.0) {
            return Err(ConfigError::Invalid("ensemble.fail_tol must lie in [0, 1]".into()));
        }
        self.numerics().validate()?;
        if !(self.numerics.logfidelity_dx > 0.0) {
            return Err(ConfigError::Invalid("numerics.logfidelity_dx must be positive".into()));
        }
        if self.output.formats.is_empty() {
            return Err(ConfigError::Invalid("output.formats is empty".into()));
        }
        if let Some(h) = &self.hist {
            self.hist_targets()?;
            if h.points.is_empty() {
                return Err(ConfigError::Invalid("hist.points is empty".into()));
            }
            for &l in &self.hist_sizes() {
                ChainSpec::new(l, 1.0, 1.0, 0.0, m.boundary)?;
            }
            match h.binning {
                BinningSpec::FixedWidth { width } if !(width > 0.0) => {
                    return Err(ConfigError::Invalid("hist.binning.width must be positive".into()))
                }
                BinningSpec::Count { bins: 0 } => {
                    return Err(ConfigError::Invalid("hist.binning.bins must be positive".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
}

impl std::str::FromStr for Preset {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }
}

impl Preset {
    /// Paper-scale settings, or the reduced desk-scale variant. All presets use
    /// nonnegative couplings and fields (`rectify = true`).
    ///
    /// | preset | paper scale | desk scale |
    /// |---|---|---|
    /// | fig1 | L in {128, 256, 512}, N = 50000 (10000 above L = 400) | L in {64, 128, 256}, N = 2000 |
    /// | fig2 | L in {400, 410, ..., 500}, N = 10000 | L in {64, 128, 256}, N = 2000 |
    /// | fig3 | L = 400, N = 10000 | L = 200, N = 1000 |
    pub fn config(self, desk_scale: bool) -> RunConfig {
        let ensemble = |n: usize, large: Option<LargeSizes>| EnsembleBlock {
            n_realizations: n,
            large_sizes: large,
            rectify: true,
            ..EnsembleBlock::default()
        };
        match self {
            Preset::Fig1 => RunConfig {
                model: ModelBlock {
                    sizes: if desk_scale { vec![64, 128, 256] } else { vec![128, 256, 512] },
                    drive: DriveAxis::Field,
                    grid: Grid::Range {
                        start: 0.5,
                        stop: 1.5,
                        step: if desk_scale { 0.02 } else { 0.01 },
                    },
                    fixed_mean: 1.0,
                    sigmas: vec![0.0, 0.1, 0.3],
                    boundary: Boundary::PeriodicEvenSector,
                },
                ensemble: if desk_scale {
                    ensemble(2000, None)
                } else {
                    ensemble(
                        50_000,
                        Some(LargeSizes {
                            threshold: 400,
                            n_realizations: 10_000,
                        }),
                    )
                },
                numerics: NumericsBlock::default(),
                output: OutputBlock {
                    directory: PathBuf::from(if desk_scale { "out/fig1-desk" } else { "out/fig1" }),
                    ..OutputBlock::default()
                },
                hist: Some(HistBlock {
                    points: vec![HistAt::Value(1.0), HistAt::Value(1.5)],
                    sizes: None,
                    binning: BinningSpec::FreedmanDiaconis,
                }),
            },
            Preset::Fig2 => RunConfig {
                model: ModelBlock {
                    sizes: if desk_scale {
                        vec![64, 128, 256]
                    } else {
                        (400..=500).step_by(10).collect()
                    },
                    drive: DriveAxis::Anisotropy,
                    grid: Grid::Range {
                        start: -0.15,
                        stop: 0.15,
                        step: 0.005,
                    },
                    fixed_mean: 0.2,
                    sigmas: vec![0.1],
                    boundary: Boundary::PeriodicEvenSector,
                },
                ensemble: ensemble(if desk_scale { 2000 } else { 10_000 }, None),
                numerics: NumericsBlock::default(),
                output: OutputBlock {
                    directory: PathBuf::from(if desk_scale { "out/fig2-desk" } else { "out/fig2" }),
                    ..OutputBlock::default()
                },
                hist: Some(HistBlock {
                    points: vec![
                        HistAt::Value(0.0),
                        HistAt::Named("argmax".into()),
                        HistAt::Value(0.15),
                    ],
                    sizes: Some(if desk_scale { vec![256] } else { vec![500] }),
                    binning: BinningSpec::FreedmanDiaconis,
                }),
            },
            Preset::Fig3 => RunConfig {
                model: ModelBlock {
                    sizes: if desk_scale { vec![200] } else { vec![400] },
                    drive: DriveAxis::Anisotropy,
                    grid: Grid::Range {
                        start: -0.4,
                        stop: 0.4,
                        step: if desk_scale { 0.02 } else { 0.01 },
                    },
                    fixed_mean: 0.5,
                    sigmas: vec![0.0, 0.1, 0.2, 0.3],
                    boundary: Boundary::PeriodicEvenSector,
                },
                ensemble: ensemble(if desk_scale { 1000 } else { 10_000 }, None),
                numerics: NumericsBlock::default(),
                output: OutputBlock {
                    directory: PathBuf::from(if desk_scale { "out/fig3-desk" } else { "out/fig3" }),
                    ..OutputBlock::default()
                },
                hist: None,
            },
        }
    }
}
