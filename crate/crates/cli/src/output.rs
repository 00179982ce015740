//! Bit-stable CSV tables and their JSON mirrors.
//!
//! Every CSV starts with `#` comment lines carrying the output kind, the
//! master seed and the fully resolved config as one line of JSON. Floats are
//! written in Rust's shortest round-trip form, so parsing a table and
//! rendering it again reproduces the original bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed table: {0}")]
    Malformed(String),
}

/// Metadata heading every emitted file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: String,
    pub master_seed: u64,
    /// Disorder strength this file belongs to.
    pub sigma: f64,
    /// Single-line JSON of the resolved config.
    pub config: String,
}

impl Header {
    fn render(&self, out: &mut String) {
        writeln!(out, "# kind: {}", self.kind).unwrap();
        writeln!(out, "# master_seed: {}", self.master_seed).unwrap();
        writeln!(out, "# sigma: {}", self.sigma).unwrap();
        writeln!(out, "# config: {}", self.config).unwrap();
    }

    fn parse(lines: &mut std::iter::Peekable<std::str::Lines<'_>>) -> Result<Self, OutputError> {
        let mut field = |key: &str| -> Result<String, OutputError> {
            let line = lines
                .next()
                .ok_or_else(|| OutputError::Malformed(format!("missing header line {key}")))?;
            line.strip_prefix(&format!("# {key}: "))
                .map(str::to_string)
                .ok_or_else(|| OutputError::Malformed(format!("expected header {key}, got {line:?}")))
        };
        let kind = field("kind")?;
        let master_seed = field("master_seed")?
            .parse()
            .map_err(|e| OutputError::Malformed(format!("master_seed: {e}")))?;
        let sigma = field("sigma")?
            .parse()
            .map_err(|e| OutputError::Malformed(format!("sigma: {e}")))?;
        let config = field("config")?;
        Ok(Self {
            kind,
            master_seed,
            sigma,
            config,
        })
    }
}

/// A row type with a fixed column order.
pub trait Row: Sized {
    const COLUMNS: &'static [&'static str];
    fn cells(&self) -> Vec<String>;
    fn from_cells(cells: &[&str]) -> Result<Self, OutputError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table<R> {
    pub header: Header,
    pub rows: Vec<R>,
}

impl<R: Row> Table<R> {
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.header.render(&mut out);
        out.push_str(&R::COLUMNS.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.cells().join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, OutputError> {
        let mut lines = text.lines().peekable();
        let header = Header::parse(&mut lines)?;
        let columns = lines
            .next()
            .ok_or_else(|| OutputError::Malformed("missing column line".into()))?;
        if columns != R::COLUMNS.join(",") {
            return Err(OutputError::Malformed(format!("unexpected columns {columns:?}")));
        }
        let rows = lines
            .map(|line| {
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != R::COLUMNS.len() {
                    return Err(OutputError::Malformed(format!("row {line:?} has {} cells", cells.len())));
                }
                R::from_cells(&cells)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { header, rows })
    }
}

fn float(cell: &str) -> Result<f64, OutputError> {
    cell.parse()
        .map_err(|e| OutputError::Malformed(format!("{cell:?}: {e}")))
}

fn integer(cell: &str) -> Result<usize, OutputError> {
    cell.parse()
        .map_err(|e| OutputError::Malformed(format!("{cell:?}: {e}")))
}

/// Optional floats are written as empty cells.
fn opt_float(cell: &str) -> Result<Option<f64>, OutputError> {
    if cell.is_empty() {
        Ok(None)
    } else {
        float(cell).map(Some)
    }
}

fn opt_cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub drive_value: f64,
    pub length: usize,
    pub chi_ave: f64,
    pub ln_chi_mean: f64,
    pub ln_chi_sd: f64,
    pub n_failed: usize,
    pub n_realizations: usize,
}

impl Row for SweepCsvRow {
    const COLUMNS: &'static [&'static str] = &[
        "drive_value",
        "L",
        "chi_ave",
        "ln_chi_mean",
        "ln_chi_sd",
        "n_failed",
        "n_realizations",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.drive_value.to_string(),
            self.length.to_string(),
            self.chi_ave.to_string(),
            self.ln_chi_mean.to_string(),
            self.ln_chi_sd.to_string(),
            self.n_failed.to_string(),
            self.n_realizations.to_string(),
        ]
    }

    fn from_cells(c: &[&str]) -> Result<Self, OutputError> {
        Ok(Self {
            drive_value: float(c[0])?,
            length: integer(c[1])?,
            chi_ave: float(c[2])?,
            ln_chi_mean: float(c[3])?,
            ln_chi_sd: float(c[4])?,
            n_failed: integer(c[5])?,
            n_realizations: integer(c[6])?,
        })
    }
}

/// Missing fits (fewer than 3 usable sizes) leave the numeric cells empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCsvRow {
    pub drive_value: f64,
    pub delta_chi: Option<f64>,
    pub stderr: Option<f64>,
    pub r_squared: Option<f64>,
}

impl Row for ScalingCsvRow {
    const COLUMNS: &'static [&'static str] = &["drive_value", "delta_chi", "stderr", "r_squared"];

    fn cells(&self) -> Vec<String> {
        vec![
            self.drive_value.to_string(),
            opt_cell(self.delta_chi),
            opt_cell(self.stderr),
            opt_cell(self.r_squared),
        ]
    }

    fn from_cells(c: &[&str]) -> Result<Self, OutputError> {
        Ok(Self {
            drive_value: float(c[0])?,
            delta_chi: opt_float(c[1])?,
            stderr: opt_float(c[2])?,
            r_squared: opt_float(c[3])?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistCsvRow {
    pub bin_left: f64,
    pub bin_right: f64,
    pub density: f64,
}

impl Row for HistCsvRow {
    const COLUMNS: &'static [&'static str] = &["bin_left", "bin_right", "density"];

    fn cells(&self) -> Vec<String> {
        vec![
            self.bin_left.to_string(),
            self.bin_right.to_string(),
            self.density.to_string(),
        ]
    }

    fn from_cells(c: &[&str]) -> Result<Self, OutputError> {
        Ok(Self {
            bin_left: float(c[0])?,
            bin_right: float(c[1])?,
            density: float(c[2])?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistSummaryRow {
    pub label: String,
    pub drive_value: f64,
    pub length: usize,
    pub count: usize,
    pub n_failed: usize,
    pub chi_ave: f64,
    pub ln_chi_mean: f64,
    pub ln_chi_sd: f64,
    pub ln_chi_skewness: f64,
    pub ln_chi_median: f64,
}

impl Row for HistSummaryRow {
    const COLUMNS: &'static [&'static str] = &[
        "label",
        "drive_value",
        "L",
        "count",
        "n_failed",
        "chi_ave",
        "ln_chi_mean",
        "ln_chi_sd",
        "ln_chi_skewness",
        "ln_chi_median",
    ];

    fn cells(&self) -> Vec<String> {
        vec![
            self.label.clone(),
            self.drive_value.to_string(),
            self.length.to_string(),
            self.count.to_string(),
            self.n_failed.to_string(),
            self.chi_ave.to_string(),
            self.ln_chi_mean.to_string(),
            self.ln_chi_sd.to_string(),
            self.ln_chi_skewness.to_string(),
            self.ln_chi_median.to_string(),
        ]
    }

    fn from_cells(c: &[&str]) -> Result<Self, OutputError> {
        Ok(Self {
            label: c[0].to_string(),
            drive_value: float(c[1])?,
            length: integer(c[2])?,
            count: integer(c[3])?,
            n_failed: integer(c[4])?,
            chi_ave: float(c[5])?,
            ln_chi_mean: float(c[6])?,
            ln_chi_sd: float(c[7])?,
            ln_chi_skewness: float(c[8])?,
            ln_chi_median: float(c[9])?,
        })
    }
}

/// JSON mirror: the header fields plus an arbitrary payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonDocument<T> {
    pub kind: String,
    pub master_seed: u64,
    pub sigma: f64,
    pub config: serde_json::Value,
    pub data: T,
}

impl<T: Serialize> JsonDocument<T> {
    pub fn new(header: &Header, data: T) -> Self {
        Self {
            kind: header.kind.clone(),
            master_seed: header.master_seed,
            sigma: header.sigma,
            config: serde_json::from_str(&header.config).expect("header config is JSON"),
            data,
        }
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    let io = |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

/// File-name fragment for a real number: `-0.15` becomes `m0.15`.
pub fn label_value(x: f64) -> String {
    let s = x.to_string();
    match s.strip_prefix('-') {
        Some(rest) => format!("m{rest}"),
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Header {
        Header {
            kind: "sweep".into(),
            master_seed: 42,
            sigma: 0.1,
            config: r#"{"a":1}"#.into(),
        }
    }

    #[test]
    fn awkward_floats_round_trip() {
        let rows = vec![
            SweepCsvRow {
                drive_value: 0.1 + 0.2,
                length: 64,
                chi_ave: 1.0 / 3.0,
                ln_chi_mean: -1e-300,
                ln_chi_sd: 0.0,
                n_failed: 0,
                n_realizations: 2000,
            },
            SweepCsvRow {
                drive_value: -0.0,
                length: 128,
                chi_ave: 6.02e23,
                ln_chi_mean: f64::MIN_POSITIVE,
                ln_chi_sd: f64::NAN,
                n_failed: 3,
                n_realizations: 2000,
            },
        ];
        let table = Table { header: header(), rows };
        let text = table.render();
        let back = Table::<SweepCsvRow>::parse(&text).unwrap();
        assert_eq!(back.render(), text);
        assert_eq!(back.rows[0].drive_value.to_bits(), (0.1f64 + 0.2).to_bits());
        assert!(text.starts_with("# kind: sweep\n# master_seed: 42\n# sigma: 0.1\n# config: {\"a\":1}\n"));
    }

    #[test]
    fn empty_fit_cells_round_trip() {
        let table = Table {
            header: header(),
            rows: vec![ScalingCsvRow {
                drive_value: 1.5,
                delta_chi: None,
                stderr: None,
                r_squared: None,
            }],
        };
        let text = table.render();
        assert!(text.ends_with("1.5,,,\n"));
        assert_eq!(Table::<ScalingCsvRow>::parse(&text).unwrap().render(), text);
    }

    #[test]
    fn malformed_tables_are_rejected() {
        assert!(Table::<HistCsvRow>::parse("").is_err());
        assert!(Table::<HistCsvRow>::parse("# kind: h\n# master_seed: 1\n# sigma: 0\n# config: {}\nx,y\n").is_err());
        assert!(Table::<HistCsvRow>::parse("# kind: h\n# master_seed: 1\n# sigma: 0\n# config: {}\nbin_left,bin_right,density\n1,2\n").is_err());
        assert!(Table::<HistCsvRow>::parse("# kind: h\n# master_seed: one\n# sigma: 0\n# config: {}\n").is_err());
    }

    #[test]
    fn value_labels() {
        assert_eq!(label_value(-0.15), "m0.15");
        assert_eq!(label_value(1.0), "1");
        assert_eq!(label_value(0.036), "0.036");
    }
}
