//! Tabular data: covariate matrix plus response, and CSV ingestion.

use log::info;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{input, Error, Result};

/// Covariates `x` (row-major `n x d`) with response `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    d: usize,
    pub columns: Vec<String>,
    pub target: String,
    pub source: Option<String>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return input("ragged covariate rows");
        }
        let x = rows.into_iter().flatten().collect();
        Self::from_flat(x, y, d)
    }

    /// Builds from a row-major covariate buffer of length `y.len() * d`.
    pub fn from_flat(x: Vec<f64>, y: Vec<f64>, d: usize) -> Result<Self> {
        if x.len() != y.len() * d {
            return input(format!(
                "covariate buffer has {} values, expected {} x {}",
                x.len(),
                y.len(),
                d
            ));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return input("dataset values must be finite");
        }
        Ok(Dataset {
            x,
            y,
            d,
            columns: (0..d).map(|j| format!("x{j}")).collect(),
            target: "y".into(),
            source: None,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(indices.len() * self.d);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset {
            x,
            y,
            d: self.d,
            columns: self.columns.clone(),
            target: self.target.clone(),
            source: self.source.clone(),
        }
    }

    /// Same rows with the covariates dropped.
    pub fn without_covariates(&self) -> Dataset {
        Dataset {
            x: Vec::new(),
            y: self.y.clone(),
            d: 0,
            columns: Vec::new(),
            target: self.target.clone(),
            source: self.source.clone(),
        }
    }

    pub fn with_names(mut self, columns: Vec<String>, target: impl Into<String>) -> Result<Self> {
        if columns.len() != self.d {
            return input(format!("{} column names for {} covariates", columns.len(), self.d));
        }
        self.columns = columns;
        self.target = target.into();
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Delimiter {
    Byte(u8),
    /// Any run of spaces or tabs.
    Whitespace,
}

/// Which column holds the response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
    Last,
}

impl TargetColumn {
    /// Numeric strings are read as 0-based column indices.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) if s.eq_ignore_ascii_case("last") => TargetColumn::Last,
            Err(_) => TargetColumn::Name(s.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub delimiter: Delimiter,
    pub has_header: bool,
    /// Column names to use when the file has no header row.
    pub column_names: Option<Vec<String>>,
    pub target: TargetColumn,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: Delimiter::Byte(b','),
            has_header: true,
            column_names: None,
            target: TargetColumn::Last,
        }
    }
}

/// Parsing presets for the two UCI benchmark files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetPreset {
    /// `qsar_aquatic_toxicity.csv`: semicolon separated, no header, 8 features then LC50.
    Qsar,
    /// `airfoil_self_noise.dat`: tab separated, no header, 5 features then sound pressure.
    Airfoil,
}

impl DatasetPreset {
    pub fn options(self) -> CsvOptions {
        let names: &[&str] = match self {
            DatasetPreset::Qsar => &[
                "TPSA", "SAacc", "H050", "MLOGP", "RDCHI", "GATS1p", "nN", "C040", "LC50",
            ],
            DatasetPreset::Airfoil => &[
                "frequency",
                "angle",
                "chord",
                "velocity",
                "thickness",
                "sound_pressure",
            ],
        };
        CsvOptions {
            delimiter: match self {
                DatasetPreset::Qsar => Delimiter::Byte(b';'),
                DatasetPreset::Airfoil => Delimiter::Whitespace,
            },
            has_header: false,
            column_names: Some(names.iter().map(|s| s.to_string()).collect()),
            target: TargetColumn::Last,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qsar" => Some(DatasetPreset::Qsar),
            "airfoil" => Some(DatasetPreset::Airfoil),
            _ => None,
        }
    }

    /// Guess from a file name.
    pub fn detect(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_string_lossy().to_ascii_lowercase();
        if name.contains("qsar") {
            Some(DatasetPreset::Qsar)
        } else if name.contains("airfoil") {
            Some(DatasetPreset::Airfoil)
        } else {
            None
        }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "?" | "null")
}

/// Reads a numeric table. Rows with a missing cell are dropped and counted;
/// any other non-numeric cell is a parse error.
pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut ds = parse_table(&text, options)?;
    ds.source = Some(path.display().to_string());
    Ok(ds)
}

pub fn parse_table(text: &str, options: &CsvOptions) -> Result<Dataset> {
    let records = split_records(text, options.delimiter)?;
    let mut iter = records.into_iter();
    let header: Option<Vec<String>> = if options.has_header {
        iter.next()
    } else {
        None
    };
    let rows: Vec<Vec<String>> = iter.filter(|r| !(r.len() == 1 && r[0].trim().is_empty())).collect();
    let width = header
        .as_ref()
        .map(Vec::len)
        .or_else(|| rows.first().map(Vec::len))
        .ok_or_else(|| Error::Schema("empty table".into()))?;
    let names: Vec<String> = match (&header, &options.column_names) {
        (_, Some(names)) => names.clone(),
        (Some(h), None) => h.iter().map(|s| s.trim().to_string()).collect(),
        (None, None) => (0..width).map(|j| format!("c{j}")).collect(),
    };
    if names.len() != width {
        return Err(Error::Schema(format!(
            "{} column names for {} columns",
            names.len(),
            width
        )));
    }
    let target = match &options.target {
        TargetColumn::Last => width - 1,
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(i) => {
            return Err(Error::Schema(format!("target column {i} out of range (width {width})")))
        }
        TargetColumn::Name(n) => names
            .iter()
            .position(|c| c == n)
            .ok_or_else(|| Error::Schema(format!("target column `{n}` not found")))?,
    };

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut dropped = 0usize;
    let first_data_row = usize::from(options.has_header) + 1;
    'rows: for (r, rec) in rows.iter().enumerate() {
        let row_no = r + first_data_row;
        if rec.len() != width {
            return Err(Error::Parse {
                row: row_no,
                col: rec.len().min(width),
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut values = Vec::with_capacity(width);
        for (c, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if is_missing(cell) {
                dropped += 1;
                continue 'rows;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row_no,
                col: c + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            values.push(v);
        }
        for (c, v) in values.iter().enumerate() {
            if c == target {
                y.push(*v);
            } else {
                x.push(*v);
            }
        }
    }
    info!("loaded {} rows ({} dropped for missing values)", y.len(), dropped);
    let d = width - 1;
    let columns = names
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != target)
        .map(|(_, n)| n.clone())
        .collect();
    let target_name = names[target].clone();
    Dataset::from_flat(x, y, d)?.with_names(columns, target_name)
}

fn split_records(text: &str, delimiter: Delimiter) -> Result<Vec<Vec<String>>> {
    match delimiter {
        Delimiter::Whitespace => Ok(text
            .lines()
            .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
            .map(|r| if r.is_empty() { vec![String::new()] } else { r })
            .collect()),
        Delimiter::Byte(b) => {
            let mut reader = csv::ReaderBuilder::new()
                .delimiter(b)
                .has_headers(false)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            reader
                .records()
                .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()).map_err(Error::from))
                .collect()
        }
    }
}
