//! Design matrices for logistic regression, including the UCI
//! processed-Cleveland heart-disease layout.

use std::path::Path;

use log::{info, warn};
use nalgebra::{DMatrix, DVector};

use crate::error::{MscError, Result};

#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    /// Responses in {0, 1}.
    pub y: DVector<f64>,
    pub column_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, d) = x.shape();
        if n == 0 || d == 0 {
            return Err(MscError::invalid("dataset needs at least one row and one column"));
        }
        if y.len() != n {
            return Err(MscError::invalid(format!("X has {n} rows but Y has {}", y.len())));
        }
        if column_names.len() != d {
            return Err(MscError::invalid(format!("{d} columns but {} names", column_names.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(MscError::invalid("non-finite entry in design matrix"));
        }
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(MscError::invalid("responses must be 0 or 1"));
        }
        Ok(Dataset { x, y, column_names })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }
}

/// Column-wise z-scoring applied to a design matrix, kept so coefficients
/// can be mapped back to the original units.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    /// Per column; the intercept column has mean 0 and scale 1.
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub intercept: Option<usize>,
}

impl Standardization {
    /// Map coefficients fitted on the standardized design back to the raw
    /// design.
    pub fn to_original(&self, beta: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = beta.iter().zip(&self.scales).map(|(b, s)| b / s).collect();
        if let Some(c) = self.intercept {
            let shift: f64 = out.iter().zip(&self.means).map(|(b, m)| b * m).sum();
            out[c] -= shift;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct HeartOptions {
    pub standardize: bool,
}

#[derive(Clone, Debug)]
pub struct HeartData {
    pub dataset: Dataset,
    pub raw_rows: usize,
    pub dropped_rows: usize,
    pub standardization: Option<Standardization>,
}

const RAW_COLUMNS: [&str; 14] = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg", "thalach", "exang", "oldpeak", "slope", "ca", "thal",
    "num",
];

/// Raw columns kept as numeric covariates, in output order.
const NUMERIC: [usize; 9] = [0, 1, 3, 4, 5, 7, 8, 9, 11];

/// Nominal raw columns with their codebook levels; the first level is the
/// dropped reference.
const NOMINAL: [(usize, &[i64]); 4] = [(2, &[1, 2, 3, 4]), (6, &[0, 1, 2]), (10, &[1, 2, 3]), (12, &[3, 6, 7])];

/// Number of covariates reported for the original analysis.
pub const REFERENCE_COVARIATES: usize = 21;

/// Column names of the encoded heart-disease design, in order: the numeric
/// attributes, drop-first one-hot blocks for `cp`, `restecg`, `slope`,
/// `thal`, then the intercept.
pub fn heart_column_names() -> Vec<String> {
    let mut names: Vec<String> = NUMERIC.iter().map(|&c| RAW_COLUMNS[c].to_string()).collect();
    for (col, levels) in NOMINAL {
        for level in &levels[1..] {
            names.push(format!("{}_{level}", RAW_COLUMNS[col]));
        }
    }
    names.push("intercept".to_string());
    names
}

/// Read the comma-separated 14-column processed-Cleveland file.
///
/// Rows containing the missing marker `?` are dropped. The target is
/// `1{num > 0}`.
pub fn load_heart_dataset(path: impl AsRef<Path>, options: HeartOptions) -> Result<HeartData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MscError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_heart(&text, path, options)
}

pub(crate) fn parse_heart(text: &str, path: &Path, options: HeartOptions) -> Result<HeartData> {
    let names = heart_column_names();
    let d = names.len();
    let bad = |line: usize, message: String| MscError::Dataset {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut rows: Vec<f64> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let (mut raw_rows, mut dropped) = (0usize, 0usize);
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        raw_rows += 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != RAW_COLUMNS.len() {
            return Err(bad(lineno, format!("expected 14 columns, found {}", fields.len())));
        }
        if fields.iter().any(|f| *f == "?") {
            dropped += 1;
            continue;
        }
        let mut values = [0.0; 14];
        for (j, f) in fields.iter().enumerate() {
            values[j] = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(lineno, format!("column {} ({}): cannot parse {f:?}", j + 1, RAW_COLUMNS[j])))?;
        }
        rows.extend(NUMERIC.iter().map(|&c| values[c]));
        for (col, levels) in NOMINAL {
            let v = values[col];
            let code = v.round() as i64;
            if (v - code as f64).abs() > 1e-9 || !levels.contains(&code) {
                return Err(bad(lineno, format!("{} = {v} is not one of {levels:?}", RAW_COLUMNS[col])));
            }
            rows.extend(levels[1..].iter().map(|&l| if l == code { 1.0 } else { 0.0 }));
        }
        rows.push(1.0);
        targets.push(if values[13] > 0.0 { 1.0 } else { 0.0 });
    }
    let n = targets.len();
    if n == 0 {
        return Err(bad(0, "no complete rows".into()));
    }
    let mut x = DMatrix::from_row_slice(n, d, &rows);
    info!("{}: read {raw_rows} rows, dropped {dropped} with missing values, n = {n}", path.display());
    if d != REFERENCE_COVARIATES {
        warn!("encoded design has {d} columns; the reference analysis reports {REFERENCE_COVARIATES} covariates");
    }

    let standardization = options.standardize.then(|| standardize(&mut x, Some(d - 1)));
    Ok(HeartData {
        dataset: Dataset::new(x, DVector::from_vec(targets), names)?,
        raw_rows,
        dropped_rows: dropped,
        standardization,
    })
}

/// z-score every column except `intercept` in place.
pub fn standardize(x: &mut DMatrix<f64>, intercept: Option<usize>) -> Standardization {
    let (n, d) = x.shape();
    let mut means = vec![0.0; d];
    let mut scales = vec![1.0; d];
    for j in 0..d {
        if Some(j) == intercept {
            continue;
        }
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..n {
            x[(i, j)] = (x[(i, j)] - mean) / sd;
        }
        means[j] = mean;
        scales[j] = sd;
    }
    Standardization {
        means,
        scales,
        intercept,
    }
}
