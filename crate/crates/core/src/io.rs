//! File formats: DagModel and FitResult JSON, covariance and data CSV.
//!
//! Node labels in every external format are 1-based.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{CovarianceMatrix, DagModel, Dataset};
use crate::representation::EdgeProfile;
use crate::scoring::ScoreMode;
use crate::search::{FitResult, Method};

/// `{"p": int, "edges": [[k, j, beta], ...], "omega": [float; p]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagModelJson {
    pub p: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub omega: Vec<f64>,
}

impl From<&DagModel> for DagModelJson {
    fn from(m: &DagModel) -> Self {
        DagModelJson {
            p: m.p(),
            edges: m
                .support()
                .into_iter()
                .map(|(k, j)| (k + 1, j + 1, m.b()[(k, j)]))
                .collect(),
            omega: m.omega().iter().copied().collect(),
        }
    }
}

impl TryFrom<DagModelJson> for DagModel {
    type Error = Error;
    fn try_from(js: DagModelJson) -> Result<DagModel> {
        let p = js.p;
        if js.omega.len() != p {
            return Err(Error::Dimension(format!(
                "p = {p} but omega has {} entries",
                js.omega.len()
            )));
        }
        let mut b = DMatrix::zeros(p, p);
        for (k, j, beta) in js.edges {
            if k == 0 || j == 0 || k > p || j > p {
                return Err(Error::InvalidInput(format!(
                    "edge ({k}, {j}) out of range 1..={p}"
                )));
            }
            b[(k - 1, j - 1)] = beta;
        }
        DagModel::new(b, DVector::from_vec(js.omega))
    }
}

pub fn model_to_json(m: &DagModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&DagModelJson::from(m))?)
}

pub fn model_from_json(s: &str) -> Result<DagModel> {
    serde_json::from_str::<DagModelJson>(s)?.try_into()
}

pub fn read_model(path: &Path) -> Result<DagModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResultJson {
    pub model: DagModelJson,
    pub score: f64,
    pub s_hat: usize,
    pub pi_hat: Vec<usize>,
    pub method: Method,
    pub mode: ScoreMode,
    pub lambda2: f64,
    pub node_scores: Vec<f64>,
}

impl From<&FitResult> for FitResultJson {
    fn from(f: &FitResult) -> Self {
        FitResultJson {
            model: DagModelJson::from(&f.model),
            score: f.score,
            s_hat: f.s_hat,
            pi_hat: f.pi_hat.to_one_based(),
            method: f.method,
            mode: f.mode,
            lambda2: f.lambda2,
            node_scores: f.node_scores.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeProfileJson {
    pub per_node: Vec<usize>,
    pub total: usize,
    pub supports: Vec<Vec<usize>>,
}

impl From<&EdgeProfile> for EdgeProfileJson {
    fn from(e: &EdgeProfile) -> Self {
        EdgeProfileJson {
            per_node: e.per_node.clone(),
            total: e.total,
            supports: e
                .supports
                .iter()
                .map(|s| s.iter().map(|k| k + 1).collect())
                .collect(),
        }
    }
}

type Rows = (Vec<Vec<f64>>, Option<Vec<String>>);

fn parse_rows<R: Read>(reader: R) -> Result<Rows> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut header = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => header = Some(rec.iter().map(str::to_owned).collect()),
            Err(e) => {
                return Err(Error::InvalidInput(format!("row {}: {e}", i + 1)));
            }
        }
    }
    if let Some(w) = rows.first().map(Vec::len) {
        if let Some(bad) = rows.iter().position(|r| r.len() != w) {
            return Err(Error::InvalidInput(format!(
                "row {} has {} fields, expected {w}",
                bad + 1,
                rows[bad].len()
            )));
        }
    }
    Ok((rows, header))
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let ncols = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// A `p × p` covariance CSV without header.
pub fn read_covariance<R: Read>(reader: R, n: Option<usize>) -> Result<CovarianceMatrix> {
    let (rows, header) = parse_rows(reader)?;
    if header.is_some() {
        return Err(Error::InvalidInput(
            "covariance CSV must not have a header".into(),
        ));
    }
    let m = to_matrix(&rows);
    match n {
        Some(n) => CovarianceMatrix::empirical(&m, n),
        None => CovarianceMatrix::population(&m),
    }
}

pub fn read_covariance_file(path: &Path, n: Option<usize>) -> Result<CovarianceMatrix> {
    read_covariance(std::fs::File::open(path)?, n)
}

/// An `n × p` data CSV; a non-numeric first row is taken as a header.
pub fn read_dataset<R: Read>(reader: R) -> Result<(Dataset, Option<Vec<String>>)> {
    let (rows, header) = parse_rows(reader)?;
    if let (Some(h), Some(r)) = (&header, rows.first()) {
        if h.len() != r.len() {
            return Err(Error::InvalidInput(
                "header width differs from data width".into(),
            ));
        }
    }
    Ok((Dataset::new(to_matrix(&rows), None)?, header))
}

pub fn read_dataset_file(path: &Path) -> Result<(Dataset, Option<Vec<String>>)> {
    read_dataset(std::fs::File::open(path)?)
}

/// Writes a matrix as CSV using shortest round-trip float formatting.
pub fn write_matrix_csv<W: Write>(w: W, m: &DMatrix<f64>, header: Option<&[String]>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    if let Some(h) = header {
        wtr.write_record(h)?;
    }
    for i in 0..m.nrows() {
        wtr.write_record((0..m.ncols()).map(|j| m[(i, j)].to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Lowercase hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
