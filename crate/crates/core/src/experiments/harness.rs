use std::io::{Read, Write};
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cpdag::cpdag_shd;
use super::metrics::{frobenius_error, support_matches, weight_distance};
use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::model::{covariance_of, CovarianceMatrix, DagModel};
use crate::scoring::{LocalScoreTable, ScoreMode, MAX_TABLE_P};
use crate::search::{fit_exact, fit_greedy, FitResult, GreedyOptions, Method};
use crate::simulate::{
    ar1_model, random_sparse_dag, replication_rng, sample_covariance, OmegaSpec, SimConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Rate,
    Equalvar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Lambda2Rule {
    /// `λ² = c · log p / n`.
    CLogpOverN {
        c: f64,
    },
    Fixed {
        value: f64,
    },
}

impl Lambda2Rule {
    pub fn value(&self, p: usize, n: usize) -> f64 {
        match *self {
            Lambda2Rule::CLogpOverN { c } => c * (p.max(2) as f64).ln() / n as f64,
            Lambda2Rule::Fixed { value } => value,
        }
    }
}

fn default_band() -> [f64; 2] {
    [1.0 / 3.0, 3.0]
}

fn default_restarts() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub p: usize,
    #[serde(default)]
    pub s0: Option<usize>,
    #[serde(default)]
    pub beta0: Option<f64>,
    pub n_grid: Vec<usize>,
    pub lambda2_rule: Lambda2Rule,
    pub mode: ScoreMode,
    pub method: Method,
    pub reps: usize,
    pub seed: u64,
    /// In-degree cap; defaults to `min(p − 1, n − 2)`.
    #[serde(default)]
    pub max_parents: Option<usize>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Band for the ratio `ŝ / s₀`.
    #[serde(default = "default_band")]
    pub ratio_band: [f64; 2],
    /// Fill the `ms` column with wall-clock times (records are then not byte-reproducible).
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.p < 2 {
            return bad(format!("p = {} must be >= 2", self.p));
        }
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n < 2) {
            return bad("n_grid must be non-empty with every n >= 2".into());
        }
        if self.reps == 0 {
            return bad("reps must be >= 1".into());
        }
        match (self.s0, self.beta0) {
            (Some(_), Some(_)) => return bad("give either s0 or beta0, not both".into()),
            (None, None) => return bad("give s0 (random sparse DAG) or beta0 (AR(1) chain)".into()),
            _ => {}
        }
        if self.kind == ExperimentKind::Equalvar {
            if self.beta0.is_some() {
                return bad("equal-variance experiments need unit noise variances; the AR(1) chain has non-unit variances".into());
            }
            if self.mode != ScoreMode::EqualVariance {
                return bad("equal-variance experiments must use mode \"equalvar\"".into());
            }
        }
        if self.method == Method::Exact && self.p > MAX_TABLE_P {
            return Err(Error::TooLarge(format!(
                "exact search is limited to p <= {MAX_TABLE_P}; use method \"greedy\""
            )));
        }
        if !(self.ratio_band[0] <= self.ratio_band[1]) {
            return bad("ratio_band must be [lo, hi] with lo <= hi".into());
        }
        Ok(())
    }

    fn sim_config(&self, seed: u64) -> SimConfig {
        let mut cfg = SimConfig::new(self.p, self.s0.unwrap_or(0), seed);
        cfg.omega = match self.kind {
            ExperimentKind::Equalvar => OmegaSpec::Fixed { value: 1.0 },
            ExperimentKind::Rate => OmegaSpec::Uniform { lo: 0.5, hi: 1.5 },
        };
        cfg
    }

    fn truth(&self, rep: usize) -> Result<DagModel> {
        match self.beta0 {
            Some(b) => ar1_model(self.p, b),
            None => {
                let seed = replication_rng(self.seed, rep as u64).next_u64();
                random_sparse_dag(&self.sim_config(seed))
            }
        }
    }
}

/// SHA-256 of the canonical JSON serialization of a config.
pub fn config_hash(config: &ExperimentConfig) -> String {
    crate::io::sha256_hex(&serde_json::to_vec(config).expect("config serializes"))
}

pub const RECORD_COLUMNS: [&str; 11] = [
    "rep",
    "n",
    "p",
    "s0",
    "lambda2",
    "s_hat",
    "frob_err",
    "order_compatible",
    "support_exact",
    "shd",
    "ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub rep: usize,
    pub n: usize,
    pub p: usize,
    pub s0: usize,
    pub lambda2: f64,
    pub s_hat: usize,
    pub frob_err: f64,
    pub order_compatible: bool,
    pub support_exact: bool,
    pub shd: usize,
    pub ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NAggregate {
    pub n: usize,
    pub records: usize,
    pub median_frob_err: f64,
    pub mean_s_hat: f64,
    pub ratio_in_band: f64,
    pub order_compatible: f64,
    pub support_exact: f64,
    pub median_shd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub per_n: Vec<NAggregate>,
    /// Least-squares slope of `log(median frob_err)` against `log n`.
    pub log_log_slope: Option<f64>,
    pub ratio_band: [f64; 2],
    pub ratio_in_band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub rng: &'static str,
    pub records: Vec<Record>,
    pub aggregates: Aggregates,
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn frequency<I: Iterator<Item = bool>>(it: I) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for b in it {
        hit += usize::from(b);
        total += 1;
    }
    if total == 0 {
        f64::NAN
    } else {
        hit as f64 / total as f64
    }
}

fn in_band(r: &Record, band: [f64; 2]) -> bool {
    if r.s0 == 0 {
        return r.s_hat == 0;
    }
    let ratio = r.s_hat as f64 / r.s0 as f64;
    ratio >= band[0] && ratio <= band[1]
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl Aggregates {
    /// Recomputes every aggregate from the records alone.
    pub fn from_records(records: &[Record], n_grid: &[usize], band: [f64; 2]) -> Self {
        let per_n: Vec<NAggregate> = n_grid
            .iter()
            .map(|&n| {
                let rs: Vec<&Record> = records.iter().filter(|r| r.n == n).collect();
                let mut frob: Vec<f64> = rs.iter().map(|r| r.frob_err).collect();
                let mut shd: Vec<f64> = rs.iter().map(|r| r.shd as f64).collect();
                NAggregate {
                    n,
                    records: rs.len(),
                    median_frob_err: median(&mut frob),
                    mean_s_hat: rs.iter().map(|r| r.s_hat as f64).sum::<f64>()
                        / rs.len().max(1) as f64,
                    ratio_in_band: frequency(rs.iter().map(|r| in_band(r, band))),
                    order_compatible: frequency(rs.iter().map(|r| r.order_compatible)),
                    support_exact: frequency(rs.iter().map(|r| r.support_exact)),
                    median_shd: median(&mut shd),
                }
            })
            .collect();
        let points: Vec<(f64, f64)> = per_n
            .iter()
            .filter(|a| a.median_frob_err > 0.0 && a.median_frob_err.is_finite())
            .map(|a| ((a.n as f64).ln(), a.median_frob_err.ln()))
            .collect();
        Aggregates {
            log_log_slope: least_squares_slope(&points),
            ratio_band: band,
            ratio_in_band: frequency(records.iter().map(|r| in_band(r, band))),
            per_n,
        }
    }
}

fn fit_one(
    config: &ExperimentConfig,
    sigma_hat: &CovarianceMatrix,
    n: usize,
    lambda2: f64,
) -> Result<FitResult> {
    let p = config.p;
    let cap = config
        .max_parents
        .unwrap_or(p - 1)
        .min(n.saturating_sub(2))
        .min(p - 1);
    match config.method {
        Method::Exact => fit_exact(&LocalScoreTable::build(
            sigma_hat,
            lambda2,
            config.mode,
            cap,
        )?),
        Method::Greedy => fit_greedy(
            sigma_hat,
            &GreedyOptions {
                lambda2,
                mode: config.mode,
                max_parents: cap,
                restarts: config.restarts,
                seed: config.seed,
            },
        ),
    }
}

fn run_replication(config: &ExperimentConfig, grid_index: usize, rep: usize) -> Result<Record> {
    let started = Instant::now();
    let n = config.n_grid[grid_index];
    let truth = config.truth(rep)?;
    let sigma0 = covariance_of(&truth);
    // Data streams sit above the model streams, one per (n, rep).
    let stream = (1u64 << 32) + (grid_index * config.reps + rep) as u64;
    let mut rng = replication_rng(config.seed, stream);
    let data = Dataset::new(
        crate::simulate::sample_sem_with(&truth, n, &mut rng)?,
        Some(config.seed),
    )?;
    let sigma_hat = sample_covariance(&data, false)?;
    let lambda2 = config.lambda2_rule.value(config.p, n);
    let fit = fit_one(config, &sigma_hat, n, lambda2)?;

    let frob_err = match config.kind {
        ExperimentKind::Rate => frobenius_error(&fit, &sigma0)?,
        ExperimentKind::Equalvar => weight_distance(&fit.model, &truth),
    };
    Ok(Record {
        rep,
        n,
        p: config.p,
        s0: truth.edge_count(),
        lambda2,
        s_hat: fit.s_hat,
        frob_err,
        order_compatible: fit.pi_hat.is_compatible(truth.b()),
        support_exact: support_matches(&fit.model, &truth),
        shd: cpdag_shd(&fit.model, &truth)?,
        ms: config.timing.then(|| started.elapsed().as_millis() as u64),
    })
}

/// Runs every `(n, replication)` cell. Records come back in grid-then-replication
/// order whatever the number of worker threads.
pub fn run_experiment(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    config.validate()?;
    let cells: Vec<(usize, usize)> = (0..config.n_grid.len())
        .flat_map(|g| (0..config.reps).map(move |r| (g, r)))
        .collect();
    let run = || {
        cells
            .par_iter()
            .map(|&(g, r)| run_replication(config, g, r))
            .collect::<Result<Vec<_>>>()
    };
    let records = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let aggregates = Aggregates::from_records(&records, &config.n_grid, config.ratio_band);
    Ok(ExperimentReport {
        config: config.clone(),
        config_hash: config_hash(config),
        rng: crate::simulate::RNG_ALGORITHM,
        records,
        aggregates,
    })
}

pub fn run_rate_experiment(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    if config.kind != ExperimentKind::Rate {
        return Err(Error::InvalidInput(
            "expected a \"rate\" experiment config".into(),
        ));
    }
    run_experiment(config, threads)
}

pub fn run_equal_variance_experiment(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    if config.kind != ExperimentKind::Equalvar {
        return Err(Error::InvalidInput(
            "expected an \"equalvar\" experiment config".into(),
        ));
    }
    run_experiment(config, threads)
}

/// Records CSV with the fixed column order of [`RECORD_COLUMNS`].
pub fn write_records_csv<W: Write>(w: W, records: &[Record]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(RECORD_COLUMNS)?;
    for r in records {
        wtr.write_record([
            r.rep.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.s0.to_string(),
            r.lambda2.to_string(),
            r.s_hat.to_string(),
            r.frob_err.to_string(),
            r.order_compatible.to_string(),
            r.support_exact.to_string(),
            r.shd.to_string(),
            r.ms.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<Record>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(RECORD_COLUMNS.iter().copied()) {
        return Err(Error::InvalidInput(format!(
            "unexpected record columns {headers:?}"
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let parse_err = |i: usize| {
            Error::InvalidInput(format!(
                "bad value {:?} in column {}",
                f(i),
                RECORD_COLUMNS[i]
            ))
        };
        let us = |i: usize| f(i).parse::<usize>().map_err(|_| parse_err(i));
        let fl = |i: usize| f(i).parse::<f64>().map_err(|_| parse_err(i));
        let bl = |i: usize| f(i).parse::<bool>().map_err(|_| parse_err(i));
        out.push(Record {
            rep: us(0)?,
            n: us(1)?,
            p: us(2)?,
            s0: us(3)?,
            lambda2: fl(4)?,
            s_hat: us(5)?,
            frob_err: fl(6)?,
            order_compatible: bl(7)?,
            support_exact: bl(8)?,
            shd: us(9)?,
            ms: if f(10).is_empty() {
                None
            } else {
                Some(f(10).parse().map_err(|_| parse_err(10))?)
            },
        });
    }
    Ok(out)
}

/// Two columns: `n` and the median Frobenius error.
pub fn write_gnuplot<W: Write>(mut w: W, aggregates: &Aggregates) -> Result<()> {
    writeln!(w, "# n median_frob_err")?;
    for a in &aggregates.per_n {
        writeln!(w, "{} {}", a.n, a.median_frob_err)?;
    }
    Ok(())
}
