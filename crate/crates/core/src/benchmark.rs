//! Detection metrics against ground truth and experiment grids over the
//! synthetic systems.
//!
//! Realization `r` of a grid uses the same generator seed in every cell, so
//! algorithms and parameter settings are compared on paired data.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nue::{dependency_matrix, Algorithm, NueConfig};
use crate::simgen::{henon, mix, nonlinear_ar, GroundTruth};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// 100·(TP+TN)/(TP+TN+FP+FN); NaN when there are no pairs.
    pub fn acc(&self) -> f64 {
        percent(self.tp + self.tn, self.total())
    }

    /// 100·TP/(TP+FN); NaN without true edges.
    pub fn tpr(&self) -> f64 {
        percent(self.tp, self.tp + self.fn_)
    }

    /// 100·TN/(TN+FP); NaN without true non-edges.
    pub fn tnr(&self) -> f64 {
        percent(self.tn, self.tn + self.fp)
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Counts over all ordered pairs `x ≠ y`; `binary[x][y]` means `x → y`
/// was detected.
pub fn score(binary: &[Vec<bool>], truth: &GroundTruth) -> Result<ConfusionCounts> {
    let l = truth.n_channels;
    if binary.len() != l || binary.iter().any(|r| r.len() != l) {
        return Err(Error::ShapeMismatch {
            expected: format!("{l}x{l} matrix"),
            actual: format!(
                "{}x{} matrix",
                binary.len(),
                binary.first().map_or(0, Vec::len)
            ),
        });
    }
    let mut c = ConfusionCounts::default();
    for (x, row) in binary.iter().enumerate() {
        for (y, &detected) in row.iter().enumerate() {
            if x == y {
                continue;
            }
            match (truth.contains(x, y), detected) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Henon,
    Ar,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Henon => "henon",
            Model::Ar => "ar",
        }
    }
}

/// Parameter lists for one algorithm. `lambda` and `gamma` only apply to
/// the MSR algorithm and default to `[0.5]` and `[0.0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub gamma: Vec<f64>,
}

fn default_m() -> usize {
    1
}
fn default_d() -> usize {
    5
}
fn default_k() -> usize {
    10
}
fn default_bootstrap() -> usize {
    100
}
fn default_percentile() -> f64 {
    95.0
}

/// A grid of experiments. Empty `q` means `[0.6]` (Henon only); empty
/// `alpha` means `[0.0]` (AR only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub model: Model,
    pub n: Vec<usize>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default)]
    pub theiler: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_size: usize,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
}

impl GridSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParameter(format!("grid spec: {e}")))
    }

    /// Every parameter combination, in nesting order
    /// algorithm → λ → γ → N → Q → α.
    pub fn cells(&self) -> Vec<GridCell> {
        let qs: Vec<Option<f64>> = match self.model {
            Model::Henon if self.q.is_empty() => vec![Some(0.6)],
            Model::Henon => self.q.iter().copied().map(Some).collect(),
            Model::Ar => vec![None],
        };
        let alphas: Vec<Option<f64>> = match self.model {
            Model::Ar if self.alpha.is_empty() => vec![Some(0.0)],
            Model::Ar => self.alpha.iter().copied().map(Some).collect(),
            Model::Henon => vec![None],
        };
        let mut cells = Vec::new();
        for spec in &self.algorithms {
            let (lambdas, gammas): (Vec<Option<f64>>, Vec<Option<f64>>) = if spec.algorithm == Algorithm::Msr {
                let or = |v: &[f64], d: f64| {
                    if v.is_empty() {
                        vec![Some(d)]
                    } else {
                        v.iter().copied().map(Some).collect()
                    }
                };
                (or(&spec.lambda, 0.5), or(&spec.gamma, 0.0))
            } else {
                (vec![None], vec![None])
            };
            for &lambda in &lambdas {
                for &gamma in &gammas {
                    for &n in &self.n {
                        for &q in &qs {
                            for &alpha in &alphas {
                                cells.push(GridCell {
                                    algorithm: spec.algorithm,
                                    model: self.model,
                                    n,
                                    q,
                                    alpha,
                                    lambda,
                                    gamma,
                                });
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

/// One parameter combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub algorithm: Algorithm,
    pub model: Model,
    pub n: usize,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
}

impl GridCell {
    pub fn nue_config(&self, grid: &GridSpec, seed: u64) -> NueConfig {
        NueConfig {
            algorithm: self.algorithm,
            m: grid.m,
            d: grid.d,
            neighbors: grid.k_neighbors,
            lambda: self.lambda.unwrap_or(0.5),
            gamma: self.gamma.unwrap_or(0.0),
            bootstrap_size: grid.bootstrap_size,
            percentile: grid.percentile,
            theiler: grid.theiler,
            seed,
            ..NueConfig::default()
        }
    }

    pub fn generate(&self, seed: u64) -> Result<(crate::data::MultivariateSeries, GroundTruth)> {
        match self.model {
            Model::Henon => henon(self.n, self.q.unwrap_or(0.6), seed),
            Model::Ar => {
                let (series, truth) = nonlinear_ar(self.n, seed)?;
                Ok((mix(&series, self.alpha.unwrap_or(0.0))?, truth))
            }
        }
    }
}

/// Generator and analysis seed of realization `r`.
pub fn realization_seed(seed: u64, r: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub realization: usize,
    pub counts: ConfusionCounts,
    pub iterations: usize,
    pub seconds: f64,
}

/// Generates, analyzes and scores one realization of `cell`.
pub fn run_realization(cell: &GridCell, grid: &GridSpec, base_seed: u64, r: usize) -> Result<RealizationResult> {
    let seed = realization_seed(base_seed, r);
    let (series, truth) = cell.generate(seed)?;
    let result = dependency_matrix(&series, &cell.nue_config(grid, seed))?;
    Ok(RealizationResult {
        realization: r,
        counts: score(&result.binary, &truth)?,
        iterations: result.total_iterations(),
        seconds: result.total_seconds,
    })
}

/// Mean rates over the successful realizations of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub cell: GridCell,
    pub acc: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub iterations: f64,
    pub seconds: f64,
    pub realizations: Vec<RealizationResult>,
    pub failures: Vec<(usize, Error)>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl BenchmarkRow {
    pub fn aggregate(cell: GridCell, realizations: Vec<RealizationResult>, failures: Vec<(usize, Error)>) -> Self {
        let r = &realizations;
        Self {
            cell,
            acc: mean(r.iter().map(|x| x.counts.acc())),
            tpr: mean(r.iter().map(|x| x.counts.tpr())),
            tnr: mean(r.iter().map(|x| x.counts.tnr())),
            iterations: mean(r.iter().map(|x| x.iterations as f64)),
            seconds: mean(r.iter().map(|x| x.seconds)),
            realizations,
            failures,
        }
    }
}

/// Runs one cell over `realizations` paired datasets.
pub fn run_cell(cell: &GridCell, grid: &GridSpec, realizations: usize, seed: u64) -> BenchmarkRow {
    let outcomes: Vec<_> = (0..realizations)
        .into_par_iter()
        .map(|r| (r, run_realization(cell, grid, seed, r)))
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (r, outcome) in outcomes {
        match outcome {
            Ok(x) => ok.push(x),
            Err(e) => failed.push((r, e)),
        }
    }
    BenchmarkRow::aggregate(*cell, ok, failed)
}

/// Runs every cell of `grid`, calling `progress` after each one.
pub fn run_grid_with<F: FnMut(usize, usize, &BenchmarkRow)>(
    grid: &GridSpec,
    realizations: usize,
    seed: u64,
    mut progress: F,
) -> Vec<BenchmarkRow> {
    let cells = grid.cells();
    let total = cells.len();
    cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let row = run_cell(cell, grid, realizations, seed);
            progress(i, total, &row);
            row
        })
        .collect()
}

pub fn run_grid(grid: &GridSpec, realizations: usize, seed: u64) -> Vec<BenchmarkRow> {
    run_grid_with(grid, realizations, seed, |_, _, _| {})
}

#[derive(Serialize)]
struct CsvRow {
    algorithm: &'static str,
    model: &'static str,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "Q")]
    q: Option<f64>,
    alpha: Option<f64>,
    lambda: Option<f64>,
    gamma: Option<f64>,
    acc: f64,
    tpr: f64,
    tnr: f64,
    iterations: f64,
    seconds: f64,
}

fn csv_row(cell: &GridCell, acc: f64, tpr: f64, tnr: f64, iterations: f64, seconds: f64) -> CsvRow {
    CsvRow {
        algorithm: cell.algorithm.name(),
        model: cell.model.name(),
        n: cell.n,
        q: cell.q,
        alpha: cell.alpha,
        lambda: cell.lambda,
        gamma: cell.gamma,
        acc,
        tpr,
        tnr,
        iterations,
        seconds,
    }
}

pub const CSV_COLUMNS: [&str; 12] = [
    "algorithm", "model", "N", "Q", "alpha", "lambda", "gamma", "acc", "tpr", "tnr", "iterations", "seconds",
];

/// One line per grid cell.
pub fn write_aggregate_csv<W: Write>(writer: W, rows: &[BenchmarkRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.serialize(csv_row(&r.cell, r.acc, r.tpr, r.tnr, r.iterations, r.seconds))?;
    }
    w.flush()?;
    Ok(())
}

/// One line per successful realization, prefixed by its index.
pub fn write_realizations_csv<W: Write>(writer: W, rows: &[BenchmarkRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let mut header = vec!["realization"];
    header.extend(CSV_COLUMNS);
    w.write_record(&header)?;
    for r in rows {
        for x in &r.realizations {
            let row = csv_row(
                &r.cell,
                x.counts.acc(),
                x.counts.tpr(),
                x.counts.tnr(),
                x.iterations as f64,
                x.seconds,
            );
            w.serialize((x.realization, row))?;
        }
    }
    w.flush()?;
    Ok(())
}
