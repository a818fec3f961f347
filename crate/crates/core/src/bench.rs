//! Wall-clock comparison of the sequential and parallel backends on an
//! identical training workload.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{hardware_parallelism, Backend, BackendKind};
use crate::dataset::{synth_matrix, Dataset, SplitPair};
use crate::network::{Network, NetworkConfig};
use crate::trainer::fit;
use crate::{Error, Result};

pub const SPEEDUP_HEADER: &str = "epochs,sequential_seconds,parallel_seconds,speedup";

/// Training-time ratio reported for the original GPU implementation against
/// its single-CPU baseline. Printed as context next to measured values; it is
/// not a target for CPU worker pools.
pub const REFERENCE_GPU_SPEEDUP: f64 = 50.0;

#[derive(Clone, Debug)]
pub enum Workload {
    /// `synth_matrix(rows, columns, seed)`.
    Synthetic { rows: usize, columns: usize, seed: u64 },
    /// The training partition of a prepared split.
    Split(Box<SplitPair>),
}

#[derive(Clone, Debug)]
pub struct BenchSpec {
    pub workload: Workload,
    pub config: NetworkConfig,
    pub epochs_grid: Vec<usize>,
    pub repetitions: usize,
    pub backends: Vec<BackendKind>,
    /// Epochs of untimed training run once per backend before measuring.
    pub warmup_epochs: usize,
}

impl BenchSpec {
    /// Sequential versus parallel with `workers`, median of 3, one warm-up epoch.
    pub fn new(workload: Workload, config: NetworkConfig, epochs_grid: Vec<usize>, workers: usize) -> BenchSpec {
        BenchSpec {
            workload,
            config,
            epochs_grid,
            repetitions: 3,
            backends: vec![BackendKind::Sequential, BackendKind::Parallel { workers }],
            warmup_epochs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.repetitions == 0 {
            return Err(Error::Argument("repetitions must be at least 1".into()));
        }
        if self.epochs_grid.is_empty() {
            return Err(Error::Argument("epochs grid must not be empty".into()));
        }
        if self.epochs_grid[0] == 0 || self.epochs_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument(
                "epochs grid must be positive and strictly ascending".into(),
            ));
        }
        if self.backends.is_empty() {
            return Err(Error::Argument("no backends to compare".into()));
        }
        if self.backends.iter().any(|b| b.workers() == 0) {
            return Err(Error::Argument("worker count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub epochs: usize,
    pub backend: BackendKind,
    pub median_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub samples: Vec<f64>,
    #[serde(flatten)]
    pub status: CellStatus,
}

impl BenchCell {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub epochs: usize,
    pub sequential_seconds: f64,
    pub parallel_seconds: f64,
    pub speedup: f64,
    /// Known when built from a report; absent when parsed from CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel_workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub hardware_parallelism: usize,
    pub workers: Vec<usize>,
    pub repetitions: usize,
    pub warmup_epochs: usize,
    pub build_profile: String,
    pub rows: usize,
    pub columns: usize,
    pub hidden_dim: usize,
    pub reference_gpu_speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub cells: Vec<BenchCell>,
    pub speedups: Vec<SpeedupRow>,
    pub environment: Environment,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn time_training(config: &NetworkConfig, backend: &Backend, data: &Dataset, epochs: usize) -> Result<f64> {
    // Fresh weights from the seed for every measurement.
    let mut net = Network::init(config.clone())?;
    let started = Instant::now();
    fit(&mut net, backend, data, epochs)?;
    Ok(started.elapsed().as_secs_f64().max(f64::MIN_POSITIVE))
}

/// Time the training loop alone for every (epochs, backend) cell.
///
/// Cells run one after another; each repetition starts from the same seeded
/// weights, so both backends perform identical arithmetic.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    spec.validate()?;
    let data = match &spec.workload {
        Workload::Synthetic { rows, columns, seed } => synth_matrix(*rows, *columns, *seed)?,
        Workload::Split(split) => split.train.clone(),
    };
    if data.columns() != spec.config.input_dim {
        return Err(Error::shape("workload columns", spec.config.input_dim, data.columns()));
    }

    let mut backends = Vec::with_capacity(spec.backends.len());
    for &kind in &spec.backends {
        let backend = Backend::new(kind)?;
        if spec.warmup_epochs > 0 {
            if let Err(e) = time_training(&spec.config, &backend, &data, spec.warmup_epochs) {
                log::warn!("warm-up failed for {kind}: {e}");
            }
        }
        backends.push(backend);
    }

    let mut cells = Vec::new();
    for &epochs in &spec.epochs_grid {
        for backend in &backends {
            let mut samples = Vec::with_capacity(spec.repetitions);
            let mut failure = None;
            for _ in 0..spec.repetitions {
                match time_training(&spec.config, backend, &data, epochs) {
                    Ok(t) => samples.push(t),
                    Err(e) => {
                        failure = Some(e.to_string());
                        break;
                    }
                }
            }
            let cell = match failure {
                Some(message) => {
                    log::warn!("bench cell {} x {epochs} epochs failed: {message}", backend.kind());
                    BenchCell {
                        epochs,
                        backend: backend.kind(),
                        median_seconds: 0.0,
                        min_seconds: 0.0,
                        max_seconds: 0.0,
                        samples,
                        status: CellStatus::Failed { message },
                    }
                }
                None => {
                    let mut sorted = samples.clone();
                    sorted.sort_by(f64::total_cmp);
                    BenchCell {
                        epochs,
                        backend: backend.kind(),
                        median_seconds: median(&sorted),
                        min_seconds: sorted[0],
                        max_seconds: sorted[sorted.len() - 1],
                        samples,
                        status: CellStatus::Ok,
                    }
                }
            };
            cells.push(cell);
        }
    }

    let speedups = speedup_rows(&cells);
    Ok(BenchReport {
        environment: Environment {
            hardware_parallelism: hardware_parallelism(),
            workers: spec.backends.iter().map(|b| b.workers()).collect(),
            repetitions: spec.repetitions,
            warmup_epochs: spec.warmup_epochs,
            build_profile: if cfg!(debug_assertions) { "debug" } else { "release" }.into(),
            rows: data.rows(),
            columns: data.columns(),
            hidden_dim: spec.config.hidden_dim,
            reference_gpu_speedup: REFERENCE_GPU_SPEEDUP,
        },
        cells,
        speedups,
    })
}

/// Pair each successful parallel cell with the successful sequential cell of
/// the same epoch count.
pub fn speedup_rows(cells: &[BenchCell]) -> Vec<SpeedupRow> {
    let mut rows = Vec::new();
    for seq in cells
        .iter()
        .filter(|c| c.is_ok() && c.backend == BackendKind::Sequential)
    {
        let mut paired = false;
        for par in cells.iter().filter(|c| {
            c.is_ok() && c.epochs == seq.epochs && matches!(c.backend, BackendKind::Parallel { .. })
        }) {
            paired = true;
            rows.push(SpeedupRow {
                epochs: seq.epochs,
                sequential_seconds: seq.median_seconds,
                parallel_seconds: par.median_seconds,
                speedup: seq.median_seconds / par.median_seconds,
                parallel_workers: Some(par.backend.workers()),
            });
        }
        if !paired {
            log::warn!("no parallel timing for {} epochs; speedup row omitted", seq.epochs);
        }
    }
    rows
}

/// Render the plot-ready speedup table. An empty table (header only) is
/// returned, with a warning, when no complete pair exists.
pub fn emit_speedup_table(report: &BenchReport) -> String {
    if report.speedups.is_empty() {
        log::warn!("no complete sequential/parallel pair; speedup table is empty");
    }
    let mut out = String::from(SPEEDUP_HEADER);
    out.push('\n');
    for r in &report.speedups {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.epochs, r.sequential_seconds, r.parallel_seconds, r.speedup
        );
    }
    out
}

pub fn parse_speedup_table(text: &str) -> Result<Vec<SpeedupRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != SPEEDUP_HEADER {
        return Err(Error::Schema {
            column: SPEEDUP_HEADER.to_string(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = |k: usize| Error::Parse {
            row: i + 1,
            column: header[k].clone(),
            value: rec.get(k).unwrap_or("").to_string(),
        };
        let num = |k: usize| -> Result<f64> { rec.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| bad(k)) };
        rows.push(SpeedupRow {
            epochs: rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(|| bad(0))?,
            sequential_seconds: num(1)?,
            parallel_seconds: num(2)?,
            speedup: num(3)?,
            parallel_workers: None,
        });
    }
    Ok(rows)
}

impl BenchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<BenchReport> {
        Ok(serde_json::from_str(text)?)
    }

    /// Human-readable lines: one per cell, one per speedup, and the
    /// reference GPU figure.
    pub fn summary(&self) -> String {
        let env = &self.environment;
        let mut out = format!(
            "workload {}x{} (hidden {}), {} repetition(s), {} hardware thread(s), {} build\n",
            env.rows, env.columns, env.hidden_dim, env.repetitions, env.hardware_parallelism, env.build_profile
        );
        for c in &self.cells {
            match &c.status {
                CellStatus::Ok => {
                    let _ = writeln!(
                        out,
                        "  {:>8} epochs  {:<14} median {:.4} s  (min {:.4}, max {:.4})",
                        c.epochs, c.backend.to_string(), c.median_seconds, c.min_seconds, c.max_seconds
                    );
                }
                CellStatus::Failed { message } => {
                    let _ = writeln!(out, "  {:>8} epochs  {:<14} FAILED: {message}", c.epochs, c.backend.to_string());
                }
            }
        }
        for s in &self.speedups {
            let _ = writeln!(
                out,
                "  speedup at {} epochs with {} worker(s): {:.2}x measured (reference GPU figure: {:.0}x)",
                s.epochs,
                s.parallel_workers.unwrap_or(0),
                s.speedup,
                env.reference_gpu_speedup
            );
        }
        out
    }
}
