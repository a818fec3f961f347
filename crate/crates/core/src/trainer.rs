//! Epoch-driven online training with in-flight accuracy checkpoints.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendKind};
use crate::dataset::{Dataset, Label, SplitPair, SubsetTag};
use crate::network::{Network, NetworkConfig, StepBuffers};
use crate::{Error, Result};

pub const DEFAULT_EPOCHS: usize = 100_000;
pub const DECADE_GRID: [usize; 6] = [1, 10, 100, 1_000, 10_000, 100_000];
pub const CURVE_HEADER: &str = "epoch,train_accuracy,test_accuracy,cumulative_seconds";

/// Deviation flag carried by every report: each neuron has a bias weight.
pub const DEVIATION_BIAS: &str = "bias-enabled";
pub const DEVIATION_UNSTRATIFIED: &str = "unstratified-split";
pub const DEVIATION_POOLED_SEXES: &str = "pooled-sexes";

/// The decade grid capped at `epochs`; the final epoch is always included.
pub fn default_checkpoints(epochs: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = DECADE_GRID.iter().map(|&e| e.min(epochs)).collect();
    grid.push(epochs);
    grid.retain(|&e| e >= 1);
    grid.sort_unstable();
    grid.dedup();
    grid
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub config: NetworkConfig,
    pub backend: BackendKind,
    pub epochs: usize,
    pub checkpoints: Vec<usize>,
}

impl TrainSpec {
    pub fn new(config: NetworkConfig, backend: BackendKind, epochs: usize) -> TrainSpec {
        TrainSpec {
            config,
            backend,
            epochs,
            checkpoints: default_checkpoints(epochs),
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<usize>) -> TrainSpec {
        self.checkpoints = checkpoints;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if self.backend.workers() == 0 {
            return Err(Error::Argument("worker count must be at least 1".into()));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::Argument("at least one checkpoint is required".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("checkpoints must be strictly increasing".into()));
        }
        let (first, last) = (self.checkpoints[0], *self.checkpoints.last().unwrap());
        if first < 1 || last > self.epochs {
            return Err(Error::Argument(format!(
                "checkpoints must lie in [1, {}], got {first}..={last}",
                self.epochs
            )));
        }
        Ok(())
    }
}

/// Prediction counts with `Poor` as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_poor: usize,
    pub true_good: usize,
    pub false_poor: usize,
    pub false_good: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    pub confusion: Confusion,
}

impl Accuracy {
    pub fn fraction(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    /// Percentage rounded to two decimals, e.g. `"95.65"`.
    pub fn percent(&self) -> String {
        format!("{:.2}", 100.0 * self.fraction())
    }
}

/// Fraction of rows whose prediction equals the label.
pub fn evaluate(net: &Network, d: &Dataset) -> Result<Accuracy> {
    if d.rows() == 0 {
        return Err(Error::Argument("cannot evaluate on an empty dataset".into()));
    }
    let mut confusion = Confusion::default();
    for (i, &label) in d.labels().iter().enumerate() {
        match (net.predict(d.row(i))?, label) {
            (Label::Poor, Label::Poor) => confusion.true_poor += 1,
            (Label::Good, Label::Good) => confusion.true_good += 1,
            (Label::Poor, Label::Good) => confusion.false_poor += 1,
            (Label::Good, Label::Poor) => confusion.false_good += 1,
        }
    }
    Ok(Accuracy {
        correct: confusion.true_poor + confusion.true_good,
        total: d.rows(),
        confusion,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train: Accuracy,
    pub test: Accuracy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub backend: BackendKind,
    pub dataset: SubsetTag,
    pub train_rows: usize,
    pub test_rows: usize,
    pub split_seed: u64,
    pub split_fraction: f64,
    pub stratified: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub deviations: Vec<String>,
}

/// Wall-clock measurements, kept apart from the deterministic report body.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Training time (evaluation excluded) up to each checkpoint, in seconds.
    pub cumulative_seconds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub meta: ReportMeta,
    pub rows: Vec<CheckpointRow>,
    pub network: Network,
    pub timing: Timing,
}

impl TrainReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The report with wall-clock fields removed; identical runs produce
    /// identical bodies.
    pub fn body_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("timing");
        }
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn from_json(text: &str) -> Result<TrainReport> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn curve(&self) -> CurveTable {
        CurveTable {
            rows: self
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| CurveRow {
                    epoch: r.epoch,
                    train_accuracy: r.train_accuracy,
                    test_accuracy: r.test_accuracy,
                    cumulative_seconds: self.timing.cumulative_seconds.get(i).copied().unwrap_or(0.0),
                })
                .collect(),
        }
    }

    pub fn final_row(&self) -> Option<&CheckpointRow> {
        self.rows.last()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub epoch: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub cumulative_seconds: f64,
}

/// Plot-ready accuracy-versus-epochs table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub rows: Vec<CurveRow>,
}

impl CurveTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.epoch, r.train_accuracy, r.test_accuracy, r.cumulative_seconds
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<CurveTable> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != CURVE_HEADER {
            return Err(Error::Schema {
                column: CURVE_HEADER.to_string(),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| -> Result<&str> {
                rec.get(k).ok_or_else(|| Error::Parse {
                    row: i + 1,
                    column: header[k].clone(),
                    value: String::new(),
                })
            };
            let bad = |k: usize, v: &str| Error::Parse {
                row: i + 1,
                column: header[k].clone(),
                value: v.to_string(),
            };
            let epoch = field(0)?;
            let num = |k: usize| -> Result<f64> {
                let v = field(k)?;
                v.parse().map_err(|_| bad(k, v))
            };
            rows.push(CurveRow {
                epoch: epoch.parse().map_err(|_| bad(0, epoch))?,
                train_accuracy: num(1)?,
                test_accuracy: num(2)?,
                cumulative_seconds: num(3)?,
            });
        }
        Ok(CurveTable { rows })
    }
}

/// Train on `data` for `epochs` epochs, visiting rows in dataset order.
/// Used where no evaluation is wanted (benchmarks).
pub fn fit(net: &mut Network, backend: &Backend, data: &Dataset, epochs: usize) -> Result<()> {
    if data.columns() != net.config().input_dim {
        return Err(Error::shape("dataset columns", net.config().input_dim, data.columns()));
    }
    let targets: Vec<f32> = data.labels().iter().map(|l| l.target()).collect();
    let lr = net.config().learning_rate;
    let mut buffers = StepBuffers::new(net.config());
    for epoch in 1..=epochs {
        run_epoch(net, backend, &mut buffers, data, &targets, lr)
            .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
    }
    Ok(())
}

fn run_epoch(
    net: &mut Network,
    backend: &Backend,
    buffers: &mut StepBuffers,
    data: &Dataset,
    targets: &[f32],
    lr: f64,
) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        net.step(backend, buffers, data.row(i), t, lr)?;
    }
    Ok(())
}

fn deviations(split: &SplitPair) -> Vec<String> {
    let mut d = vec![DEVIATION_BIAS.to_string()];
    if !split.stratified {
        d.push(DEVIATION_UNSTRATIFIED.to_string());
    }
    if split.train.subset() == SubsetTag::All {
        d.push(DEVIATION_POOLED_SEXES.to_string());
    }
    d
}

/// Run online SGD for `spec.epochs` epochs, recording train and test accuracy
/// at every checkpoint. Evaluation never touches the weights, so the final
/// network equals that of an uncheckpointed run.
pub fn train(spec: &TrainSpec, split: &SplitPair) -> Result<TrainReport> {
    spec.validate()?;
    let input_dim = spec.config.input_dim;
    for (what, d) in [("train", &split.train), ("test", &split.test)] {
        if d.columns() != input_dim {
            return Err(Error::shape("dataset columns", input_dim, d.columns()));
        }
        if d.rows() == 0 {
            return Err(Error::Argument(format!("{what} partition is empty")));
        }
    }
    let train_ids: HashSet<&String> = split.train.row_ids().iter().collect();
    if let Some(id) = split.test.row_ids().iter().find(|id| train_ids.contains(id)) {
        return Err(Error::Validation(format!(
            "row `{id}` appears in both train and test partitions"
        )));
    }

    let backend = Backend::new(spec.backend)?;
    let mut net = Network::init(spec.config.clone())?;
    let mut report = TrainReport {
        meta: ReportMeta {
            seed: spec.config.seed,
            backend: spec.backend,
            dataset: split.train.subset(),
            train_rows: split.train.rows(),
            test_rows: split.test.rows(),
            split_seed: split.seed,
            split_fraction: split.fraction,
            stratified: split.stratified,
            epochs: spec.epochs,
            learning_rate: spec.config.learning_rate,
            input_dim,
            hidden_dim: spec.config.hidden_dim,
            deviations: deviations(split),
        },
        rows: Vec::with_capacity(spec.checkpoints.len()),
        network: net.clone(),
        timing: Timing::default(),
    };

    let targets: Vec<f32> = split.train.labels().iter().map(|l| l.target()).collect();
    let lr = spec.config.learning_rate;
    let mut buffers = StepBuffers::new(&spec.config);
    let mut checkpoints = spec.checkpoints.iter().copied().peekable();
    let mut elapsed = 0.0f64;

    for epoch in 1..=spec.epochs {
        let started = Instant::now();
        let outcome = run_epoch(&mut net, &backend, &mut buffers, &split.train, &targets, lr);
        elapsed += started.elapsed().as_secs_f64();
        if let Err(e) = outcome {
            return Err(diverged(epoch, e.to_string(), report));
        }

        if checkpoints.peek() == Some(&epoch) {
            checkpoints.next();
            if !net.weights_finite() {
                return Err(diverged(epoch, "non-finite weight".into(), report));
            }
            let train = evaluate(&net, &split.train)?;
            let test = evaluate(&net, &split.test)?;
            report.rows.push(CheckpointRow {
                epoch,
                train_accuracy: train.fraction(),
                test_accuracy: test.fraction(),
                train,
                test,
            });
            report.timing.cumulative_seconds.push(elapsed);
            report.network = net.clone();
        }
    }
    report.network = net;
    Ok(report)
}

fn diverged(epoch: usize, message: String, last_good: TrainReport) -> Error {
    log::error!("training diverged at epoch {epoch}: {message}");
    Error::Diverged {
        epoch,
        message,
        last_good: Box::new(last_good),
    }
}

/// The accuracy-versus-epochs curve from a single training run.
pub fn epoch_sweep(spec: &TrainSpec, split: &SplitPair) -> Result<CurveTable> {
    Ok(train(spec, split)?.curve())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::train_test_split;

    fn labelled(labels: &[Label], columns: usize) -> Dataset {
        let n = labels.len();
        Dataset::new(
            (0..n * columns).map(|i| (i % 7) as f32 / 7.0).collect(),
            labels.to_vec(),
            (0..n).map(|i| format!("r{i}")).collect(),
            columns,
            SubsetTag::Synthetic,
        )
        .unwrap()
    }

    #[test]
    fn checkpoint_grid() {
        assert_eq!(default_checkpoints(100_000), DECADE_GRID.to_vec());
        assert_eq!(default_checkpoints(5_000), vec![1, 10, 100, 1_000, 5_000]);
        assert_eq!(default_checkpoints(1), vec![1]);
        assert_eq!(default_checkpoints(250_000).last(), Some(&250_000));
    }

    #[test]
    fn train_spec_validation() {
        let cfg = NetworkConfig::new(2);
        assert!(TrainSpec::new(cfg.clone(), BackendKind::Sequential, 0).validate().is_err());
        let s = TrainSpec::new(cfg.clone(), BackendKind::Sequential, 10);
        assert!(s.clone().with_checkpoints(vec![5, 5]).validate().is_err());
        assert!(s.clone().with_checkpoints(vec![0, 5]).validate().is_err());
        assert!(s.clone().with_checkpoints(vec![5, 11]).validate().is_err());
        assert!(s.clone().with_checkpoints(vec![]).validate().is_err());
        assert!(s.with_checkpoints(vec![2, 10]).validate().is_ok());
    }

    #[test]
    fn zero_net_accuracy_equals_poor_share() {
        // 4 of 10 rows are poor; an all-zero network outputs 0.5 -> poor.
        let labels: Vec<Label> = (0..10)
            .map(|i| if i < 4 { Label::Poor } else { Label::Good })
            .collect();
        let d = labelled(&labels, 3);
        let net = Network::from_weights(NetworkConfig::new(3), vec![0.0; 12], vec![0.0; 4]).unwrap();
        let acc = evaluate(&net, &d).unwrap();
        assert_eq!((acc.correct, acc.total), (4, 10));
        assert_eq!(acc.fraction(), 0.4);
        assert_eq!(acc.percent(), "40.00");
        assert_eq!(acc.confusion.false_poor, 6);
    }

    #[test]
    fn single_row_and_empty() {
        let net = Network::from_weights(NetworkConfig::new(3), vec![0.0; 12], vec![0.0; 4]).unwrap();
        let one = evaluate(&net, &labelled(&[Label::Good], 3)).unwrap();
        assert_eq!(one.fraction(), 0.0);
        let one = evaluate(&net, &labelled(&[Label::Poor], 3)).unwrap();
        assert_eq!(one.fraction(), 1.0);
        assert!(evaluate(&net, &labelled(&[], 3)).is_err());
    }

    #[test]
    fn percent_rendering() {
        let acc = Accuracy {
            correct: 44,
            total: 46,
            confusion: Confusion::default(),
        };
        assert_eq!(acc.percent(), "95.65");
        let acc = Accuracy { correct: 43, total: 44, ..acc };
        assert_eq!(acc.percent(), "97.73");
    }

    #[test]
    fn sweep_rows_ascending() {
        let labels: Vec<Label> = (0..20)
            .map(|i| if i % 2 == 0 { Label::Poor } else { Label::Good })
            .collect();
        let split = train_test_split(&labelled(&labels, 4), 0.75, 1).unwrap();
        let spec = TrainSpec::new(NetworkConfig::new(4).with_seed(2), BackendKind::Sequential, 100)
            .with_checkpoints(vec![1, 10, 100]);
        let curve = epoch_sweep(&spec, &split).unwrap();
        let epochs: Vec<usize> = curve.rows.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![1, 10, 100]);
        let back = CurveTable::from_csv(&curve.to_csv()).unwrap();
        assert_eq!(back, curve);
    }

    #[test]
    fn overlapping_partitions_rejected() {
        let labels = [Label::Poor, Label::Good, Label::Poor, Label::Good];
        let d = labelled(&labels, 2);
        let split = SplitPair {
            train: d.clone(),
            test: d,
            seed: 0,
            fraction: 0.5,
            stratified: true,
        };
        let spec = TrainSpec::new(NetworkConfig::new(2), BackendKind::Sequential, 1);
        assert!(matches!(train(&spec, &split), Err(Error::Validation(_))));
    }

    #[test]
    fn divergence_reports_last_good_checkpoint() {
        // A huge learning rate overflows f32 weights into infinities.
        let labels: Vec<Label> = (0..8)
            .map(|i| if i % 2 == 0 { Label::Poor } else { Label::Good })
            .collect();
        let split = train_test_split(&labelled(&labels, 2), 0.5, 3).unwrap();
        let cfg = NetworkConfig::new(2).with_learning_rate(1e38).with_seed(4);
        let spec = TrainSpec::new(cfg, BackendKind::Sequential, 50).with_checkpoints(vec![1, 50]);
        match train(&spec, &split) {
            Err(Error::Diverged { last_good, epoch, .. }) => {
                assert!(epoch >= 1);
                assert!(last_good.network.weights_finite());
                assert!(last_good.rows.iter().all(|r| r.epoch < epoch || r.epoch == 1));
            }
            other => panic!("expected divergence, got {:?}", other.map(|r| r.rows)),
        }
    }
}
