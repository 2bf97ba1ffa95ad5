use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Column order of every metrics file.
pub const METRICS_HEADER: [&str; 8] = [
    "epoch",
    "mean_test_reward",
    "violation_kh",
    "energy_kwh",
    "saturation_frac",
    "actor_loss",
    "critic_loss",
    "wall_ms",
];

/// One evaluation point. Losses are averaged over the updates of the epoch
/// and left empty when no update of that kind happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub mean_test_reward: f64,
    pub violation_kh: f64,
    pub energy_kwh: f64,
    /// Share of training steps of the epoch whose applied action differed
    /// from the noisy policy output.
    pub saturation_frac: f64,
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
    pub wall_ms: u64,
}

/// Streams rows to disk, flushing after each so a killed run leaves a
/// readable prefix.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl MetricsWriter<File> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(File::create(path)?)
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        inner.write_record(METRICS_HEADER)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, row: &EpochRow) -> Result<()> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpochRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Everything a run reports, in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub label: String,
    pub variant: String,
    pub seed: u64,
    /// Baseline reward on the evaluation set.
    pub threshold: f64,
    pub eval_every: usize,
    pub rows: Vec<EpochRow>,
    /// Set when training stopped on a non-finite value.
    pub aborted: Option<String>,
}

impl RunMetrics {
    /// First epoch whose test reward reaches the threshold.
    pub fn epochs_to_threshold(&self) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.mean_test_reward >= self.threshold)
            .map(|r| r.epoch)
    }

    pub fn best(&self) -> Option<&EpochRow> {
        self.rows
            .iter()
            .fold(None, |best: Option<&EpochRow>, r| match best {
                Some(b) if b.mean_test_reward >= r.mean_test_reward => Some(b),
                _ => Some(r),
            })
    }

    pub fn summary(&self) -> RunSummary {
        let best = self.best();
        RunSummary {
            label: self.label.clone(),
            variant: self.variant.clone(),
            seed: self.seed,
            threshold: self.threshold,
            epochs_run: self.rows.last().map_or(0, |r| r.epoch),
            epochs_to_threshold: self.epochs_to_threshold(),
            best_reward: best.map(|r| r.mean_test_reward),
            best_epoch: best.map(|r| r.epoch),
            best_violation_kh: best.map(|r| r.violation_kh),
            best_energy_kwh: best.map(|r| r.energy_kwh),
            aborted: self.aborted.clone(),
            epoch_unit: EPOCH_UNIT.into(),
        }
    }
}

pub const EPOCH_UNIT: &str = "one epoch is one day (96 steps) of training interaction";

/// Per-run JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub variant: String,
    pub seed: u64,
    pub threshold: f64,
    pub epochs_run: usize,
    pub epochs_to_threshold: Option<usize>,
    pub best_reward: Option<f64>,
    pub best_epoch: Option<usize>,
    pub best_violation_kh: Option<f64>,
    pub best_energy_kwh: Option<f64>,
    pub aborted: Option<String>,
    pub epoch_unit: String,
}

impl RunSummary {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}
