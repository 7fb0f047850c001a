//! Line-delimited JSON metrics. Every record carries the same keys; values a
//! record does not have are `null`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{EvalStats, StepMetrics};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub kind: RecordKind,
    pub step: u64,
    pub q_loss: Option<f64>,
    pub v_loss: Option<f64>,
    pub pi_loss: Option<f64>,
    pub beta: Option<f64>,
    pub ratio_mean: Option<f64>,
    pub ratio_max: Option<f64>,
    pub ratio_min: Option<f64>,
    pub eval_return_mean: Option<f64>,
    pub eval_return_std: Option<f64>,
}

impl MetricsRecord {
    pub fn train(m: &StepMetrics) -> Self {
        Self {
            kind: RecordKind::Train,
            step: m.step,
            q_loss: m.q_loss,
            v_loss: m.v_loss,
            pi_loss: m.pi_loss,
            beta: Some(m.beta),
            ratio_mean: m.ratio_mean,
            ratio_max: m.ratio_max,
            ratio_min: m.ratio_min,
            eval_return_mean: None,
            eval_return_std: None,
        }
    }

    pub fn eval(step: u64, e: &EvalStats) -> Self {
        Self {
            kind: RecordKind::Eval,
            step,
            q_loss: None,
            v_loss: None,
            pi_loss: None,
            beta: None,
            ratio_mean: None,
            ratio_max: None,
            ratio_min: None,
            eval_return_mean: Some(e.mean),
            eval_return_std: Some(e.std),
        }
    }
}

pub struct MetricsWriter<W: Write> {
    out: W,
}

impl MetricsWriter<BufWriter<std::fs::File>> {
    pub fn create(path: &Path) -> Result<Self> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(BufWriter::new(f)))
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, record: &MetricsRecord) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: format!("metrics line {}: {e}", i + 1),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Number of trailing evaluations averaged into a run's final score.
pub const FINAL_EVALS: usize = 3;

/// Mean of the last [`FINAL_EVALS`] evaluation means, or fewer if the run has fewer.
pub fn final_score(records: &[MetricsRecord]) -> Option<f64> {
    let evals: Vec<f64> = records
        .iter()
        .filter(|r| r.kind == RecordKind::Eval)
        .filter_map(|r| r.eval_return_mean)
        .collect();
    if evals.is_empty() {
        return None;
    }
    let tail = &evals[evals.len().saturating_sub(FINAL_EVALS)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}
