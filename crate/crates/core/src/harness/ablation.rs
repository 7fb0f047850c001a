//! One-axis ablation grids, resumable runs, and mean ± std summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::{completed_score, is_complete, run_training};
use crate::error::{ConfigError, Error, Result};

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const GRID_FILE: &str = "grid.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Lambda,
    Ratio,
    Gravity,
    Backbone,
}

impl Axis {
    pub fn tag(self) -> &'static str {
        match self {
            Axis::Lambda => "lambda",
            Axis::Ratio => "ratio",
            Axis::Gravity => "gravity",
            Axis::Backbone => "backbone",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "lambda" => Some(Axis::Lambda),
            "ratio" => Some(Axis::Ratio),
            "gravity" => Some(Axis::Gravity),
            "backbone" => Some(Axis::Backbone),
            _ => None,
        }
    }

    /// The configuration key the axis varies.
    pub fn key(self) -> &'static str {
        match self {
            Axis::Lambda => "agent.lambda",
            Axis::Ratio => "agent.use_ratio",
            Axis::Gravity => "env.gravity_scale",
            Axis::Backbone => "backbone.kind",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub axis: Axis,
    pub values: Vec<String>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    pub seed: u64,
    pub config: RunConfig,
    pub dir: PathBuf,
}

impl AblationGrid {
    pub fn new(axis: Axis, values: Vec<String>, seeds: Vec<u64>) -> Self {
        Self { axis, values, seeds }
    }

    pub fn cell_id(&self, value: &str) -> String {
        format!("{}={}", self.axis.tag(), value)
    }

    /// All `|values| × |seeds|` runs, value-major, in declaration order.
    pub fn cells(&self, base: &RunConfig, root: &Path) -> std::result::Result<Vec<Cell>, ConfigError> {
        let mut out = Vec::with_capacity(self.values.len() * self.seeds.len());
        for value in &self.values {
            let id = self.cell_id(value);
            for &seed in &self.seeds {
                let mut config = base.clone();
                config.set(self.axis.key(), value)?;
                config.seed = seed;
                let dir = root.join(&id).join(format!("seed_{seed}"));
                config.output_dir = dir.clone();
                out.push(Cell {
                    id: id.clone(),
                    seed,
                    config,
                    dir,
                });
            }
        }
        Ok(out)
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let path = root.join(GRID_FILE);
        std::fs::write(
            &path,
            serde_json::to_string_pretty(self).expect("grid serializes"),
        )
        .map_err(|e| Error::io(&path, e))
    }

    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(GRID_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))
    }
}

/// Runs every cell without a completion marker, using up to `jobs` threads.
/// Returns the number of runs actually executed.
pub fn run_grid(base: &RunConfig, grid: &AblationGrid, root: &Path, jobs: usize) -> Result<usize> {
    let cells = grid.cells(base, root)?;
    for c in &cells {
        c.config.validate()?;
    }
    grid.save(root)?;
    let pending: Vec<&Cell> = cells.iter().filter(|c| !is_complete(&c.dir)).collect();
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(pending.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= pending.len() || failure.lock().expect("lock").is_some() {
                    break;
                }
                let cell = pending[i];
                if let Err(e) = run_training(&cell.config, &cell.dir) {
                    failure.lock().expect("lock").get_or_insert(e);
                }
            });
        }
    });
    match failure.into_inner().expect("lock") {
        Some(e) => Err(e),
        None => Ok(pending.len()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub cell: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

impl SummaryRow {
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Mean and population std of `scores`; `None` when empty.
pub fn mean_std(scores: &[f64]) -> Option<(f64, f64)> {
    if scores.is_empty() {
        return None;
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn summary_row(cell: &str, scores: &[f64]) -> SummaryRow {
    let ms = mean_std(scores);
    SummaryRow {
        cell: cell.to_string(),
        mean: ms.map(|m| m.0),
        std: ms.map(|m| m.1),
        n: scores.len(),
    }
}

/// Aggregates final scores of completed runs per cell, in grid order. Incomplete
/// runs are ignored; a cell with none is returned with `n = 0`.
pub fn summarize(grid: &AblationGrid, root: &Path) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::with_capacity(grid.values.len());
    for value in &grid.values {
        let id = grid.cell_id(value);
        let mut scores = Vec::new();
        for seed in &grid.seeds {
            let dir = root.join(&id).join(format!("seed_{seed}"));
            if is_complete(&dir) {
                if let Some(s) = completed_score(&dir)? {
                    scores.push(s);
                }
            }
        }
        rows.push(summary_row(&id, &scores));
    }
    Ok(rows)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("cell,mean,std,n,status\n");
    for r in rows {
        match (r.mean, r.std) {
            (Some(m), Some(sd)) => {
                let _ = writeln!(s, "{},{m},{sd},{},ok", r.cell, r.n);
            }
            _ => {
                let _ = writeln!(s, "{},,,0,empty", r.cell);
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_mean_std() {
        assert_eq!(mean_std(&[4.0, 6.0]), Some((5.0, 1.0)));
        assert_eq!(mean_std(&[3.5]), Some((3.5, 0.0)));
        assert_eq!(mean_std(&[]), None);
    }

    #[test]
    fn lambda_grid_enumeration() {
        let values: Vec<String> = ["0", "0.1", "0.2", "0.5", "1.0"].map(String::from).to_vec();
        let grid = AblationGrid::new(Axis::Lambda, values, DEFAULT_SEEDS.to_vec());
        let cells = grid.cells(&RunConfig::default(), Path::new("/tmp/x")).unwrap();
        assert_eq!(cells.len(), 25);
        let lambdas: Vec<f64> = cells
            .iter()
            .step_by(5)
            .map(|c| c.config.learner.target.lambda)
            .collect();
        assert_eq!(lambdas, vec![0.0, 0.1, 0.2, 0.5, 1.0]);
        assert_eq!(cells[7].seed, 2);
        assert_eq!(cells[7].id, "lambda=0.1");
    }

    #[test]
    fn gravity_and_ratio_axes() {
        let grid = AblationGrid::new(Axis::Gravity, vec!["1.25".into(), "3.0".into()], vec![7]);
        let cells = grid.cells(&RunConfig::default(), Path::new("r")).unwrap();
        assert_eq!(cells[1].config.perturbation.gravity_scale, 3.0);
        assert_eq!(cells[1].config.seed, 7);
        let grid = AblationGrid::new(Axis::Ratio, vec!["off".into()], vec![0]);
        let cells = grid.cells(&RunConfig::default(), Path::new("r")).unwrap();
        assert!(!cells[0].config.learner.target.use_ratio);
    }

    #[test]
    fn bad_value_is_a_config_error() {
        let grid = AblationGrid::new(Axis::Backbone, vec!["cql".into()], vec![0]);
        assert!(grid.cells(&RunConfig::default(), Path::new("r")).is_err());
    }

    #[test]
    fn csv_flags_empty_cells() {
        let rows = vec![summary_row("lambda=0", &[4.0, 6.0]), summary_row("lambda=1", &[])];
        assert_eq!(
            summary_csv(&rows),
            "cell,mean,std,n,status\nlambda=0,5,1,2,ok\nlambda=1,,,0,empty\n"
        );
    }
}
