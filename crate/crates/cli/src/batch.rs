use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub path: String,
    pub error: String,
}

/// Result of one command: a serializable report plus per-file failures.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub command: String,
    pub processed: usize,
    pub failures: Vec<Failure>,
    pub report: serde_json::Value,
}

impl Outcome {
    pub fn new<T: Serialize>(command: &str, processed: usize, failures: Vec<Failure>, report: &T) -> Result<Self> {
        Ok(Self {
            command: command.to_owned(),
            processed,
            failures,
            report: serde_json::to_value(report)?,
        })
    }

    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `f` over `items` on a pool of `workers` threads, keeping input order.
pub fn par_map<I, T, F>(items: &[I], workers: usize, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("falling back to one worker: {e}");
            items.iter().map(f).collect()
        }
    }
}

/// Applies `f` to every path, splitting successes from failures.
pub fn run_files<T, F>(paths: &[PathBuf], workers: usize, f: F) -> (Vec<(PathBuf, T)>, Vec<Failure>)
where
    T: Send,
    F: Fn(&Path) -> Result<T> + Sync + Send,
{
    let results = par_map(paths, workers, |p| f(p));
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (path, r) in paths.iter().zip(results) {
        match r {
            Ok(v) => ok.push((path.clone(), v)),
            Err(e) => {
                log::error!("{}: {e:#}", path.display());
                failed.push(Failure {
                    path: path.display().to_string(),
                    error: format!("{e:#}"),
                });
            }
        }
    }
    (ok, failed)
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}
