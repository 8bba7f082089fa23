use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{create_dir, insertion_trace_csv, mask_image, run_once, run_record, run_seed, Reference, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::CityDataset;

/// A run counts as connected when its largest component holds at least this
/// share of the particles.
pub const CONNECTED_FRACTION: f64 = 0.99;

/// One row of `runs.csv`. Optional fields are empty for failed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub dataset_index: usize,
    pub run: usize,
    pub seed: u64,
    pub cities: usize,
    pub halted: bool,
    pub steps: u64,
    pub initial_population: usize,
    pub final_population: usize,
    pub components: usize,
    pub largest_fraction: f64,
    /// Most particles in any city's halting window at the final step.
    pub max_city_cover: usize,
    pub blob_length: Option<f64>,
    pub reference_length: f64,
    pub exact_reference: bool,
    pub ratio: Option<f64>,
    pub crossings: Option<usize>,
    pub failure: String,
    pub tour: String,
}

impl RunRecord {
    pub fn completed(&self) -> bool {
        self.ratio.is_some()
    }
}

/// Ratios of the completed runs on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub dataset: String,
    pub completed: usize,
    pub failed: usize,
    pub best: Option<f64>,
    pub mean: Option<f64>,
    pub worst: Option<f64>,
}

/// Per-run rows plus everything derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub rows: Vec<RunRecord>,
    pub datasets: Vec<DatasetStats>,
    pub completed: usize,
    pub failed: usize,
    pub halted: usize,
    /// Halted runs whose blob met [`CONNECTED_FRACTION`].
    pub connected: usize,
    /// Means over datasets with at least one completed run.
    pub mean_of_best: Option<f64>,
    pub mean_of_mean: Option<f64>,
    pub mean_of_worst: Option<f64>,
    /// True when every reference was exact.
    pub all_exact: bool,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

impl CampaignReport {
    /// Aggregates rows; datasets appear in order of first occurrence.
    pub fn from_rows(rows: Vec<RunRecord>) -> Self {
        let mut names: Vec<&str> = Vec::new();
        for r in &rows {
            if !names.contains(&r.dataset.as_str()) {
                names.push(&r.dataset);
            }
        }
        let datasets: Vec<DatasetStats> = names
            .iter()
            .map(|&name| {
                let ratios: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.dataset == name)
                    .filter_map(|r| r.ratio)
                    .collect();
                let total = rows.iter().filter(|r| r.dataset == name).count();
                DatasetStats {
                    dataset: name.to_string(),
                    completed: ratios.len(),
                    failed: total - ratios.len(),
                    best: ratios.iter().copied().reduce(f64::min),
                    mean: mean(&ratios),
                    worst: ratios.iter().copied().reduce(f64::max),
                }
            })
            .collect();
        let pick = |f: fn(&DatasetStats) -> Option<f64>| mean(&datasets.iter().filter_map(f).collect::<Vec<_>>());
        let completed = rows.iter().filter(|r| r.completed()).count();
        let halted = rows.iter().filter(|r| r.halted).count();
        let connected = rows
            .iter()
            .filter(|r| r.halted && r.largest_fraction >= CONNECTED_FRACTION)
            .count();
        Self {
            completed,
            failed: rows.len() - completed,
            halted,
            connected,
            mean_of_best: pick(|d| d.best),
            mean_of_mean: pick(|d| d.mean),
            mean_of_worst: pick(|d| d.worst),
            all_exact: rows.iter().all(|r| r.exact_reference),
            datasets,
            rows,
        }
    }

    pub fn completion_rate(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.completed as f64 / self.rows.len() as f64
        }
    }

    pub fn connectivity_rate(&self) -> f64 {
        if self.halted == 0 {
            0.0
        } else {
            self.connected as f64 / self.halted as f64
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn rows_from_csv(text: &str, origin: &Path) -> Result<Vec<RunRecord>> {
        csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<std::result::Result<Vec<RunRecord>, _>>()
            .map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                msg: e.to_string(),
            })
    }

    pub fn summary(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let basis = if self.all_exact { "exact optimum" } else { "reference (2-opt where flagged)" };
        let mut s = String::new();
        let _ = writeln!(s, "tour length / {basis}");
        let _ = writeln!(s, "{:<16} {:>4} {:>6} {:>8} {:>8} {:>8}", "dataset", "ok", "failed", "best", "mean", "worst");
        for d in &self.datasets {
            let _ = writeln!(
                s,
                "{:<16} {:>4} {:>6} {:>8} {:>8} {:>8}",
                d.dataset,
                d.completed,
                d.failed,
                fmt(d.best),
                fmt(d.mean),
                fmt(d.worst)
            );
        }
        let _ = writeln!(
            s,
            "mean of best {}  mean of mean {}  mean of worst {}",
            fmt(self.mean_of_best),
            fmt(self.mean_of_mean),
            fmt(self.mean_of_worst)
        );
        let _ = writeln!(
            s,
            "runs {}  completed {}  failed {}  completion {:.1}%",
            self.rows.len(),
            self.completed,
            self.failed,
            100.0 * self.completion_rate()
        );
        let _ = writeln!(
            s,
            "connected blobs at halt {}/{} ({:.1}%)",
            self.connected,
            self.halted,
            100.0 * self.connectivity_rate()
        );
        let mut failures: Vec<&RunRecord> = self.rows.iter().filter(|r| !r.completed()).collect();
        failures.sort_by_key(|r| (r.dataset_index, r.run));
        for r in failures {
            let _ = writeln!(s, "  failed {} run {}: {}", r.dataset, r.run, r.failure);
        }
        s
    }
}

/// A set of datasets, each run `runs_per_dataset` times.
#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub datasets: Vec<(String, CityDataset)>,
    pub runs_per_dataset: usize,
    pub config: RunConfig,
    pub base_seed: u64,
    /// Receives `runs.csv`, `summary.txt`, per-run insertion traces, halted
    /// masks and frames.
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
}

impl CampaignSpec {
    pub fn new(datasets: Vec<(String, CityDataset)>, config: RunConfig) -> Self {
        Self {
            datasets,
            runs_per_dataset: 6,
            config,
            base_seed: 0,
            out_dir: None,
            workers: 0,
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs every dataset × run pair in parallel and aggregates the results.
/// Rows come back in dataset-then-run order regardless of scheduling.
pub fn run_campaign(spec: &CampaignSpec) -> Result<CampaignReport> {
    if spec.runs_per_dataset == 0 {
        return Err(Error::Config("runs_per_dataset must be ≥1".into()));
    }
    spec.config.validate()?;
    if let Some(dir) = &spec.out_dir {
        for sub in ["traces", "masks"] {
            create_dir(&dir.join(sub))?;
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let references: Vec<Reference> = pool.install(|| {
        spec.datasets
            .par_iter()
            .enumerate()
            .map(|(d, (_, ds))| Reference::compute(ds, &spec.config, run_seed(spec.base_seed, d, usize::MAX >> 32)))
            .collect::<Result<_>>()
    })?;

    let jobs: Vec<(usize, usize)> = (0..spec.datasets.len())
        .flat_map(|d| (0..spec.runs_per_dataset).map(move |r| (d, r)))
        .collect();
    let rows: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(d, r)| {
                let (name, ds) = &spec.datasets[d];
                let seed = run_seed(spec.base_seed, d, r);
                let tag = format!("{name}_r{r}");
                let frames = spec.out_dir.as_ref().map(|dir| dir.join("frames").join(&tag));
                let outcome = run_once(ds, &spec.config, seed, frames.as_deref())?;
                let record = run_record(name, d, r, seed, ds, &outcome, &references[d]);
                log::info!(
                    "{tag}: steps {} {}",
                    record.steps,
                    record.ratio.map_or_else(|| record.failure.clone(), |x| format!("ratio {x:.4}"))
                );
                if let Some(dir) = &spec.out_dir {
                    write(
                        &dir.join("traces").join(format!("{tag}.csv")),
                        insertion_trace_csv(&outcome.insertion_trace(), ds)?,
                    )?;
                    if let Some(mask) = &outcome.traced_mask {
                        mask_image(mask).save(&dir.join("masks").join(format!("{tag}.pgm")))?;
                    }
                }
                Ok(record)
            })
            .collect::<Result<_>>()
    })?;

    let report = CampaignReport::from_rows(rows);
    if let Some(dir) = &spec.out_dir {
        write(&dir.join("runs.csv"), report.to_csv()?)?;
        write(&dir.join("summary.txt"), report.summary())?;
    }
    Ok(report)
}
