//! Experiment orchestration: single runs, benchmark campaigns, the square
//! stimulus scenarios and frame output.

mod campaign;
mod config;
mod square;

use std::fs;
use std::path::{Path, PathBuf};

pub use campaign::{
    run_campaign, CampaignReport, CampaignSpec, DatasetStats, RunRecord, CONNECTED_FRACTION,
};
pub use config::{RunConfig, DEFAULT_MAX_STEPS};
pub use square::{
    concavity_depths, dominant_edge, square_scenario, ConcavitySample, Edge, SquareOutcome,
    SquareSpec, DOMINANCE_RATIO, MIN_DOMINANT_DEPTH, SQUARE_SAMPLE_STEPS,
};

use crate::error::{Error, Result};
use crate::geometry::{convex_hull, CityDataset, Tour};
use crate::oracle::{crossing_count, reference_tour};
use crate::pgm::GrayImage;
use crate::swarm::{SimState, Simulation, UncoverEvent};
use crate::tracer::{connectivity, occupancy_mask, read_blob_tour, BlobMask};

/// Seed of run `run` on dataset `dataset`: `base ⊕ splitmix64(dataset << 32 | run)`.
pub fn run_seed(base: u64, dataset: usize, run: usize) -> u64 {
    base ^ splitmix64(((dataset as u64) << 32) | run as u64)
}

/// The SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Field snapshot with 3×3 white city markers.
pub fn frame_image(state: &SimState) -> GrayImage {
    let mut img = GrayImage::new(state.width(), state.height(), state.field.to_gray());
    for c in &state.cities {
        img.mark(c.x, c.y, 1, 255);
    }
    img
}

pub fn render_frame(state: &SimState, path: &Path) -> Result<()> {
    frame_image(state).save(path)
}

pub fn frame_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("frame_{step:06}.pgm"))
}

pub fn mask_image(mask: &BlobMask) -> GrayImage {
    GrayImage::new(mask.width(), mask.height(), mask.to_gray())
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Best available reference tour for a dataset.
#[derive(Debug, Clone)]
pub struct Reference {
    pub tour: Tour,
    /// True when the tour is the exact optimum.
    pub exact: bool,
}

impl Reference {
    pub fn compute(dataset: &CityDataset, cfg: &RunConfig, seed: u64) -> Result<Self> {
        let (tour, exact) = reference_tour(&dataset.cities, cfg.two_opt_restarts, seed)?;
        Ok(Self { tour, exact })
    }
}

/// Everything a single run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: SimState,
    pub halted: bool,
    pub initial_population: usize,
    pub tour: Option<Tour>,
    /// Mask the tour was read from, when reading got that far.
    pub traced_mask: Option<BlobMask>,
    pub failure: Option<String>,
    pub frames_written: usize,
    /// Most particles in any city's halting window at the final step.
    pub max_city_cover: usize,
}

impl RunOutcome {
    pub fn insertion_trace(&self) -> Vec<UncoverEvent> {
        self.state.insertion_trace()
    }
}

/// Runs one blob over `dataset` until it halts or exhausts `max_steps`, then
/// reads its tour. Non-convergence and unreadable tours are reported in the
/// outcome; only I/O problems are errors.
pub fn run_once(dataset: &CityDataset, cfg: &RunConfig, seed: u64, frames: Option<&Path>) -> Result<RunOutcome> {
    cfg.validate()?;
    let hull = convex_hull(&dataset.points())?;
    let mut swarm = cfg.swarm.clone();
    swarm.seed = seed;
    let mut sim = Simulation::new(&hull, &dataset.points(), swarm, cfg.width, cfg.height)?;
    let initial_population = sim.state.population();

    let period = cfg.frames_every;
    if let Some(dir) = frames.filter(|_| period > 0) {
        create_dir(dir)?;
    }
    let mut frames_written = 0;
    let mut last_frame = None;
    let result = sim.run_until_halt_with(cfg.max_steps, |state| {
        if let Some(dir) = frames.filter(|_| period > 0 && state.step % period == 0) {
            render_frame(state, &frame_path(dir, state.step))?;
            frames_written += 1;
            last_frame = Some(state.step);
        }
        Ok(())
    });
    let halted = match result {
        Ok(()) => true,
        Err(Error::NoConvergence { .. }) => false,
        Err(e) => return Err(e),
    };
    let state = sim.state;
    if let Some(dir) = frames.filter(|_| period > 0 && halted && last_frame != Some(state.step)) {
        render_frame(&state, &frame_path(dir, state.step))?;
        frames_written += 1;
    }
    if halted {
        state.check_consistency().map_err(Error::Config)?;
    }
    let max_city_cover = state
        .cities
        .iter()
        .map(|c| state.occupancy.count_window(c.x, c.y, cfg.swarm.halting_half_width))
        .max()
        .unwrap_or(0);

    let (tour, traced_mask, failure) = if !halted {
        (None, None, Some(format!("no convergence after {} steps", state.step)))
    } else {
        match read_blob_tour(&occupancy_mask(&state), &dataset.cities, &cfg.trace()) {
            Ok((tour, mask)) => (Some(tour), Some(mask), None),
            Err(e @ (Error::CityOffPerimeter { .. } | Error::EmptyBlob)) => (None, None, Some(e.to_string())),
            Err(e) => return Err(e),
        }
    };
    Ok(RunOutcome {
        state,
        halted,
        initial_population,
        tour,
        traced_mask,
        failure,
        frames_written,
        max_city_cover,
    })
}

/// One CSV row for a finished run.
pub fn run_record(
    dataset_name: &str,
    dataset_index: usize,
    run: usize,
    seed: u64,
    dataset: &CityDataset,
    outcome: &RunOutcome,
    reference: &Reference,
) -> RunRecord {
    let (largest_fraction, components) = connectivity(&outcome.state);
    let tour = outcome.tour.as_ref();
    RunRecord {
        dataset: dataset_name.to_string(),
        dataset_index,
        run,
        seed,
        cities: dataset.len(),
        halted: outcome.halted,
        steps: outcome.state.step,
        initial_population: outcome.initial_population,
        final_population: outcome.state.population(),
        components,
        largest_fraction,
        max_city_cover: outcome.max_city_cover,
        blob_length: tour.map(|t| t.length),
        reference_length: reference.tour.length,
        exact_reference: reference.exact,
        ratio: tour.map(|t| t.length / reference.tour.length),
        crossings: tour.map(|t| crossing_count(&t.order, &dataset.cities)),
        failure: outcome.failure.clone().unwrap_or_default(),
        tour: tour.map(|t| t.labels(&dataset.cities).join(" ")).unwrap_or_default(),
    }
}

/// `step,city_label` lines of the insertion trace.
pub fn insertion_trace_csv(events: &[UncoverEvent], dataset: &CityDataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(["step", "city_label"]).map_err(csv_err)?;
    for e in events {
        w.write_record([e.step.to_string(), dataset.cities[e.city].label.clone()])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Human-readable tour line: labels in order, then the length.
pub fn tour_line(tour: &Tour, dataset: &CityDataset) -> String {
    format!("{}  length {:.4}", tour.labels(&dataset.cities).join(" "), tour.length)
}
