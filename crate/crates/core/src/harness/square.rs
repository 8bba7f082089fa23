use std::fmt;
use std::path::Path;

use super::{create_dir, frame_path, render_frame, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::convex_hull;
use crate::swarm::Simulation;
use crate::tracer::{largest_component, occupancy_mask, BlobMask};

/// Steps at which depths are logged and frames written.
pub const SQUARE_SAMPLE_STEPS: [u64; 8] = [100, 500, 1000, 2000, 3000, 3500, 4000, 5000];

/// The deepest edge dominates when it is at least this many times deeper
/// than the runner-up.
pub const DOMINANCE_RATIO: f64 = 1.5;

/// Depth in cells below which no concavity counts as dominant.
pub const MIN_DOMINANT_DEPTH: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    Top,
    Right,
    Bottom,
    Left,
}

impl Edge {
    /// Index order used by gap and depth arrays.
    pub const ALL: [Edge; 4] = [Edge::Top, Edge::Right, Edge::Bottom, Edge::Left];
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Edge::Top => "top",
            Edge::Right => "right",
            Edge::Bottom => "bottom",
            Edge::Left => "left",
        })
    }
}

/// A square blob with stimuli spaced along its border.
#[derive(Debug, Clone)]
pub struct SquareSpec {
    /// Edge length in cells; the square spans `origin..=origin + side`.
    pub side: i32,
    pub origin: i32,
    /// Stimulus spacing per edge in [`Edge::ALL`] order; each divides `side`.
    pub gaps: [i32; 4],
    pub steps: u64,
    pub config: RunConfig,
}

impl SquareSpec {
    pub fn new(gaps: [i32; 4], config: RunConfig) -> Self {
        Self {
            side: 120,
            origin: 40,
            gaps,
            steps: 5000,
            config,
        }
    }

    /// Stimulus cells, corners included once.
    pub fn stimuli(&self) -> Vec<(i32, i32)> {
        let (o, s) = (self.origin, self.side);
        let mut out = Vec::new();
        for (edge, &gap) in Edge::ALL.iter().zip(&self.gaps) {
            for k in 0..s / gap {
                let t = k * gap;
                // walk clockwise so each edge starts at its own corner
                out.push(match edge {
                    Edge::Top => (o + t, o),
                    Edge::Right => (o + s, o + t),
                    Edge::Bottom => (o + s - t, o + s),
                    Edge::Left => (o, o + s - t),
                });
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.side < 2 || self.origin < 0 {
            return Err(Error::Config("square needs side ≥2 and origin ≥0".into()));
        }
        if self.gaps.iter().any(|&g| g <= 0 || self.side % g != 0) {
            return Err(Error::Config(format!("gaps {:?} must divide side {}", self.gaps, self.side)));
        }
        let far = (self.origin + self.side) as usize;
        if far >= self.config.width || far >= self.config.height {
            return Err(Error::Config("square does not fit the lattice".into()));
        }
        Ok(())
    }
}

/// Concavity depth per edge at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcavitySample {
    pub step: u64,
    pub population: usize,
    pub depths: [f64; 4],
}

impl ConcavitySample {
    pub fn depth(&self, edge: Edge) -> f64 {
        self.depths[edge as usize]
    }

    pub fn dominant(&self) -> Option<Edge> {
        dominant_edge(&self.depths)
    }
}

#[derive(Debug, Clone)]
pub struct SquareOutcome {
    pub samples: Vec<ConcavitySample>,
    pub frames_written: usize,
}

impl SquareOutcome {
    pub fn at(&self, step: u64) -> Option<&ConcavitySample> {
        self.samples.iter().find(|s| s.step == step)
    }

    pub fn last(&self) -> Option<&ConcavitySample> {
        self.samples.last()
    }

    /// `step,top,right,bottom,left,dominant` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,population,top,right,bottom,left,dominant\n");
        for x in &self.samples {
            let d = x.dominant().map_or_else(String::new, |e| e.to_string());
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                x.step, x.population, x.depths[0], x.depths[1], x.depths[2], x.depths[3], d
            ));
        }
        s
    }
}

/// Per edge, the largest inward distance from the edge to the first set cell
/// over scanlines perpendicular to it. Scanlines within `margin` cells of a
/// corner are skipped so rounded corners do not register; an empty scanline
/// counts as the full side.
pub fn concavity_depths(mask: &BlobMask, origin: i32, side: i32, margin: i32) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (i, edge) in Edge::ALL.iter().enumerate() {
        let mut deepest = 0;
        for t in margin..=side - margin {
            let depth = (0..=side)
                .find(|&d| {
                    let (x, y) = match edge {
                        Edge::Top => (origin + t, origin + d),
                        Edge::Right => (origin + side - d, origin + t),
                        Edge::Bottom => (origin + t, origin + side - d),
                        Edge::Left => (origin + d, origin + t),
                    };
                    mask.get(x, y)
                })
                .unwrap_or(side);
            deepest = deepest.max(depth);
        }
        out[i] = deepest as f64;
    }
    out
}

/// The edge whose depth is at least [`MIN_DOMINANT_DEPTH`] and
/// [`DOMINANCE_RATIO`] times every other.
pub fn dominant_edge(depths: &[f64; 4]) -> Option<Edge> {
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&a, &b| depths[b].total_cmp(&depths[a]));
    let (first, second) = (depths[idx[0]], depths[idx[1]]);
    (first >= MIN_DOMINANT_DEPTH && first >= DOMINANCE_RATIO * second).then(|| Edge::ALL[idx[0]])
}

/// Runs a square blob for `spec.steps` steps without halting, sampling
/// depths at [`SQUARE_SAMPLE_STEPS`] (and the last step). Frames go to
/// `frames` at the same steps.
pub fn square_scenario(spec: &SquareSpec, seed: u64, frames: Option<&Path>) -> Result<SquareOutcome> {
    spec.config.validate()?;
    spec.validate()?;
    let stimuli = spec.stimuli();
    let hull = convex_hull(&stimuli)?;
    let mut swarm = spec.config.swarm.clone();
    swarm.seed = seed;
    let mut sim = Simulation::new(&hull, &stimuli, swarm, spec.config.width, spec.config.height)?;
    if let Some(dir) = frames {
        create_dir(dir)?;
    }
    let margin = spec.side / 6;
    let mut samples = Vec::new();
    let mut frames_written = 0;
    for _ in 0..spec.steps {
        sim.step();
        let step = sim.state.step;
        if !SQUARE_SAMPLE_STEPS.contains(&step) && step != spec.steps {
            continue;
        }
        let depths = match largest_component(&occupancy_mask(&sim.state)) {
            Ok(mask) => concavity_depths(&mask, spec.origin, spec.side, margin),
            Err(Error::EmptyBlob) => [spec.side as f64; 4],
            Err(e) => return Err(e),
        };
        samples.push(ConcavitySample {
            step,
            population: sim.state.population(),
            depths,
        });
        if let Some(dir) = frames {
            render_frame(&sim.state, &frame_path(dir, step))?;
            frames_written += 1;
        }
    }
    Ok(SquareOutcome { samples, frames_written })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stimuli_cover_each_edge() {
        let spec = SquareSpec::new([20, 60, 20, 20], RunConfig::default());
        let s = spec.stimuli();
        assert_eq!(s.len(), 6 + 2 + 6 + 6);
        assert!(s.contains(&(160, 40)) && s.contains(&(160, 100)));
        assert!(!s.contains(&(160, 60)));
        let mut dedup = s.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), s.len());
        assert!(SquareSpec::new([25, 20, 20, 20], RunConfig::default()).validate().is_err());
    }

    #[test]
    fn notch_depth_lands_on_its_edge() {
        // 21×21 square at origin 0 with a 3-wide notch 6 deep in the right edge
        let mut cells = vec![true; 21 * 21];
        for y in 9..12 {
            for x in 15..21 {
                cells[y * 21 + x] = false;
            }
        }
        let mask = BlobMask::new(21, 21, cells);
        let d = concavity_depths(&mask, 0, 20, 3);
        assert_eq!(d, [0.0, 6.0, 0.0, 0.0]);
        assert_eq!(dominant_edge(&d), None, "below the minimum depth");
        assert_eq!(dominant_edge(&[3.0, 12.0, 7.0, 0.0]), Some(Edge::Right));
        assert_eq!(dominant_edge(&[3.0, 12.0, 9.0, 0.0]), None);
    }

    #[test]
    fn short_run_samples_and_frames() {
        let mut spec = SquareSpec::new([20; 4], RunConfig::default());
        spec.side = 60;
        spec.steps = 120;
        let dir = tempfile::tempdir().unwrap();
        let out = square_scenario(&spec, 3, Some(dir.path())).unwrap();
        let steps: Vec<u64> = out.samples.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![100, 120]);
        assert_eq!(out.frames_written, 2);
        assert!(dir.path().join("frame_000100.pgm").exists());
        assert!(out.to_csv().starts_with("step,"));
    }
}
