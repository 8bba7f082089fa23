use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use shrinking_blob::geometry::{generate_dataset, Arena, CityDataset};
use shrinking_blob::harness::{
    create_dir, insertion_trace_csv, mask_image, run_campaign, run_once, run_record, square_scenario, tour_line,
    CampaignSpec, Reference, RunConfig, SquareSpec,
};
use shrinking_blob::oracle::{held_karp, reference_tour, HELD_KARP_MAX};
use shrinking_blob::pgm::GrayImage;
use shrinking_blob::tracer::{read_blob_tour, BlobMask, TraceConfig};

#[derive(Parser)]
#[command(name = "blob-tsp", version, about = "Shrinking-blob TSP simulator and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML file of configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set sensor_offset=9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write a lattice frame every N steps (0 = off).
    #[arg(long)]
    frames_every: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path, &self.set)?,
            None => RunConfig::from_toml("", &self.set, Path::new("<command line>"))?,
        };
        if let Some(n) = self.frames_every {
            cfg.frames_every = n;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate benchmark datasets as `dataset_NN.txt`.
    GenDatasets {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 20)]
        cities: usize,
        #[arg(long, default_value_t = 25.0)]
        min_separation: f64,
        /// Dataset i uses seed `seed + i`.
        #[arg(long, default_value_t = 1000)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one blob on one dataset.
    Run {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the mask, insertion trace and frames.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run every dataset in a directory several times and score the tours.
    Campaign {
        /// Directory of `*.txt` datasets, taken in name order.
        datasets: PathBuf,
        #[arg(long, default_value_t = 6)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Exit nonzero if any run fails.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Square blob with stimuli spaced along its edges; logs concavity depth.
    Square {
        /// Stimulus spacing for the top, right, bottom and left edges.
        #[arg(long, value_delimiter = ',', default_values_t = [20, 20, 20, 20])]
        gaps: Vec<i32>,
        #[arg(long, default_value_t = 120)]
        side: i32,
        #[arg(long, default_value_t = 5000)]
        steps: u64,
        /// Seeds 0..N.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Exact (or 2-opt beyond the exact range) tour of a dataset.
    Solve {
        dataset: PathBuf,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Read a tour from a saved blob mask (PGM, nonzero = blob).
    Trace {
        mask: PathBuf,
        dataset: PathBuf,
        #[arg(long, default_value_t = TraceConfig::default().detect_radius)]
        detect_radius: i32,
        #[arg(long, default_value_t = TraceConfig::default().closing_radius)]
        closing_radius: i32,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_dataset_dir(dir: &Path) -> anyhow::Result<Vec<(String, CityDataset)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .txt datasets in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((name, CityDataset::load(p)?))
        })
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenDatasets {
            count,
            cities,
            min_separation,
            seed,
            out,
        } => {
            create_dir(&out)?;
            for i in 0..count {
                let ds = generate_dataset(cities, Arena::default(), min_separation, seed + i as u64)?;
                let path = out.join(format!("dataset_{i:02}.txt"));
                ds.save(&path)?;
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Run {
            dataset,
            seed,
            out,
            strict,
            config,
        } => {
            let cfg = config.load()?;
            let ds = CityDataset::load(&dataset)?;
            let name = dataset.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            if let Some(dir) = &out {
                create_dir(dir)?;
            }
            let frames = out.as_ref().map(|d| d.join("frames"));
            let outcome = run_once(&ds, &cfg, seed, frames.as_deref())?;
            let reference = Reference::compute(&ds, &cfg, seed)?;
            let record = run_record(&name, 0, 0, seed, &ds, &outcome, &reference);
            println!(
                "halted {} at step {}, population {} -> {}",
                outcome.halted, record.steps, record.initial_population, record.final_population
            );
            if let Some(dir) = &out {
                fs::write(dir.join("insertion.csv"), insertion_trace_csv(&outcome.insertion_trace(), &ds)?)
                    .context("writing insertion trace")?;
                if let Some(mask) = &outcome.traced_mask {
                    mask_image(mask).save(&dir.join("mask.pgm"))?;
                }
            }
            let kind = if reference.exact { "optimum" } else { "2-opt" };
            println!("{kind}: {}", tour_line(&reference.tour, &ds));
            match &outcome.tour {
                Some(t) => {
                    println!("blob:    {}", tour_line(t, &ds));
                    println!("ratio {:.4}", t.length / reference.tour.length);
                    Ok(ExitCode::SUCCESS)
                }
                None => {
                    println!("failed: {}", record.failure);
                    Ok(if strict { ExitCode::FAILURE } else { ExitCode::SUCCESS })
                }
            }
        }

        Command::Campaign {
            datasets,
            runs,
            seed,
            out,
            workers,
            strict,
            config,
        } => {
            let mut spec = CampaignSpec::new(load_dataset_dir(&datasets)?, config.load()?);
            spec.runs_per_dataset = runs;
            spec.base_seed = seed;
            spec.out_dir = out;
            spec.workers = workers;
            let report = run_campaign(&spec)?;
            print!("{}", report.summary());
            Ok(if strict && report.failed > 0 {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }

        Command::Square {
            gaps,
            side,
            steps,
            seeds,
            out,
            config,
        } => {
            let gaps: [i32; 4] = gaps
                .try_into()
                .map_err(|g: Vec<i32>| anyhow::anyhow!("--gaps needs 4 values, got {}", g.len()))?;
            let mut spec = SquareSpec::new(gaps, config.load()?);
            spec.side = side;
            spec.steps = steps;
            for seed in 0..seeds {
                let dir = out.as_ref().map(|d| d.join(format!("seed_{seed}")));
                let outcome = square_scenario(&spec, seed, dir.as_deref())?;
                if let Some(dir) = &dir {
                    fs::write(dir.join("concavity.csv"), outcome.to_csv()).context("writing concavity log")?;
                }
                let last = outcome.last().context("no samples taken")?;
                let dominant = last.dominant().map_or_else(|| "none".to_string(), |e| e.to_string());
                println!(
                    "seed {seed}: depths top {} right {} bottom {} left {} at step {}, dominant {dominant}",
                    last.depths[0], last.depths[1], last.depths[2], last.depths[3], last.step
                );
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Solve { dataset, restarts, seed } => {
            let ds = CityDataset::load(&dataset)?;
            let (tour, exact) = if ds.len() <= HELD_KARP_MAX {
                (held_karp(&ds.cities)?, true)
            } else {
                reference_tour(&ds.cities, restarts, seed)?
            };
            let kind = if exact { "optimum" } else { "2-opt" };
            println!("{kind}: {}", tour_line(&tour, &ds));
            Ok(ExitCode::SUCCESS)
        }

        Command::Trace {
            mask,
            dataset,
            detect_radius,
            closing_radius,
        } => {
            let img = GrayImage::load(&mask)?;
            let blob = BlobMask::from_gray(img.width, img.height, &img.pixels);
            let ds = CityDataset::load(&dataset)?;
            let cfg = TraceConfig {
                detect_radius,
                closing_radius,
            };
            let (tour, _) = read_blob_tour(&blob, &ds.cities, &cfg)?;
            println!("{}", tour_line(&tour, &ds));
            Ok(ExitCode::SUCCESS)
        }
    }
}
