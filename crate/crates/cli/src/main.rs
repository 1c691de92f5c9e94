use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use geopipe::pipeline::{self, GeneratePaths, PipelineConfig};

/// Geometry-aware dataset generation: pose encoding, camera graphs,
/// trajectory planning and triplet datasets.
///
/// Settings resolve in this order: command-line flags, then GEOPIPE_*
/// environment variables, then the --config file, then built-in defaults.
#[derive(Parser, Debug)]
#[command(name = "geopipe", version)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "GEOPIPE_SEED")]
    seed: Option<u64>,
    /// JSON configuration file.
    #[arg(long, global = true, env = "GEOPIPE_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "GEOPIPE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write relative pose embeddings for every frame of a manifest.
    Encode {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        repe: RepeArgs,
    },
    /// Build the camera graph and print or save its edge list.
    BuildGraph {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        cloud: Option<PathBuf>,
        /// Edge list destination (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Shortest camera trajectory between two frames, as JSON.
    Plan {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        cloud: Option<PathBuf>,
        /// Start frame; sampled from the seed when omitted together with --goal.
        #[arg(long, requires = "goal")]
        start: Option<u32>,
        #[arg(long, requires = "start")]
        goal: Option<u32>,
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Generate the triplet dataset and its manifest.
    Generate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        cloud: Option<PathBuf>,
        /// `frame_index object` lines naming trajectory endpoints.
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Shot-start frame indices, one per line.
        #[arg(long)]
        shots: Option<PathBuf>,
        /// Dataset file (JSON Lines).
        #[arg(long)]
        out: PathBuf,
        /// Dataset manifest (default: `<out>.manifest.json`).
        #[arg(long)]
        manifest_out: Option<PathBuf>,
        #[arg(long)]
        num_trajectories: Option<usize>,
        #[arg(long)]
        min_hops: Option<usize>,
        #[arg(long)]
        clip_len: Option<usize>,
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Summarize a dataset file.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        /// Dataset manifest, for per-source counts and durations.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Grounded attention score over attention/mask dump pairs.
    Gas {
        /// Attention dump; repeat once per pair.
        #[arg(long, required = true)]
        attn: Vec<PathBuf>,
        /// Mask dump; repeat once per pair, in the same order.
        #[arg(long, required = true)]
        mask: Vec<PathBuf>,
        /// Emit the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print the variance schedule with an empirical variance check.
    NoiseDemo {
        #[arg(long, default_value_t = 100)]
        stride: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        beta_start: Option<f64>,
        #[arg(long)]
        beta_end: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct RepeArgs {
    /// Channel dimension C.
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Divide intrinsics by the image size before encoding.
    #[arg(long, requires = "image_size")]
    normalize_intrinsics: bool,
    #[arg(long, num_args = 2, value_names = ["WIDTH", "HEIGHT"])]
    image_size: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Edge distance threshold in meters.
    #[arg(long)]
    distance_threshold: Option<f64>,
    /// Obstruction corridor radius in meters.
    #[arg(long)]
    corridor_radius: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl GraphArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set(&mut cfg.distance_threshold, self.distance_threshold);
        set(&mut cfg.corridor_radius, self.corridor_radius);
    }
}

impl RepeArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set(&mut cfg.channel_dim, self.channels);
        set(&mut cfg.gamma, self.gamma);
        if self.normalize_intrinsics {
            cfg.normalize_intrinsics = true;
        }
        if let Some(s) = &self.image_size {
            cfg.image_size = Some([s[0], s[1]]);
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    match &cli.command {
        Command::Encode { repe, .. } => repe.apply(&mut cfg),
        Command::BuildGraph { graph, .. } | Command::Plan { graph, .. } => graph.apply(&mut cfg),
        Command::Generate {
            graph,
            num_trajectories,
            min_hops,
            clip_len,
            ..
        } => {
            graph.apply(&mut cfg);
            set(&mut cfg.num_trajectories, *num_trajectories);
            set(&mut cfg.min_hops, *min_hops);
            set(&mut cfg.clip_len, *clip_len);
        }
        Command::NoiseDemo {
            beta_start,
            beta_end,
            steps,
            ..
        } => {
            set(&mut cfg.beta_start, *beta_start);
            set(&mut cfg.beta_end, *beta_end);
            set(&mut cfg.diffusion_steps, *steps);
        }
        Command::Stats { .. } | Command::Gas { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_manifest_out(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Encode { manifest, out: dump, .. } => {
            let n = pipeline::cmd_encode(manifest, dump, &cfg)?;
            eprintln!("wrote {n} embeddings to {}", dump.display());
        }
        Command::BuildGraph {
            manifest,
            cloud,
            out: dest,
            ..
        } => {
            let g = match dest {
                Some(p) => {
                    let file = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
                    pipeline::cmd_build_graph(manifest, cloud.as_deref(), io::BufWriter::new(file), &cfg)?
                }
                None => pipeline::cmd_build_graph(manifest, cloud.as_deref(), &mut out, &cfg)?,
            };
            eprintln!("{} nodes, {} edges", g.node_count(), g.edges().len());
        }
        Command::Plan {
            manifest,
            cloud,
            start,
            goal,
            ..
        } => {
            let endpoints = start.zip(*goal);
            let t = pipeline::cmd_plan(manifest, cloud.as_deref(), endpoints, &cfg)?;
            writeln!(out, "{}", serde_json::to_string(&t)?)?;
        }
        Command::Generate {
            manifest,
            cloud,
            annotations,
            shots,
            out: dataset,
            manifest_out,
            ..
        } => {
            let paths = GeneratePaths {
                manifest: manifest.clone(),
                cloud: cloud.clone(),
                annotations: annotations.clone(),
                shots: shots.clone(),
                dataset_out: dataset.clone(),
                manifest_out: manifest_out.clone().unwrap_or_else(|| default_manifest_out(dataset)),
            };
            let generated = pipeline::cmd_generate(&paths, &cfg)?;
            if let Some(stats) = &generated.manifest.stats {
                write!(out, "{}", stats.render())?;
            }
        }
        Command::Stats { dataset, manifest } => {
            let (stats, warnings) = pipeline::cmd_stats(dataset, manifest.as_deref())?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            write!(out, "{}", stats.render())?;
        }
        Command::Gas { attn, mask, json } => {
            if attn.len() != mask.len() {
                bail!("--attn given {} times but --mask {} times", attn.len(), mask.len());
            }
            let report = pipeline::cmd_gas(attn, mask)?;
            if *json {
                writeln!(out, "{}", serde_json::to_string(&report)?)?;
            } else {
                write!(out, "{}", report.render())?;
            }
        }
        Command::NoiseDemo { stride, samples, .. } => {
            let rows = pipeline::noise_demo(&cfg, *stride, *samples)?;
            write!(out, "{}", pipeline::render_noise_table(&cfg, &rows))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .context("starting worker pool")
        .and_then(|pool| pool.install(|| run(&cli)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
