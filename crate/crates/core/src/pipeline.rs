//! End-to-end stages behind the command-line tool. Each stage is available
//! both on in-memory inputs and as a `cmd_*` wrapper that reads files.
//!
//! Every stage is deterministic given its inputs and [`PipelineConfig`]:
//! parallel work is collected in index order and written by one writer.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    dataset_stats, read_dataset, DatasetError, DatasetManifest, DatasetStats, TaskKind, TripletRecord,
    TripletWriter, VideoEntry, VideoSource,
};
use crate::formats::{self, FormatError, ManifestHeader, PoseManifest};
use crate::gas::{gas_report_with, GasError, GasReport, DEFAULT_COVERAGE_THRESHOLD};
use crate::geometry::{relative_pose, CalibratedFrame};
use crate::instruction::{
    classify_motion, novel_view_instruction, shot_partition, trajectory_instruction, InstructionError,
    InstructionRewriter, MotionLabel, ObjectAnnotations, ShotBoundaryList, DEFAULT_ROTATION_THRESHOLD,
    DEFAULT_TRANSLATION_THRESHOLD,
};
use crate::noise::{alpha_bar_table, forward_noise_with, LatentTensor, NoiseError, VarianceSchedule};
use crate::par::{self, Parallelism};
use crate::repe::{encode_sequence_with, FrequencyConfig, RelativeEmbedding, RepeError, DEFAULT_GAMMA};
use crate::scene_graph::{
    astar, build_graph_with, sample_endpoints, CameraGraph, GraphError, OccupancyCloud, Trajectory,
    DEFAULT_CORRIDOR_RADIUS, DEFAULT_DISTANCE_THRESHOLD, DEFAULT_MIN_HOPS,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("manifest has no frames")]
    NoFrames,
    #[error("shot boundary frame {0} is not in the manifest")]
    UnknownShotFrame(u32),
    #[error("trajectory sampling failed: {0}")]
    Sampling(GraphError),
    #[error("attention files ({attn}) and mask files ({mask}) must pair up")]
    UnpairedGasInputs { attn: usize, mask: usize },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Repe(#[from] RepeError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Instruction(#[from] InstructionError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Gas(#[from] GasError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// Tunable parameters of every stage. Serialized as a JSON object; absent
/// fields take their defaults and unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Maximum camera-centre distance for a graph edge, in meters.
    pub distance_threshold: f64,
    pub corridor_radius: f64,
    pub translation_threshold: f64,
    /// Radians.
    pub rotation_threshold: f64,
    /// L1 descriptor distance above which a new shot starts.
    pub shot_cut_threshold: f64,
    pub coverage_threshold: f64,
    pub gamma: f64,
    pub channel_dim: usize,
    pub normalize_intrinsics: bool,
    /// `[width, height]` in pixels, required when normalizing intrinsics.
    pub image_size: Option<[f64; 2]>,
    pub seed: u64,
    pub min_hops: usize,
    /// Frames per novel-view clip (one observation plus outcomes).
    pub clip_len: usize,
    pub num_trajectories: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub diffusion_steps: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            distance_threshold: DEFAULT_DISTANCE_THRESHOLD,
            corridor_radius: DEFAULT_CORRIDOR_RADIUS,
            translation_threshold: DEFAULT_TRANSLATION_THRESHOLD,
            rotation_threshold: DEFAULT_ROTATION_THRESHOLD,
            shot_cut_threshold: 1.0,
            coverage_threshold: DEFAULT_COVERAGE_THRESHOLD,
            gamma: DEFAULT_GAMMA,
            channel_dim: 1024,
            normalize_intrinsics: false,
            image_size: None,
            seed: 0,
            min_hops: DEFAULT_MIN_HOPS,
            clip_len: 2,
            num_trajectories: 4,
            beta_start: 1e-4,
            beta_end: 0.02,
            diffusion_steps: 1000,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
        Self::from_json(&text).map_err(|e| file_error(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("distance_threshold", self.distance_threshold),
            ("corridor_radius", self.corridor_radius),
            ("translation_threshold", self.translation_threshold),
            ("rotation_threshold", self.rotation_threshold),
            ("shot_cut_threshold", self.shot_cut_threshold),
            ("coverage_threshold", self.coverage_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PipelineError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.coverage_threshold > 1.0 {
            return Err(PipelineError::Config(format!(
                "coverage_threshold must be at most 1, got {}",
                self.coverage_threshold
            )));
        }
        if self.clip_len < 2 {
            return Err(PipelineError::Config(format!("clip_len must be at least 2, got {}", self.clip_len)));
        }
        if self.normalize_intrinsics && self.image_size.is_none() {
            return Err(PipelineError::Config(
                "normalize_intrinsics requires image_size".into(),
            ));
        }
        self.frequency_config()?;
        self.schedule()?;
        Ok(())
    }

    pub fn frequency_config(&self) -> Result<FrequencyConfig> {
        Ok(FrequencyConfig::new(self.gamma, self.channel_dim)?
            .with_normalize_flag(self.normalize_intrinsics, self.image_size.map(|[w, h]| (w, h))))
    }

    pub fn schedule(&self) -> Result<VarianceSchedule> {
        Ok(VarianceSchedule::linear(self.beta_start, self.beta_end, self.diffusion_steps)?)
    }
}

fn file_error(path: &Path, e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> PipelineError {
    PipelineError::File {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| file_error(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| file_error(path, e))
}

/// Fails early if any input path is missing.
pub fn check_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(file_error(p, "input file not found"));
        }
    }
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<PoseManifest> {
    PoseManifest::read(open(path)?).map_err(|e| file_error(path, e))
}

pub fn load_cloud(path: Option<&Path>) -> Result<OccupancyCloud> {
    match path {
        Some(p) => OccupancyCloud::read(open(p)?).map_err(|e| file_error(p, e)),
        None => Ok(OccupancyCloud::empty()),
    }
}

pub fn load_annotations(path: Option<&Path>) -> Result<ObjectAnnotations> {
    match path {
        Some(p) => ObjectAnnotations::read(open(p)?).map_err(|e| file_error(p, e)),
        None => Ok(ObjectAnnotations::default()),
    }
}

pub fn encode(manifest: &PoseManifest, config: &PipelineConfig, mode: Parallelism) -> Result<Vec<RelativeEmbedding>> {
    if manifest.frames.is_empty() {
        return Err(PipelineError::NoFrames);
    }
    Ok(encode_sequence_with(&manifest.frames, &config.frequency_config()?, mode)?)
}

/// Encodes a manifest and writes the embedding dump; returns the frame count.
pub fn cmd_encode(manifest_path: &Path, out_path: &Path, config: &PipelineConfig) -> Result<usize> {
    config.validate()?;
    let manifest = load_manifest(manifest_path)?;
    let embeddings = encode(&manifest, config, Parallelism::default())?;
    formats::write_embeddings(create(out_path)?, &embeddings)?;
    Ok(embeddings.len())
}

pub fn graph(manifest: &PoseManifest, cloud: &OccupancyCloud, config: &PipelineConfig, mode: Parallelism) -> Result<CameraGraph> {
    Ok(build_graph_with(
        &manifest.frames,
        cloud,
        config.distance_threshold,
        config.corridor_radius,
        mode,
    )?)
}

pub fn cmd_build_graph<W: Write>(
    manifest_path: &Path,
    cloud_path: Option<&Path>,
    out: W,
    config: &PipelineConfig,
) -> Result<CameraGraph> {
    config.validate()?;
    let manifest = load_manifest(manifest_path)?;
    let cloud = load_cloud(cloud_path)?;
    let g = graph(&manifest, &cloud, config, Parallelism::default())?;
    g.write_edge_list(out)?;
    Ok(g)
}

/// Shortest trajectory between two frames, or between a seeded endpoint
/// pair when either endpoint is omitted.
pub fn cmd_plan(
    manifest_path: &Path,
    cloud_path: Option<&Path>,
    endpoints: Option<(u32, u32)>,
    config: &PipelineConfig,
) -> Result<Trajectory> {
    config.validate()?;
    let manifest = load_manifest(manifest_path)?;
    let cloud = load_cloud(cloud_path)?;
    let g = graph(&manifest, &cloud, config, Parallelism::default())?;
    let (start, goal) = match endpoints {
        Some(pair) => pair,
        None => sample_endpoints(&g, config.seed, config.min_hops).map_err(PipelineError::Sampling)?,
    };
    Ok(astar(&g, start, goal)?)
}

/// Position and viewing direction, used for shot cuts when a manifest
/// carries no descriptors of its own.
fn pose_descriptor(frame: &CalibratedFrame) -> Vec<f64> {
    let c = frame.camera_center();
    let v = frame.pose.viewing_direction();
    vec![c.x, c.y, c.z, v.x, v.y, v.z]
}

/// Shot boundaries from, in order of preference: explicit shot-start frame
/// indices, the manifest's descriptors, or pose-derived descriptors.
pub fn shot_boundaries(
    manifest: &PoseManifest,
    explicit: Option<&[u32]>,
    config: &PipelineConfig,
) -> Result<ShotBoundaryList> {
    if let Some(starts) = explicit {
        let mut positions = BTreeSet::from([0usize]);
        for &idx in starts {
            let pos = manifest
                .frames
                .iter()
                .position(|f| f.frame_index == idx)
                .ok_or(PipelineError::UnknownShotFrame(idx))?;
            positions.insert(pos);
        }
        return Ok(ShotBoundaryList::new(positions.into_iter().collect())?);
    }
    let descriptors: Vec<Vec<f64>> = match manifest.descriptors.iter().cloned().collect::<Option<Vec<_>>>() {
        Some(d) if !d.is_empty() => d,
        _ => manifest.frames.iter().map(pose_descriptor).collect(),
    };
    Ok(shot_partition(&descriptors, config.shot_cut_threshold)?)
}

/// Clip windows of `clip_len` positions inside each shot. Consecutive clips
/// share their boundary frame so every adjacent pair is covered once; a
/// shorter tail clip is kept when it has at least two frames.
fn clip_windows(shots: &[std::ops::Range<usize>], clip_len: usize) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    for shot in shots {
        let mut s = shot.start;
        while s + 1 < shot.end {
            let e = (s + clip_len).min(shot.end);
            out.push(s..e);
            s = e - 1;
        }
    }
    out
}

/// Inputs to [`generate`].
#[derive(Debug, Clone)]
pub struct GenerateInputs {
    pub manifest: PoseManifest,
    pub cloud: OccupancyCloud,
    pub annotations: ObjectAnnotations,
    /// Shot-start frame indices overriding descriptor-based cuts.
    pub shot_starts: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub records: Vec<TripletRecord>,
    pub manifest: DatasetManifest,
}

fn endpoint_name(annotations: &ObjectAnnotations, frame: u32) -> String {
    annotations
        .nearest(frame)
        .map(str::to_string)
        .unwrap_or_else(|| format!("frame {frame}"))
}

/// Seed for the `k`-th trajectory draw.
fn draw_seed(seed: u64, k: u64) -> u64 {
    seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Builds the full triplet set for one video: novel-view clips per shot,
/// then seeded A* trajectories over the camera graph.
pub fn generate(
    inputs: &GenerateInputs,
    config: &PipelineConfig,
    rewriter: Option<&dyn InstructionRewriter>,
    mode: Parallelism,
) -> Result<Generated> {
    config.validate()?;
    let frames = &inputs.manifest.frames;
    if frames.is_empty() {
        return Err(PipelineError::NoFrames);
    }
    let header = &inputs.manifest.header;
    let video_id = header.video_id.clone().unwrap_or_else(|| "video".to_string());

    let shots = shot_boundaries(&inputs.manifest, inputs.shot_starts.as_deref(), config)?.shots(frames.len());
    let clips = clip_windows(&shots, config.clip_len);
    let steps_per_clip = par::try_map_range(clips.len(), mode, |c| {
        let clip = &clips[c];
        (clip.start + 1..clip.end)
            .map(|i| {
                classify_motion(
                    &relative_pose(&frames[i], &frames[i - 1]),
                    config.translation_threshold,
                    config.rotation_threshold,
                )
            })
            .collect::<Result<Vec<Vec<MotionLabel>>, _>>()
    })?;

    let mut records = Vec::new();
    for (c, (clip, steps)) in clips.iter().zip(steps_per_clip).enumerate() {
        let instruction = novel_view_instruction(&steps, rewriter);
        records.push(TripletRecord {
            id: format!("{video_id}/novel_view/{c:06}"),
            video_id: video_id.clone(),
            task: TaskKind::NovelView,
            observation_frames: vec![frames[clip.start].frame_index],
            instruction,
            outcome_frames: frames[clip.start + 1..clip.end].iter().map(|f| f.frame_index).collect(),
            motion_labels: Some(steps.iter().map(|s| s[0]).collect()),
            trajectory: None,
        });
    }

    if config.num_trajectories > 0 {
        let g = build_graph_with(frames, &inputs.cloud, config.distance_threshold, config.corridor_radius, mode)?;
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        let draws = config.num_trajectories as u64 * 4;
        for k in 0..draws {
            if pairs.len() == config.num_trajectories {
                break;
            }
            let pair = sample_endpoints(&g, draw_seed(config.seed, k), config.min_hops)
                .map_err(PipelineError::Sampling)?;
            if !pairs.contains(&pair) {
                pairs.push(pair);
            }
        }
        let paths = par::try_map_range(pairs.len(), mode, |i| astar(&g, pairs[i].0, pairs[i].1))?;
        let all_frames: Vec<u32> = frames.iter().map(|f| f.frame_index).collect();
        for (k, ((start, goal), path)) in pairs.iter().zip(paths).enumerate() {
            let instruction = trajectory_instruction(
                &endpoint_name(&inputs.annotations, *start),
                &endpoint_name(&inputs.annotations, *goal),
            )?;
            let instruction = match rewriter {
                Some(r) => r.rewrite(&instruction),
                None => instruction,
            };
            records.push(TripletRecord {
                id: format!("{video_id}/trajectory/{k:04}"),
                video_id: video_id.clone(),
                task: TaskKind::Trajectory,
                observation_frames: all_frames.clone(),
                instruction,
                outcome_frames: path.nodes.clone(),
                motion_labels: None,
                trajectory: Some(path),
            });
        }
    }

    for r in &records {
        r.validate().map_err(DatasetError::from)?;
    }
    let video = VideoEntry {
        video_id,
        frame_count: frames.len(),
        source: header.source.unwrap_or(VideoSource::Scanned),
        duration_seconds: header.duration_seconds,
    };
    let manifest = DatasetManifest::new(vec![video], &records);
    Ok(Generated { records, manifest })
}

/// File paths for [`cmd_generate`].
#[derive(Debug, Clone)]
pub struct GeneratePaths {
    pub manifest: PathBuf,
    pub cloud: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub shots: Option<PathBuf>,
    pub dataset_out: PathBuf,
    pub manifest_out: PathBuf,
}

pub fn cmd_generate(paths: &GeneratePaths, config: &PipelineConfig) -> Result<Generated> {
    config.validate()?;
    check_inputs(
        std::iter::once(paths.manifest.as_path())
            .chain(paths.cloud.as_deref())
            .chain(paths.annotations.as_deref())
            .chain(paths.shots.as_deref()),
    )?;
    let shot_starts = match &paths.shots {
        Some(p) => Some(crate::instruction::read_boundary_indices(open(p)?).map_err(|e| file_error(p, e))?),
        None => None,
    };
    let inputs = GenerateInputs {
        manifest: load_manifest(&paths.manifest)?,
        cloud: load_cloud(paths.cloud.as_deref())?,
        annotations: load_annotations(paths.annotations.as_deref())?,
        shot_starts,
    };
    let out = generate(&inputs, config, None, Parallelism::default())?;

    let mut writer = TripletWriter::new(create(&paths.dataset_out)?)?;
    for r in &out.records {
        writer.emit(r)?;
    }
    writer.finish()?;
    let mut m = create(&paths.manifest_out)?;
    writeln!(m, "{}", out.manifest.to_canonical()?)?;
    m.flush()?;
    Ok(out)
}

/// Reads a dataset (and optionally its manifest) and renders the stats
/// report followed by any consistency warnings.
pub fn cmd_stats(dataset_path: &Path, manifest_path: Option<&Path>) -> Result<(DatasetStats, Vec<String>)> {
    let manifest = match manifest_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| file_error(p, e))?;
            Some(DatasetManifest::from_json(&text).map_err(|e| file_error(p, e))?)
        }
        None => None,
    };
    let read = read_dataset(open(dataset_path)?, manifest.as_ref()).map_err(|e| file_error(dataset_path, e))?;
    let videos = manifest.map(|m| m.videos).unwrap_or_default();
    Ok((dataset_stats(&read.records, &videos), read.warnings))
}

pub fn cmd_gas(attn_paths: &[PathBuf], mask_paths: &[PathBuf]) -> Result<GasReport> {
    if attn_paths.len() != mask_paths.len() || attn_paths.is_empty() {
        return Err(PipelineError::UnpairedGasInputs {
            attn: attn_paths.len(),
            mask: mask_paths.len(),
        });
    }
    let pairs = attn_paths
        .iter()
        .zip(mask_paths)
        .map(|(a, m)| {
            formats::read_gas_pair(open(a)?, open(m)?).map_err(|e| file_error(a, e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(gas_report_with(&pairs, Parallelism::default())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseRow {
    pub t: usize,
    pub alpha_bar: f64,
    /// Sample variance of `z_t` for standard normal `z_0` and `ε`.
    pub variance: f64,
}

/// `(t, ᾱ_t)` table with an empirical variance check per row.
pub fn noise_demo(config: &PipelineConfig, stride: usize, samples: usize) -> Result<Vec<NoiseRow>> {
    let schedule = config.schedule()?;
    let mode = Parallelism::default();
    let z0 = LatentTensor::standard_normal(samples, config.seed, mode);
    let eps = LatentTensor::standard_normal(samples, config.seed.wrapping_add(1), mode);
    alpha_bar_table(&schedule, stride)
        .into_iter()
        .map(|(t, alpha_bar)| {
            let zt = forward_noise_with(&z0, t, &eps, &schedule, mode)?;
            let n = zt.len().max(2) as f64;
            let mean = zt.values().iter().sum::<f64>() / n;
            let variance = zt.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(NoiseRow { t, alpha_bar, variance })
        })
        .collect()
}

pub fn render_noise_table(config: &PipelineConfig, rows: &[NoiseRow]) -> String {
    let mut s = format!(
        "Schedule: linear beta {} to {} over {} steps\n",
        config.beta_start,
        config.beta_end,
        crate::dataset::thousands(config.diffusion_steps)
    );
    s.push_str("t: alpha_bar / Var(z_t)\n");
    for r in rows {
        s.push_str(&format!("{}: {:.12} / {:.4}\n", r.t, r.alpha_bar, r.variance));
    }
    s
}

/// Manifest header for a synthetic or converted sequence.
pub fn simple_header(video_id: &str) -> ManifestHeader {
    ManifestHeader {
        pose_convention: crate::geometry::PoseConvention::WorldToCamera,
        video_id: Some(video_id.to_string()),
        source: Some(VideoSource::Scanned),
        duration_seconds: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::dataset_bytes;
    use crate::geometry::Vec3;
    use crate::synthetic::frame_at;

    fn line_inputs() -> GenerateInputs {
        let frames = (0..4).map(|i| frame_at(i, Vec3::new(0.0, 0.0, 0.3 * i as f64))).collect();
        let mut annotations = ObjectAnnotations::default();
        annotations.insert(0, "the sofa");
        annotations.insert(3, "the kitchen table");
        GenerateInputs {
            manifest: PoseManifest::new(simple_header("line"), frames),
            cloud: OccupancyCloud::empty(),
            annotations,
            shot_starts: None,
        }
    }

    #[test]
    fn config_json() {
        let cfg = PipelineConfig::from_json("{\"seed\": 9, \"clip_len\": 3}").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.distance_threshold, 0.5);
        assert!(PipelineConfig::from_json("{\"sed\": 9}").is_err());
        let err = PipelineConfig::from_json("{\"distance_threshold\": 0}").unwrap_err();
        assert!(err.to_string().contains("distance_threshold must be positive"), "{err}");
        assert!(PipelineConfig::from_json("{\"normalize_intrinsics\": true}").is_err());
        let text = serde_json::to_string(&PipelineConfig::default()).unwrap();
        assert_eq!(PipelineConfig::from_json(&text).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn clip_windows_cover_adjacent_pairs_once() {
        assert_eq!(clip_windows(&[0..5], 2), vec![0..2, 1..3, 2..4, 3..5]);
        assert_eq!(clip_windows(&[0..6], 3), vec![0..3, 2..5, 4..6]);
        assert_eq!(clip_windows(&[0..1, 1..4], 3), vec![1..4]);
    }

    #[test]
    fn line_scene_generation() {
        let out = generate(&line_inputs(), &PipelineConfig::default(), None, Parallelism::Sequential).unwrap();
        let traj: Vec<&TripletRecord> = out.records.iter().filter(|r| r.task == TaskKind::Trajectory).collect();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj[0].outcome_frames, vec![0, 1, 2, 3]);
        assert_eq!(traj[0].instruction, "Please show me the path from the sofa to the kitchen table.");
        let novel: Vec<&TripletRecord> = out.records.iter().filter(|r| r.task == TaskKind::NovelView).collect();
        assert_eq!(novel.len(), 3);
        assert!(novel.iter().all(|r| r.instruction == "move forward"));
        assert_eq!(out.manifest.triplet_count, 4);
    }

    #[test]
    fn explicit_shots_split_clips() {
        let mut inputs = line_inputs();
        inputs.shot_starts = Some(vec![2]);
        let cfg = PipelineConfig {
            num_trajectories: 0,
            ..PipelineConfig::default()
        };
        let out = generate(&inputs, &cfg, None, Parallelism::Sequential).unwrap();
        let obs: Vec<Vec<u32>> = out.records.iter().map(|r| r.observation_frames.clone()).collect();
        assert_eq!(obs, vec![vec![0], vec![2]]);
        inputs.shot_starts = Some(vec![9]);
        assert!(matches!(
            generate(&inputs, &cfg, None, Parallelism::Sequential),
            Err(PipelineError::UnknownShotFrame(9))
        ));
    }

    #[test]
    fn unreachable_hops_fail_with_reason() {
        let cfg = PipelineConfig {
            min_hops: 4,
            ..PipelineConfig::default()
        };
        let err = generate(&line_inputs(), &cfg, None, Parallelism::Sequential).unwrap_err();
        assert!(err.to_string().contains("at least 4 hops"), "{err}");
    }

    #[test]
    fn modes_produce_identical_bytes() {
        let cfg = PipelineConfig::default();
        let a = generate(&line_inputs(), &cfg, None, Parallelism::Sequential).unwrap();
        let b = generate(&line_inputs(), &cfg, None, Parallelism::Rayon).unwrap();
        assert_eq!(dataset_bytes(&a.records).unwrap(), dataset_bytes(&b.records).unwrap());
        assert_eq!(a.manifest, b.manifest);
    }

    #[test]
    fn noise_rows() {
        let cfg = PipelineConfig::default();
        let rows = noise_demo(&cfg, 500, 10_000).unwrap();
        assert_eq!(rows.iter().map(|r| r.t).collect::<Vec<_>>(), vec![0, 500, 1000]);
        assert_eq!(rows[0].alpha_bar, 1.0);
        let text = render_noise_table(&cfg, &rows);
        assert!(text.contains("over 1,000 steps"));
    }
}
