//! Observation–action–outcome triplet datasets.
//!
//! A dataset file is UTF-8 JSON Lines. The first line is the header
//! `{"format_version":1}`; every following line is one [`TripletRecord`] in
//! canonical form:
//!
//! * object keys sorted by byte order at every nesting level,
//! * no whitespace outside strings,
//! * absent optional fields omitted rather than written as `null`,
//! * numbers in serde_json's shortest round-trip form,
//! * each line terminated by a single `\n`.
//!
//! Equal records therefore always serialize to identical bytes, and parsing
//! then re-serializing a canonical line reproduces it exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::instruction::MotionLabel;
use crate::scene_graph::Trajectory;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecordViolation {
    #[error("record id is empty")]
    EmptyId,
    #[error("video id is empty")]
    EmptyVideoId,
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("observation frame list is empty")]
    EmptyObservation,
    #[error("outcome frame list is empty")]
    EmptyOutcome,
    #[error("trajectory task without a trajectory")]
    MissingTrajectory,
    #[error("trajectory has no nodes")]
    EmptyTrajectory,
    #[error("outcome frames differ from the trajectory node sequence")]
    TrajectoryOutcomeMismatch,
    #[error("motion label magnitude must be finite and non-negative")]
    BadMagnitude,
    #[error("trajectory cost must be finite and non-negative")]
    BadCost,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid record: {0}")]
    Invalid(#[from] RecordViolation),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: invalid record: {violation}")]
    InvalidAt { line: usize, violation: RecordViolation },
    #[error("missing header line")]
    MissingHeader,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u64),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    NovelView,
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletRecord {
    pub id: String,
    pub video_id: String,
    pub task: TaskKind,
    pub observation_frames: Vec<u32>,
    /// The geometric transformation instruction (the "action").
    pub instruction: String,
    pub outcome_frames: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_labels: Option<Vec<MotionLabel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
}

impl TripletRecord {
    pub fn validate(&self) -> std::result::Result<(), RecordViolation> {
        use RecordViolation::*;
        if self.id.is_empty() {
            return Err(EmptyId);
        }
        if self.video_id.is_empty() {
            return Err(EmptyVideoId);
        }
        if self.instruction.trim().is_empty() {
            return Err(EmptyInstruction);
        }
        if self.observation_frames.is_empty() {
            return Err(EmptyObservation);
        }
        if self.outcome_frames.is_empty() {
            return Err(EmptyOutcome);
        }
        if let Some(labels) = &self.motion_labels {
            if labels.iter().any(|l| !(l.magnitude.is_finite() && l.magnitude >= 0.0)) {
                return Err(BadMagnitude);
            }
        }
        if let Some(t) = &self.trajectory {
            if t.nodes.is_empty() {
                return Err(EmptyTrajectory);
            }
            if !(t.cost.is_finite() && t.cost >= 0.0) {
                return Err(BadCost);
            }
        }
        if self.task == TaskKind::Trajectory {
            let t = self.trajectory.as_ref().ok_or(MissingTrajectory)?;
            if t.nodes != self.outcome_frames {
                return Err(TrajectoryOutcomeMismatch);
            }
        }
        Ok(())
    }

    /// Canonical single-line JSON without the trailing newline.
    pub fn to_canonical(&self) -> Result<String> {
        self.validate()?;
        Ok(canonical_json(&serde_json::to_value(self)?))
    }
}

/// Serializes `value` with keys sorted at every level and no whitespace.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        leaf => out.push_str(&leaf.to_string()),
    }
}

/// Appends one canonical record line to `sink`.
pub fn emit_triplet<W: Write>(record: &TripletRecord, sink: &mut W) -> Result<()> {
    let line = record.to_canonical()?;
    sink.write_all(line.as_bytes())?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn header_line() -> String {
    canonical_json(&serde_json::json!({ "format_version": FORMAT_VERSION }))
}

/// Exclusive writer for one dataset file: header first, then records.
pub struct TripletWriter<W: Write> {
    sink: W,
    written: usize,
}

impl<W: Write> TripletWriter<W> {
    pub fn new(mut sink: W) -> Result<Self> {
        sink.write_all(header_line().as_bytes())?;
        sink.write_all(b"\n")?;
        Ok(Self { sink, written: 0 })
    }

    pub fn emit(&mut self, record: &TripletRecord) -> Result<()> {
        emit_triplet(record, &mut self.sink)?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<(W, usize)> {
        self.sink.flush()?;
        Ok((self.sink, self.written))
    }
}

/// Writes a complete dataset (header plus records) to a byte vector.
pub fn dataset_bytes(records: &[TripletRecord]) -> Result<Vec<u8>> {
    let mut w = TripletWriter::new(Vec::new())?;
    for r in records {
        w.emit(r)?;
    }
    Ok(w.finish()?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoSource {
    Scanned,
    Internet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub video_id: String,
    pub frame_count: usize,
    pub source: VideoSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub triplet_count: usize,
    pub videos: Vec<VideoEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<DatasetStats>,
}

impl DatasetManifest {
    pub fn new(videos: Vec<VideoEntry>, records: &[TripletRecord]) -> Self {
        let stats = dataset_stats(records, &videos);
        Self {
            format_version: FORMAT_VERSION,
            triplet_count: records.len(),
            videos,
            stats: Some(stats),
        }
    }

    pub fn to_canonical(&self) -> Result<String> {
        Ok(canonical_json(&serde_json::to_value(self)?))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Parsed dataset plus any inconsistencies against a supplied manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRead {
    pub records: Vec<TripletRecord>,
    pub triplet_count: usize,
    /// Records per video id, recomputed from the data.
    pub per_video: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

/// Parses a dataset file; line numbers in errors are 1-based and count the
/// header. When `manifest` is given its counts are cross-checked and any
/// mismatch is reported in `warnings` rather than failing the read.
pub fn read_dataset<R: BufRead>(mut reader: R, manifest: Option<&DatasetManifest>) -> Result<DatasetRead> {
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Err(DatasetError::MissingHeader);
    }
    let header: Value = serde_json::from_str(line.trim_end_matches('\n')).map_err(|e| DatasetError::Malformed {
        line: 1,
        message: format!("bad header: {e}"),
    })?;
    let version = header
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| DatasetError::Malformed {
            line: 1,
            message: "header lacks format_version".into(),
        })?;
    if version != FORMAT_VERSION as u64 {
        return Err(DatasetError::UnsupportedVersion(version));
    }

    let mut records = Vec::new();
    let mut line_no = 1;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        let body = line.strip_suffix('\n').unwrap_or(&line);
        let record: TripletRecord = serde_json::from_str(body).map_err(|e| DatasetError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate().map_err(|violation| DatasetError::InvalidAt {
            line: line_no,
            violation,
        })?;
        records.push(record);
    }

    let mut per_video = BTreeMap::new();
    for r in &records {
        *per_video.entry(r.video_id.clone()).or_insert(0) += 1;
    }
    let mut warnings = Vec::new();
    if let Some(m) = manifest {
        if m.triplet_count != records.len() {
            warnings.push(format!(
                "manifest lists {} triplets but the data file holds {}",
                m.triplet_count,
                records.len()
            ));
        }
        let listed: BTreeSet<&str> = m.videos.iter().map(|v| v.video_id.as_str()).collect();
        for id in per_video.keys() {
            if !listed.contains(id.as_str()) {
                warnings.push(format!("video {id:?} has records but is not listed in the manifest"));
            }
        }
    }
    Ok(DatasetRead {
        triplet_count: records.len(),
        records,
        per_video,
        warnings,
    })
}

/// Summary statistics in the layout of the usual dataset-statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub video_count: usize,
    pub scanned_videos: usize,
    pub internet_videos: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_avg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_max: Option<f64>,
    pub triplet_count: usize,
    pub scanned_triplets: usize,
    pub internet_triplets: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_len_avg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_len_max: Option<usize>,
}

/// Whitespace-delimited token count.
pub fn instruction_length(instruction: &str) -> usize {
    instruction.split_whitespace().count()
}

pub fn dataset_stats(records: &[TripletRecord], videos: &[VideoEntry]) -> DatasetStats {
    let source: BTreeMap<&str, VideoSource> = videos.iter().map(|v| (v.video_id.as_str(), v.source)).collect();
    let mut ids: BTreeSet<&str> = source.keys().copied().collect();
    ids.extend(records.iter().map(|r| r.video_id.as_str()));

    let count_source = |s: VideoSource| videos.iter().filter(|v| v.source == s).count();
    let durations: Vec<f64> = videos.iter().filter_map(|v| v.duration_seconds).collect();
    let triplets_from = |s: VideoSource| {
        records
            .iter()
            .filter(|r| source.get(r.video_id.as_str()) == Some(&s))
            .count()
    };
    let lengths: Vec<usize> = records.iter().map(|r| instruction_length(&r.instruction)).collect();

    DatasetStats {
        video_count: ids.len(),
        scanned_videos: count_source(VideoSource::Scanned),
        internet_videos: count_source(VideoSource::Internet),
        duration_avg: (!durations.is_empty()).then(|| durations.iter().sum::<f64>() / durations.len() as f64),
        duration_max: durations.iter().copied().reduce(f64::max),
        triplet_count: records.len(),
        scanned_triplets: triplets_from(VideoSource::Scanned),
        internet_triplets: triplets_from(VideoSource::Internet),
        instruction_len_avg: (!lengths.is_empty())
            .then(|| lengths.iter().sum::<usize>() as f64 / lengths.len() as f64),
        instruction_len_max: lengths.iter().copied().max(),
    }
}

/// `1234567` → `"1,234,567"`.
pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn avg_max(avg: Option<f64>, max: Option<String>) -> String {
    match (avg, max) {
        (Some(a), Some(m)) => format!("{a:.1} / {m}"),
        _ => "n/a".to_string(),
    }
}

impl DatasetStats {
    /// Plain-text report, one `label: value` row per statistic.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Number of videos: {}", thousands(self.video_count));
        let _ = writeln!(s, "  - Scanned 3D assets: {}", thousands(self.scanned_videos));
        let _ = writeln!(s, "  - Internet videos: {}", thousands(self.internet_videos));
        let _ = writeln!(
            s,
            "Video Length (Seconds, avg/max): {}",
            avg_max(self.duration_avg, self.duration_max.map(|m| format!("{m:.1}")))
        );
        let _ = writeln!(s, "Total annotations triplets: {}", thousands(self.triplet_count));
        let _ = writeln!(s, "  - Scanned 3D assets: {}", thousands(self.scanned_triplets));
        let _ = writeln!(s, "  - Internet videos: {}", thousands(self.internet_triplets));
        let _ = writeln!(
            s,
            "Instruction Length (avg/max): {}",
            avg_max(self.instruction_len_avg, self.instruction_len_max.map(|m| m.to_string()))
        );
        s
    }
}
