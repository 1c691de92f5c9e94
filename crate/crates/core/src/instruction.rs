//! Geometric instructions: directional motion labels, novel-view and
//! trajectory templates, and shot partitioning.
//!
//! Camera axes follow the usual vision convention: x right, y down,
//! z forward. Yaw is measured about the camera up axis (−y), positive when
//! the camera turns left.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mat3, RelativeTransform, Vec3};

pub const DEFAULT_TRANSLATION_THRESHOLD: f64 = 0.1;
pub const DEFAULT_ROTATION_THRESHOLD: f64 = 0.1;
/// Orthonormality slack accepted for the rotation block of a transform.
pub const RIGIDITY_TOL: f64 = 1e-6;

const TRAJECTORY_PREFIX: &str = "Please show me the path from ";
const TRAJECTORY_JOIN: &str = " to ";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstructionError {
    #[error("transform is not rigid (max |RᵀR - I| = {0:e}); classify the pose-only relative transform")]
    NonRigid(f64),
    #[error("motion thresholds must be positive (translation {translation}, rotation {rotation})")]
    BadThreshold { translation: f64, rotation: f64 },
    #[error("object description for the {0} frame is empty")]
    EmptyObject(&'static str),
    #[error("shot partition needs at least one descriptor")]
    NoDescriptors,
    #[error("descriptor {index} has length {got}, expected {expected}")]
    DescriptorLength { index: usize, expected: usize, got: usize },
    #[error("cut threshold must be finite and non-negative, got {0}")]
    BadCutThreshold(f64),
    #[error("shot boundaries must start at 0 and strictly increase: {0:?}")]
    BadBoundaries(Vec<usize>),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = InstructionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Forward,
    Backward,
    Left,
    Right,
    Up,
    Down,
    RotateLeft,
    RotateRight,
    Stationary,
}

impl MotionKind {
    pub fn phrase(self) -> &'static str {
        match self {
            MotionKind::Forward => "move forward",
            MotionKind::Backward => "move backward",
            MotionKind::Left => "move left",
            MotionKind::Right => "move right",
            MotionKind::Up => "move up",
            MotionKind::Down => "move down",
            MotionKind::RotateLeft => "turn left",
            MotionKind::RotateRight => "turn right",
            MotionKind::Stationary => "stay still",
        }
    }

    /// The label the reverse motion would receive.
    pub fn opposite(self) -> Self {
        use MotionKind::*;
        match self {
            Forward => Backward,
            Backward => Forward,
            Left => Right,
            Right => Left,
            Up => Down,
            Down => Up,
            RotateLeft => RotateRight,
            RotateRight => RotateLeft,
            Stationary => Stationary,
        }
    }
}

/// Directional label with its magnitude (meters, or radians for turns).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionLabel {
    pub kind: MotionKind,
    pub magnitude: f64,
}

impl MotionLabel {
    pub fn new(kind: MotionKind, magnitude: f64) -> Self {
        Self { kind, magnitude }
    }

    pub fn stationary() -> Self {
        Self::new(MotionKind::Stationary, 0.0)
    }
}

/// Camera displacement (in the previous camera's frame) and yaw encoded by a
/// rigid previous-to-current transform.
pub fn decompose_motion(g: &RelativeTransform) -> Result<(Vec3, f64)> {
    let m = g.matrix();
    let r: Mat3 = m.fixed_view::<3, 3>(0, 0).into_owned();
    let t: Vec3 = m.fixed_view::<3, 1>(0, 3).into_owned();
    let drift = (r.transpose() * r - Mat3::identity()).abs().max();
    if !(drift <= RIGIDITY_TOL) || (r.determinant() - 1.0).abs() > RIGIDITY_TOL {
        return Err(InstructionError::NonRigid(drift));
    }
    let displacement = -(r.transpose() * t);
    // current optical axis seen from the previous camera
    let forward = r.row(2);
    let yaw = (-forward[0]).atan2(forward[2]);
    Ok((displacement, yaw))
}

/// One label per axis whose magnitude strictly exceeds its threshold,
/// largest first; `[stationary]` when none do.
pub fn classify_motion(
    g: &RelativeTransform,
    translation_threshold: f64,
    rotation_threshold: f64,
) -> Result<Vec<MotionLabel>> {
    if !(translation_threshold > 0.0 && rotation_threshold > 0.0) {
        return Err(InstructionError::BadThreshold {
            translation: translation_threshold,
            rotation: rotation_threshold,
        });
    }
    let (d, yaw) = decompose_motion(g)?;
    let axes = [
        (d.z, MotionKind::Forward, MotionKind::Backward, translation_threshold),
        (d.x, MotionKind::Right, MotionKind::Left, translation_threshold),
        (d.y, MotionKind::Down, MotionKind::Up, translation_threshold),
        (yaw, MotionKind::RotateLeft, MotionKind::RotateRight, rotation_threshold),
    ];
    let mut labels: Vec<MotionLabel> = axes
        .iter()
        .filter(|(v, _, _, thr)| v.abs() > *thr)
        .map(|&(v, pos, neg, _)| MotionLabel::new(if v > 0.0 { pos } else { neg }, v.abs()))
        .collect();
    labels.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    if labels.is_empty() {
        labels.push(MotionLabel::stationary());
    }
    Ok(labels)
}

/// Post-processing hook for rendered instructions.
///
/// Implementations that cannot be called concurrently return `false` from
/// [`is_reentrant`](Self::is_reentrant); callers then invoke them serially.
pub trait InstructionRewriter: Send + Sync {
    fn rewrite(&self, instruction: &str) -> String;

    fn is_reentrant(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRewriter;

impl InstructionRewriter for IdentityRewriter {
    fn rewrite(&self, instruction: &str) -> String {
        instruction.to_string()
    }
}

fn step_phrase(labels: &[MotionLabel]) -> String {
    let moving: Vec<&str> = labels
        .iter()
        .filter(|l| l.kind != MotionKind::Stationary)
        .map(|l| l.kind.phrase())
        .collect();
    if moving.is_empty() {
        MotionKind::Stationary.phrase().to_string()
    } else {
        moving.join(" and ")
    }
}

/// Renders per-step label lists into one instruction.
///
/// Labels within a step are joined with "and" in their given order; runs of
/// identical consecutive steps collapse into "<phrase> repeatedly"; distinct
/// steps are chained with ", then ".
pub fn novel_view_instruction(
    steps: &[Vec<MotionLabel>],
    rewriter: Option<&dyn InstructionRewriter>,
) -> String {
    let phrases: Vec<String> = steps.iter().map(|s| step_phrase(s)).collect();
    let mut runs: Vec<(String, usize)> = Vec::new();
    for p in phrases {
        match runs.last_mut() {
            Some((last, n)) if *last == p => *n += 1,
            _ => runs.push((p, 1)),
        }
    }
    let text = if runs.is_empty() {
        MotionKind::Stationary.phrase().to_string()
    } else {
        runs.into_iter()
            .map(|(p, n)| if n > 1 { format!("{p} repeatedly") } else { p })
            .collect::<Vec<_>>()
            .join(", then ")
    };
    match rewriter {
        Some(r) => r.rewrite(&text),
        None => text,
    }
}

/// `Please show me the path from {start} to {end}.`
pub fn trajectory_instruction(start_object: &str, end_object: &str) -> Result<String> {
    let start = start_object.trim();
    let end = end_object.trim();
    if start.is_empty() {
        return Err(InstructionError::EmptyObject("start"));
    }
    if end.is_empty() {
        return Err(InstructionError::EmptyObject("end"));
    }
    Ok(format!("{TRAJECTORY_PREFIX}{start}{TRAJECTORY_JOIN}{end}."))
}

/// Inverse of [`trajectory_instruction`]. The split happens at the first
/// " to ", so start objects containing that word sequence are ambiguous.
pub fn parse_trajectory_instruction(text: &str) -> Option<(String, String)> {
    let body = text.strip_prefix(TRAJECTORY_PREFIX)?.strip_suffix('.')?;
    let (start, end) = body.split_once(TRAJECTORY_JOIN)?;
    if start.is_empty() || end.is_empty() {
        return None;
    }
    Some((start.to_string(), end.to_string()))
}

/// Positions (not frame indices) at which shots begin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotBoundaryList {
    starts: Vec<usize>,
}

impl ShotBoundaryList {
    pub fn new(starts: Vec<usize>) -> Result<Self> {
        let ok = starts.first() == Some(&0) && starts.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self { starts })
        } else {
            Err(InstructionError::BadBoundaries(starts))
        }
    }

    pub fn single() -> Self {
        Self { starts: vec![0] }
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// Half-open ranges of each shot for a sequence of `len` frames.
    /// Boundaries at or past `len` are ignored.
    pub fn shots(&self, len: usize) -> Vec<Range<usize>> {
        let starts: Vec<usize> = self.starts.iter().copied().filter(|&s| s < len).collect();
        starts
            .iter()
            .enumerate()
            .map(|(i, &s)| s..starts.get(i + 1).copied().unwrap_or(len))
            .collect()
    }
}

/// Cut before frame `i` whenever the L1 distance between descriptors `i`
/// and `i − 1` exceeds `cut_threshold`.
pub fn shot_partition(descriptors: &[Vec<f64>], cut_threshold: f64) -> Result<ShotBoundaryList> {
    let first = descriptors.first().ok_or(InstructionError::NoDescriptors)?;
    if !(cut_threshold >= 0.0 && cut_threshold.is_finite()) {
        return Err(InstructionError::BadCutThreshold(cut_threshold));
    }
    if let Some((index, d)) = descriptors.iter().enumerate().find(|(_, d)| d.len() != first.len()) {
        return Err(InstructionError::DescriptorLength {
            index,
            expected: first.len(),
            got: d.len(),
        });
    }
    let mut starts = vec![0];
    for (i, pair) in descriptors.windows(2).enumerate() {
        let l1: f64 = pair[0].iter().zip(&pair[1]).map(|(a, b)| (a - b).abs()).sum();
        if l1 > cut_threshold {
            starts.push(i + 1);
        }
    }
    Ok(ShotBoundaryList { starts })
}

/// Reads line-delimited frame indices marking shot starts.
pub fn read_boundary_indices<R: BufRead>(reader: R) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| InstructionError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        out.push(body.parse().map_err(|_| InstructionError::Parse {
            line: i + 1,
            message: format!("invalid frame index {body:?}"),
        })?);
    }
    Ok(out)
}

/// Object names per frame, from `frame_index object string` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjectAnnotations {
    by_frame: BTreeMap<u32, Vec<String>>,
}

impl ObjectAnnotations {
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut by_frame: BTreeMap<u32, Vec<String>> = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| InstructionError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let body = line.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let (idx, object) = body.split_once(char::is_whitespace).ok_or_else(|| InstructionError::Parse {
                line: line_no,
                message: "expected `frame_index object`".into(),
            })?;
            let idx: u32 = idx.parse().map_err(|_| InstructionError::Parse {
                line: line_no,
                message: format!("invalid frame index {idx:?}"),
            })?;
            by_frame.entry(idx).or_default().push(object.trim().to_string());
        }
        Ok(Self { by_frame })
    }

    pub fn insert(&mut self, frame_index: u32, object: impl Into<String>) {
        self.by_frame.entry(frame_index).or_default().push(object.into());
    }

    pub fn is_empty(&self) -> bool {
        self.by_frame.is_empty()
    }

    /// First object listed for the annotated frame closest to
    /// `frame_index`; the lower frame wins ties.
    pub fn nearest(&self, frame_index: u32) -> Option<&str> {
        let below = self.by_frame.range(..=frame_index).next_back();
        let above = self.by_frame.range(frame_index..).next();
        let pick = match (below, above) {
            (Some(b), Some(a)) => {
                if frame_index - b.0 <= a.0 - frame_index {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => return None,
        };
        pick.1.first().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Mat4;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;

    /// Transform for a camera that moved by `displacement` (in its previous
    /// frame) and turned `yaw` radians about its up axis.
    fn motion(displacement: Vec3, yaw: f64) -> RelativeTransform {
        let up = Unit::new_normalize(Vec3::new(0.0, -1.0, 0.0));
        let turn = Rotation3::from_axis_angle(&up, yaw).into_inner();
        let r = turn.transpose();
        let t = -(r * displacement);
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        RelativeTransform::new(m).unwrap()
    }

    fn label(kind: MotionKind) -> MotionLabel {
        MotionLabel::new(kind, 1.0)
    }

    #[test]
    fn classify_examples() {
        let l = classify_motion(&motion(Vec3::new(0.0, 0.0, 0.5), 0.0), 0.1, 0.1).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l[0].kind, MotionKind::Forward);
        assert!((l[0].magnitude - 0.5).abs() < 1e-12);

        let l = classify_motion(&motion(Vec3::zeros(), 0.3), 0.1, 0.1).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l[0].kind, MotionKind::RotateLeft);
        assert!((l[0].magnitude - 0.3).abs() < 1e-12);

        let l = classify_motion(&motion(Vec3::new(0.05, 0.0, 0.05), 0.0), 0.1, 0.1).unwrap();
        assert_eq!(l, vec![MotionLabel::stationary()]);
    }

    #[test]
    fn forward_really_moves_along_optical_axis() {
        use crate::geometry::{relative_pose, CalibratedFrame, CameraIntrinsics, PoseConvention, RigidPose};
        // camera at the origin looking down +z, then 0.5 m further along z
        let pose = |z: f64| RigidPose::new(Mat3::identity(), Vec3::new(0.0, 0.0, -z), PoseConvention::WorldToCamera).unwrap();
        let a = CalibratedFrame::new(0, CameraIntrinsics::identity(), pose(0.0));
        let b = CalibratedFrame::new(1, CameraIntrinsics::identity(), pose(0.5));
        let l = classify_motion(&relative_pose(&b, &a), 0.1, 0.1).unwrap();
        assert_eq!(l[0].kind, MotionKind::Forward);
    }

    #[test]
    fn labels_sorted_by_magnitude() {
        let l = classify_motion(&motion(Vec3::new(-0.3, 0.2, 0.5), -0.4), 0.1, 0.1).unwrap();
        let kinds: Vec<_> = l.iter().map(|l| l.kind).collect();
        assert_eq!(kinds, vec![MotionKind::Forward, MotionKind::RotateRight, MotionKind::Left, MotionKind::Down]);
    }

    #[test]
    fn classify_errors() {
        let mut m = Mat4::identity();
        m[(0, 0)] = 2.0;
        assert!(matches!(
            classify_motion(&RelativeTransform::new(m).unwrap(), 0.1, 0.1),
            Err(InstructionError::NonRigid(_))
        ));
        assert!(classify_motion(&RelativeTransform::identity(), 0.0, 0.1).is_err());
        assert_eq!(
            classify_motion(&RelativeTransform::identity(), 1e-9, 1e-9).unwrap(),
            vec![MotionLabel::stationary()]
        );
    }

    #[test]
    fn novel_view_templates() {
        assert_eq!(novel_view_instruction(&[vec![label(MotionKind::Forward)]], None), "move forward");
        assert_eq!(
            novel_view_instruction(
                &[vec![label(MotionKind::RotateRight)], vec![label(MotionKind::RotateRight)]],
                None
            ),
            "turn right repeatedly"
        );
        assert_eq!(
            novel_view_instruction(&[vec![label(MotionKind::Forward), label(MotionKind::RotateLeft)]], None),
            "move forward and turn left"
        );
        assert_eq!(
            novel_view_instruction(&[vec![label(MotionKind::Forward), label(MotionKind::Left)]], None),
            "move forward and move left"
        );
        assert_eq!(
            novel_view_instruction(
                &[
                    vec![label(MotionKind::Forward)],
                    vec![label(MotionKind::Forward)],
                    vec![label(MotionKind::RotateLeft)],
                    vec![MotionLabel::stationary()],
                ],
                None
            ),
            "move forward repeatedly, then turn left, then stay still"
        );
        struct Shout;
        impl InstructionRewriter for Shout {
            fn rewrite(&self, s: &str) -> String {
                s.to_uppercase()
            }
        }
        assert_eq!(novel_view_instruction(&[vec![label(MotionKind::Up)]], Some(&Shout)), "MOVE UP");
        assert_eq!(
            novel_view_instruction(&[vec![label(MotionKind::Up)]], Some(&IdentityRewriter)),
            "move up"
        );
    }

    #[test]
    fn template_render_oracle() {
        // every ordered pair of moving kinds in a single step
        let kinds = [
            MotionKind::Forward,
            MotionKind::Backward,
            MotionKind::Left,
            MotionKind::Right,
            MotionKind::Up,
            MotionKind::Down,
            MotionKind::RotateLeft,
            MotionKind::RotateRight,
        ];
        for a in kinds {
            for b in kinds {
                let got = novel_view_instruction(&[vec![label(a), label(b)]], None);
                assert_eq!(got, format!("{} and {}", a.phrase(), b.phrase()));
            }
        }
    }

    #[test]
    fn trajectory_templates() {
        assert_eq!(
            trajectory_instruction("the pillows on the bed", "the dresser").unwrap(),
            "Please show me the path from the pillows on the bed to the dresser."
        );
        assert_eq!(trajectory_instruction("A", "B").unwrap(), "Please show me the path from A to B.");
        assert_eq!(trajectory_instruction("", "B"), Err(InstructionError::EmptyObject("start")));
        assert_eq!(trajectory_instruction("A", "  "), Err(InstructionError::EmptyObject("end")));
        assert_eq!(
            parse_trajectory_instruction("Please show me the path from the pillows on the bed to the dresser."),
            Some(("the pillows on the bed".into(), "the dresser".into()))
        );
        assert_eq!(parse_trajectory_instruction("move forward"), None);
    }

    #[test]
    fn shot_examples() {
        let v = vec![1.0, 2.0, 3.0];
        let w = vec![4.0, 2.0, 0.0];
        assert_eq!(shot_partition(&vec![v.clone(); 5], 0.5).unwrap().starts(), &[0]);
        let b = shot_partition(&[v.clone(), v.clone(), w.clone(), w.clone()], 1.0).unwrap();
        assert_eq!(b.starts(), &[0, 2]);
        assert_eq!(b.shots(4), vec![0..2, 2..4]);
        assert!(matches!(
            shot_partition(&[v.clone(), vec![1.0]], 1.0),
            Err(InstructionError::DescriptorLength { index: 1, expected: 3, got: 1 })
        ));
        assert_eq!(shot_partition(&[], 1.0), Err(InstructionError::NoDescriptors));
        assert!(ShotBoundaryList::new(vec![1, 2]).is_err());
        assert!(ShotBoundaryList::new(vec![0, 2, 2]).is_err());
    }

    #[test]
    fn annotations_nearest() {
        let text = "0 the pillows on the bed\n3 the dresser\n3 a lamp\n# comment\n10 the door\n";
        let a = ObjectAnnotations::read(text.as_bytes()).unwrap();
        assert_eq!(a.nearest(0), Some("the pillows on the bed"));
        assert_eq!(a.nearest(3), Some("the dresser"));
        assert_eq!(a.nearest(6), Some("the dresser"));
        assert_eq!(a.nearest(7), Some("the door"));
        assert_eq!(a.nearest(1000), Some("the door"));
        assert!(ObjectAnnotations::read("x chair\n".as_bytes()).is_err());
        assert!(ObjectAnnotations::default().nearest(0).is_none());
        assert_eq!(read_boundary_indices("0\n12\n\n40\n".as_bytes()).unwrap(), vec![0, 12, 40]);
    }

    fn arb_object() -> impl Strategy<Value = String> {
        "[a-zA-Z][a-zA-Z ,'-]{0,30}[a-zA-Z]"
            .prop_filter("no separator", |s| !s.contains(" to ") && s.trim() == s)
    }

    proptest! {
        #[test]
        fn trajectory_round_trip(a in arb_object(), b in arb_object()) {
            let s = trajectory_instruction(&a, &b).unwrap();
            prop_assert_eq!(parse_trajectory_instruction(&s), Some((a, b)));
        }

        #[test]
        fn identity_is_stationary(t in 1e-6f64..1.0, r in 1e-6f64..1.0) {
            prop_assert_eq!(
                classify_motion(&RelativeTransform::identity(), t, r).unwrap(),
                vec![MotionLabel::stationary()]
            );
        }

        #[test]
        fn translation_labels_flip_under_inverse(
            x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
        ) {
            let g = motion(Vec3::new(x, y, z), 0.0);
            let fwd = classify_motion(&g, 0.1, 0.1).unwrap();
            let back = classify_motion(&g.inverse().unwrap(), 0.1, 0.1).unwrap();
            prop_assert_eq!(fwd.len(), back.len());
            for (a, b) in fwd.iter().zip(&back) {
                prop_assert_eq!(a.kind.opposite(), b.kind);
                prop_assert!((a.magnitude - b.magnitude).abs() < 1e-9);
            }
        }

        #[test]
        fn yaw_labels_flip_under_inverse(yaw in -3.0f64..3.0, dy in -1.0f64..1.0) {
            // displacement along the yaw axis is unaffected by the turn
            let g = motion(Vec3::new(0.0, dy, 0.0), yaw);
            let fwd = classify_motion(&g, 0.1, 0.1).unwrap();
            let back = classify_motion(&g.inverse().unwrap(), 0.1, 0.1).unwrap();
            prop_assert_eq!(fwd.len(), back.len());
            for (a, b) in fwd.iter().zip(&back) {
                prop_assert_eq!(a.kind.opposite(), b.kind);
                prop_assert!((a.magnitude - b.magnitude).abs() < 1e-9);
            }
        }

        #[test]
        fn template_deterministic(kinds in proptest::collection::vec(0usize..9, 1..6)) {
            let all = [
                MotionKind::Forward, MotionKind::Backward, MotionKind::Left, MotionKind::Right,
                MotionKind::Up, MotionKind::Down, MotionKind::RotateLeft, MotionKind::RotateRight,
                MotionKind::Stationary,
            ];
            let steps: Vec<Vec<MotionLabel>> = kinds.iter().map(|&k| vec![label(all[k])]).collect();
            prop_assert_eq!(novel_view_instruction(&steps, None), novel_view_instruction(&steps, Some(&IdentityRewriter)));
        }

        #[test]
        fn cut_threshold_scale_covariant(
            seed_vals in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 4), 1..30),
            thr in 0.0f64..10.0,
        ) {
            let doubled: Vec<Vec<f64>> = seed_vals.iter().map(|d| d.iter().map(|v| v * 2.0).collect()).collect();
            prop_assert_eq!(
                shot_partition(&seed_vals, thr).unwrap(),
                shot_partition(&doubled, thr * 2.0).unwrap()
            );
        }

        #[test]
        fn partition_matches_pairwise_oracle(
            vals in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 1..40),
            thr in 0.0f64..6.0,
        ) {
            let got = shot_partition(&vals, thr).unwrap();
            let mut expected = vec![0];
            for i in 1..vals.len() {
                let mut l1 = 0.0;
                for k in 0..3 {
                    l1 += (vals[i][k] - vals[i - 1][k]).abs();
                }
                if l1 > thr {
                    expected.push(i);
                }
            }
            prop_assert_eq!(got.starts(), &expected[..]);
        }
    }
}
