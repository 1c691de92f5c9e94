//! Relative positional encoding of camera motion.
//!
//! Every entry of a relative transform `G` is lifted to `2m` sinusoidal
//! features with divisors `γ^{j/m}` (`j = 0..m`), the sixteen row-major
//! entries are concatenated into a `32m` vector, and that vector is added to
//! the frame's semantic embedding after truncation to the channel count
//! `C` (with `m = ⌈C/32⌉`).

use thiserror::Error;

use crate::geometry::{
    first_frame_transform, relative_transform, CalibratedFrame, GeometryError, RelativeTransform,
};
use crate::par::{self, Parallelism};

pub const DEFAULT_GAMMA: f64 = 10_000.0;
/// Number of entries in a homogeneous 4×4 transform.
pub const TRANSFORM_ENTRIES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepeError {
    #[error("cannot encode non-finite value {0}")]
    NonFinite(f64),
    #[error("frequency constant must be > 1, got {0}")]
    BadGamma(f64),
    #[error("channel dimension must be positive")]
    ZeroChannels,
    #[error("embedding length mismatch: relative embedding has {rel} entries but the semantic embedding has {sem} (expected relative length 32*ceil({sem}/32))")]
    DimensionMismatch { rel: usize, sem: usize },
    #[error("cannot encode an empty frame sequence")]
    EmptySequence,
    #[error("intrinsics normalisation requested but no image size configured")]
    MissingImageSize,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T, E = RepeError> = std::result::Result<T, E>;

/// Frequency schedule and channel layout of the encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyConfig {
    gamma: f64,
    channel_dim: usize,
    normalize_intrinsics: bool,
    image_size: Option<(f64, f64)>,
    divisors: Vec<f64>,
}

impl FrequencyConfig {
    pub fn new(gamma: f64, channel_dim: usize) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(RepeError::BadGamma(gamma));
        }
        if channel_dim == 0 {
            return Err(RepeError::ZeroChannels);
        }
        let m = channel_dim.div_ceil(32);
        let divisors = (0..m).map(|j| gamma.powf(j as f64 / m as f64)).collect();
        Ok(Self {
            gamma,
            channel_dim,
            normalize_intrinsics: false,
            image_size: None,
            divisors,
        })
    }

    /// Divide intrinsics by the image resolution before forming transforms.
    pub fn with_normalized_intrinsics(mut self, width: f64, height: f64) -> Self {
        self.normalize_intrinsics = true;
        self.image_size = Some((width, height));
        self
    }

    pub fn with_normalize_flag(mut self, on: bool, image_size: Option<(f64, f64)>) -> Self {
        self.normalize_intrinsics = on;
        self.image_size = image_size;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn channel_dim(&self) -> usize {
        self.channel_dim
    }

    /// Number of frequency bands per scalar, `⌈C/32⌉`.
    pub fn bands(&self) -> usize {
        self.divisors.len()
    }

    pub fn embedding_len(&self) -> usize {
        2 * self.bands() * TRANSFORM_ENTRIES
    }

    pub fn normalize_intrinsics(&self) -> bool {
        self.normalize_intrinsics
    }

    pub fn image_size(&self) -> Option<(f64, f64)> {
        self.image_size
    }

    pub fn divisors(&self) -> &[f64] {
        &self.divisors
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeEmbedding {
    values: Vec<f64>,
}

impl RelativeEmbedding {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Per-frame (or per-patch) feature vector produced by an external encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticEmbedding {
    pub values: Vec<f64>,
}

impl SemanticEmbedding {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(channels: usize) -> Self {
        Self {
            values: vec![0.0; channels],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedEmbedding {
    pub values: Vec<f64>,
}

fn encode_into(x: f64, divisors: &[f64], out: &mut [f64]) -> Result<()> {
    if !x.is_finite() {
        return Err(RepeError::NonFinite(x));
    }
    for (pair, &d) in out.chunks_exact_mut(2).zip(divisors) {
        let (s, c) = (x / d).sin_cos();
        pair[0] = s;
        pair[1] = c;
    }
    Ok(())
}

/// `[sin(x/γ^{0}), cos(x/γ^{0}), …, sin(x/γ^{(m-1)/m}), cos(x/γ^{(m-1)/m})]`.
pub fn sinusoidal_encode(x: f64, config: &FrequencyConfig) -> Result<Vec<f64>> {
    let mut out = vec![0.0; 2 * config.bands()];
    encode_into(x, config.divisors(), &mut out)?;
    Ok(out)
}

/// Concatenated per-entry encodings of `g` in row-major order.
pub fn encode_transform(g: &RelativeTransform, config: &FrequencyConfig) -> Result<RelativeEmbedding> {
    let width = 2 * config.bands();
    let mut values = vec![0.0; config.embedding_len()];
    for (slot, x) in values.chunks_exact_mut(width).zip(g.row_major()) {
        encode_into(x, config.divisors(), slot)?;
    }
    Ok(RelativeEmbedding { values })
}

/// Adds `sem` to the first `sem.len()` entries of `rel`.
pub fn fuse(rel: &RelativeEmbedding, sem: &SemanticEmbedding) -> Result<FusedEmbedding> {
    let c = sem.values.len();
    if c == 0 || rel.len() != 32 * c.div_ceil(32) {
        return Err(RepeError::DimensionMismatch {
            rel: rel.len(),
            sem: c,
        });
    }
    Ok(FusedEmbedding {
        values: rel.values[..c]
            .iter()
            .zip(&sem.values)
            .map(|(r, s)| r + s)
            .collect(),
    })
}

/// Fuses one frame-level embedding into each of the frame's patch tokens.
pub fn fuse_patches(rel: &RelativeEmbedding, patches: &[SemanticEmbedding]) -> Result<Vec<FusedEmbedding>> {
    patches.iter().map(|p| fuse(rel, p)).collect()
}

fn prepare_frames(frames: &[CalibratedFrame], config: &FrequencyConfig) -> Result<Vec<CalibratedFrame>> {
    let (w, h) = config.image_size().ok_or(RepeError::MissingImageSize)?;
    frames
        .iter()
        .map(|f| {
            Ok(CalibratedFrame {
                intrinsics: f.intrinsics.normalized(w, h)?,
                ..f.clone()
            })
        })
        .collect()
}

/// Transforms feeding the encoding: the first frame against the identity
/// reference camera, then each frame against its predecessor.
pub fn sequence_transforms(frames: &[CalibratedFrame]) -> Result<Vec<RelativeTransform>> {
    sequence_transforms_with(frames, Parallelism::default())
}

pub fn sequence_transforms_with(
    frames: &[CalibratedFrame],
    mode: Parallelism,
) -> Result<Vec<RelativeTransform>> {
    if frames.is_empty() {
        return Err(RepeError::EmptySequence);
    }
    par::try_map_range(frames.len(), mode, |i| {
        let g = if i == 0 {
            first_frame_transform(&frames[0])?
        } else {
            relative_transform(&frames[i], &frames[i - 1])?
        };
        Ok(g)
    })
}

pub fn encode_sequence(frames: &[CalibratedFrame], config: &FrequencyConfig) -> Result<Vec<RelativeEmbedding>> {
    encode_sequence_with(frames, config, Parallelism::default())
}

pub fn encode_sequence_with(
    frames: &[CalibratedFrame],
    config: &FrequencyConfig,
    mode: Parallelism,
) -> Result<Vec<RelativeEmbedding>> {
    let normalized;
    let frames = if config.normalize_intrinsics() {
        normalized = prepare_frames(frames, config)?;
        &normalized[..]
    } else {
        frames
    };
    let transforms = sequence_transforms_with(frames, mode)?;
    par::try_map_range(transforms.len(), mode, |i| encode_transform(&transforms[i], config))
}
