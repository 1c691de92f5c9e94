//! On-disk formats: pose manifests (JSON Lines), embedding dumps and
//! attention/mask dumps (little-endian binary).
//!
//! Binary layouts, all integers `u32` little-endian:
//!
//! | file  | header                                                        | payload                         |
//! |-------|---------------------------------------------------------------|---------------------------------|
//! | REPE  | `"REPE"`, version, frame count, embedding length              | `frames · length` × `f64` LE    |
//! | ATTN  | `"ATTN"`, version, frames, rows, cols, provenance byte length, provenance UTF-8 | `frames · rows · cols` × `f32` LE |
//! | MASK  | `"MASK"`, version, frames, rows, cols                         | packed bits, LSB first, zero padded to a byte |

use std::collections::HashSet;
use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::VideoSource;
use crate::gas::{AttentionMap, GasError, RegionMask};
use crate::geometry::{CalibratedFrame, CameraIntrinsics, GeometryError, PoseConvention, RigidPose};
use crate::repe::RelativeEmbedding;

pub const BINARY_VERSION: u32 = 1;
pub const REPE_MAGIC: &[u8; 4] = b"REPE";
pub const ATTN_MAGIC: &[u8; 4] = b"ATTN";
pub const MASK_MAGIC: &[u8; 4] = b"MASK";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported version {0}")]
    BadVersion(u32),
    #[error("file truncated: {0}")]
    Truncated(String),
    #[error("trailing bytes after payload")]
    TrailingBytes,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("manifest has no header line")]
    MissingHeader,
    #[error("frame {0} appears more than once")]
    DuplicateFrame(u32),
    #[error("attention and mask headers differ: {attn:?} vs {mask:?}")]
    HeaderMismatch {
        attn: (usize, usize, usize),
        mask: (usize, usize, usize),
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Gas(#[from] GasError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::Truncated(what.to_string()),
        _ => FormatError::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut b = [0u8; 4];
    read_exact_or(r, &mut b, "magic")?;
    if &b != magic {
        return Err(FormatError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&b).into_owned(),
        });
    }
    let version = read_u32(r, "version")?;
    if version != BINARY_VERSION {
        return Err(FormatError::BadVersion(version));
    }
    Ok(())
}

fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(FormatError::TrailingBytes),
    }
}

fn to_u32(n: usize) -> io::Result<u32> {
    u32::try_from(n).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "count exceeds u32"))
}

/// Writes one embedding per frame. All embeddings must share a length.
pub fn write_embeddings<W: Write>(mut w: W, embeddings: &[RelativeEmbedding]) -> io::Result<()> {
    let len = embeddings.first().map_or(0, RelativeEmbedding::len);
    if embeddings.iter().any(|e| e.len() != len) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "embedding lengths differ"));
    }
    w.write_all(REPE_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&to_u32(embeddings.len())?.to_le_bytes())?;
    w.write_all(&to_u32(len)?.to_le_bytes())?;
    for e in embeddings {
        for v in e.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

/// Reads an embedding dump back as one vector per frame.
pub fn read_embeddings<R: Read>(mut r: R) -> Result<Vec<Vec<f64>>> {
    expect_magic(&mut r, REPE_MAGIC)?;
    let frames = read_u32(&mut r, "frame count")? as usize;
    let len = read_u32(&mut r, "embedding length")? as usize;
    let mut out = Vec::with_capacity(frames);
    let mut buf = vec![0u8; len * 8];
    for i in 0..frames {
        read_exact_or(&mut r, &mut buf, &format!("embedding {i}"))?;
        out.push(
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect(),
        );
    }
    expect_eof(&mut r)?;
    Ok(out)
}

fn write_grid_header<W: Write>(w: &mut W, magic: &[u8; 4], shape: (usize, usize, usize)) -> io::Result<()> {
    w.write_all(magic)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    for n in [shape.0, shape.1, shape.2] {
        w.write_all(&to_u32(n)?.to_le_bytes())?;
    }
    Ok(())
}

fn read_grid_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<(usize, usize, usize)> {
    expect_magic(r, magic)?;
    Ok((
        read_u32(r, "frame count")? as usize,
        read_u32(r, "rows")? as usize,
        read_u32(r, "cols")? as usize,
    ))
}

/// Weights are stored as `f32`; values are rounded on write.
pub fn write_attention<W: Write>(mut w: W, attn: &AttentionMap) -> io::Result<()> {
    write_grid_header(&mut w, ATTN_MAGIC, attn.shape())?;
    let prov = attn.provenance().as_bytes();
    w.write_all(&to_u32(prov.len())?.to_le_bytes())?;
    w.write_all(prov)?;
    for v in attn.weights() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()
}

pub fn read_attention<R: Read>(mut r: R) -> Result<AttentionMap> {
    let (frames, rows, cols) = read_grid_header(&mut r, ATTN_MAGIC)?;
    let prov_len = read_u32(&mut r, "provenance length")? as usize;
    let mut prov = vec![0u8; prov_len];
    read_exact_or(&mut r, &mut prov, "provenance")?;
    let provenance = String::from_utf8(prov).map_err(|_| FormatError::Truncated("provenance is not UTF-8".into()))?;
    let mut buf = vec![0u8; frames * rows * cols * 4];
    read_exact_or(&mut r, &mut buf, "attention weights")?;
    expect_eof(&mut r)?;
    let weights = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    Ok(AttentionMap::new(frames, rows, cols, weights)?.with_provenance(provenance))
}

pub fn write_mask<W: Write>(mut w: W, mask: &RegionMask) -> io::Result<()> {
    write_grid_header(&mut w, MASK_MAGIC, mask.shape())?;
    let mut packed = vec![0u8; mask.len().div_ceil(8)];
    for (i, bit) in mask.bits().iter().enumerate() {
        if *bit {
            packed[i / 8] |= 1 << (i % 8);
        }
    }
    w.write_all(&packed)?;
    w.flush()
}

pub fn read_mask<R: Read>(mut r: R) -> Result<RegionMask> {
    let (frames, rows, cols) = read_grid_header(&mut r, MASK_MAGIC)?;
    let n = frames * rows * cols;
    let mut packed = vec![0u8; n.div_ceil(8)];
    read_exact_or(&mut r, &mut packed, "mask bits")?;
    expect_eof(&mut r)?;
    let bits = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
    Ok(RegionMask::new(frames, rows, cols, bits)?)
}

/// Reads an attention/mask pair and checks that their grids agree.
pub fn read_gas_pair<A: Read, M: Read>(attn: A, mask: M) -> Result<(AttentionMap, RegionMask)> {
    let a = read_attention(attn)?;
    let m = read_mask(mask)?;
    if a.shape() != m.shape() {
        return Err(FormatError::HeaderMismatch {
            attn: a.shape(),
            mask: m.shape(),
        });
    }
    Ok((a, m))
}

/// Header line of a pose manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub pose_convention: PoseConvention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<VideoSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_seconds: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    frame_index: u32,
    #[serde(default)]
    image_ref: Option<String>,
    k: Vec<f64>,
    pose: Vec<f64>,
    #[serde(default)]
    descriptor: Option<Vec<f64>>,
}

/// Calibrated frames of one video, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseManifest {
    pub header: ManifestHeader,
    pub frames: Vec<CalibratedFrame>,
    /// Optional per-frame shot descriptors, aligned with `frames`.
    pub descriptors: Vec<Option<Vec<f64>>>,
}

impl PoseManifest {
    pub fn new(header: ManifestHeader, frames: Vec<CalibratedFrame>) -> Self {
        let descriptors = vec![None; frames.len()];
        Self {
            header,
            frames,
            descriptors,
        }
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut header = None;
        let mut frames = Vec::new();
        let mut descriptors = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let err = |message: String| FormatError::Line { line: line_no, message };
            let Some(h) = &header else {
                let parsed: ManifestHeader =
                    serde_json::from_str(text).map_err(|e| err(format!("bad header: {e}")))?;
                header = Some(parsed);
                continue;
            };
            let convention = h.pose_convention;
            let f: FrameLine = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
            if !seen.insert(f.frame_index) {
                return Err(FormatError::DuplicateFrame(f.frame_index));
            }
            let intrinsics = CameraIntrinsics::from_row_slice(&f.k)
                .map_err(|e| err(with_frame(e, f.frame_index).to_string()))?;
            let pose = RigidPose::from_row_slice(&f.pose, convention)
                .map_err(|e| err(format!("frame {}: {e}", f.frame_index)))?;
            frames.push(CalibratedFrame {
                frame_index: f.frame_index,
                intrinsics,
                pose,
                image_ref: f.image_ref,
            });
            descriptors.push(f.descriptor);
        }
        Ok(Self {
            header: header.ok_or(FormatError::MissingHeader)?,
            frames,
            descriptors,
        })
    }

    /// Writes the manifest with every number in `{:.16e}` form (17
    /// significant digits, enough to round-trip any `f64`).
    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header = serde_json::to_string(&self.header).map_err(io::Error::other)?;
        writeln!(w, "{header}")?;
        for (i, f) in self.frames.iter().enumerate() {
            let mut line = format!("{{\"frame_index\":{}", f.frame_index);
            if let Some(r) = &f.image_ref {
                line.push_str(",\"image_ref\":");
                line.push_str(&serde_json::to_string(r).map_err(io::Error::other)?);
            }
            line.push_str(",\"k\":");
            line.push_str(&number_list(&f.intrinsics.row_major()));
            let pose = if f.pose.convention() == self.header.pose_convention {
                f.pose.clone()
            } else {
                f.pose.inverse()
            };
            line.push_str(",\"pose\":");
            line.push_str(&number_list(&pose.row_major()));
            if let Some(Some(d)) = self.descriptors.get(i) {
                line.push_str(",\"descriptor\":");
                line.push_str(&number_list(d));
            }
            line.push('}');
            writeln!(w, "{line}")?;
        }
        w.flush()
    }
}

fn with_frame(e: GeometryError, frame: u32) -> GeometryError {
    match e {
        GeometryError::DegenerateIntrinsics { det, .. } => GeometryError::DegenerateIntrinsics {
            frame_index: Some(frame),
            det,
        },
        other => other,
    }
}

fn number_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
    format!("[{}]", items.join(","))
}
