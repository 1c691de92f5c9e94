//! Pinhole intrinsics, rigid poses and the homogeneous projection algebra
//! behind relative camera transforms.
//!
//! Poses are canonicalised to the world-to-camera convention before any
//! projection is formed, so `P = blockdiag(K, 1) · T` maps homogeneous world
//! points to homogeneous (pixel, depth) coordinates and
//! `G_i = P_i · P_{i-1}^{-1}` maps between adjacent cameras.
//!
//! All inverses use closed forms: rotations are transposed and intrinsics
//! are inverted blockwise.

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector3, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;
pub type Vec3 = Vector3<f64>;

/// Absolute tolerance used by the geometric invariants.
pub const GEOMETRY_TOL: f64 = 1e-9;
/// Minimum determinant magnitude accepted for intrinsics and projections.
pub const MIN_DET: f64 = 1e-12;
/// Largest rotation deviation that ingestion will silently re-orthonormalise.
pub const MAX_REPAIRABLE_DRIFT: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate intrinsics{}: |det K| = {det:e}", frame_suffix(*.frame_index))]
    DegenerateIntrinsics { frame_index: Option<u32>, det: f64 },
    #[error("intrinsics must have K[2][2] = 1, got {0}")]
    IntrinsicsScale(f64),
    #[error("rotation is not orthonormal (max |RᵀR - I| = {0:e})")]
    NonOrthonormal(f64),
    #[error("rotation determinant is {0}, expected +1")]
    ImproperRotation(f64),
    #[error("bottom row of a homogeneous matrix must be (0, 0, 0, 1)")]
    NotAffine,
    #[error("homogeneous matrix is singular (|det| = {0:e})")]
    Singular(f64),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("image size must be positive, got {width}x{height}")]
    BadImageSize { width: f64, height: f64 },
}

fn frame_suffix(frame_index: Option<u32>) -> String {
    match frame_index {
        Some(i) => format!(" in frame {i}"),
        None => String::new(),
    }
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

/// `|a - b| <= tol * max(1, |a|, |b|)`: absolute near zero, relative for
/// pixel-scale entries.
pub fn mixed_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn mat4_close(a: &Mat4, b: &Mat4, tol: f64) -> bool {
    a.iter().zip(b.iter()).all(|(&x, &y)| mixed_close(x, y, tol))
}

fn max_abs_deviation_from_identity(m: &Mat3) -> f64 {
    (m - Mat3::identity()).abs().max()
}

fn blockdiag(k: &Mat3) -> Mat4 {
    let mut out = Mat4::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(k);
    out
}

fn check_affine_bottom_row(m: &Mat4) -> Result<()> {
    let row = m.row(3);
    let expected = [0.0, 0.0, 0.0, 1.0];
    if row.iter().zip(expected).all(|(&a, b)| (a - b).abs() <= MIN_DET) {
        Ok(())
    } else {
        Err(GeometryError::NotAffine)
    }
}

/// Pinhole intrinsic matrix in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    k: Mat3,
}

impl CameraIntrinsics {
    pub fn new(k: Mat3) -> Result<Self> {
        if k.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if (k[(2, 2)] - 1.0).abs() > MIN_DET {
            return Err(GeometryError::IntrinsicsScale(k[(2, 2)]));
        }
        let det = k.determinant();
        if det.abs() <= MIN_DET {
            return Err(GeometryError::DegenerateIntrinsics {
                frame_index: None,
                det,
            });
        }
        Ok(Self { k })
    }

    /// Wraps a matrix without validation. Only meant for building degenerate
    /// fixtures; downstream operations still detect singular matrices.
    pub fn new_unchecked(k: Mat3) -> Self {
        Self { k }
    }

    pub fn identity() -> Self {
        Self { k: Mat3::identity() }
    }

    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::new(Mat3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0))
    }

    pub fn from_row_slice(values: &[f64]) -> Result<Self> {
        if values.len() != 9 {
            return Err(GeometryError::WrongLength {
                expected: 9,
                got: values.len(),
            });
        }
        Self::new(Mat3::from_row_slice(values))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.k
    }

    pub fn row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = self.k[(r, c)];
            }
        }
        out
    }

    /// Closed-form inverse. Uses the 2×2 block structure when the bottom row
    /// is exactly `(0, 0, 1)` and the adjugate otherwise.
    pub fn inverse(&self) -> Result<Mat3> {
        let k = &self.k;
        let det = k.determinant();
        if !det.is_finite() || det.abs() <= MIN_DET {
            return Err(GeometryError::DegenerateIntrinsics {
                frame_index: None,
                det,
            });
        }
        if k[(2, 0)] == 0.0 && k[(2, 1)] == 0.0 && k[(2, 2)] == 1.0 {
            let a = Matrix2::new(k[(0, 0)], k[(0, 1)], k[(1, 0)], k[(1, 1)]);
            let det_a = a.determinant();
            let a_inv = Matrix2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / det_a;
            let c = a_inv * Vector2::new(k[(0, 2)], k[(1, 2)]);
            Ok(Mat3::new(
                a_inv[(0, 0)],
                a_inv[(0, 1)],
                -c.x,
                a_inv[(1, 0)],
                a_inv[(1, 1)],
                -c.y,
                0.0,
                0.0,
                1.0,
            ))
        } else {
            let adj = Mat3::from_fn(|r, c| {
                // cofactor of (c, r)
                let rows: Vec<usize> = (0..3).filter(|&i| i != c).collect();
                let cols: Vec<usize> = (0..3).filter(|&j| j != r).collect();
                let minor = k[(rows[0], cols[0])] * k[(rows[1], cols[1])]
                    - k[(rows[0], cols[1])] * k[(rows[1], cols[0])];
                if (r + c) % 2 == 0 {
                    minor
                } else {
                    -minor
                }
            });
            Ok(adj / det)
        }
    }

    /// Divides the first row by the image width and the second by the image
    /// height, giving resolution-independent intrinsics.
    pub fn normalized(&self, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(GeometryError::BadImageSize { width, height });
        }
        let mut k = self.k;
        for c in 0..3 {
            k[(0, c)] /= width;
            k[(1, c)] /= height;
        }
        Self::new(k)
    }
}

/// Direction of the map a [`RigidPose`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoseConvention {
    #[serde(rename = "w2c")]
    WorldToCamera,
    #[serde(rename = "c2w")]
    CameraToWorld,
}

impl PoseConvention {
    pub fn flipped(self) -> Self {
        match self {
            PoseConvention::WorldToCamera => PoseConvention::CameraToWorld,
            PoseConvention::CameraToWorld => PoseConvention::WorldToCamera,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PoseConvention::WorldToCamera => "w2c",
            PoseConvention::CameraToWorld => "c2w",
        }
    }
}

impl std::str::FromStr for PoseConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "w2c" => Ok(PoseConvention::WorldToCamera),
            "c2w" => Ok(PoseConvention::CameraToWorld),
            other => Err(format!("unknown pose convention {other:?} (expected \"w2c\" or \"c2w\")")),
        }
    }
}

/// Element of SE(3) tagged with the direction it maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: Mat3,
    translation: Vec3,
    convention: PoseConvention,
}

impl RigidPose {
    pub fn new(rotation: Mat3, translation: Vec3, convention: PoseConvention) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let drift = max_abs_deviation_from_identity(&(rotation.transpose() * rotation));
        if drift >= GEOMETRY_TOL {
            return Err(GeometryError::NonOrthonormal(drift));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() >= GEOMETRY_TOL {
            return Err(GeometryError::ImproperRotation(det));
        }
        Ok(Self {
            rotation,
            translation,
            convention,
        })
    }

    /// Accepts rotations whose drift from SO(3) is below
    /// [`MAX_REPAIRABLE_DRIFT`] and projects them onto SO(3) first. Pose files
    /// written with single precision routinely carry ~1e-7 drift.
    pub fn new_repaired(rotation: Mat3, translation: Vec3, convention: PoseConvention) -> Result<Self> {
        if rotation.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let drift = max_abs_deviation_from_identity(&(rotation.transpose() * rotation));
        if drift >= MAX_REPAIRABLE_DRIFT {
            return Err(GeometryError::NonOrthonormal(drift));
        }
        let det = rotation.determinant();
        if det <= 0.0 {
            return Err(GeometryError::ImproperRotation(det));
        }
        Self::new(project_to_rotation(&rotation), translation, convention)
    }

    pub fn identity(convention: PoseConvention) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
            convention,
        }
    }

    pub fn from_matrix(m: &Mat4, convention: PoseConvention) -> Result<Self> {
        check_affine_bottom_row(m)?;
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
            convention,
        )
    }

    /// Parses 16 row-major values, repairing small rotation drift.
    pub fn from_row_slice(values: &[f64], convention: PoseConvention) -> Result<Self> {
        if values.len() != 16 {
            return Err(GeometryError::WrongLength {
                expected: 16,
                got: values.len(),
            });
        }
        let m = Mat4::from_row_slice(values);
        check_affine_bottom_row(&m)?;
        Self::new_repaired(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
            convention,
        )
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn convention(&self) -> PoseConvention {
        self.convention
    }

    pub fn to_matrix(&self) -> Mat4 {
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn row_major(&self) -> [f64; 16] {
        let m = self.to_matrix();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = m[(r, c)];
            }
        }
        out
    }

    /// Rigid inverse `(Rᵀ, -Rᵀt)`. The inverse of a world-to-camera map is
    /// the camera-to-world map of the same camera, so the tag flips.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
            convention: self.convention.flipped(),
        }
    }

    /// Plain SE(3) product `self · rhs`; the result keeps `self`'s tag.
    pub fn compose(&self, rhs: &RigidPose) -> Self {
        Self {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
            convention: self.convention,
        }
    }

    pub fn to_world_to_camera(&self) -> Self {
        match self.convention {
            PoseConvention::WorldToCamera => *self,
            PoseConvention::CameraToWorld => self.inverse(),
        }
    }

    pub fn camera_center(&self) -> Vec3 {
        match self.convention {
            PoseConvention::WorldToCamera => -(self.rotation.transpose() * self.translation),
            PoseConvention::CameraToWorld => self.translation,
        }
    }

    /// Unit viewing direction (camera +z) in world coordinates.
    pub fn viewing_direction(&self) -> Vec3 {
        let w2c = self.to_world_to_camera();
        w2c.rotation.row(2).transpose()
    }
}

/// Nearest rotation in the Frobenius sense (polar factor via SVD).
pub fn project_to_rotation(m: &Mat3) -> Mat3 {
    let svd = SVD::new(*m, true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        let mut col = u.column_mut(2);
        col *= -1.0;
        r = u * v_t;
    }
    r
}

/// One video frame with its calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedFrame {
    pub frame_index: u32,
    pub intrinsics: CameraIntrinsics,
    pub pose: RigidPose,
    pub image_ref: Option<String>,
}

impl CalibratedFrame {
    pub fn new(frame_index: u32, intrinsics: CameraIntrinsics, pose: RigidPose) -> Self {
        Self {
            frame_index,
            intrinsics,
            pose,
            image_ref: None,
        }
    }

    /// The reference camera with `K = I` and `T = I`.
    pub fn identity(frame_index: u32) -> Self {
        Self::new(
            frame_index,
            CameraIntrinsics::identity(),
            RigidPose::identity(PoseConvention::WorldToCamera),
        )
    }

    pub fn camera_center(&self) -> Vec3 {
        self.pose.camera_center()
    }
}

/// `blockdiag(K, 1) · T` for a world-to-camera pose `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousProjection {
    p: Mat4,
    k_inv: Mat3,
    pose: RigidPose,
}

impl HomogeneousProjection {
    pub fn matrix(&self) -> &Mat4 {
        &self.p
    }

    /// `T⁻¹ · blockdiag(K⁻¹, 1)` assembled from the stored factors.
    pub fn inverse(&self) -> Mat4 {
        self.pose.inverse().to_matrix() * blockdiag(&self.k_inv)
    }
}

/// Relative geometric transform between two cameras, a 4×4 affine matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeTransform {
    g: Mat4,
}

impl RelativeTransform {
    pub fn new(g: Mat4) -> Result<Self> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        check_affine_bottom_row(&g)?;
        let det = g.fixed_view::<3, 3>(0, 0).determinant();
        if det.abs() <= MIN_DET {
            return Err(GeometryError::Singular(det));
        }
        Ok(Self { g })
    }

    /// Skips validation. Used for synthetic fixtures such as the all-zero
    /// matrix; encoding accepts any finite matrix.
    pub fn new_unchecked(g: Mat4) -> Self {
        Self { g }
    }

    pub fn identity() -> Self {
        Self { g: Mat4::identity() }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.g
    }

    /// The 16 entries in row-major order.
    pub fn row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = self.g[(r, c)];
            }
        }
        out
    }

    /// Affine block inverse `[A⁻¹, -A⁻¹b]`.
    pub fn inverse(&self) -> Result<Self> {
        let a = self.g.fixed_view::<3, 3>(0, 0).into_owned();
        let b = self.g.fixed_view::<3, 1>(0, 3).into_owned();
        let det = a.determinant();
        let a_inv = a
            .try_inverse()
            .filter(|_| det.abs() > MIN_DET)
            .ok_or(GeometryError::Singular(det))?;
        let mut g = Mat4::identity();
        g.fixed_view_mut::<3, 3>(0, 0).copy_from(&a_inv);
        g.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-(a_inv * b)));
        Ok(Self { g })
    }

    pub fn compose(&self, rhs: &RelativeTransform) -> Self {
        Self { g: self.g * rhs.g }
    }
}

pub fn homogeneous_projection(frame: &CalibratedFrame) -> Result<HomogeneousProjection> {
    let k_inv = frame.intrinsics.inverse().map_err(|e| match e {
        GeometryError::DegenerateIntrinsics { det, .. } => GeometryError::DegenerateIntrinsics {
            frame_index: Some(frame.frame_index),
            det,
        },
        other => other,
    })?;
    let pose = frame.pose.to_world_to_camera();
    let p = blockdiag(frame.intrinsics.matrix()) * pose.to_matrix();
    Ok(HomogeneousProjection { p, k_inv, pose })
}

/// `G = P_current · P_previous⁻¹`.
pub fn relative_transform(
    current: &CalibratedFrame,
    previous: &CalibratedFrame,
) -> Result<RelativeTransform> {
    let cur = homogeneous_projection(current)?;
    let prev = homogeneous_projection(previous)?;
    Ok(RelativeTransform {
        g: cur.matrix() * prev.inverse(),
    })
}

/// Transform of the first frame against the identity reference camera,
/// which reduces to its homogeneous projection.
pub fn first_frame_transform(first: &CalibratedFrame) -> Result<RelativeTransform> {
    let p = homogeneous_projection(first)?;
    Ok(RelativeTransform { g: *p.matrix() })
}

/// Rigid part of the relative transform, `T_current · T_previous⁻¹`, with
/// both poses in world-to-camera form. It maps points from the previous
/// camera frame into the current one.
pub fn relative_pose(current: &CalibratedFrame, previous: &CalibratedFrame) -> RelativeTransform {
    let cur = current.pose.to_world_to_camera();
    let prev = previous.pose.to_world_to_camera();
    RelativeTransform {
        g: cur.compose(&prev.inverse()).to_matrix(),
    }
}

pub fn camera_center(pose: &RigidPose) -> Vec3 {
    pose.camera_center()
}

pub fn invert_pose(pose: &RigidPose) -> RigidPose {
    pose.inverse()
}
