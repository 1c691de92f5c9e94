//! Seeded generators for synthetic scenes, sequences and latents.
//!
//! Used by the test suites and benchmarks; none of the production paths
//! depend on them.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{CalibratedFrame, CameraIntrinsics, Mat3, PoseConvention, RigidPose, Vec3};
use crate::par::{self, Parallelism};

/// Uniformly distributed rotation (normalised Gaussian quaternion).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    loop {
        let q = Quaternion::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q)
                .to_rotation_matrix()
                .into_inner();
        }
    }
}

pub fn random_vec3<R: Rng + ?Sized>(rng: &mut R, half_extent: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-half_extent..=half_extent),
        rng.random_range(-half_extent..=half_extent),
        rng.random_range(-half_extent..=half_extent),
    )
}

/// World-to-camera pose with a uniform rotation and translation entries in
/// `[-translation_extent, translation_extent]`.
pub fn random_pose<R: Rng + ?Sized>(rng: &mut R, translation_extent: f64) -> RigidPose {
    RigidPose::new(
        random_rotation(rng),
        random_vec3(rng, translation_extent),
        PoseConvention::WorldToCamera,
    )
    .expect("generated rotation is orthonormal")
}

/// Pixel-scale pinhole intrinsics (focal 200–800 px, VGA-ish centre).
pub fn random_intrinsics<R: Rng + ?Sized>(rng: &mut R) -> CameraIntrinsics {
    let fx = rng.random_range(200.0..800.0);
    let fy = fx * rng.random_range(0.9..1.1);
    let cx = rng.random_range(280.0..360.0);
    let cy = rng.random_range(200.0..280.0);
    CameraIntrinsics::pinhole(fx, fy, cx, cy).expect("positive focal lengths")
}

pub fn random_frame<R: Rng + ?Sized>(rng: &mut R, frame_index: u32) -> CalibratedFrame {
    CalibratedFrame::new(frame_index, random_intrinsics(rng), random_pose(rng, 2.0))
}

pub fn random_sequence<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<CalibratedFrame> {
    (0..len as u32).map(|i| random_frame(rng, i)).collect()
}

/// Re-expresses a frame after the world is re-based by `s` (new world
/// coordinates are `s · old`). The camera itself does not move.
pub fn rebase_world(frame: &CalibratedFrame, s: &RigidPose) -> CalibratedFrame {
    let pose = match frame.pose.convention() {
        PoseConvention::WorldToCamera => frame.pose.compose(&s.inverse()),
        PoseConvention::CameraToWorld => {
            let moved = s.compose(&frame.pose);
            RigidPose::new(*moved.rotation(), *moved.translation(), PoseConvention::CameraToWorld)
                .expect("rigid composition")
        }
    };
    CalibratedFrame {
        pose,
        ..frame.clone()
    }
}

/// Frame with identity orientation and unit intrinsics centred at `center`.
pub fn frame_at(frame_index: u32, center: Vec3) -> CalibratedFrame {
    CalibratedFrame::new(
        frame_index,
        CameraIntrinsics::identity(),
        RigidPose::new(Mat3::identity(), -center, PoseConvention::WorldToCamera)
            .expect("identity rotation"),
    )
}

/// Frames scattered uniformly in a `[0, extent]³` box.
pub fn random_scene<R: Rng + ?Sized>(rng: &mut R, nodes: usize, extent: f64) -> Vec<CalibratedFrame> {
    (0..nodes as u32)
        .map(|i| {
            frame_at(
                i,
                Vec3::new(
                    rng.random_range(0.0..extent),
                    rng.random_range(0.0..extent),
                    rng.random_range(0.0..extent),
                ),
            )
        })
        .collect()
}

/// `len` i.i.d. standard normal draws. Each 64k block has its own stream
/// derived from `seed`, so the output does not depend on the thread count.
pub fn standard_normal(len: usize, seed: u64, mode: Parallelism) -> Vec<f64> {
    const BLOCK: usize = 1 << 16;
    let mut out = vec![0.0; len];
    par::for_each_chunk_mut(&mut out, BLOCK, mode, |offset, chunk| {
        let block = (offset / BLOCK) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ block.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for v in chunk.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    });
    out
}
