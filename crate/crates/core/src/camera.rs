//! Pinhole camera model. Camera frames use the vision convention: z looks
//! forward, x to the right of the image, y down. Camera poses map camera
//! coordinates to world coordinates.

use crate::se3::{Pose, Rotation, Vec3};
use nalgebra::{Matrix3, Vector2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Self {
        assert!(fx > 0.0 && fy > 0.0, "focal lengths must be positive");
        Self { fx, fy, cx, cy, width, height }
    }

    /// Principal point at the image centre (pixel centres at integer coordinates).
    pub fn centered(f: f64, width: u32, height: u32) -> Self {
        Self::new(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    /// Same field of view at a different resolution.
    pub fn rescaled(&self, s: f64) -> Self {
        let width = ((self.width as f64) * s).round() as u32;
        let height = ((self.height as f64) * s).round() as u32;
        Self::new(
            self.fx * s,
            self.fy * s,
            (self.cx + 0.5) * s - 0.5,
            (self.cy + 0.5) * s - 0.5,
            width,
            height,
        )
    }

    /// Pixel coordinates of a camera-frame point, `None` behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<Vector2<f64>> {
        (p.z > 0.0).then(|| Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Direction through pixel `(u, v)` with unit depth (`z = 1`).
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// A calibrated camera placed in the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
}

/// Camera pose at `eye` looking at `target`. The image "up" is `up`
/// projected onto the image plane; callers must avoid `up` parallel to the
/// viewing direction.
pub fn look_at(eye: &Vec3, target: &Vec3, up: &Vec3) -> Pose {
    let z = (target - eye).normalize();
    let y = -(up - z * up.dot(&z)).normalize();
    let x = y.cross(&z);
    Pose::new(
        *eye,
        Rotation::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])),
    )
}

/// `look_at` with world z as up, or world x when the view is nearly vertical.
pub fn look_at_auto_up(eye: &Vec3, target: &Vec3) -> Pose {
    let dir = (target - eye).normalize();
    let up = if dir.z.abs() > 0.99 { Vec3::x() } else { Vec3::z() };
    look_at(eye, target, &up)
}
