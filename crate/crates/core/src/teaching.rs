//! Human teaching: marker poses from four projected corners, object poses
//! from markers, and the relative pose of two parts held in their assembled
//! configuration.

use crate::camera::CameraIntrinsics;
use crate::se3::{skew, Pose, Rotation, Vec3};
use nalgebra::{Matrix3, Matrix6, SMatrix, SVector, Vector2, Vector6};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const RECORD_VERSION: u32 = 1;
const REFINE_STEPS: usize = 10;
const MEDIAN_STEPS: usize = 30;
/// Approach distance used when a recording does not give one (m).
pub const DEFAULT_APPROACH_LENGTH: f64 = 0.05;

#[derive(Error, Debug)]
pub enum TeachingError {
    #[error("degenerate marker corners: {0}")]
    Degenerate(&'static str),
    #[error("marker pose solution lies behind the camera")]
    BehindCamera,
    #[error("teaching record has no samples")]
    NoSamples,
    #[error("teaching record schema: {0}")]
    Schema(String),
    #[error("teaching record version {found} is not supported (expected {expected})")]
    Version { found: u64, expected: u32 },
    #[error("approach direction must be a unit vector, norm is {0}")]
    NonUnitApproach(f64),
    #[error("marker side length must be positive, got {0}")]
    BadSideLength(f64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MarkerModel {
    pub id: u32,
    pub side_length: f64,
    pub marker_in_object: Pose,
}

impl MarkerModel {
    pub fn new(id: u32, side_length: f64, marker_in_object: Pose) -> Result<Self, TeachingError> {
        if !(side_length > 0.0) {
            return Err(TeachingError::BadSideLength(side_length));
        }
        Ok(Self {
            id,
            side_length,
            marker_in_object,
        })
    }

    /// Corners in the marker frame: top-left, top-right, bottom-right,
    /// bottom-left, with x to the right, y up and z out of the marker.
    pub fn corners(&self) -> [Vec3; 4] {
        let h = self.side_length / 2.0;
        [
            Vec3::new(-h, h, 0.0),
            Vec3::new(h, h, 0.0),
            Vec3::new(h, -h, 0.0),
            Vec3::new(-h, -h, 0.0),
        ]
    }
}

/// Pixel positions of the marker corners seen from a camera. `None` if any
/// corner is behind the camera.
pub fn project_marker(marker_in_cam: &Pose, marker: &MarkerModel, cam: &CameraIntrinsics) -> Option<[[f64; 2]; 4]> {
    let mut out = [[0.0; 2]; 4];
    for (o, c) in out.iter_mut().zip(marker.corners()) {
        let uv = cam.project(&marker_in_cam.transform_point(&c))?;
        *o = [uv.x, uv.y];
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerEstimate {
    /// Marker frame in the camera frame.
    pub pose: Pose,
    /// Reprojection rmse over the four corners (px).
    pub rmse: f64,
}

/// Planar pose from four corners: DLT homography, decomposition, projection
/// onto a rotation, then Gauss-Newton on the reprojection error.
pub fn estimate_marker_pose(
    corners: &[[f64; 2]; 4],
    marker: &MarkerModel,
    cam: &CameraIntrinsics,
) -> Result<MarkerEstimate, TeachingError> {
    if !(marker.side_length > 0.0) {
        return Err(TeachingError::BadSideLength(marker.side_length));
    }
    let px: Vec<Vector2<f64>> = corners.iter().map(|c| Vector2::new(c[0], c[1])).collect();
    let scale = (0..4)
        .map(|i| (px[i] - px[(i + 1) % 4]).norm())
        .fold(0.0, f64::max);
    if !(scale > 1e-9) {
        return Err(TeachingError::Degenerate("corners coincide"));
    }
    for i in 0..4 {
        for j in i + 1..4 {
            if (px[i] - px[j]).norm() < 1e-9 * scale {
                return Err(TeachingError::Degenerate("corners coincide"));
            }
        }
        // Twice the area of the triangle left when dropping corner i.
        let [a, b, c] = [px[(i + 1) % 4], px[(i + 2) % 4], px[(i + 3) % 4]];
        let cross = (b - a).perp(&(c - a));
        if cross.abs() < 1e-9 * scale * scale {
            return Err(TeachingError::Degenerate("three corners are collinear"));
        }
    }

    let k_inv = cam
        .matrix()
        .try_inverse()
        .ok_or(TeachingError::Degenerate("singular camera matrix"))?;
    let unit = marker.corners().map(|c| c / marker.side_length);
    let norm: Vec<Vec3> = px.iter().map(|p| k_inv * Vec3::new(p.x, p.y, 1.0)).collect();
    let h = homography(&unit, &norm);

    let (h1, h2, h3) = (h.column(0).into_owned(), h.column(1).into_owned(), h.column(2).into_owned());
    let mut lambda = 2.0 / (h1.norm() + h2.norm());
    if h3.z * lambda < 0.0 {
        lambda = -lambda;
    }
    let r1 = h1 * lambda;
    let r2 = h2 * lambda;
    let r = Rotation::orthonormalize(&Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]));
    let t = h3 * lambda * marker.side_length;
    let mut pose = Pose::new(t, r);

    let pts = marker.corners();
    let mut cost = reprojection_sq(&pose, &pts, &px, cam);
    for _ in 0..REFINE_STEPS {
        let Some((jtj, jtr)) = normal_equations(&pose, &pts, &px, cam) else {
            break;
        };
        let Some(step) = jtj.cholesky().map(|c| c.solve(&-jtr)) else {
            break;
        };
        let next = apply_step(&pose, &step);
        let c = reprojection_sq(&next, &pts, &px, cam);
        if !(c < cost) {
            break;
        }
        pose = next;
        cost = c;
    }
    if pts.iter().any(|p| pose.transform_point(p).z <= 0.0) {
        return Err(TeachingError::BehindCamera);
    }
    Ok(MarkerEstimate {
        pose,
        rmse: (cost / 4.0).sqrt(),
    })
}

/// Homography taking plane points `(x, y)` to homogeneous image rays.
fn homography(plane: &[Vec3; 4], img: &[Vec3]) -> Matrix3<f64> {
    let mut a = SMatrix::<f64, 8, 9>::zeros();
    for i in 0..4 {
        let (x, y) = (plane[i].x, plane[i].y);
        let (u, v) = (img[i].x / img[i].z, img[i].y / img[i].z);
        a.set_row(
            2 * i,
            &SMatrix::<f64, 1, 9>::from_row_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]),
        );
        a.set_row(
            2 * i + 1,
            &SMatrix::<f64, 1, 9>::from_row_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v]),
        );
    }
    // Null vector of A: eigenvector of AᵀA with the smallest eigenvalue.
    let eig = (a.transpose() * a).symmetric_eigen();
    let imin = eig.eigenvalues.imin();
    let h: SVector<f64, 9> = eig.eigenvectors.column(imin).into_owned();
    Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8])
}

fn reprojection_sq(pose: &Pose, pts: &[Vec3; 4], px: &[Vector2<f64>], cam: &CameraIntrinsics) -> f64 {
    pts.iter()
        .zip(px)
        .map(|(p, o)| match cam.project(&pose.transform_point(p)) {
            Some(uv) => (uv - o).norm_squared(),
            None => f64::INFINITY,
        })
        .sum()
}

/// Gauss-Newton system for a left perturbation `exp(w) R`, `t + dt`.
fn normal_equations(
    pose: &Pose,
    pts: &[Vec3; 4],
    px: &[Vector2<f64>],
    cam: &CameraIntrinsics,
) -> Option<(Matrix6<f64>, Vector6<f64>)> {
    let mut jtj = Matrix6::zeros();
    let mut jtr = Vector6::zeros();
    for (p, o) in pts.iter().zip(px) {
        let rp = pose.rotation.apply(p);
        let q = rp + pose.position;
        if q.z <= 0.0 {
            return None;
        }
        let uv = cam.project(&q)?;
        let r = uv - o;
        let dproj = SMatrix::<f64, 2, 3>::new(
            cam.fx / q.z,
            0.0,
            -cam.fx * q.x / (q.z * q.z),
            0.0,
            cam.fy / q.z,
            -cam.fy * q.y / (q.z * q.z),
        );
        let mut dq = SMatrix::<f64, 3, 6>::zeros();
        dq.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&rp)));
        dq.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
        let j = dproj * dq;
        jtj += j.transpose() * j;
        jtr += j.transpose() * r;
    }
    Some((jtj, jtr))
}

fn apply_step(pose: &Pose, step: &Vector6<f64>) -> Pose {
    let w = Vec3::new(step[0], step[1], step[2]);
    let dt = Vec3::new(step[3], step[4], step[5]);
    Pose::new(pose.position + dt, Rotation::exp(&w) * pose.rotation)
}

/// Object frame in the camera given the marker frame in the camera.
pub fn object_pose_from_marker(marker_in_cam: &Pose, marker: &MarkerModel) -> Pose {
    marker_in_cam.compose(&marker.marker_in_object.inverse())
}

/// Pose of B expressed in the frame of A.
pub fn relative_assembly_pose(a: &Pose, b: &Pose) -> Pose {
    a.inverse().compose(b)
}

/// Per-component median of the positions and chordal median of the
/// rotations.
pub fn aggregate_poses(poses: &[Pose]) -> Option<Pose> {
    if poses.is_empty() {
        return None;
    }
    let mut position = Vec3::zeros();
    for k in 0..3 {
        let mut v: Vec<f64> = poses.iter().map(|p| p.position[k]).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        position[k] = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
    }
    // Chordal L1 median: Weiszfeld iterations started from the chordal mean,
    // so a single flipped planar solution cannot drag the result.
    let sum: Matrix3<f64> = poses.iter().map(|p| *p.rotation.matrix()).sum();
    let mut r = Rotation::orthonormalize(&sum);
    for _ in 0..MEDIAN_STEPS {
        let mut acc = Matrix3::zeros();
        for p in poses {
            let d = (p.rotation.matrix() - r.matrix()).norm().max(1e-12);
            acc += p.rotation.matrix() / d;
        }
        r = Rotation::orthonormalize(&acc);
    }
    Some(Pose::new(position, r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaughtObject {
    pub name: String,
    pub marker: MarkerModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TeachingSample {
    pub corners_a: [[f64; 2]; 4],
    pub corners_b: [[f64; 2]; 4],
    pub intrinsics: CameraIntrinsics,
    /// B relative to A from this sample alone, filled in by [`teach`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_pose: Option<Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TeachingRecord {
    pub version: u32,
    pub object_a: TaughtObject,
    pub object_b: TaughtObject,
    pub samples: Vec<TeachingSample>,
    /// B in the frame of A.
    pub relative_pose: Pose,
    /// Unit direction, in the frame of A, along which B moves when inserted.
    pub approach: Vec3,
    /// Distance B is backed off along `-approach` before insertion (m).
    pub approach_length: f64,
}

/// Insertion direction in A's frame when a recording gives none.
pub fn default_approach() -> Vec3 {
    Vec3::new(0.0, 0.0, -1.0)
}

/// Runs the marker solver on every sample and aggregates the relative poses.
pub fn teach(
    object_a: TaughtObject,
    object_b: TaughtObject,
    mut samples: Vec<TeachingSample>,
    approach: Option<Vec3>,
    approach_length: Option<f64>,
) -> Result<TeachingRecord, TeachingError> {
    if samples.is_empty() {
        return Err(TeachingError::NoSamples);
    }
    let mut rel = Vec::with_capacity(samples.len());
    for s in &mut samples {
        let ma = estimate_marker_pose(&s.corners_a, &object_a.marker, &s.intrinsics)?;
        let mb = estimate_marker_pose(&s.corners_b, &object_b.marker, &s.intrinsics)?;
        let pa = object_pose_from_marker(&ma.pose, &object_a.marker);
        let pb = object_pose_from_marker(&mb.pose, &object_b.marker);
        let r = relative_assembly_pose(&pa, &pb);
        s.relative_pose = Some(r);
        rel.push(r);
    }
    let approach = approach.unwrap_or_else(default_approach);
    check_approach(&approach)?;
    Ok(TeachingRecord {
        version: RECORD_VERSION,
        object_a,
        object_b,
        samples,
        relative_pose: aggregate_poses(&rel).expect("samples are non-empty"),
        approach,
        approach_length: approach_length.unwrap_or(DEFAULT_APPROACH_LENGTH),
    })
}

fn check_approach(v: &Vec3) -> Result<(), TeachingError> {
    let n = v.norm();
    if (n - 1.0).abs() > 1e-9 || !n.is_finite() {
        return Err(TeachingError::NonUnitApproach(n));
    }
    Ok(())
}

pub fn save_teaching_record(record: &TeachingRecord, path: impl AsRef<Path>) -> Result<(), TeachingError> {
    std::fs::write(path, teaching_record_to_json(record)?)?;
    Ok(())
}

pub fn teaching_record_to_json(record: &TeachingRecord) -> Result<String, TeachingError> {
    check_approach(&record.approach)?;
    if record.version != RECORD_VERSION {
        return Err(TeachingError::Version {
            found: record.version as u64,
            expected: RECORD_VERSION,
        });
    }
    serde_json::to_string_pretty(record).map_err(|e| TeachingError::Schema(e.to_string()))
}

pub fn load_teaching_record(path: impl AsRef<Path>) -> Result<TeachingRecord, TeachingError> {
    teaching_record_from_json(&std::fs::read_to_string(path)?)
}

pub fn teaching_record_from_json(text: &str) -> Result<TeachingRecord, TeachingError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| TeachingError::Schema(e.to_string()))?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == RECORD_VERSION as u64 => {}
        Some(found) => {
            return Err(TeachingError::Version {
                found,
                expected: RECORD_VERSION,
            })
        }
        None => return Err(TeachingError::Schema("missing field `version`".into())),
    }
    let record: TeachingRecord = serde_json::from_value(value).map_err(|e| TeachingError::Schema(e.to_string()))?;
    check_approach(&record.approach)?;
    Ok(record)
}
