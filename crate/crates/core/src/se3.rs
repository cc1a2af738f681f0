//! Rigid-body algebra shared by every other module.
//!
//! Rotations are stored as plain 3x3 matrices wrapped in [`Rotation`] so that
//! the row layout used by the JSON formats (`R: [9]`, row-major) maps directly
//! onto the storage. Euler angles follow the roll-pitch-yaw convention
//! `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

pub type Vec3 = Vector3<f64>;

/// Below this value of `hypot(R21, R22)` the pitch is treated as exactly +-pi/2.
const GIMBAL_EPS: f64 = 1e-10;

/// Orthonormal 3x3 matrix with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix without checking it. Callers guarantee orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Wraps `m` if it is a proper rotation within `tol`.
    pub fn from_matrix(m: Matrix3<f64>, tol: f64) -> Option<Self> {
        let r = Rotation(m);
        r.is_valid(tol).then_some(r)
    }

    /// Nearest rotation in the Frobenius sense (polar decomposition via SVD).
    pub fn orthonormalize(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Rotation(r)
    }

    pub fn from_row_major(v: &[f64; 9]) -> Self {
        Rotation(Matrix3::from_row_slice(v))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn rot_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rotation(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn rot_y(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rotation(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rot_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Rotation(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rodrigues rotation about a unit `axis`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let k = axis.normalize();
        let kx = skew(&k);
        let (s, c) = angle.sin_cos();
        Rotation(Matrix3::identity() + kx * s + kx * kx * (1.0 - c))
    }

    /// Exponential map of a rotation vector.
    pub fn exp(w: &Vec3) -> Self {
        let th = w.norm();
        if th < 1e-14 {
            return Rotation::orthonormalize(&(Matrix3::identity() + skew(w)));
        }
        Rotation::from_axis_angle(&(w / th), th)
    }

    /// Rotation vector (axis * angle) of this rotation.
    pub fn log(&self) -> Vec3 {
        let m = &self.0;
        let v = Vec3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        );
        let s = 0.5 * v.norm();
        let c = 0.5 * (m.trace() - 1.0);
        let th = s.atan2(c);
        if th < 1e-12 {
            return 0.5 * v;
        }
        if PI - th < 1e-6 {
            // Axis from the symmetric part near a half turn.
            let b = (m + m.transpose()) * 0.5 - Matrix3::identity() * c;
            let mut best = 0;
            for i in 1..3 {
                if b[(i, i)] > b[(best, best)] {
                    best = i;
                }
            }
            let mut axis: Vec3 = b.column(best).into_owned();
            axis /= axis.norm();
            if axis.dot(&v) < 0.0 {
                axis = -axis;
            }
            return axis * th;
        }
        v * (th / (2.0 * s))
    }

    /// Minimal rotation taking unit vector `from` onto unit vector `to`.
    pub fn between(from: &Vec3, to: &Vec3) -> Self {
        let a = from.normalize();
        let b = to.normalize();
        let axis = a.cross(&b);
        let s = axis.norm();
        let c = a.dot(&b);
        if s < 1e-12 {
            if c > 0.0 {
                return Rotation::identity();
            }
            // Half turn about any axis orthogonal to `a`.
            let helper = if a.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            let perp = a.cross(&helper).normalize();
            return Rotation::from_axis_angle(&perp, PI);
        }
        Rotation::from_axis_angle(&(axis / s), s.atan2(c))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn column(&self, i: usize) -> Vec3 {
        self.0.column(i).into_owned()
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let e = self.0 * self.0.transpose() - Matrix3::identity();
        e.abs().max() <= tol && (self.0.determinant() - 1.0).abs() <= tol
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RpyAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl RpyAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn to_degrees(self) -> [f64; 3] {
        [
            self.roll.to_degrees(),
            self.pitch.to_degrees(),
            self.yaw.to_degrees(),
        ]
    }
}

/// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rot_from_rpy(rpy: RpyAngles) -> Rotation {
    let (sr, cr) = rpy.roll.sin_cos();
    let (sp, cp) = rpy.pitch.sin_cos();
    let (sy, cy) = rpy.yaw.sin_cos();
    Rotation(Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    ))
}

/// Inverse of [`rot_from_rpy`].
///
/// Roll and pitch are read from the bottom row only, so they are unchanged by
/// any left-multiplication with a rotation about world z. At the gimbal
/// (`|pitch| = pi/2`) roll is set to zero and the rest goes into yaw.
pub fn rpy_from_rot(r: &Rotation) -> RpyAngles {
    let m = &r.0;
    let (r20, r21, r22) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    let c = r21.hypot(r22);
    if c < GIMBAL_EPS {
        let pitch = if -r20 > 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 };
        let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
        return RpyAngles::new(0.0, pitch, yaw);
    }
    RpyAngles::new(r21.atan2(r22), (-r20).atan2(c), m[(1, 0)].atan2(m[(0, 0)]))
}

/// Geodesic angle between two rotations, in `[0, pi]`.
///
/// Evaluated as `atan2(|vee(M - M^T)|, tr(M) - 1)` with `M = Ra Rb^T`, which
/// equals `arccos((tr(M) - 1) / 2)` but keeps full precision near 0.
pub fn rotation_distance(a: &Rotation, b: &Rotation) -> f64 {
    let m = a.0 * b.0.transpose();
    let s = Vec3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    )
    .norm();
    let c = m.trace() - 1.0;
    s.atan2(c).clamp(0.0, PI)
}

/// Smallest geodesic distance between `b` and any yaw-rotated copy of `a`,
/// i.e. `min over phi of rotation_distance(Rz(phi) * a, b)`, in closed form.
pub fn yaw_invariant_distance(a: &Rotation, b: &Rotation) -> f64 {
    let w = a.0 * b.0.transpose();
    // tr(Rz(phi) W) = cos(phi)(W00 + W11) + sin(phi)(W01 - W10) + W22
    let amp = (w[(0, 0)] + w[(1, 1)]).hypot(w[(0, 1)] - w[(1, 0)]);
    let cos_th = ((w[(2, 2)] + amp - 1.0) * 0.5).clamp(-1.0, 1.0);
    cos_th.acos()
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Rigid transform `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: Rotation,
}

impl Pose {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(position: Vec3, rotation: Rotation) -> Self {
        Self { position, rotation }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(t, Rotation::identity())
    }

    pub fn from_rotation(r: Rotation) -> Self {
        Self::new(Vec3::zeros(), r)
    }

    pub fn compose(&self, b: &Pose) -> Pose {
        Pose::new(
            self.rotation.apply(&b.position) + self.position,
            self.rotation * b.rotation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose::new(-rt.apply(&self.position), rt)
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.apply(p) + self.position
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.apply(v)
    }

    /// Translation and rotation distance to `other`.
    pub fn error_to(&self, other: &Pose) -> (f64, f64) {
        (
            (self.position - other.position).norm(),
            rotation_distance(&self.rotation, &other.rotation),
        )
    }
}

pub fn compose_pose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn invert_pose(a: &Pose) -> Pose {
    a.inverse()
}

pub fn transform_point(a: &Pose, p: &Vec3) -> Vec3 {
    a.transform_point(p)
}

/// Wire form of a pose: `{"t": [3], "R": [9 row-major]}`.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    t: [f64; 3],
    #[serde(rename = "R")]
    r: [f64; 9],
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            t: [self.position.x, self.position.y, self.position.z],
            r: self.rotation.to_row_major(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(d)?;
        let r = Rotation::from_row_major(&repr.r);
        if !r.is_valid(1e-6) {
            return Err(serde::de::Error::custom("rotation is not orthonormal"));
        }
        Ok(Pose::new(Vec3::from(repr.t), r))
    }
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[f64; 9]>::deserialize(d)?;
        let r = Rotation::from_row_major(&v);
        if !r.is_valid(1e-6) {
            return Err(serde::de::Error::custom("rotation is not orthonormal"));
        }
        Ok(r)
    }
}
