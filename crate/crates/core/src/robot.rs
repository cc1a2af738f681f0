//! A configurable six-joint revolute arm with a parallel-jaw gripper:
//! forward kinematics, geometric Jacobian, damped least-squares IK and the
//! capsule geometry used for collision checks.

use crate::collision::Capsule;
use crate::se3::{Pose, Rotation, Vec3};
use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DOF: usize = 6;
pub type JointConfig = [f64; DOF];

pub const IK_POSITION_TOL: f64 = 1e-4;
pub const IK_ROTATION_TOL: f64 = 1e-3;
const IK_MAX_ITER: usize = 200;
const IK_DAMPING: f64 = 0.05;
/// Largest joint change of one IK iteration (rad).
const IK_MAX_STEP: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Joint {
    /// Joint frame in the previous link frame at zero angle.
    pub origin: Pose,
    /// Rotation axis in the joint frame.
    pub axis: Vec3,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LinkCapsule {
    /// 0 is the base, `i` the frame after joint `i`.
    pub link: usize,
    pub capsule: Capsule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Gripper {
    pub max_opening: f64,
    pub finger_length: f64,
    /// Finger extent along the closing axis.
    pub finger_thickness: f64,
    /// Finger extent across the closing axis.
    pub finger_width: f64,
    pub palm_depth: f64,
    /// Gap left between each finger and its contact when checking a grasp.
    pub finger_clearance: f64,
}

impl Default for Gripper {
    fn default() -> Self {
        Self {
            max_opening: 0.08,
            finger_length: 0.05,
            finger_thickness: 0.01,
            finger_width: 0.02,
            palm_depth: 0.03,
            finger_clearance: 0.003,
        }
    }
}

impl Gripper {
    /// Gripper body in the palm frame for a given finger separation. The palm
    /// frame sits midway between the fingertips, z along the approach, x along
    /// the closing axis.
    pub fn capsules(&self, opening: f64) -> Vec<Capsule> {
        let r = self.finger_thickness / 2.0;
        let x = opening / 2.0 + self.finger_clearance + r;
        let wy = (self.finger_width / 2.0 - r).max(0.0);
        let z0 = -self.finger_length + r;
        let mut caps = Vec::with_capacity(8);
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                caps.push(Capsule::new(
                    Vec3::new(sx * x, sy * wy, z0),
                    Vec3::new(sx * x, sy * wy, 0.0),
                    r,
                ));
            }
        }
        let pr = self.palm_depth / 2.0;
        let half = self.max_opening / 2.0 + self.finger_clearance + self.finger_thickness - pr;
        let zc = -self.finger_length - pr;
        for sy in [-1.0, 1.0] {
            caps.push(Capsule::new(
                Vec3::new(-half.max(0.0), sy * wy, zc),
                Vec3::new(half.max(0.0), sy * wy, zc),
                pr,
            ));
        }
        caps
    }

    /// Distance from the flange to the palm frame along the approach.
    pub fn tool_length(&self) -> f64 {
        self.palm_depth + self.finger_length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RobotModel {
    pub base: Pose,
    pub joints: [Joint; DOF],
    /// Palm frame in the last link frame.
    pub tool: Pose,
    pub capsules: Vec<LinkCapsule>,
    pub gripper: Gripper,
    /// Configuration the arm starts from and returns to between steps.
    pub home: JointConfig,
}

impl Default for RobotModel {
    /// A desk-top arm at the world origin: shoulder 0.2 m up, 0.3 m upper arm,
    /// 0.28 m forearm and a spherical wrist.
    fn default() -> Self {
        let j = |z: f64, axis: Vec3, lim: f64| Joint {
            origin: Pose::from_translation(Vec3::new(0.0, 0.0, z)),
            axis,
            lower: -lim,
            upper: lim,
        };
        let gripper = Gripper::default();
        let cap = |link, z0: f64, z1: f64, r| LinkCapsule {
            link,
            capsule: Capsule::new(Vec3::new(0.0, 0.0, z0), Vec3::new(0.0, 0.0, z1), r),
        };
        Self {
            base: Pose::identity(),
            joints: [
                j(0.10, Vec3::z(), PI),
                j(0.10, Vec3::y(), 2.0),
                j(0.30, Vec3::y(), 2.6),
                j(0.15, Vec3::z(), PI),
                j(0.13, Vec3::y(), 2.3),
                j(0.06, Vec3::z(), PI),
            ],
            tool: Pose::from_translation(Vec3::new(0.0, 0.0, gripper.tool_length())),
            capsules: vec![
                cap(0, 0.0, 0.10, 0.06),
                cap(1, 0.0, 0.10, 0.05),
                cap(2, 0.0, 0.30, 0.04),
                cap(3, 0.0, 0.27, 0.035),
                cap(5, 0.0, 0.05, 0.03),
            ],
            gripper,
            home: [0.0, -0.3, 1.9, 0.0, 1.2, 0.0],
        }
    }
}

impl RobotModel {
    pub fn within_limits(&self, q: &JointConfig) -> bool {
        q.iter()
            .zip(&self.joints)
            .all(|(a, j)| *a >= j.lower && *a <= j.upper)
    }

    pub fn clamp(&self, q: &mut JointConfig) {
        for (a, j) in q.iter_mut().zip(&self.joints) {
            *a = a.clamp(j.lower, j.upper);
        }
    }

    /// World frames of the base and of every link, `DOF + 1` entries.
    pub fn link_frames(&self, q: &JointConfig) -> [Pose; DOF + 1] {
        let mut frames = [self.base; DOF + 1];
        let mut t = self.base;
        for (i, (j, a)) in self.joints.iter().zip(q).enumerate() {
            t = t
                .compose(&j.origin)
                .compose(&Pose::from_rotation(Rotation::from_axis_angle(&j.axis, *a)));
            frames[i + 1] = t;
        }
        frames
    }

    /// World pose of the palm frame.
    pub fn fk(&self, q: &JointConfig) -> Pose {
        self.link_frames(q)[DOF].compose(&self.tool)
    }

    /// Geometric Jacobian of the palm frame: rows 0..3 linear, 3..6 angular,
    /// both in world coordinates.
    pub fn jacobian(&self, q: &JointConfig) -> Matrix6<f64> {
        let frames = self.link_frames(q);
        let tip = frames[DOF].compose(&self.tool).position;
        let mut jac = Matrix6::zeros();
        for i in 0..DOF {
            // Joint i rotates frame i+1 about its own axis at its own origin.
            let f = &frames[i + 1];
            let z = f.rotation.apply(&self.joints[i].axis);
            let lin = z.cross(&(tip - f.position));
            for r in 0..3 {
                jac[(r, i)] = lin[r];
                jac[(r + 3, i)] = z[r];
            }
        }
        jac
    }

    /// World-frame capsules of the arm links.
    pub fn arm_capsules(&self, q: &JointConfig) -> Vec<Capsule> {
        let frames = self.link_frames(q);
        self.capsules
            .iter()
            .map(|c| c.capsule.transformed(&frames[c.link]))
            .collect()
    }

    /// World-frame capsules of the gripper with the given finger separation.
    pub fn gripper_capsules_at(&self, palm: &Pose, opening: f64) -> Vec<Capsule> {
        self.gripper
            .capsules(opening)
            .iter()
            .map(|c| c.transformed(palm))
            .collect()
    }

    /// Eight seeds spread over shoulder side, elbow and wrist flips, aimed at
    /// the target's azimuth.
    pub fn default_seeds(&self, target: &Pose) -> Vec<JointConfig> {
        let local = self.base.inverse().transform_point(&target.position);
        let phi = local.y.atan2(local.x);
        let mut seeds = Vec::with_capacity(8);
        for base in [phi, wrap(phi + PI)] {
            for (j2, j3) in [(0.4, 1.2), (-0.4, -1.2)] {
                for j5 in [1.0, -1.0] {
                    let s = if base == phi { 1.0 } else { -1.0 };
                    seeds.push([base, s * j2, s * j3, 0.0, s * j5, 0.0]);
                }
            }
        }
        seeds
    }

    /// Damped least-squares IK from each seed in turn; the first solution
    /// within tolerance and inside the joint limits wins.
    pub fn solve_ik(&self, target: &Pose, seeds: &[JointConfig]) -> Option<JointConfig> {
        seeds.iter().find_map(|s| self.ik_from(target, s))
    }

    pub fn solve_ik_default(&self, target: &Pose) -> Option<JointConfig> {
        self.solve_ik(target, &self.default_seeds(target))
    }

    pub fn ik_from(&self, target: &Pose, seed: &JointConfig) -> Option<JointConfig> {
        let mut q = *seed;
        self.clamp(&mut q);
        for _ in 0..IK_MAX_ITER {
            let cur = self.fk(&q);
            let ep = target.position - cur.position;
            let er = (target.rotation * cur.rotation.transpose()).log();
            if ep.norm() < IK_POSITION_TOL && er.norm() < IK_ROTATION_TOL {
                return self.within_limits(&q).then_some(q);
            }
            let e = Vector6::new(ep.x, ep.y, ep.z, er.x, er.y, er.z);
            let jac = self.jacobian(&q);
            let jjt = jac * jac.transpose() + Matrix6::identity() * (IK_DAMPING * IK_DAMPING);
            let dq = jac.transpose() * jjt.cholesky()?.solve(&e);
            let scale = (IK_MAX_STEP / dq.amax()).min(1.0);
            for (i, a) in q.iter_mut().enumerate() {
                *a += dq[i] * scale;
            }
            self.clamp(&mut q);
        }
        None
    }

    /// Undamped Newton steps from a nearby solution, for when the IK
    /// tolerance is too coarse. Returns `None` if the error does not drop below
    /// `tol` (m and rad) or a step leaves the joint limits.
    pub fn refine_ik(&self, target: &Pose, q: &JointConfig, tol: f64) -> Option<JointConfig> {
        let mut q = *q;
        for _ in 0..REFINE_MAX_ITER {
            let cur = self.fk(&q);
            let ep = target.position - cur.position;
            let er = (target.rotation * cur.rotation.transpose()).log();
            if ep.norm() < tol && er.norm() < tol {
                return Some(q);
            }
            let e = Vector6::new(ep.x, ep.y, ep.z, er.x, er.y, er.z);
            let dq = self.jacobian(&q).lu().solve(&e)?;
            for (i, a) in q.iter_mut().enumerate() {
                *a += dq[i];
            }
            if !self.within_limits(&q) {
                return None;
            }
        }
        None
    }
}

const REFINE_MAX_ITER: usize = 12;

fn wrap(a: f64) -> f64 {
    crate::se3::wrap_angle(a)
}

/// Largest per-joint difference.
pub fn joint_distance_inf(a: &JointConfig, b: &JointConfig) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn joint_distance(a: &JointConfig, b: &JointConfig) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn lerp(a: &JointConfig, b: &JointConfig, s: f64) -> JointConfig {
    let mut o = *a;
    for i in 0..DOF {
        o[i] = a[i] + (b[i] - a[i]) * s;
    }
    o
}
