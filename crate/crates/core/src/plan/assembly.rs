//! Pre-assembly retraction and the world placement of the grasp sets.
//!
//! Everything here is first written in the local frame of object A, where A
//! sits at the identity and B at the taught relative pose. The pre-assembly
//! poses pull the parts apart along the approach direction, A by `+s * v` and B
//! by `-s * v`, with `s` the retraction scale times the approach length.

use super::PlanError;
use crate::grasp::{ik_filter, rebase_grasps, transform_grasps, FrameTag, GraspSet};
use crate::robot::{JointConfig, RobotModel};
use crate::se3::{Pose, Vec3};
use crate::teaching::TeachingRecord;
use serde::{Deserialize, Serialize};

pub const DEFAULT_RETRACTION_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssemblySpec {
    /// B in the frame of A.
    pub relative_pose: Pose,
    /// Unit approach direction in the frame of A.
    pub approach: Vec3,
    /// Length of the raw approach vector (m).
    pub approach_length: f64,
    pub retraction_scale: f64,
    /// World pose the A-local frame is mapped to.
    pub world_goal_a: Pose,
}

impl AssemblySpec {
    pub fn new(
        relative_pose: Pose,
        approach: Vec3,
        approach_length: f64,
        retraction_scale: f64,
        world_goal_a: Pose,
    ) -> Result<Self, PlanError> {
        if (approach.norm() - 1.0).abs() > 1e-9 {
            return Err(PlanError::BadSpec("approach direction must be a unit vector"));
        }
        if !(approach_length > 0.0) || !approach_length.is_finite() {
            return Err(PlanError::BadSpec("approach length must be positive"));
        }
        if !(retraction_scale >= 0.0) || !retraction_scale.is_finite() {
            return Err(PlanError::BadSpec("retraction scale must be non-negative"));
        }
        Ok(Self {
            relative_pose,
            approach,
            approach_length,
            retraction_scale,
            world_goal_a,
        })
    }

    pub fn from_record(record: &TeachingRecord, world_goal_a: Pose) -> Result<Self, PlanError> {
        Self::new(
            record.relative_pose,
            record.approach,
            record.approach_length,
            DEFAULT_RETRACTION_SCALE,
            world_goal_a,
        )
    }

    /// Copy whose world frame puts A, once retracted, exactly at `resting_a`.
    pub fn with_resting_goal(mut self, resting_a: &Pose) -> Self {
        let (a_p, _) = pre_assembly_poses(&self);
        self.world_goal_a = resting_a.compose(&a_p.inverse());
        self
    }

    /// `v` scaled to its taught length.
    pub fn raw_approach(&self) -> Vec3 {
        self.approach * self.approach_length
    }

    /// Offset applied to each part when retracting.
    pub fn retraction(&self) -> Vec3 {
        self.raw_approach() * self.retraction_scale
    }

    /// World pose of A at the goal. A does not move between pre-assembly and
    /// assembly, so this is its pre-assembly pose.
    pub fn world_pose_a(&self) -> Pose {
        self.world_goal_a.compose(&pre_assembly_poses(self).0)
    }

    /// World pose of B before the insertion.
    pub fn world_pre_pose_b(&self) -> Pose {
        self.world_goal_a.compose(&pre_assembly_poses(self).1)
    }

    /// World pose of B after the insertion, at the taught pose relative to
    /// where A actually rests.
    pub fn world_final_pose_b(&self) -> Pose {
        self.world_pose_a().compose(&self.relative_pose)
    }

    /// World-frame insertion displacement of B.
    pub fn world_insertion(&self) -> Vec3 {
        self.world_final_pose_b().position - self.world_pre_pose_b().position
    }
}

/// Pre-assembly poses of A and B in the local frame of A.
pub fn pre_assembly_poses(spec: &AssemblySpec) -> (Pose, Pose) {
    let d = spec.retraction();
    let a = Pose::from_translation(d);
    let b = Pose::new(spec.relative_pose.position - d, spec.relative_pose.rotation);
    (a, b)
}

fn shifted(g: &GraspSet, d: Vec3) -> Result<GraspSet, PlanError> {
    Ok(transform_grasps(g, &Pose::from_translation(d), FrameTag::PreassemblyRaw)?)
}

/// Retracted grasp sets with their IK solutions in the world.
#[derive(Debug, Clone)]
pub struct Retracted {
    pub a: GraspSet,
    pub a_configs: Vec<JointConfig>,
    pub b: GraspSet,
    pub b_configs: Vec<JointConfig>,
}

/// Moves A's assembly grasps by `+s * v` and B's by `-s * v`, then keeps those
/// the robot can reach once the A-local frame is placed in the world.
pub fn retract_grasps(
    ga_a: &GraspSet,
    gb_a: &GraspSet,
    spec: &AssemblySpec,
    robot: &RobotModel,
) -> Result<Retracted, PlanError> {
    let d = spec.retraction();
    let a_raw = shifted(ga_a, d)?;
    let b_raw = shifted(gb_a, -d)?;
    let (a, a_configs) = ik_in_world(&a_raw, &spec.world_goal_a, robot);
    let (b, b_configs) = ik_in_world(&b_raw, &spec.world_goal_a, robot);
    if a.is_empty() || b.is_empty() {
        log::warn!("retraction left {} grasps on A and {} on B", a.len(), b.len());
    }
    Ok(Retracted { a, a_configs, b, b_configs })
}

/// IK filter of a local set placed by `world`; the surviving grasps stay local.
fn ik_in_world(g: &GraspSet, world: &Pose, robot: &RobotModel) -> (GraspSet, Vec<JointConfig>) {
    let (kept, q) = ik_filter(&rebase_grasps(g, world), robot);
    let ids = kept.ids();
    let local = GraspSet {
        tag: kept.tag,
        grasps: g.grasps.iter().filter(|x| ids.contains(&x.id)).copied().collect(),
    };
    (local, q)
}

#[derive(Debug, Clone)]
pub struct WorldGrasps {
    pub a_assembly: GraspSet,
    pub a_pre: GraspSet,
    pub b_assembly: GraspSet,
    pub b_pre: GraspSet,
}

/// Places the local sets in the world with `world_goal_a`. A's assembly set
/// is its pre-assembly set: nothing moves A between the two.
pub fn world_grasps(
    ga_p: &GraspSet,
    gb_a: &GraspSet,
    gb_p: &GraspSet,
    spec: &AssemblySpec,
) -> Result<WorldGrasps, PlanError> {
    let w = &spec.world_goal_a;
    let a_pre = transform_grasps(ga_p, w, FrameTag::World)?;
    Ok(WorldGrasps {
        a_assembly: a_pre.clone(),
        a_pre,
        b_assembly: transform_grasps(gb_a, w, FrameTag::World)?,
        b_pre: transform_grasps(gb_p, w, FrameTag::World)?,
    })
}
