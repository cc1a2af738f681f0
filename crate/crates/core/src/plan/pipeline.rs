//! Two-step assembly: put A at its goal, then bring B to its pre-assembly pose
//! and push it home along the approach direction.
//!
//! Each step builds a grasp graph for one part, searches keyframes and turns
//! every keyframe pair into arm motion. Grasping and releasing go straight in
//! and out along the approach axis; carrying lifts the part, moves it with
//! Transition-RRT and sets it down again.

use super::assembly::{retract_grasps, AssemblySpec};
use super::graph::{build_grasp_graph, search_keyframes, EdgeKind, GraphConfig, GraphEnds, GraphWorld, KeyframePlan};
use super::trrt::{plan_motion, ConfigSpace, TrrtConfig};
use super::PlanError;
use crate::collision::{capsule_distance, capsules_hit, signed_body_distance, ConvexBody, Obstacle};
use crate::grasp::{collision_filter, sample_antipodal_grasps, transform_grasps, FrameTag, Grasp, GraspSamplerConfig, GraspSet};
use crate::mesh::TriMesh;
use crate::placement::{stable_placements, StablePlacement, TableModel};
use crate::robot::{joint_distance_inf, JointConfig, RobotModel, DOF};
use crate::se3::{Pose, Vec3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Interpenetration allowed between parts and the table, so that resting and
/// assembled contact counts as free (m).
pub const CONTACT_TOL: f64 = 1e-5;

/// Clearance below which the motion cost saturates (m).
const MIN_COST_CLEARANCE: f64 = 1e-3;

/// Clearance beyond which the arm counts as in open space (m).
const MAX_COST_CLEARANCE: f64 = 0.05;

/// Precision of the IK used on the insertion (m and rad).
const INSERT_IK_TOL: f64 = 1e-10;

/// Everything the planner precomputes for one part.
#[derive(Debug, Clone)]
pub struct PartModel {
    pub name: String,
    pub mesh: TriMesh,
    pub body: ConvexBody,
    pub placements: Vec<StablePlacement>,
    /// Grasps in the part frame (tag `f`).
    pub free: GraspSet,
}

impl PartModel {
    pub fn new(
        name: impl Into<String>,
        mesh: TriMesh,
        robot: &RobotModel,
        sampler: &GraspSamplerConfig,
        margin_fraction: f64,
    ) -> Result<Self, PlanError> {
        let body = ConvexBody::from_mesh(&mesh).ok_or(PlanError::BadSpec("part mesh encloses no volume"))?;
        let placements = stable_placements(&mesh, margin_fraction)?;
        let free = sample_antipodal_grasps(&mesh, &robot.gripper, sampler)?;
        Ok(Self {
            name: name.into(),
            mesh,
            body,
            placements,
            free,
        })
    }

    fn obstacle(&self, pose: Pose) -> Obstacle {
        Obstacle {
            body: self.body.clone(),
            pose,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PipelineConfig {
    pub graph: GraphConfig,
    pub trrt: TrrtConfig,
    /// Height a carried part is lifted to before and after moving (m).
    pub lift_height: f64,
    /// Distance the gripper backs off along its approach axis (m).
    pub approach_offset: f64,
    /// Spacing of Cartesian targets on straight-line moves (m).
    pub cartesian_step: f64,
    /// A part closer than this to its goal is not moved (m and rad).
    pub goal_tol: f64,
    /// Goal grasps tried for the insertion before giving up.
    pub insertion_retries: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            graph: GraphConfig::default(),
            trrt: TrrtConfig::default(),
            lift_height: 0.06,
            approach_offset: 0.05,
            cartesian_step: 0.002,
            goal_tol: 1e-6,
            insertion_retries: 8,
        }
    }
}

pub struct PipelineInput<'a> {
    pub robot: &'a RobotModel,
    pub table: &'a TableModel,
    pub a: &'a PartModel,
    pub b: &'a PartModel,
    /// Corrected detections.
    pub init_a: Pose,
    pub init_b: Pose,
    pub spec: AssemblySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    Transit,
    Transfer,
    Insert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticObject {
    pub name: String,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Segment {
    #[serde(rename = "type")]
    pub kind: SegmentKind,
    /// Part carried by the gripper, if any.
    pub object: Option<String>,
    pub grasp_id: Option<usize>,
    /// Finger separation used for the gripper geometry (m).
    pub opening: f64,
    pub waypoints: Vec<JointConfig>,
    /// Pose of the carried part at each waypoint; empty when nothing is carried.
    pub object_poses: Vec<Pose>,
    /// Parts resting in the scene during the segment.
    pub static_objects: Vec<StaticObject>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
}

impl Trajectory {
    pub fn count(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StepReport {
    pub object: String,
    /// The part already sat at its goal.
    pub skipped: bool,
    pub circles: usize,
    pub nodes: usize,
    pub keyframes: usize,
    pub transfers: usize,
    pub regrasps: usize,
    /// Goal grasps whose insertion could not be tracked.
    pub rejected_goal_grasps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineReport {
    pub steps: Vec<StepReport>,
    pub segments: usize,
    pub waypoints: usize,
    /// Largest distance of the carried part from the insertion line (m).
    pub insertion_lateral_deviation: f64,
    /// Error of the final B-in-A pose against the taught one (m, rad).
    pub assembled_position_error: f64,
    pub assembled_rotation_error: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub trajectory: Trajectory,
    pub report: PipelineReport,
    pub plans: Vec<KeyframePlan>,
}

/// Collision checker for one segment: the arm with its gripper at a fixed
/// opening, the resting parts and the table, and optionally a carried part.
struct Checker<'a> {
    robot: &'a RobotModel,
    statics: Vec<Obstacle>,
    opening: f64,
    /// Carried body and its pose in the palm frame.
    held: Option<(&'a ConvexBody, Pose)>,
}

impl Checker<'_> {
    fn capsules(&self, q: &JointConfig) -> Vec<crate::collision::Capsule> {
        let mut caps = self.robot.arm_capsules(q);
        caps.extend(self.robot.gripper_capsules_at(&self.robot.fk(q), self.opening));
        caps
    }

    fn clearance(&self, q: &JointConfig) -> f64 {
        let mut best = f64::INFINITY;
        for c in self.capsules(q) {
            for o in &self.statics {
                best = best.min(capsule_distance(&c, &o.body, &o.pose));
            }
        }
        best
    }

    fn held_free(&self, q: &JointConfig) -> bool {
        let Some((body, in_palm)) = self.held else { return true };
        let pose = self.robot.fk(q).compose(&in_palm);
        self.statics
            .iter()
            .all(|o| signed_body_distance(body, &pose, &o.body, &o.pose) >= -CONTACT_TOL)
            && self
                .robot
                .arm_capsules(q)
                .iter()
                .all(|c| capsule_distance(c, body, &pose) > 0.0)
    }

    fn held_pose(&self, q: &JointConfig) -> Option<Pose> {
        self.held.map(|(_, in_palm)| self.robot.fk(q).compose(&in_palm))
    }
}

impl ConfigSpace for Checker<'_> {
    fn limits(&self) -> [(f64, f64); DOF] {
        std::array::from_fn(|i| (self.robot.joints[i].lower, self.robot.joints[i].upper))
    }

    fn is_free(&self, q: &JointConfig) -> bool {
        self.robot.within_limits(q) && !capsules_hit(&self.capsules(q), &self.statics, 0.0) && self.held_free(q)
    }

    fn cost(&self, q: &JointConfig) -> f64 {
        1.0 / self.clearance(q).clamp(MIN_COST_CLEARANCE, MAX_COST_CLEARANCE)
    }
}

struct Planner<'a> {
    robot: &'a RobotModel,
    table: &'a TableModel,
    cfg: PipelineConfig,
    motions: u64,
}

/// A part resting somewhere in the scene.
#[derive(Clone, Copy)]
struct Resting<'a> {
    part: &'a PartModel,
    pose: Pose,
}

impl<'a> Planner<'a> {
    fn checker(&self, statics: &[Resting<'a>], opening: f64, held: Option<(&'a ConvexBody, Pose)>) -> Checker<'a> {
        let mut obs: Vec<Obstacle> = statics.iter().map(|r| r.part.obstacle(r.pose)).collect();
        obs.push(Obstacle {
            body: ConvexBody::table_slab(self.table),
            pose: Pose::identity(),
        });
        Checker {
            robot: self.robot,
            statics: obs,
            opening,
            held,
        }
    }

    fn motion(&mut self, chk: &Checker<'_>, a: &JointConfig, b: &JointConfig) -> Result<Vec<JointConfig>, PlanError> {
        let cfg = TrrtConfig {
            seed: self.cfg.trrt.seed.wrapping_add(self.motions),
            ..self.cfg.trrt
        };
        self.motions += 1;
        plan_motion(chk, a, b, &cfg)
    }

    /// Joint path moving the palm by `delta` at fixed orientation, starting at `q0`.
    fn linear(&self, chk: &Checker<'_>, q0: &JointConfig, delta: Vec3, precise: bool) -> Result<Vec<JointConfig>, PlanError> {
        let start = self.robot.fk(q0);
        let n = (delta.norm() / self.cfg.cartesian_step).ceil().max(1.0) as usize;
        let mut out = vec![*q0];
        let mut q = *q0;
        for i in 0..n {
            let (s0, s1) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
            q = self.track(&q, &start, &delta, s0, s1, 0, precise, &mut out)?;
        }
        if let Some(bad) = out.iter().position(|q| !chk.is_free(q)) {
            log::debug!("straight-line waypoint {bad} of {} collides", out.len());
            return Err(PlanError::Cartesian("straight-line move collides"));
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn track(
        &self,
        q: &JointConfig,
        start: &Pose,
        delta: &Vec3,
        s0: f64,
        s1: f64,
        depth: u32,
        precise: bool,
        out: &mut Vec<JointConfig>,
    ) -> Result<JointConfig, PlanError> {
        let target = Pose::new(start.position + delta * s1, start.rotation);
        let next = self.robot.ik_from(&target, q).and_then(|n| {
            if precise {
                self.robot.refine_ik(&target, &n, INSERT_IK_TOL)
            } else {
                Some(n)
            }
        });
        match next {
            Some(n) if joint_distance_inf(q, &n) <= self.cfg.trrt.max_joint_step => {
                out.push(n);
                Ok(n)
            }
            _ if depth < 8 => {
                let mid = 0.5 * (s0 + s1);
                let qm = self.track(q, start, delta, s0, mid, depth + 1, precise, out)?;
                self.track(&qm, start, delta, mid, s1, depth + 1, precise, out)
            }
            _ => Err(PlanError::Cartesian("inverse kinematics lost the line")),
        }
    }

    /// Straight path that ends at `q_end` after moving the palm by `delta`.
    fn linear_into(&self, chk: &Checker<'_>, q_end: &JointConfig, delta: Vec3) -> Result<Vec<JointConfig>, PlanError> {
        let mut p = self.linear(chk, q_end, -delta, false)?;
        p.reverse();
        Ok(p)
    }
}

fn approach_of(robot: &RobotModel, q: &JointConfig) -> Vec3 {
    robot.fk(q).rotation.column(2)
}

fn append(path: &mut Vec<JointConfig>, more: &[JointConfig]) {
    let skip = usize::from(path.last().is_some_and(|l| more.first() == Some(l)));
    path.extend_from_slice(&more[skip..]);
}

fn statics_json(statics: &[Resting<'_>]) -> Vec<StaticObject> {
    statics
        .iter()
        .map(|r| StaticObject {
            name: r.part.name.clone(),
            pose: r.pose,
        })
        .collect()
}

struct StepGoal {
    pose: Pose,
    resting: bool,
    allowed: BTreeSet<usize>,
    /// World displacement of the insertion that follows, if any.
    insert: Option<Vec3>,
}

struct StepOutcome {
    segments: Vec<Segment>,
    report: StepReport,
    plan: Option<KeyframePlan>,
    q_end: JointConfig,
    lateral: f64,
}

impl<'a> Planner<'a> {
    fn step(
        &mut self,
        part: &'a PartModel,
        init: Pose,
        goal: &StepGoal,
        others: &[Resting<'a>],
        q_home: JointConfig,
    ) -> Result<StepOutcome, PlanError> {
        let mut report = StepReport {
            object: part.name.clone(),
            skipped: false,
            circles: 0,
            nodes: 0,
            keyframes: 0,
            transfers: 0,
            regrasps: 0,
            rejected_goal_grasps: Vec::new(),
        };
        let (dp, dr) = init.error_to(&goal.pose);
        if goal.insert.is_none() && dp < self.cfg.goal_tol && dr < self.cfg.goal_tol {
            report.skipped = true;
            return Ok(StepOutcome {
                segments: Vec::new(),
                report,
                plan: None,
                q_end: q_home,
                lateral: 0.0,
            });
        }

        let obstacles: Vec<Obstacle> = others.iter().map(|r| r.part.obstacle(r.pose)).collect();
        let world = GraphWorld {
            robot: self.robot,
            table: self.table,
            body: &part.body,
            obstacles: &obstacles,
        };
        let ends = GraphEnds {
            init,
            goal: goal.pose,
            goal_resting: goal.resting,
            goal_allowed: Some(goal.allowed.clone()),
        };
        let mut graph = build_grasp_graph(&world, &part.free, &part.placements, &ends, &self.cfg.graph)
            .map_err(|e| e.at("grasp graph"))?;
        report.circles = graph.circles.len();
        report.nodes = graph.node_count();

        // Search, and drop goal grasps whose insertion cannot be followed.
        let mut insert_path = None;
        let plan = loop {
            let plan = search_keyframes(&graph, &self.cfg.graph).map_err(|e| e.at("keyframe search"))?;
            let Some(delta) = goal.insert else { break plan };
            let last = plan.keyframes.last().expect("plans are never empty");
            let g = part.free.get(last.grasp_id).expect("graph ids come from the free set");
            let chk = self.checker(others, g.opening(), Some((&part.body, g.palm_pose().inverse())));
            // Start from the exact pre-assembly grip, not the coarser graph IK.
            let palm = goal.pose.compose(&g.palm_pose());
            let tracked = match self.robot.refine_ik(&palm, &last.config, INSERT_IK_TOL) {
                Some(q0) if joint_distance_inf(&q0, &last.config) <= self.cfg.trrt.max_joint_step => {
                    self.linear(&chk, &q0, delta, true)
                }
                _ => Err(PlanError::Cartesian("pre-assembly grip cannot be refined")),
            };
            match tracked {
                Ok(p) => {
                    insert_path = Some(p);
                    break plan;
                }
                Err(e) => {
                    log::debug!("insertion with grasp {} failed: {e}", last.grasp_id);
                    report.rejected_goal_grasps.push(last.grasp_id);
                    if report.rejected_goal_grasps.len() > self.cfg.insertion_retries {
                        return Err(e.at("insertion"));
                    }
                    let id = last.grasp_id;
                    graph.circles.last_mut().expect("bottom circle").nodes.retain(|n| n.grasp != id);
                }
            }
        };
        report.keyframes = plan.keyframes.len();
        report.transfers = plan.transfer_count();
        report.regrasps = plan.segments.len() - report.transfers;

        let mut segments = Vec::new();
        let mut q = q_home;
        let grasp = |id: usize| -> Grasp { *part.free.get(id).expect("graph ids come from the free set") };
        let holding = |g: &Grasp| Some((&part.body, g.palm_pose().inverse()));
        let off = self.cfg.approach_offset;
        let lift = Vec3::new(0.0, 0.0, self.cfg.lift_height);
        let resting_here = |pose: Pose| {
            let mut s = others.to_vec();
            s.push(Resting { part, pose });
            s
        };

        // Reach the first grasp.
        let k0 = &plan.keyframes[0];
        let g0 = grasp(k0.grasp_id);
        let statics = resting_here(k0.object_pose);
        let chk = self.checker(&statics, g0.opening(), None);
        let stage = format!("{}: reach grasp {}", part.name, k0.grasp_id);
        let approach = self
            .linear_into(&chk, &k0.config, approach_of(self.robot, &k0.config) * off)
            .map_err(|e| e.at(stage.clone()))?;
        let mut path = self.motion(&chk, &q, &approach[0]).map_err(|e| e.at(stage.clone()))?;
        append(&mut path, &approach);
        q = *path.last().expect("non-empty");
        segments.push(Segment {
            kind: SegmentKind::Transit,
            object: None,
            grasp_id: Some(k0.grasp_id),
            opening: g0.opening(),
            waypoints: path,
            object_poses: Vec::new(),
            static_objects: statics_json(&statics),
        });

        for (w, kind) in plan.keyframes.windows(2).zip(&plan.segments) {
            let (from, to) = (&w[0], &w[1]);
            match kind {
                EdgeKind::Transfer => {
                    let g = grasp(from.grasp_id);
                    let chk = self.checker(others, g.opening(), holding(&g));
                    let stage = format!("{}: transfer with grasp {}", part.name, g.id);
                    let up = self.linear(&chk, &q, lift, false).map_err(|e| e.at(stage.clone()))?;
                    let down = self.linear_into(&chk, &to.config, -lift).map_err(|e| e.at(stage.clone()))?;
                    let mut path = up;
                    let mid = self.motion(&chk, path.last().expect("non-empty"), &down[0]).map_err(|e| e.at(stage.clone()))?;
                    append(&mut path, &mid);
                    append(&mut path, &down);
                    q = *path.last().expect("non-empty");
                    let object_poses = path.iter().map(|x| chk.held_pose(x).expect("held")).collect();
                    segments.push(Segment {
                        kind: SegmentKind::Transfer,
                        object: Some(part.name.clone()),
                        grasp_id: Some(g.id),
                        opening: g.opening(),
                        waypoints: path,
                        object_poses,
                        static_objects: statics_json(others),
                    });
                }
                EdgeKind::Transit => {
                    let (ga, gb) = (grasp(from.grasp_id), grasp(to.grasp_id));
                    let statics = resting_here(from.object_pose);
                    let stage = format!("{}: regrasp {} to {}", part.name, ga.id, gb.id);
                    let chk_a = self.checker(&statics, ga.opening(), None);
                    let away = self
                        .linear(&chk_a, &q, -approach_of(self.robot, &q) * off, false)
                        .map_err(|e| e.at(stage.clone()))?;
                    let chk_b = self.checker(&statics, ga.opening().max(gb.opening()), None);
                    let back = self
                        .linear_into(&chk_b, &to.config, approach_of(self.robot, &to.config) * off)
                        .map_err(|e| e.at(stage.clone()))?;
                    let mut path = away;
                    let mid = self.motion(&chk_b, path.last().expect("non-empty"), &back[0]).map_err(|e| e.at(stage.clone()))?;
                    append(&mut path, &mid);
                    append(&mut path, &back);
                    q = *path.last().expect("non-empty");
                    segments.push(Segment {
                        kind: SegmentKind::Transit,
                        object: None,
                        grasp_id: Some(gb.id),
                        opening: ga.opening().max(gb.opening()),
                        waypoints: path,
                        object_poses: Vec::new(),
                        static_objects: statics_json(&statics),
                    });
                }
            }
        }

        let last = plan.keyframes.last().expect("non-empty");
        let g = grasp(last.grasp_id);
        let mut lateral = 0.0;
        let mut final_pose = goal.pose;
        if let (Some(delta), Some(path)) = (goal.insert, insert_path) {
            let chk = self.checker(others, g.opening(), holding(&g));
            let object_poses: Vec<Pose> = path.iter().map(|x| chk.held_pose(x).expect("held")).collect();
            // The carry ends on the refined grip the insertion starts from.
            if let Some(prev) = segments.last_mut().filter(|s: &&mut Segment| s.kind == SegmentKind::Transfer) {
                prev.waypoints.push(path[0]);
                prev.object_poses.push(object_poses[0]);
            }
            let p0 = goal.pose.position;
            let dir = delta.normalize();
            for p in &object_poses {
                let r = p.position - p0;
                lateral = f64::max(lateral, (r - dir * r.dot(&dir)).norm());
            }
            final_pose = *object_poses.last().expect("non-empty");
            q = *path.last().expect("non-empty");
            segments.push(Segment {
                kind: SegmentKind::Insert,
                object: Some(part.name.clone()),
                grasp_id: Some(g.id),
                opening: g.opening(),
                waypoints: path,
                object_poses,
                static_objects: statics_json(others),
            });
        }

        // Let go and return home.
        let statics = resting_here(final_pose);
        let chk = self.checker(&statics, g.opening(), None);
        let stage = format!("{}: release", part.name);
        let mut path = self
            .linear(&chk, &q, -approach_of(self.robot, &q) * off, false)
            .map_err(|e| e.at(stage.clone()))?;
        let home = self.motion(&chk, path.last().expect("non-empty"), &q_home).map_err(|e| e.at(stage))?;
        append(&mut path, &home);
        segments.push(Segment {
            kind: SegmentKind::Transit,
            object: None,
            grasp_id: None,
            opening: g.opening(),
            waypoints: path,
            object_poses: Vec::new(),
            static_objects: statics_json(&statics),
        });

        Ok(StepOutcome {
            segments,
            report,
            plan: Some(plan),
            q_end: q_home,
            lateral,
        })
    }
}

/// Lowest point of a placed part.
fn lowest(part: &PartModel, pose: &Pose) -> f64 {
    part.mesh
        .vertices
        .iter()
        .map(|v| pose.transform_point(v).z)
        .fold(f64::INFINITY, f64::min)
}

/// Plans the whole assembly from the home configuration. Step A moves A to
/// its goal with B as an obstacle; step B moves B to its pre-assembly pose
/// over A and inserts it along the approach direction.
pub fn assemble_pipeline(input: &PipelineInput<'_>, cfg: &PipelineConfig) -> Result<PipelineOutput, PlanError> {
    let PipelineInput {
        robot,
        table,
        a,
        b,
        init_a,
        init_b,
        spec,
    } = *input;
    let goal_a = spec.world_pose_a();
    let pre_b = spec.world_pre_pose_b();
    let final_b = spec.world_final_pose_b();

    let check_goal = || -> Result<(), PlanError> {
        if signed_body_distance(&a.body, &goal_a, &b.body, &final_b) < -CONTACT_TOL {
            return Err(PlanError::GoalCollision(format!("{} and {} overlap when assembled", a.name, b.name)));
        }
        if signed_body_distance(&a.body, &goal_a, &b.body, &init_b) < -CONTACT_TOL {
            return Err(PlanError::GoalCollision(format!("goal of {} overlaps {} where it lies", a.name, b.name)));
        }
        if signed_body_distance(&a.body, &goal_a, &b.body, &pre_b) < -CONTACT_TOL {
            return Err(PlanError::GoalCollision(format!("{} overlaps {} before insertion", b.name, a.name)));
        }
        if lowest(a, &goal_a) < table.height - CONTACT_TOL {
            return Err(PlanError::GoalCollision(format!("goal of {} sinks into the table", a.name)));
        }
        let p = goal_a.position;
        if !table.contains_xy(p.x, p.y) {
            return Err(PlanError::GoalCollision(format!("goal of {} is off the table", a.name)));
        }
        Ok(())
    };
    check_goal().map_err(|e| e.at("goal check"))?;

    // Assembly grasps in the A-local frame, each clear of the other part.
    let ga_a = collision_filter(
        &transform_grasps(&a.free, &Pose::identity(), FrameTag::AssemblyRaw)?,
        robot,
        &[b.obstacle(spec.relative_pose)],
        None,
    );
    let gb_a = collision_filter(
        &transform_grasps(&b.free, &spec.relative_pose, FrameTag::AssemblyRaw)?,
        robot,
        &[a.obstacle(Pose::identity())],
        None,
    );
    let retracted = retract_grasps(&ga_a, &gb_a, &spec, robot).map_err(|e| e.at("retraction"))?;
    if retracted.a.is_empty() || retracted.b.is_empty() {
        return Err(PlanError::NoPath(format!(
            "{} reachable pre-assembly grasps on {}, {} on {}",
            retracted.a.len(),
            a.name,
            retracted.b.len(),
            b.name
        ))
        .at("retraction"));
    }

    let mut planner = Planner {
        robot,
        table,
        cfg: *cfg,
        motions: 0,
    };
    let home = robot.home;
    let step_a = planner
        .step(
            a,
            init_a,
            &StepGoal {
                pose: goal_a,
                resting: true,
                allowed: retracted.a.ids(),
                insert: None,
            },
            &[Resting { part: b, pose: init_b }],
            home,
        )
        .map_err(|e| e.at(format!("step A ({})", a.name)))?;
    let step_b = planner
        .step(
            b,
            init_b,
            &StepGoal {
                pose: pre_b,
                resting: false,
                allowed: retracted.b.ids(),
                insert: Some(spec.world_insertion()),
            },
            &[Resting { part: a, pose: goal_a }],
            step_a.q_end,
        )
        .map_err(|e| e.at(format!("step B ({})", b.name)))?;

    let mut segments = step_a.segments;
    segments.extend(step_b.segments);
    let trajectory = Trajectory { segments };
    let achieved = trajectory
        .segments
        .iter()
        .rev()
        .find(|s| s.kind == SegmentKind::Insert)
        .and_then(|s| s.object_poses.last().copied())
        .unwrap_or(final_b);
    let (pe, re) = goal_a.inverse().compose(&achieved).error_to(&spec.relative_pose);
    let report = PipelineReport {
        steps: vec![step_a.report, step_b.report],
        segments: trajectory.segments.len(),
        waypoints: trajectory.segments.iter().map(|s| s.waypoints.len()).sum(),
        insertion_lateral_deviation: step_b.lateral,
        assembled_position_error: pe,
        assembled_rotation_error: re,
    };
    Ok(PipelineOutput {
        trajectory,
        report,
        plans: step_a.plan.into_iter().chain(step_b.plan).collect(),
    })
}
