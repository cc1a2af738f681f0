//! Parallel-jaw grasps: antipodal sampling in the object frame, transforms
//! between the frames of the planning pipeline, and IK and collision filters.

use crate::collision::{capsules_hit, ConvexBody, Obstacle};
use crate::mesh::{cluster_faces, plane_basis, ray_mesh_nearest, TriMesh, DEFAULT_CLUSTER_TOL};
use crate::placement::TableModel;
use crate::robot::{Gripper, JointConfig, RobotModel};
use crate::se3::{Pose, Rotation, Vec3};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Error, Debug, PartialEq)]
pub enum GraspError {
    #[error("cannot move grasps from frame {from:?} to {to:?}")]
    BadTransition { from: FrameTag, to: FrameTag },
    #[error("grasp {0} is malformed: {1}")]
    Malformed(usize, &'static str),
    #[error("duplicate grasp id {0}")]
    DuplicateId(usize),
    #[error("grasp set mixes frames {0:?} and {1:?}")]
    MixedFrames(FrameTag, FrameTag),
    #[error("mesh must be watertight to sample grasps")]
    NotWatertight,
}

/// Frame a grasp set is expressed in. Primed variants are transformed but not
/// yet filtered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrameTag {
    #[serde(rename = "f")]
    Free,
    #[serde(rename = "s'")]
    SurfaceRaw,
    #[serde(rename = "s")]
    Surface,
    #[serde(rename = "a'")]
    AssemblyRaw,
    #[serde(rename = "a")]
    Assembly,
    #[serde(rename = "p'")]
    PreassemblyRaw,
    #[serde(rename = "p")]
    Preassembly,
    /// An assembly or pre-assembly set placed in the world.
    #[serde(rename = "g")]
    World,
}

impl FrameTag {
    pub fn is_raw(self) -> bool {
        matches!(self, Self::SurfaceRaw | Self::AssemblyRaw | Self::PreassemblyRaw)
    }

    /// Tag after a filter pass.
    pub fn filtered(self) -> Self {
        match self {
            Self::SurfaceRaw => Self::Surface,
            Self::AssemblyRaw => Self::Assembly,
            Self::PreassemblyRaw => Self::Preassembly,
            t => t,
        }
    }

    /// Rigid transforms allowed between frames.
    pub fn can_become(self, to: Self) -> bool {
        use FrameTag::*;
        matches!(
            (self, to),
            (Free, SurfaceRaw)
                | (Free, AssemblyRaw)
                | (Assembly, PreassemblyRaw)
                | (Assembly, World)
                | (Preassembly, World)
                | (World, World)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub id: usize,
    pub p0: Vec3,
    pub p1: Vec3,
    /// Palm orientation: x along `p1 - p0`, z along the approach.
    #[serde(rename = "R")]
    pub rotation: Rotation,
}

impl Grasp {
    pub fn opening(&self) -> f64 {
        (self.p1 - self.p0).norm()
    }

    /// Palm frame: midway between the contacts.
    pub fn palm_pose(&self) -> Pose {
        Pose::new((self.p0 + self.p1) / 2.0, self.rotation)
    }

    pub fn approach(&self) -> Vec3 {
        self.rotation.column(2)
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        Self {
            id: self.id,
            p0: pose.transform_point(&self.p0),
            p1: pose.transform_point(&self.p1),
            rotation: pose.rotation * self.rotation,
        }
    }

    pub fn validate(&self, max_opening: f64) -> Result<(), GraspError> {
        let d = self.p1 - self.p0;
        if !(d.norm() > 0.0) {
            return Err(GraspError::Malformed(self.id, "coincident contacts"));
        }
        if d.norm() > max_opening + 1e-12 {
            return Err(GraspError::Malformed(self.id, "wider than the gripper"));
        }
        if (d.normalize().dot(&self.approach())).abs() > 1e-6 {
            return Err(GraspError::Malformed(self.id, "approach not across the contact axis"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspSet {
    pub tag: FrameTag,
    pub grasps: Vec<Grasp>,
}

impl GraspSet {
    pub fn new(tag: FrameTag, grasps: Vec<Grasp>) -> Result<Self, GraspError> {
        let mut seen = BTreeSet::new();
        for g in &grasps {
            if !seen.insert(g.id) {
                return Err(GraspError::DuplicateId(g.id));
            }
        }
        Ok(Self { tag, grasps })
    }

    pub fn len(&self) -> usize {
        self.grasps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grasps.is_empty()
    }

    pub fn ids(&self) -> BTreeSet<usize> {
        self.grasps.iter().map(|g| g.id).collect()
    }

    pub fn get(&self, id: usize) -> Option<&Grasp> {
        self.grasps.iter().find(|g| g.id == id)
    }

    fn keep(&self, mask: &[bool]) -> Self {
        Self {
            tag: self.tag.filtered(),
            grasps: self
                .grasps
                .iter()
                .zip(mask)
                .filter(|(_, &k)| k)
                .map(|(g, _)| *g)
                .collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TaggedGrasp {
    #[serde(flatten)]
    grasp: Grasp,
    tag: FrameTag,
}

impl Serialize for GraspSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.grasps.iter().map(|g| TaggedGrasp { grasp: *g, tag: self.tag }))
    }
}

impl<'de> Deserialize<'de> for GraspSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let items = Vec::<TaggedGrasp>::deserialize(d)?;
        // An empty list carries no tag; it reads back as a free-space set.
        let tag = items.first().map_or(FrameTag::Free, |g| g.tag);
        if let Some(g) = items.iter().find(|g| g.tag != tag) {
            return Err(serde::de::Error::custom(GraspError::MixedFrames(tag, g.tag)));
        }
        GraspSet::new(tag, items.into_iter().map(|g| g.grasp).collect()).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GraspSamplerConfig {
    /// Contact samples per face cluster.
    pub pairs_per_face: usize,
    /// Half-angle of the friction cone (rad).
    pub friction_angle: f64,
    /// Palm rotations tried about each contact axis.
    pub approach_samples: usize,
    pub seed: u64,
}

impl Default for GraspSamplerConfig {
    fn default() -> Self {
        Self {
            pairs_per_face: 50,
            friction_angle: 10f64.to_radians(),
            approach_samples: 12,
            seed: 0,
        }
    }
}

/// Antipodal grasps in the object frame (tag `f`). Each sampled contact shoots
/// a ray inward along its normal; the exit point is the opposing contact if its
/// normal lies in the friction cone of the line joining them. Palm rotations
/// are spread evenly about that line, and candidates whose gripper body would
/// hit the object's hull are dropped.
pub fn sample_antipodal_grasps(
    mesh: &TriMesh,
    gripper: &Gripper,
    cfg: &GraspSamplerConfig,
) -> Result<GraspSet, GraspError> {
    if !mesh.is_watertight() {
        return Err(GraspError::NotWatertight);
    }
    let clusters = cluster_faces(mesh, DEFAULT_CLUSTER_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cos_fric = cfg.friction_angle.cos();
    let eps = 1e-9 * mesh.bounding_radius().max(1e-9);
    let mut axes = Vec::new();
    for c in &clusters {
        let mut cdf = Vec::with_capacity(c.triangles.len());
        let mut acc = 0.0;
        for &t in &c.triangles {
            acc += mesh.triangle_area(t);
            cdf.push(acc);
        }
        for _ in 0..cfg.pairs_per_face {
            let x = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|&v| v < x).min(cdf.len() - 1);
            let t = c.triangles[k];
            let [a, b, cc] = mesh.corners(t);
            let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            let p = a + (b - a) * u + (cc - a) * v;
            let n = mesh.triangle_normal(t);
            let dir = -n;
            let Some(hit) = ray_mesh_nearest(mesh, &p, &dir, eps) else {
                continue;
            };
            let q = p + dir * hit.t;
            let nq = mesh.triangle_normal(hit.triangle);
            if nq.dot(&dir) < cos_fric {
                continue;
            }
            if hit.t > gripper.max_opening || hit.t <= eps {
                continue;
            }
            axes.push((p, q));
        }
    }

    let hull = ConvexBody::from_mesh(mesh);
    let k = cfg.approach_samples.max(1);
    let candidates: Vec<(Vec3, Vec3, Rotation)> = axes
        .iter()
        .flat_map(|&(p, q)| {
            let x = (q - p).normalize();
            let (u, w) = plane_basis(&x);
            (0..k).map(move |i| {
                let th = i as f64 * std::f64::consts::TAU / k as f64;
                let z = u * th.cos() + w * th.sin();
                let y = z.cross(&x);
                (p, q, Rotation::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])))
            })
        })
        .collect();
    let free: Vec<bool> = candidates
        .par_iter()
        .map(|(p, q, r)| {
            let Some(h) = &hull else { return true };
            let palm = Pose::new((p + q) / 2.0, *r);
            let caps: Vec<_> = gripper
                .capsules((q - p).norm())
                .iter()
                .map(|c| c.transformed(&palm))
                .collect();
            !capsules_hit(
                &caps,
                &[Obstacle {
                    body: h.clone(),
                    pose: Pose::identity(),
                }],
                0.0,
            )
        })
        .collect();
    let grasps = candidates
        .into_iter()
        .zip(free)
        .filter(|(_, f)| *f)
        .enumerate()
        .map(|(id, ((p0, p1, rotation), _))| Grasp { id, p0, p1, rotation })
        .collect();
    GraspSet::new(FrameTag::Free, grasps)
}

/// Moves every grasp by `pose` and relabels the set; ids are kept.
pub fn transform_grasps(g: &GraspSet, pose: &Pose, to: FrameTag) -> Result<GraspSet, GraspError> {
    if !g.tag.can_become(to) {
        return Err(GraspError::BadTransition { from: g.tag, to });
    }
    Ok(GraspSet {
        tag: to,
        grasps: g.grasps.iter().map(|x| x.transformed(pose)).collect(),
    })
}

/// Same grasps, same tag, different frame: for round trips and re-anchoring.
pub fn rebase_grasps(g: &GraspSet, pose: &Pose) -> GraspSet {
    GraspSet {
        tag: g.tag,
        grasps: g.grasps.iter().map(|x| x.transformed(pose)).collect(),
    }
}

/// Grasps with an IK solution, and the solutions in the same order.
pub fn ik_filter(g: &GraspSet, robot: &RobotModel) -> (GraspSet, Vec<JointConfig>) {
    let sols: Vec<Option<JointConfig>> = g
        .grasps
        .par_iter()
        .map(|x| robot.solve_ik_default(&x.palm_pose()))
        .collect();
    let mask: Vec<bool> = sols.iter().map(Option::is_some).collect();
    (g.keep(&mask), sols.into_iter().flatten().collect())
}

fn gripper_collides(x: &Grasp, robot: &RobotModel, obstacles: &[Obstacle], table: Option<&TableModel>) -> bool {
    let caps = robot.gripper_capsules_at(&x.palm_pose(), x.opening());
    if let Some(t) = table {
        if caps.iter().any(|c| c.clearance_above(t.height) <= 0.0) {
            return true;
        }
    }
    capsules_hit(&caps, obstacles, 0.0)
}

/// Grasps whose gripper body clears the table top and every obstacle.
pub fn collision_filter(
    g: &GraspSet,
    robot: &RobotModel,
    obstacles: &[Obstacle],
    table: Option<&TableModel>,
) -> GraspSet {
    let mask: Vec<bool> = g
        .grasps
        .par_iter()
        .map(|x| !gripper_collides(x, robot, obstacles, table))
        .collect();
    g.keep(&mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraspLabel {
    /// Reachable and collision free.
    Green,
    /// Collision free but out of reach.
    Blue,
    /// In collision.
    Red,
}

pub fn label_grasps(
    g: &GraspSet,
    robot: &RobotModel,
    obstacles: &[Obstacle],
    table: Option<&TableModel>,
) -> Vec<(usize, GraspLabel)> {
    g.grasps
        .par_iter()
        .map(|x| {
            let label = if gripper_collides(x, robot, obstacles, table) {
                GraspLabel::Red
            } else if robot.solve_ik_default(&x.palm_pose()).is_none() {
                GraspLabel::Blue
            } else {
                GraspLabel::Green
            };
            (x.id, label)
        })
        .collect()
}
