//! Conservative collision geometry: capsules for robot links and fingers,
//! convex hulls for objects, a half-space for the table top. Distances are
//! computed with GJK.

use crate::mesh::TriMesh;
use crate::placement::TableModel;
use crate::se3::{Pose, Vec3};
use parry3d_f64::math as pm;
use parry3d_f64::query;
use parry3d_f64::shape::{self, ConvexPolyhedron};
use serde::{Deserialize, Serialize};

/// Thickness of the table slab seen by the arm (m).
pub const TABLE_THICKNESS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vec3, b: Vec3, radius: f64) -> Self {
        assert!(radius > 0.0, "capsule radius must be positive");
        Self { a, b, radius }
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        Self {
            a: pose.transform_point(&self.a),
            b: pose.transform_point(&self.b),
            radius: self.radius,
        }
    }

    /// Signed clearance above the plane `z = height` (negative when it dips below).
    pub fn clearance_above(&self, height: f64) -> f64 {
        self.a.z.min(self.b.z) - self.radius - height
    }

    fn shape(&self) -> shape::Capsule {
        shape::Capsule::new(to_pm(&self.a), to_pm(&self.b), self.radius)
    }
}

/// A convex solid in its own frame.
#[derive(Clone)]
pub struct ConvexBody {
    shape: ConvexPolyhedron,
    vertices: Vec<Vec3>,
}

impl std::fmt::Debug for ConvexBody {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvexBody").field("vertices", &self.vertices.len()).finish()
    }
}

impl ConvexBody {
    /// Hull of the given points, `None` when they are (nearly) coplanar.
    pub fn from_points(points: &[Vec3]) -> Option<Self> {
        let pts: Vec<pm::Vector> = points.iter().map(to_pm).collect();
        let shape = ConvexPolyhedron::from_convex_hull(&pts)?;
        let vertices = shape.points().iter().map(from_pm).collect();
        Some(Self { shape, vertices })
    }

    pub fn from_mesh(mesh: &TriMesh) -> Option<Self> {
        Self::from_points(&mesh.vertices)
    }

    /// Axis-aligned box between two corners.
    pub fn aabb(min: Vec3, max: Vec3) -> Self {
        let mut pts = Vec::with_capacity(8);
        for i in 0..8 {
            pts.push(Vec3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            ));
        }
        Self::from_points(&pts).expect("box corners span a volume")
    }

    /// The table as a slab under its top surface.
    pub fn table_slab(table: &TableModel) -> Self {
        let [x0, y0, x1, y1] = table.bounds;
        Self::aabb(
            Vec3::new(x0, y0, table.height - TABLE_THICKNESS),
            Vec3::new(x1, y1, table.height),
        )
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }
}

/// An obstacle placed in the world.
#[derive(Debug, Clone)]
pub struct Obstacle {
    pub body: ConvexBody,
    pub pose: Pose,
}

/// Separation between a world-frame capsule and a placed body; 0 when they touch
/// or overlap.
pub fn capsule_distance(cap: &Capsule, body: &ConvexBody, pose: &Pose) -> f64 {
    query::distance(&pm::Pose::IDENTITY, &cap.shape(), &to_pm_pose(pose), &body.shape)
        .map(|d| d.distance)
        .unwrap_or(0.0)
}

/// Separation between two placed bodies; 0 when they touch or overlap.
pub fn body_distance(a: &ConvexBody, pa: &Pose, b: &ConvexBody, pb: &Pose) -> f64 {
    query::distance(&to_pm_pose(pa), &a.shape, &to_pm_pose(pb), &b.shape)
        .map(|d| d.distance)
        .unwrap_or(0.0)
}

/// Like [`body_distance`] but negative by the penetration depth when the
/// bodies overlap, so resting contact (about 0) can be told from interpenetration.
pub fn signed_body_distance(a: &ConvexBody, pa: &Pose, b: &ConvexBody, pb: &Pose) -> f64 {
    let d = body_distance(a, pa, b, pb);
    if d > 0.0 {
        return d;
    }
    query::contact(&to_pm_pose(pa), &a.shape, &to_pm_pose(pb), &b.shape, 0.0)
        .ok()
        .flatten()
        .map_or(0.0, |c| c.dist.min(0.0))
}

pub fn capsules_hit(caps: &[Capsule], obstacles: &[Obstacle], margin: f64) -> bool {
    caps.iter().any(|c| {
        obstacles
            .iter()
            .any(|o| capsule_distance(c, &o.body, &o.pose) <= margin)
    })
}

/// Smallest separation between any capsule and any obstacle.
pub fn min_clearance(caps: &[Capsule], obstacles: &[Obstacle]) -> f64 {
    let mut best = f64::INFINITY;
    for c in caps {
        for o in obstacles {
            best = best.min(capsule_distance(c, &o.body, &o.pose));
        }
    }
    best
}

fn to_pm(v: &Vec3) -> pm::Vector {
    pm::Vector::new(v.x, v.y, v.z)
}

fn from_pm(v: &pm::Vector) -> Vec3 {
    Vec3::new(v.x, v.y, v.z)
}

fn to_pm_pose(p: &Pose) -> pm::Pose {
    let m = p.rotation.matrix();
    let cols = pm::Matrix::from_cols(
        pm::Vector::new(m[(0, 0)], m[(1, 0)], m[(2, 0)]),
        pm::Vector::new(m[(0, 1)], m[(1, 1)], m[(2, 1)]),
        pm::Vector::new(m[(0, 2)], m[(1, 2)], m[(2, 2)]),
    );
    pm::Pose::from_parts(to_pm(&p.position), pm::Rotation::from_mat3(&cols))
}
