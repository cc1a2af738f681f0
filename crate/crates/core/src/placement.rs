//! Stable resting poses on a plane and snapping noisy detections onto them.

use crate::mesh::{center_of_mass, cluster_faces, convex_hull, MeshError, TriMesh, DEFAULT_CLUSTER_TOL};
use crate::mesh::convex_hull_2d;
use crate::se3::{
    rot_from_rpy, rotation_distance, rpy_from_rot, yaw_invariant_distance, Pose, Rotation,
    RpyAngles, Vec3,
};
use nalgebra::{Matrix3, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MARGIN_FRACTION: f64 = 0.1;

/// A centre of mass closer than this to a support edge is balanced on it
/// rather than resting (m).
const MIN_MARGIN: f64 = 1e-9;

#[derive(Error, Debug)]
pub enum PlacementError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("no stable placements to correct against")]
    NoPlacements,
    #[error("margin fraction {0} outside [0, 1)")]
    BadMarginFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StablePlacement {
    /// Maps the support facet normal onto -z, with zero yaw.
    #[serde(rename = "rotation")]
    pub rest_rotation: Rotation,
    /// Height of the object origin above the support plane.
    pub support_height: f64,
    /// Support facet outline in the rest frame (x, y), counter-clockwise.
    #[serde(skip)]
    pub support_polygon: Vec<Vector2<f64>>,
    /// Distance from the projected centre of mass to the polygon boundary.
    #[serde(rename = "margin")]
    pub stability_margin: f64,
    #[serde(skip)]
    pub inradius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableModel {
    pub height: f64,
    /// `[xmin, ymin, xmax, ymax]`.
    pub bounds: [f64; 4],
}

impl TableModel {
    pub fn new(height: f64, bounds: [f64; 4]) -> Self {
        assert!(bounds[2] > bounds[0] && bounds[3] > bounds[1], "degenerate table bounds");
        Self { height, bounds }
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.bounds[0] && x <= self.bounds[2] && y >= self.bounds[1] && y <= self.bounds[3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionMode {
    /// Nearest placement by full rotation distance and `z = table height`.
    Literal,
    /// Nearest placement ignoring yaw and `z` raised by the support height.
    #[default]
    YawInvariant,
}

/// Pose of an object resting in placement `p` with yaw `yaw` at `(x, y)`.
pub fn resting_pose(p: &StablePlacement, table: &TableModel, x: f64, y: f64, yaw: f64) -> Pose {
    Pose::new(
        Vec3::new(x, y, table.height + p.support_height),
        Rotation::rot_z(yaw) * p.rest_rotation,
    )
}

pub fn stable_placements(mesh: &TriMesh, margin_fraction: f64) -> Result<Vec<StablePlacement>, PlacementError> {
    stable_placements_with_tol(mesh, margin_fraction, DEFAULT_CLUSTER_TOL)
}

pub fn stable_placements_with_tol(
    mesh: &TriMesh,
    margin_fraction: f64,
    cluster_tol: f64,
) -> Result<Vec<StablePlacement>, PlacementError> {
    if !(0.0..1.0).contains(&margin_fraction) {
        return Err(PlacementError::BadMarginFraction(margin_fraction));
    }
    let com = center_of_mass(mesh)?;
    let hull = convex_hull(&mesh.vertices)?;
    let mut out = Vec::new();
    for cluster in cluster_faces(&hull, cluster_tol) {
        let r0 = Rotation::between(&cluster.normal, &(-Vec3::z()));
        let rpy = rpy_from_rot(&r0);
        let rot = rot_from_rpy(RpyAngles::new(rpy.roll, rpy.pitch, 0.0));
        let support_height = -mesh
            .vertices
            .iter()
            .map(|v| rot.apply(v).z)
            .fold(f64::INFINITY, f64::min);
        let pts: Vec<Vector2<f64>> = cluster
            .boundary
            .iter()
            .map(|v| {
                let q = rot.apply(v);
                Vector2::new(q.x, q.y)
            })
            .collect();
        let poly = convex_hull_2d(&pts);
        if poly.len() < 3 {
            continue;
        }
        let c = rot.apply(&com);
        let margin = signed_distance_to_polygon(&poly, &Vector2::new(c.x, c.y));
        let inradius = polygon_inradius(&poly);
        if margin > MIN_MARGIN && margin >= margin_fraction * inradius {
            out.push(StablePlacement {
                rest_rotation: rot,
                support_height,
                support_polygon: poly,
                stability_margin: margin,
                inradius,
            });
        }
    }
    out.sort_by(|a, b| b.stability_margin.total_cmp(&a.stability_margin));
    Ok(out)
}

/// Positive inside a counter-clockwise convex polygon, negative outside.
pub fn signed_distance_to_polygon(poly: &[Vector2<f64>], p: &Vector2<f64>) -> f64 {
    let n = poly.len();
    let mut inside = true;
    let mut dmin = f64::INFINITY;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let ab = b - a;
        let ap = p - a;
        let cross = ab.x * ap.y - ab.y * ap.x;
        if cross < 0.0 {
            inside = false;
        }
        let t = (ap.dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        dmin = dmin.min((ap - ab * t).norm());
    }
    if inside {
        dmin
    } else {
        -dmin
    }
}

/// Radius of the largest inscribed circle of a convex polygon. The Chebyshev
/// centre is a vertex of the 3-variable LP, so every triple of edge
/// constraints is tried.
pub fn polygon_inradius(poly: &[Vector2<f64>]) -> f64 {
    let n = poly.len();
    // Outward normals and offsets: inside means n.x <= d.
    let planes: Vec<(Vector2<f64>, f64)> = (0..n)
        .map(|i| {
            let e = poly[(i + 1) % n] - poly[i];
            let nrm = Vector2::new(e.y, -e.x).normalize();
            (nrm, nrm.dot(&poly[i]))
        })
        .collect();
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let m = Matrix3::new(
                    planes[i].0.x, planes[i].0.y, 1.0,
                    planes[j].0.x, planes[j].0.y, 1.0,
                    planes[k].0.x, planes[k].0.y, 1.0,
                );
                let Some(inv) = m.try_inverse() else { continue };
                let s = inv * Vec3::new(planes[i].1, planes[j].1, planes[k].1);
                let (x, r) = (Vector2::new(s.x, s.y), s.z);
                if r > best && planes.iter().all(|(nv, d)| nv.dot(&x) + r <= d + 1e-12) {
                    best = r;
                }
            }
        }
    }
    best
}

/// Snaps a raw detection onto the nearest stable placement. The corrected
/// rotation is `Rz(yaw) * R_near`, so its roll and pitch are those of the
/// placement bit for bit; x and y are copied from the raw pose.
///
/// `Literal` takes the yaw angle of the raw rotation as is. That angle is
/// unstable for parts lying on a side face (pitch near 90 degrees), so
/// `YawInvariant` takes the heading that brings `R_near` closest to the raw
/// rotation instead. The two agree whenever the raw tilt is the placement's.
pub fn correct_pose(
    raw: &Pose,
    placements: &[StablePlacement],
    table: &TableModel,
    mode: CorrectionMode,
) -> Result<Pose, PlacementError> {
    let near = nearest_placement(&raw.rotation, placements, mode)?;
    let p = &placements[near];
    let yaw = match mode {
        CorrectionMode::Literal => rpy_from_rot(&raw.rotation).yaw,
        CorrectionMode::YawInvariant => closest_heading(&p.rest_rotation, &raw.rotation),
    };
    let rotation = rot_from_rpy(RpyAngles::new(0.0, 0.0, yaw)) * p.rest_rotation;
    let z = match mode {
        CorrectionMode::Literal => table.height,
        CorrectionMode::YawInvariant => table.height + p.support_height,
    };
    Ok(Pose::new(Vec3::new(raw.position.x, raw.position.y, z), rotation))
}

/// The `phi` maximising `tr(Rz(phi) * a * b^T)`, i.e. minimising the
/// geodesic distance from `Rz(phi) * a` to `b`.
fn closest_heading(a: &Rotation, b: &Rotation) -> f64 {
    let w = a.matrix() * b.matrix().transpose();
    (w[(0, 1)] - w[(1, 0)]).atan2(w[(0, 0)] + w[(1, 1)])
}

/// Index of the placement closest to `raw`, lowest index on ties.
pub fn nearest_placement(
    raw: &Rotation,
    placements: &[StablePlacement],
    mode: CorrectionMode,
) -> Result<usize, PlacementError> {
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for (i, p) in placements.iter().enumerate() {
        let d = match mode {
            CorrectionMode::Literal => rotation_distance(&p.rest_rotation, raw),
            CorrectionMode::YawInvariant => yaw_invariant_distance(&p.rest_rotation, raw),
        };
        if d < best_d {
            best_d = d;
            best = Some(i);
        }
    }
    best.ok_or(PlacementError::NoPlacements)
}

/// Smallest yaw-invariant distance between any two placements.
pub fn min_placement_separation(placements: &[StablePlacement]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..placements.len() {
        for j in i + 1..placements.len() {
            d = d.min(yaw_invariant_distance(
                &placements[i].rest_rotation,
                &placements[j].rest_rotation,
            ));
        }
    }
    d
}
