use super::TriMesh;
use crate::se3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: usize,
}

/// Moller-Trumbore. Returns the ray parameter for hits with `t > t_min`,
/// from either side of the triangle.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3], t_min: f64) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > t_min).then_some(t)
}

/// Nearest intersection along the ray, lowest triangle index on exact ties.
pub fn ray_mesh_nearest(mesh: &TriMesh, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<RayHit> {
    let mut best: Option<RayHit> = None;
    for ti in 0..mesh.triangles.len() {
        if let Some(t) = ray_triangle(origin, dir, &mesh.corners(ti), t_min) {
            if best.is_none_or(|b| t < b.t) {
                best = Some(RayHit { t, triangle: ti });
            }
        }
    }
    best
}
