//! Collision geometry written from scratch for the trajectory re-check:
//! closest points on triangles, point-sampled capsules and the separating
//! axis test for convex polytopes.

use deskasm_core::mesh::TriMesh;
use deskasm_core::{Pose, Vec3};

/// Closest point on triangle `abc` to `p` (Voronoi region walk).
pub fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// A convex body in world coordinates.
#[derive(Debug, Clone)]
pub struct Polytope {
    pub verts: Vec<Vec3>,
    pub tris: Vec<[usize; 3]>,
    /// Outward unit normal and offset of each face plane, `n . x <= d` inside.
    pub planes: Vec<(Vec3, f64)>,
    pub edges: Vec<Vec3>,
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Polytope {
    /// The mesh must be convex: every vertex lies behind every face.
    pub fn from_mesh(mesh: &TriMesh, pose: &Pose) -> Self {
        let verts: Vec<Vec3> = mesh.vertices.iter().map(|v| pose.transform_point(v)).collect();
        let tris = mesh.triangles.clone();
        let mut planes = Vec::new();
        let mut edges: Vec<Vec3> = Vec::new();
        for t in &tris {
            let (a, b, c) = (verts[t[0]], verts[t[1]], verts[t[2]]);
            let n = (b - a).cross(&(c - a));
            if n.norm() < 1e-14 {
                continue;
            }
            let n = n.normalize();
            let d = n.dot(&a);
            assert!(
                verts.iter().all(|v| n.dot(v) <= d + 1e-9),
                "oracle needs convex meshes"
            );
            planes.push((n, d));
            for (p, q) in [(a, b), (b, c), (c, a)] {
                let e = (q - p).normalize();
                if !edges.iter().any(|f| f.cross(&e).norm() < 1e-9) {
                    edges.push(e);
                }
            }
        }
        Self::finish(verts, tris, planes, edges)
    }

    /// Axis-aligned box.
    pub fn aabb(lo: Vec3, hi: Vec3) -> Self {
        let verts = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { lo.x } else { hi.x },
                    if i & 2 == 0 { lo.y } else { hi.y },
                    if i & 4 == 0 { lo.z } else { hi.z },
                )
            })
            .collect();
        let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
        let planes = axes
            .iter()
            .enumerate()
            .flat_map(|(i, a)| [(*a, hi[i]), (-a, -lo[i])])
            .collect();
        Self::finish(verts, Vec::new(), planes, axes.to_vec())
    }

    fn finish(verts: Vec<Vec3>, tris: Vec<[usize; 3]>, planes: Vec<(Vec3, f64)>, edges: Vec<Vec3>) -> Self {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &verts {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        Self {
            verts,
            tris,
            planes,
            edges,
            lo,
            hi,
        }
    }

    /// Distance from `p` to the body, negative inside (depth below the
    /// nearest face).
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let outside = self.planes.iter().map(|(n, d)| n.dot(p) - d).fold(f64::NEG_INFINITY, f64::max);
        if outside <= 0.0 {
            return outside;
        }
        if self.tris.is_empty() {
            // Boxes: clamp onto the extent.
            return (p - p.sup(&self.lo).inf(&self.hi)).norm();
        }
        self.tris
            .iter()
            .map(|t| (p - closest_on_triangle(p, &self.verts[t[0]], &self.verts[t[1]], &self.verts[t[2]])).norm())
            .fold(f64::INFINITY, f64::min)
    }

    fn interval(&self, axis: &Vec3) -> (f64, f64) {
        self.verts
            .iter()
            .map(|v| axis.dot(v))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    }
}

/// Overlap depth of two convex bodies along their least-overlapping
/// separating axis candidate; negative when some axis separates them.
pub fn sat_overlap(a: &Polytope, b: &Polytope) -> f64 {
    let mut axes: Vec<Vec3> = a.planes.iter().chain(&b.planes).map(|(n, _)| *n).collect();
    for ea in &a.edges {
        for eb in &b.edges {
            let c = ea.cross(eb);
            if c.norm() > 1e-9 {
                axes.push(c.normalize());
            }
        }
    }
    let mut least = f64::INFINITY;
    for ax in &axes {
        let (a0, a1) = a.interval(ax);
        let (b0, b1) = b.interval(ax);
        let overlap = (a1 - b0).min(b1 - a0);
        least = least.min(overlap);
        if least < 0.0 {
            return least;
        }
    }
    least
}

/// Smallest distance from the sampled axis of a capsule to the body, minus
/// the radius. Samples are at most `step` apart.
pub fn capsule_clearance(a: &Vec3, b: &Vec3, radius: f64, body: &Polytope, step: f64) -> f64 {
    // Skip bodies whose box is clearly out of reach.
    let lo = a.inf(b).add_scalar(-radius);
    let hi = a.sup(b).add_scalar(radius);
    let gap = (body.lo - hi).sup(&(lo - body.hi)).max();
    if gap > 0.01 {
        return gap;
    }
    let n = ((b - a).norm() / step).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| body.signed_distance(&(a + (b - a) * (i as f64 / n as f64))) - radius)
        .fold(f64::INFINITY, f64::min)
}

/// Known distances on a 2 cm cube, so a broken oracle cannot pass silently.
pub fn self_check() -> Result<(), String> {
    let cube = deskasm_core::mesh::primitives::cuboid(0.02, 0.02, 0.02);
    let p = Polytope::from_mesh(&cube, &Pose::identity());
    let checks = [
        ((p.signed_distance(&Vec3::new(0.03, 0.0, 0.0)) - 0.02).abs() < 1e-12, "face distance"),
        ((p.signed_distance(&Vec3::new(0.02, 0.02, 0.0)) - 0.01 * 2f64.sqrt()).abs() < 1e-12, "edge distance"),
        ((p.signed_distance(&Vec3::zeros()) + 0.01).abs() < 1e-12, "inside depth"),
        (
            (sat_overlap(&p, &Polytope::from_mesh(&cube, &Pose::from_translation(Vec3::new(0.015, 0.0, 0.0)))) - 0.005)
                .abs()
                < 1e-12,
            "sat overlap",
        ),
        (
            sat_overlap(&p, &Polytope::aabb(Vec3::new(-1.0, -1.0, -0.2), Vec3::new(1.0, 1.0, -0.0101))) < 0.0,
            "sat separation",
        ),
        (
            (capsule_clearance(&Vec3::new(0.02, -0.05, 0.0), &Vec3::new(0.02, 0.05, 0.0), 0.005, &p, 1e-3) - 0.005).abs()
                < 1e-12,
            "capsule clearance",
        ),
    ];
    match checks.iter().find(|c| !c.0) {
        Some((_, what)) => Err(format!("geometry oracle self-check failed: {what}")),
        None => Ok(()),
    }
}
