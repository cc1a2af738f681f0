use super::{MeshError, TriMesh};
use crate::se3::Vec3;
use nalgebra::Vector2;
use std::collections::HashSet;

struct Face {
    v: [usize; 3],
    n: Vec3,
    d: f64,
    alive: bool,
}

impl Face {
    fn new(pts: &[Vec3], v: [usize; 3]) -> Self {
        let n = (pts[v[1]] - pts[v[0]])
            .cross(&(pts[v[2]] - pts[v[0]]))
            .normalize();
        let d = n.dot(&pts[v[0]]);
        Face { v, n, d, alive: true }
    }

    fn dist(&self, p: &Vec3) -> f64 {
        self.n.dot(p) - self.d
    }
}

/// Convex hull as a triangulated mesh whose vertices are a subset of `points`.
pub fn convex_hull(points: &[Vec3]) -> Result<TriMesh, MeshError> {
    let (used, tris) = convex_hull_indices(points)?;
    let mut remap = vec![usize::MAX; points.len()];
    for (k, &i) in used.iter().enumerate() {
        remap[i] = k;
    }
    let vertices = used.iter().map(|&i| points[i]).collect();
    let triangles = tris
        .iter()
        .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
        .collect();
    TriMesh::new(vertices, triangles)
}

/// Incremental hull. Returns the sorted indices of the hull vertices and the
/// outward-wound triangles over the original indices.
pub fn convex_hull_indices(points: &[Vec3]) -> Result<(Vec<usize>, Vec<[usize; 3]>), MeshError> {
    if points.len() < 4 {
        return Err(MeshError::Degenerate("fewer than four points".into()));
    }
    let (lo, hi) = points.iter().fold(
        (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    );
    let scale = (hi - lo).norm().max(1e-300);
    let eps = 1e-10 * scale;

    // Starting tetrahedron from extreme points.
    let i0 = (0..points.len())
        .min_by(|&a, &b| points[a].x.total_cmp(&points[b].x))
        .unwrap();
    let i1 = argmax(points, |p| (p - points[i0]).norm());
    let dir = points[i1] - points[i0];
    if dir.norm() <= eps {
        return Err(MeshError::Degenerate("all points coincide".into()));
    }
    let u = dir.normalize();
    let i2 = argmax(points, |p| (p - points[i0]).cross(&u).norm());
    let plane_n = (points[i1] - points[i0]).cross(&(points[i2] - points[i0]));
    if plane_n.norm() <= eps * scale {
        return Err(MeshError::Degenerate("points are collinear".into()));
    }
    let plane_n = plane_n.normalize();
    let i3 = argmax(points, |p| plane_n.dot(&(p - points[i0])).abs());
    if plane_n.dot(&(points[i3] - points[i0])).abs() <= eps {
        return Err(MeshError::Degenerate("points are coplanar".into()));
    }

    let mut faces: Vec<Face> = Vec::new();
    let (a, b, c) = if plane_n.dot(&(points[i3] - points[i0])) > 0.0 {
        (i0, i2, i1)
    } else {
        (i0, i1, i2)
    };
    for v in [[a, b, c], [a, i3, b], [b, i3, c], [c, i3, a]] {
        faces.push(Face::new(points, v));
    }

    let seed: HashSet<usize> = [i0, i1, i2, i3].into_iter().collect();
    for (pi, p) in points.iter().enumerate() {
        if seed.contains(&pi) {
            continue;
        }
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&f| faces[f].alive && faces[f].dist(p) > eps)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut edges = HashSet::new();
        for &f in &visible {
            let v = faces[f].v;
            for k in 0..3 {
                edges.insert((v[k], v[(k + 1) % 3]));
            }
        }
        let mut horizon = Vec::new();
        for &f in &visible {
            let v = faces[f].v;
            for k in 0..3 {
                let (x, y) = (v[k], v[(k + 1) % 3]);
                if !edges.contains(&(y, x)) {
                    horizon.push((x, y));
                }
            }
            faces[f].alive = false;
        }
        for (x, y) in horizon {
            faces.push(Face::new(points, [x, y, pi]));
        }
    }

    let tris: Vec<[usize; 3]> = faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    let mut used: Vec<usize> = tris.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    Ok((used, tris))
}

fn argmax(points: &[Vec3], f: impl Fn(&Vec3) -> f64) -> usize {
    let mut best = 0;
    let mut bv = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let v = f(p);
        if v > bv {
            bv = v;
            best = i;
        }
    }
    best
}

/// Andrew's monotone chain. Returns the hull counter-clockwise without
/// collinear points. Fewer than three distinct points are returned as is.
pub fn convex_hull_2d(points: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut p: Vec<Vector2<f64>> = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup_by(|a, b| (*a - *b).norm() < 1e-15);
    if p.len() < 3 {
        return p;
    }
    let scale = p
        .iter()
        .map(|q| q.norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    let eps = 1e-12 * scale * scale;
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut h: Vec<Vector2<f64>> = Vec::with_capacity(2 * p.len());
    for q in &p {
        while h.len() >= 2 && cross(&h[h.len() - 2], &h[h.len() - 1], q) <= eps {
            h.pop();
        }
        h.push(*q);
    }
    let lower = h.len() + 1;
    for q in p.iter().rev().skip(1) {
        while h.len() >= lower && cross(&h[h.len() - 2], &h[h.len() - 1], q) <= eps {
            h.pop();
        }
        h.push(*q);
    }
    h.pop();
    h
}
