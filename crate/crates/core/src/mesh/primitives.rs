//! Closed test and demo solids. All are outward-wound and watertight.

use super::TriMesh;
use crate::se3::Vec3;
use nalgebra::Vector2;
use std::collections::HashMap;

/// Axis-aligned box centred on the origin.
pub fn cuboid(sx: f64, sy: f64, sz: f64) -> TriMesh {
    let h = Vec3::new(sx, sy, sz) * 0.5;
    let mut v = Vec::with_capacity(8);
    for i in 0..8 {
        v.push(Vec3::new(
            if i & 1 == 0 { -h.x } else { h.x },
            if i & 2 == 0 { -h.y } else { h.y },
            if i & 4 == 0 { -h.z } else { h.z },
        ));
    }
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let mut t = Vec::with_capacity(12);
    for q in quads {
        t.push([q[0], q[1], q[2]]);
        t.push([q[0], q[2], q[3]]);
    }
    TriMesh::new(v, t).expect("box is valid")
}

/// Tetrahedron on four points, wound outward whatever their order.
pub fn tetrahedron(p: [Vec3; 4]) -> TriMesh {
    let mut faces = vec![[0, 1, 2], [0, 3, 1], [1, 3, 2], [2, 3, 0]];
    let vol = (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0]));
    if vol > 0.0 {
        for f in &mut faces {
            f.swap(1, 2);
        }
    }
    TriMesh::new(p.to_vec(), faces).expect("tetrahedron is valid")
}

/// Regular tetrahedron with centroid at the origin and one face on `z = -edge/(2 sqrt 6)`.
pub fn regular_tetrahedron(edge: f64) -> TriMesh {
    let s = edge / 8f64.sqrt();
    tetrahedron([
        Vec3::new(s, s, s),
        Vec3::new(s, -s, -s),
        Vec3::new(-s, s, -s),
        Vec3::new(-s, -s, s),
    ])
}

/// Extrudes a simple counter-clockwise polygon from `z = 0` to `z = height`.
pub fn extrude_polygon(outline: &[Vector2<f64>], height: f64) -> TriMesh {
    let n = outline.len();
    let mut v: Vec<Vec3> = outline
        .iter()
        .map(|p| Vec3::new(p.x, p.y, 0.0))
        .collect();
    v.extend(outline.iter().map(|p| Vec3::new(p.x, p.y, height)));
    let mut t = Vec::new();
    for [a, b, c] in ear_clip(outline) {
        t.push([a, c, b]);
        t.push([a + n, b + n, c + n]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        t.push([i, j, j + n]);
        t.push([i, j + n, i + n]);
    }
    TriMesh::new(v, t).expect("extrusion is valid")
}

/// L-shaped prism: a leg of length `a` and width `t1` along x joined to a leg
/// of length `b` and width `t2` along y, extruded by `height`.
pub fn l_prism(a: f64, b: f64, t1: f64, t2: f64, height: f64) -> TriMesh {
    let outline = [
        Vector2::new(0.0, 0.0),
        Vector2::new(a, 0.0),
        Vector2::new(a, t1),
        Vector2::new(t2, t1),
        Vector2::new(t2, b),
        Vector2::new(0.0, b),
    ];
    extrude_polygon(&outline, height)
}

/// Subdivided icosahedron projected onto a sphere (20 * 4^k faces).
pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    let (mut v, mut t) = icosahedron();
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(t.len() * 4);
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vec3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                v.push(((v[a] + v[b]) * 0.5).normalize());
                v.len() - 1
            })
        };
        for [a, b, c] in t {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        t = next;
    }
    TriMesh::new(v.into_iter().map(|p| p * radius).collect(), t).expect("sphere is valid")
}

/// Unit icosahedron vertices and outward faces.
pub(crate) fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let v: Vec<Vec3> = [
        (-1.0, g, 0.0),
        (1.0, g, 0.0),
        (-1.0, -g, 0.0),
        (1.0, -g, 0.0),
        (0.0, -1.0, g),
        (0.0, 1.0, g),
        (0.0, -1.0, -g),
        (0.0, 1.0, -g),
        (g, 0.0, -1.0),
        (g, 0.0, 1.0),
        (-g, 0.0, -1.0),
        (-g, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let t = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, t)
}

/// Ear clipping for a simple counter-clockwise polygon.
fn ear_clip(poly: &[Vector2<f64>]) -> Vec<[usize; 3]> {
    let cross = |o: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::new();
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (0..m).find(|&k| {
            let (a, b, c) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            if cross(poly[a], poly[b], poly[c]) <= 0.0 {
                return false;
            }
            idx.iter().all(|&j| {
                j == a
                    || j == b
                    || j == c
                    || !(cross(poly[a], poly[b], poly[j]) >= 0.0
                        && cross(poly[b], poly[c], poly[j]) >= 0.0
                        && cross(poly[c], poly[a], poly[j]) >= 0.0)
            })
        });
        let k = ear.expect("polygon must be simple and counter-clockwise");
        out.push([idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]]);
        idx.remove(k);
    }
    out.push([idx[0], idx[1], idx[2]]);
    out
}
