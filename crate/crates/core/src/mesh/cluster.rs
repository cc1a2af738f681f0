use super::hull::convex_hull_2d;
use super::TriMesh;
use crate::se3::Vec3;
use nalgebra::Vector2;
use serde::Serialize;
use std::collections::VecDeque;

/// Default angular tolerance for merging hull triangles into one facet (rad).
pub const DEFAULT_CLUSTER_TOL: f64 = 0.05;

/// A group of adjacent, nearly coplanar triangles.
#[derive(Debug, Clone, Serialize)]
pub struct FaceCluster {
    pub triangles: Vec<usize>,
    /// Outward unit normal of the seed triangle.
    pub normal: Vec3,
    pub area: f64,
    /// Convex outline of the member vertices projected onto the facet plane,
    /// counter-clockwise seen from outside.
    pub boundary: Vec<Vec3>,
}

/// Right-handed orthonormal basis `(u, w)` of the plane with normal `n`.
pub fn plane_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = helper.cross(n).normalize();
    let w = n.cross(&u);
    (u, w)
}

/// Region growing over triangle adjacency. Seeds are taken in order of
/// decreasing area (lowest index first on ties); neighbours join while their
/// normal stays within `angle_tol` of the seed normal.
pub fn cluster_faces(mesh: &TriMesh, angle_tol: f64) -> Vec<FaceCluster> {
    let nt = mesh.triangles.len();
    let adj = mesh.adjacency();
    let normals: Vec<Vec3> = (0..nt).map(|t| mesh.triangle_normal(t)).collect();
    let areas: Vec<f64> = (0..nt).map(|t| mesh.triangle_area(t)).collect();
    let mut order: Vec<usize> = (0..nt).collect();
    order.sort_by(|&a, &b| areas[b].total_cmp(&areas[a]).then(a.cmp(&b)));
    let cos_tol = angle_tol.cos();

    let mut owner = vec![usize::MAX; nt];
    let mut clusters = Vec::new();
    for &seed in &order {
        if owner[seed] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let n = normals[seed];
        let mut members = vec![seed];
        owner[seed] = id;
        let mut queue = VecDeque::from([seed]);
        while let Some(t) = queue.pop_front() {
            for &nb in &adj[t] {
                if owner[nb] == usize::MAX && normals[nb].dot(&n) >= cos_tol {
                    owner[nb] = id;
                    members.push(nb);
                    queue.push_back(nb);
                }
            }
        }
        members.sort_unstable();
        let area = members.iter().map(|&t| areas[t]).sum();
        let boundary = facet_outline(mesh, &members, &n);
        clusters.push(FaceCluster {
            triangles: members,
            normal: n,
            area,
            boundary,
        });
    }
    clusters
}

fn facet_outline(mesh: &TriMesh, members: &[usize], n: &Vec3) -> Vec<Vec3> {
    let (u, w) = plane_basis(n);
    let mut idx: Vec<usize> = members.iter().flat_map(|&t| mesh.triangles[t]).collect();
    idx.sort_unstable();
    idx.dedup();
    let offset = idx.iter().map(|&i| n.dot(&mesh.vertices[i])).sum::<f64>() / idx.len() as f64;
    let pts: Vec<Vector2<f64>> = idx
        .iter()
        .map(|&i| {
            let v = mesh.vertices[i];
            Vector2::new(u.dot(&v), w.dot(&v))
        })
        .collect();
    convex_hull_2d(&pts)
        .iter()
        .map(|q| u * q.x + w * q.y + n * offset)
        .collect()
}
