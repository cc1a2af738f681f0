//! Triangle meshes and the geometry built on them.

mod cluster;
mod hull;
mod io;
mod mass;
pub mod primitives;
mod raycast;

pub use cluster::{cluster_faces, plane_basis, FaceCluster, DEFAULT_CLUSTER_TOL};
pub use hull::{convex_hull, convex_hull_2d, convex_hull_indices};
pub use io::{load_mesh, mesh_to_ply, parse_obj};
pub use mass::{center_of_mass, volume};
pub use raycast::{ray_mesh_nearest, ray_triangle, RayHit};

use crate::se3::{Pose, Vec3};
use std::collections::HashMap;
use thiserror::Error;

/// Triangles with less area than this are dropped on construction (m^2).
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Error, Debug)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: vertex index {index} out of range (mesh has {count} vertices)")]
    IndexOutOfRange {
        line: usize,
        index: i64,
        count: usize,
    },
    #[error("mesh has no triangles")]
    Empty,
    #[error("mesh is not watertight")]
    NotWatertight,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    watertight: bool,
    dropped: usize,
}

impl TriMesh {
    /// Builds a mesh, dropping degenerate triangles and recording watertightness.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = vertices.len();
        for t in &triangles {
            for &i in t {
                if i >= n {
                    return Err(MeshError::IndexOutOfRange {
                        line: 0,
                        index: i as i64,
                        count: n,
                    });
                }
            }
        }
        let before = triangles.len();
        let triangles: Vec<[usize; 3]> = triangles
            .into_iter()
            .filter(|t| tri_area(&vertices, t) >= MIN_TRIANGLE_AREA)
            .collect();
        let dropped = before - triangles.len();
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangles");
        }
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let watertight = is_closed_manifold(vertices.len(), &triangles);
        Ok(Self {
            vertices,
            triangles,
            watertight,
            dropped,
        })
    }

    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    /// Number of degenerate triangles removed on construction.
    pub fn dropped_triangles(&self) -> usize {
        self.dropped
    }

    pub fn require_watertight(&self) -> Result<(), MeshError> {
        if self.watertight {
            Ok(())
        } else {
            Err(MeshError::NotWatertight)
        }
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        tri_area(&self.vertices, &self.triangles[t])
    }

    /// Unit normal from the winding (counter-clockwise seen from outside).
    pub fn triangle_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn transformed(&self, pose: &Pose) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| pose.transform_point(v)).collect(),
            triangles: self.triangles.clone(),
            watertight: self.watertight,
            dropped: self.dropped,
        }
    }

    pub fn scaled(&self, s: f64) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Radius of the sphere about the origin that contains every vertex.
    pub fn bounding_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Triangle adjacency through shared undirected edges.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push(ti);
            }
        }
        let mut adj = vec![Vec::new(); self.triangles.len()];
        for tris in by_edge.values() {
            for &a in tris {
                for &b in tris {
                    if a != b && !adj[a].contains(&b) {
                        adj[a].push(b);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

fn tri_area(v: &[Vec3], t: &[usize; 3]) -> f64 {
    0.5 * (v[t[1]] - v[t[0]]).cross(&(v[t[2]] - v[t[0]])).norm()
}

/// Every edge shared by exactly two triangles and Euler characteristic 2.
fn is_closed_manifold(_n_vertices: usize, triangles: &[[usize; 3]]) -> bool {
    let mut edges: HashMap<(usize, usize), u32> = HashMap::new();
    let mut used = std::collections::HashSet::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            used.insert(a);
        }
    }
    if edges.values().any(|&c| c != 2) {
        return false;
    }
    used.len() as i64 - edges.len() as i64 + triangles.len() as i64 == 2
}
