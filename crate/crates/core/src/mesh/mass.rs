use super::{MeshError, TriMesh};
use crate::se3::Vec3;

/// Signed volume, positive for outward winding.
pub fn volume(mesh: &TriMesh) -> f64 {
    let r = reference(mesh);
    mesh.triangles
        .iter()
        .map(|t| tet_volume(&r, mesh, t))
        .sum()
}

/// Uniform-density centroid from a fan of tetrahedra over the surface.
pub fn center_of_mass(mesh: &TriMesh) -> Result<Vec3, MeshError> {
    mesh.require_watertight()?;
    // Taking the apex at the vertex mean keeps the summands well conditioned.
    let r = reference(mesh);
    let mut vol = 0.0;
    let mut acc = Vec3::zeros();
    for t in &mesh.triangles {
        let v = tet_volume(&r, mesh, t);
        let [a, b, c] = t.map(|i| mesh.vertices[i]);
        acc += (r + a + b + c) * (0.25 * v);
        vol += v;
    }
    if vol.abs() < 1e-300 {
        return Err(MeshError::Degenerate("mesh encloses no volume".into()));
    }
    Ok(acc / vol)
}

fn reference(mesh: &TriMesh) -> Vec3 {
    mesh.vertices.iter().sum::<Vec3>() / mesh.vertices.len() as f64
}

fn tet_volume(r: &Vec3, mesh: &TriMesh, t: &[usize; 3]) -> f64 {
    let [a, b, c] = t.map(|i| mesh.vertices[i] - r);
    a.dot(&b.cross(&c)) / 6.0
}
