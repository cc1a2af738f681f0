use super::{compute_descriptor, estimate_normals, render_cloud, Descriptor, PerceptionError, PointCloud};
use crate::camera::{look_at_auto_up, CameraIntrinsics};
use crate::mesh::primitives::icosahedron;
use crate::mesh::TriMesh;
use crate::se3::{Pose, Vec3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

/// Neighbourhood size for normal estimation, shared with detection so that
/// template and scene descriptors see the same smoothing.
pub(crate) const NORMAL_K: usize = 16;

/// Template cameras sit this many bounding radii from the object origin.
const VIEW_DISTANCE: f64 = 4.0;
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ViewTemplate {
    /// Template camera pose in the object frame.
    pub viewpoint: Pose,
    /// Visible points in the object frame.
    pub cloud: PointCloud,
    /// Descriptor in the template camera frame.
    pub descriptor: Descriptor,
}

impl ViewTemplate {
    pub fn centroid(&self) -> Vec3 {
        self.cloud.centroid()
    }
}

/// 42 unit-sphere viewpoints (icosahedron vertices then edge midpoints), each
/// looking at the origin. Up is world z, or world x near the poles.
pub fn sphere_viewpoints() -> Vec<Pose> {
    let (v, t) = icosahedron();
    let mut edges = BTreeSet::new();
    for f in &t {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let mut dirs = v.clone();
    dirs.extend(edges.iter().map(|&(a, b)| ((v[a] + v[b]) * 0.5).normalize()));
    dirs.iter().map(|d| look_at_auto_up(d, &Vec3::zeros())).collect()
}

/// Camera used to render templates: the view distance places the object in the
/// central half of a 160 x 160 image.
pub fn template_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::centered(200.0, 160, 160)
}

pub fn build_library(mesh: &TriMesh) -> Result<Vec<ViewTemplate>, PerceptionError> {
    let r = mesh.bounding_radius() * VIEW_DISTANCE;
    let k = template_intrinsics();
    sphere_viewpoints()
        .par_iter()
        .map(|unit| {
            let cam = Pose::new(unit.position * r, unit.rotation);
            let out = render_cloud(mesh, &cam, &k);
            if out.empty {
                return Err(PerceptionError::EmptyCloud);
            }
            let pts = out.cloud.points;
            let normals = estimate_normals(&pts, NORMAL_K, &Vec3::zeros());
            let in_cam = PointCloud::with_normals(pts, normals);
            let descriptor = compute_descriptor(&in_cam, &Vec3::zeros())?;
            Ok(ViewTemplate {
                viewpoint: cam,
                cloud: in_cam.transformed(&cam),
                descriptor,
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    viewpoint: Pose,
    cloud: String,
    descriptor: Descriptor,
}

#[derive(Serialize, Deserialize)]
struct LibraryIndex {
    version: u32,
    templates: Vec<IndexEntry>,
}

/// Writes `index.json` plus one PLY per view into `dir`.
pub fn save_library(dir: impl AsRef<Path>, library: &[ViewTemplate]) -> Result<(), PerceptionError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut templates = Vec::new();
    for (i, t) in library.iter().enumerate() {
        let name = format!("view_{i:02}.ply");
        std::fs::write(dir.join(&name), t.cloud.to_ply())?;
        templates.push(IndexEntry {
            viewpoint: t.viewpoint,
            cloud: name,
            descriptor: t.descriptor.clone(),
        });
    }
    let index = LibraryIndex {
        version: INDEX_VERSION,
        templates,
    };
    std::fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)?)?;
    Ok(())
}

pub fn load_library(dir: impl AsRef<Path>) -> Result<Vec<ViewTemplate>, PerceptionError> {
    let dir = dir.as_ref();
    let index: LibraryIndex = serde_json::from_str(&std::fs::read_to_string(dir.join("index.json"))?)?;
    if index.version != INDEX_VERSION {
        return Err(PerceptionError::Ply(format!(
            "unsupported library version {}",
            index.version
        )));
    }
    index
        .templates
        .into_iter()
        .map(|e| {
            let cloud = PointCloud::from_ply(&std::fs::read_to_string(dir.join(&e.cloud))?)?;
            Ok(ViewTemplate {
                viewpoint: e.viewpoint,
                cloud,
                descriptor: e.descriptor,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn forty_two_spread_viewpoints() {
        let v = sphere_viewpoints();
        assert_eq!(v.len(), 42);
        let mut min_sep = f64::INFINITY;
        for (i, a) in v.iter().enumerate() {
            assert!((a.position.norm() - 1.0).abs() < 1e-9);
            assert!(a.rotation.is_valid(1e-12));
            // Optical axis points at the origin.
            assert!((a.rotation.column(2) + a.position).norm() < 1e-12);
            for b in &v[i + 1..] {
                min_sep = min_sep.min(a.position.angle(&b.position));
            }
        }
        assert!(min_sep > 0.3, "{min_sep}");
    }

    #[test]
    fn library_is_deterministic_and_persists() {
        let m = primitives::l_prism(0.06, 0.04, 0.02, 0.015, 0.03);
        let a = build_library(&m).unwrap();
        let b = build_library(&m).unwrap();
        assert_eq!(a.len(), 42);
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        save_library(dir.path(), &a).unwrap();
        let back = load_library(dir.path()).unwrap();
        assert_eq!(back, a);
    }
}
