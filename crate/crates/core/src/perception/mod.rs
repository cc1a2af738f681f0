//! Synthetic depth sensing and rough object detection: plane removal,
//! clustering, view-template matching and ICP refinement.

mod cloud;
mod descriptor;
mod detect;
mod icp;
mod normals;
mod ransac;
mod render;
mod segment;
mod spatial;
mod templates;

pub use cloud::{sample_surface, PointCloud};
pub use descriptor::{
    compute_descriptor, descriptor_distance, match_templates, roll_peaks, Descriptor, MatchCandidate,
    CENTROID_BINS, NORMAL_BINS, ROLL_BINS,
};
pub use detect::{detect_candidates, detect_object, DetectConfig, DetectionResult};
pub use icp::{icp_refine, IcpConfig, IcpModel, IcpResult, IcpStatus};
pub use normals::estimate_normals;
pub use ransac::{extract_plane, Plane, RansacConfig};
pub use render::{render_cloud, render_scene, RenderOutput, SceneSurface};
pub use segment::segment_clusters;
pub use spatial::SpatialIndex;
pub use templates::{
    build_library, load_library, save_library, sphere_viewpoints, template_intrinsics, ViewTemplate,
};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum PerceptionError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("no plane found: best inlier ratio {ratio:.3} below {min:.3}")]
    NoPlane { ratio: f64, min: f64 },
    #[error("cloud has no normals")]
    MissingNormals,
    #[error("no point of the part is inside the camera view")]
    OutOfView,
    #[error("no object segment left after plane removal")]
    NoSegment,
    #[error("every ICP candidate failed")]
    AllCandidatesFailed,
    #[error("template library is empty")]
    EmptyLibrary,
    #[error("malformed PLY: {0}")]
    Ply(String),
    #[error("template library index: {0}")]
    Index(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
}
