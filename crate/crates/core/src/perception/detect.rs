use super::icp::IcpModel;
use super::templates::NORMAL_K;
use super::{
    compute_descriptor, estimate_normals, extract_plane, match_templates, sample_surface,
    segment_clusters, IcpConfig, PerceptionError, PointCloud, RansacConfig, ViewTemplate,
};
use crate::camera::{look_at, Sensor};
use crate::mesh::TriMesh;
use crate::placement::TableModel;
use crate::se3::{Pose, Rotation, Vec3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct DetectConfig {
    pub ransac: RansacConfig,
    /// Points closer than this to the table plane, or below it, are removed
    /// in addition to the RANSAC inliers.
    pub plane_clearance: f64,
    pub link_distance: f64,
    pub min_segment: usize,
    pub top_k: usize,
    /// Roll hypotheses kept per template match.
    pub roll_peaks: usize,
    pub model_samples: usize,
    pub seed: u64,
    /// Correspondence cap of the first, coarse ICP stage (m).
    pub coarse_cap: f64,
    pub coarse_iter: usize,
    pub icp: IcpConfig,
    /// Depth margin for the free-space test (m).
    pub free_space_tol: f64,
    /// Hypotheses whose visible model surface hides more than this fraction
    /// of observed points are discarded before selection.
    pub max_free_space_violation: f64,
    /// Hypotheses whose lowest point is farther than this from the table top,
    /// above or below, rank after the rest (m).
    pub max_support_gap: f64,
    /// Scene points kept per segment for the coarse stage.
    pub coarse_points: usize,
    /// Coarse results per segment passed on to the fine stage.
    pub fine_candidates: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            ransac: RansacConfig::default(),
            plane_clearance: 0.003,
            link_distance: 0.006,
            min_segment: 50,
            top_k: 42,
            roll_peaks: 2,
            model_samples: 5000,
            seed: 0,
            coarse_cap: 0.03,
            coarse_iter: 30,
            icp: IcpConfig::default(),
            free_space_tol: 0.01,
            max_free_space_violation: 0.1,
            max_support_gap: 0.005,
            coarse_points: 200,
            fine_candidates: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionResult {
    pub raw_pose: Pose,
    pub icp_rmse: f64,
    pub outlier_count: usize,
    pub matched_template_index: usize,
    pub segment_index: usize,
    pub segment_size: usize,
    /// Fraction of camera-facing model samples in front of which the sensor saw
    /// something farther away.
    pub free_space_violation: f64,
    /// Height of the lowest mesh vertex above the table top (m, negative
    /// when the pose sinks into the table).
    pub support_gap: f64,
}

struct Hypothesis {
    segment: usize,
    template: usize,
    rank: usize,
    init: Pose,
}

/// Finds the mesh in a scene cloud given in the world frame.
///
/// Returns the first of [`detect_candidates`].
pub fn detect_object(
    scene: &PointCloud,
    sensor: &Sensor,
    mesh: &TriMesh,
    library: &[ViewTemplate],
    table: &TableModel,
    cfg: &DetectConfig,
) -> Result<DetectionResult, PerceptionError> {
    detect_candidates(scene, sensor, mesh, library, table, cfg)?
        .into_iter()
        .next()
        .ok_or(PerceptionError::AllCandidatesFailed)
}

/// All refined candidates, best first.
///
/// Hypotheses come from template matching on each segment. Every one gets a
/// coarse ICP pass on a thinned segment; in each segment the `fine_candidates`
/// with the fewest outliers are then refined on the full segment. Poses that
/// sink into the table or hide surfaces the sensor actually observed rank
/// after plausible ones; within each group the lowest outlier count wins, then the lowest
/// rmse, then the lowest segment and candidate rank.
pub fn detect_candidates(
    scene: &PointCloud,
    sensor: &Sensor,
    mesh: &TriMesh,
    library: &[ViewTemplate],
    table: &TableModel,
    cfg: &DetectConfig,
) -> Result<Vec<DetectionResult>, PerceptionError> {
    if library.is_empty() {
        return Err(PerceptionError::EmptyLibrary);
    }
    if scene.is_empty() {
        return Err(PerceptionError::NoSegment);
    }
    let plane = extract_plane(scene, &cfg.ransac)?;
    let keep: Vec<usize> = (0..scene.len())
        .filter(|&i| {
            let p = &scene.points[i];
            plane.distance(p) > cfg.plane_clearance.max(cfg.ransac.dist_tol)
                && table.contains_xy(p.x, p.y)
        })
        .collect();
    let rest = scene.subset(&keep);
    let segments = segment_clusters(&rest, cfg.link_distance, cfg.min_segment);
    if segments.is_empty() {
        return Err(PerceptionError::NoSegment);
    }

    let camera = &sensor.pose;
    let cam_inv = camera.inverse();
    let mut hyps = Vec::new();
    let mut seg_clouds = Vec::new();
    for (si, seg) in segments.iter().enumerate() {
        let world = rest.subset(seg);
        // Virtual camera at the sensor, turned to look at the segment centroid.
        let in_cam = world.transformed(&cam_inv);
        let c = in_cam.centroid();
        let virt = look_at(&Vec3::zeros(), &c, &(-Vec3::y()));
        let view = in_cam.transformed(&virt.inverse());
        let normals = estimate_normals(&view.points, NORMAL_K, &Vec3::zeros());
        let view = PointCloud::with_normals(view.points, normals);
        let d = compute_descriptor(&view, &Vec3::zeros())?;
        let virt_world = camera.compose(&virt);
        let seg_centroid = world.centroid();
        for (rank, cand) in match_templates(&d, library, cfg.top_k).into_iter().enumerate() {
            let tpl = &library[cand.template];
            for (ri, &roll) in cand.rolls.iter().take(cfg.roll_peaks).enumerate() {
                let rot = virt_world.rotation * Rotation::rot_z(roll) * tpl.viewpoint.rotation.transpose();
                let init = Pose::new(seg_centroid - rot.apply(&tpl.centroid()), rot);
                hyps.push(Hypothesis {
                    segment: si,
                    template: cand.template,
                    rank: rank * cfg.roll_peaks + ri,
                    init,
                });
            }
        }
        seg_clouds.push(world);
    }
    let thinned: Vec<PointCloud> = seg_clouds
        .iter()
        .map(|c| {
            let step = c.len().div_ceil(cfg.coarse_points.max(1)).max(1);
            c.subset(&(0..c.len()).step_by(step).collect::<Vec<_>>())
        })
        .collect();

    let model = sample_surface(mesh, cfg.model_samples, cfg.seed);
    let icp_model = IcpModel::new(&model)?;
    let coarse = IcpConfig {
        max_iter: cfg.coarse_iter,
        max_correspondence: Some(cfg.coarse_cap),
        ..cfg.icp
    };
    let mut rough: Vec<(usize, usize, Pose)> = hyps
        .par_iter()
        .enumerate()
        .filter_map(|(hi, h)| {
            let r = icp_model.refine(&thinned[h.segment], &h.init, &coarse).ok()?;
            if r.failed() {
                return None;
            }
            let cap = cfg.icp.cap_factor * seg_clouds[h.segment].median_spacing();
            let cap = cfg.icp.max_correspondence.unwrap_or(cap);
            Some((icp_model.count_outliers(&thinned[h.segment], &r.pose, cap), hi, r.pose))
        })
        .collect();
    // Refining only the global best would let a large segment crowd out the
    // one that actually holds the part.
    rough.sort_by_key(|r| (hyps[r.1].segment, r.0, r.1));
    let mut per_segment = vec![0usize; segments.len()];
    rough.retain(|r| {
        let n = &mut per_segment[hyps[r.1].segment];
        *n += 1;
        *n <= cfg.fine_candidates.max(1)
    });

    let depth = DepthImage::new(scene, sensor);
    let mut results: Vec<(bool, DetectionResult, usize)> = rough
        .par_iter()
        .filter_map(|&(_, hi, pose)| {
            let h = &hyps[hi];
            let sc = &seg_clouds[h.segment];
            let fine = icp_model.refine(sc, &pose, &cfg.icp).ok()?;
            if fine.failed() {
                return None;
            }
            let violation = depth.violation(&model, &fine.pose, cfg.free_space_tol);
            let lowest = mesh
                .vertices
                .iter()
                .map(|v| fine.pose.transform_point(v).z)
                .fold(f64::INFINITY, f64::min);
            let gap = lowest - table.height;
            let plausible = violation <= cfg.max_free_space_violation && gap.abs() <= cfg.max_support_gap;
            Some((
                plausible,
                DetectionResult {
                    raw_pose: fine.pose,
                    icp_rmse: fine.rmse,
                    outlier_count: fine.outliers,
                    matched_template_index: h.template,
                    segment_index: h.segment,
                    segment_size: sc.len(),
                    free_space_violation: violation,
                    support_gap: gap,
                },
                h.rank,
            ))
        })
        .collect();
    results.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(a.1.outlier_count.cmp(&b.1.outlier_count))
            .then(a.1.icp_rmse.total_cmp(&b.1.icp_rmse))
            .then(a.1.segment_index.cmp(&b.1.segment_index))
            .then(a.2.cmp(&b.2))
    });
    if results.is_empty() {
        return Err(PerceptionError::AllCandidatesFailed);
    }
    Ok(results.into_iter().map(|r| r.1).collect())
}

/// Per-pixel nearest observed depth, rebuilt from an organised scene cloud.
struct DepthImage {
    sensor: Sensor,
    depth: Vec<f64>,
}

impl DepthImage {
    fn new(scene: &PointCloud, sensor: &Sensor) -> Self {
        let k = &sensor.intrinsics;
        let mut depth = vec![f64::INFINITY; (k.width * k.height) as usize];
        let inv = sensor.pose.inverse();
        for p in &scene.points {
            let q = inv.transform_point(p);
            if let Some(px) = pixel_of(sensor, &q) {
                depth[px] = depth[px].min(q.z);
            }
        }
        Self { sensor: *sensor, depth }
    }

    /// Fraction of camera-facing model samples at `pose` behind which the
    /// sensor measured a surface more than `tol` farther away.
    fn violation(&self, model: &PointCloud, pose: &Pose, tol: f64) -> f64 {
        let to_cam = self.sensor.pose.inverse().compose(pose);
        let normals = model.normals.as_ref().expect("surface samples carry normals");
        let (mut seen, mut bad) = (0usize, 0usize);
        for (m, n) in model.points.iter().zip(normals) {
            let q = to_cam.transform_point(m);
            // Grazing faces are skipped: their depth is too sensitive to pose.
            if to_cam.transform_vector(n).dot(&q) > -GRAZING_COS * q.norm() {
                continue;
            }
            let Some(px) = pixel_of(&self.sensor, &q) else { continue };
            let d = self.depth[px];
            if !d.is_finite() {
                continue;
            }
            seen += 1;
            if d > q.z + tol {
                bad += 1;
            }
        }
        if seen == 0 {
            1.0
        } else {
            bad as f64 / seen as f64
        }
    }
}

const GRAZING_COS: f64 = 0.3;

fn pixel_of(sensor: &Sensor, q: &Vec3) -> Option<usize> {
    let k = &sensor.intrinsics;
    let uv = k.project(q)?;
    let (u, v) = (uv.x.round(), uv.y.round());
    if u < 0.0 || v < 0.0 || u >= k.width as f64 || v >= k.height as f64 {
        return None;
    }
    Some(v as usize * k.width as usize + u as usize)
}
