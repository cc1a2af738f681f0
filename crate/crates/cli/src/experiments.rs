//! Synthetic data generators shared by the commands and the acceptance runs.

use crate::config::SynthTeaching;
use crate::error::{CliError, Result};
use crate::scene::SceneObject;
use deskasm_core::camera::{CameraIntrinsics, Sensor};
use deskasm_core::perception::{build_library, detect_object, DetectConfig, DetectionResult, PointCloud, ViewTemplate};
use deskasm_core::placement::{correct_pose, nearest_placement, CorrectionMode, TableModel};
use deskasm_core::teaching::{project_marker, TaughtObject, TeachingSample};
use deskasm_core::{Pose, Rotation, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use std::f64::consts::PI;

/// Marker observations of A and B held at `relative` (B in A), seen from
/// random viewpoints with noisy corners.
pub fn synthetic_recording(
    a: &TaughtObject,
    b: &TaughtObject,
    relative: &Pose,
    cfg: &SynthTeaching,
    seed: u64,
) -> Result<Vec<TeachingSample>> {
    if !(cfg.corner_noise_px >= 0.0) || cfg.samples == 0 {
        return Err(CliError::Input("teaching synthesis needs samples and non-negative noise".into()));
    }
    let k = CameraIntrinsics::centered(cfg.focal_px, 640, 480);
    let noise = Normal::new(0.0, cfg.corner_noise_px.max(f64::MIN_POSITIVE)).expect("positive sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = cfg.tilt_deg;
    let mut samples = Vec::with_capacity(cfg.samples);
    let mut attempts = 0;
    while samples.len() < cfg.samples {
        attempts += 1;
        if attempts > 100 * cfg.samples {
            return Err(CliError::Input("markers are never both in view".into()));
        }
        let tilt = rng.random_range(lo.min(hi)..=hi.max(lo)).to_radians();
        let marker_a = Pose::new(
            Vec3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), cfg.distance),
            Rotation::rot_z(rng.random_range(-PI..PI)) * Rotation::rot_x(PI + tilt) * Rotation::rot_z(rng.random_range(-PI..PI)),
        );
        let pose_a = marker_a.compose(&a.marker.marker_in_object.inverse());
        let marker_b = pose_a.compose(relative).compose(&b.marker.marker_in_object);
        let (Some(ca), Some(cb)) = (project_marker(&marker_a, &a.marker, &k), project_marker(&marker_b, &b.marker, &k)) else {
            continue;
        };
        let in_image = |c: &[[f64; 2]; 4]| c.iter().all(|p| p[0] >= 0.0 && p[1] >= 0.0 && p[0] < 640.0 && p[1] < 480.0);
        if !in_image(&ca) || !in_image(&cb) {
            continue;
        }
        let mut jitter = |c: [[f64; 2]; 4]| {
            if cfg.corner_noise_px == 0.0 {
                return c;
            }
            c.map(|p| [p[0] + noise.sample(&mut rng), p[1] + noise.sample(&mut rng)])
        };
        let corners_a = jitter(ca);
        let corners_b = jitter(cb);
        samples.push(TeachingSample {
            corners_a,
            corners_b,
            intrinsics: k,
            relative_pose: None,
        });
    }
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionOutcome {
    pub object: String,
    pub detection: DetectionResult,
    pub corrected: Pose,
    pub placement: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Pose>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_placement: Option<usize>,
}

/// Rough detection of one object in a world-frame cloud, then correction
/// onto its nearest stable placement.
#[allow(clippy::too_many_arguments)]
pub fn detect_and_correct(
    object: &SceneObject,
    library: &[ViewTemplate],
    cloud: &PointCloud,
    sensor: &Sensor,
    table: &TableModel,
    cfg: &DetectConfig,
    mode: CorrectionMode,
) -> Result<DetectionOutcome> {
    let detection = detect_object(cloud, sensor, &object.mesh, library, table, cfg).map_err(|source| CliError::Detection {
        object: object.name.clone(),
        source,
    })?;
    let placement = nearest_placement(&detection.raw_pose.rotation, &object.placements, mode)?;
    let corrected = correct_pose(&detection.raw_pose, &object.placements, table, mode)?;
    let true_placement = object
        .truth
        .map(|t| nearest_placement(&t.rotation, &object.placements, CorrectionMode::YawInvariant))
        .transpose()?;
    Ok(DetectionOutcome {
        object: object.name.clone(),
        detection,
        corrected,
        placement,
        truth: object.truth,
        true_placement,
    })
}

pub fn library_for(object: &SceneObject) -> Result<Vec<ViewTemplate>> {
    build_library(&object.mesh).map_err(|source| CliError::Detection {
        object: object.name.clone(),
        source,
    })
}
