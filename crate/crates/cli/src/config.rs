//! Run configuration file. Every key is optional; missing keys take the
//! defaults below.

use crate::error::{read_json, Result};
use deskasm_core::grasp::GraspSamplerConfig;
use deskasm_core::perception::DetectConfig;
use deskasm_core::placement::{CorrectionMode, DEFAULT_MARGIN_FRACTION};
use deskasm_core::plan::PipelineConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// How synthetic marker recordings are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SynthTeaching {
    pub samples: usize,
    /// Gaussian noise on each corner coordinate (px).
    pub corner_noise_px: f64,
    pub marker_side: f64,
    pub focal_px: f64,
    pub distance: f64,
    /// Camera tilt from the marker normal, drawn from this range (deg).
    pub tilt_deg: [f64; 2],
}

impl Default for SynthTeaching {
    fn default() -> Self {
        Self {
            samples: 5,
            corner_noise_px: 0.0,
            marker_side: 0.04,
            focal_px: 600.0,
            distance: 0.6,
            tilt_deg: [20.0, 60.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct RunConfig {
    /// Placements with a stability margin below this fraction of their
    /// support inradius are dropped.
    pub margin_fraction: f64,
    pub correction: CorrectionMode,
    pub detect: DetectConfig,
    /// Plane removal margin as a multiple of the depth noise.
    pub plane_sigmas: f64,
    pub grasp: GraspSamplerConfig,
    pub pipeline: PipelineConfig,
    pub teaching: SynthTeaching,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut pipeline = PipelineConfig::default();
        pipeline.graph.yaw_samples = 8;
        Self {
            margin_fraction: DEFAULT_MARGIN_FRACTION,
            correction: CorrectionMode::YawInvariant,
            detect: DetectConfig {
                min_segment: 150,
                ..Default::default()
            },
            plane_sigmas: 4.0,
            grasp: GraspSamplerConfig {
                pairs_per_face: 4,
                approach_samples: 8,
                ..Default::default()
            },
            pipeline,
            teaching: SynthTeaching::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => read_json(p),
            None => Ok(Self::default()),
        }
    }

    /// Detection settings for a given depth noise: points within a few sigma
    /// of the table plane are treated as table.
    pub fn detect_for(&self, noise_sigma: f64, seed: u64) -> DetectConfig {
        let mut d = self.detect;
        let clearance = d.plane_clearance.max(self.plane_sigmas * noise_sigma);
        d.plane_clearance = clearance;
        d.ransac.dist_tol = d.ransac.dist_tol.max(clearance);
        d.seed = seed;
        d.ransac.seed = seed;
        d
    }
}

/// Seeds of the independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Render = 1,
    Detect = 2,
    Teach = 3,
    Motion = 4,
}

/// Per-stage seed derived from the run seed (splitmix64).
pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    let mut z = seed.wrapping_add((stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
