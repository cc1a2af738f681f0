use super::{PerceptionError, PointCloud, SpatialIndex};
use crate::se3::{Pose, Rotation, Vec3};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

/// Consecutive rmse increases after which a run is declared divergent.
const DIVERGENCE_RUN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct IcpConfig {
    pub max_iter: usize,
    /// Stop once an iteration improves the rmse by less than this (m).
    pub convergence_tol: f64,
    /// Correspondence rejection distance. Defaults to `cap_factor` times the
    /// median nearest-neighbour spacing of the scene.
    pub max_correspondence: Option<f64>,
    pub cap_factor: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iter: 60,
            convergence_tol: 1e-8,
            max_correspondence: None,
            cap_factor: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcpStatus {
    Converged,
    MaxIterations,
    Diverged,
    NoCorrespondence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Model-to-scene transform with the lowest rmse seen.
    pub pose: Pose,
    pub rmse: f64,
    /// Scene points with no model point within the cap at `pose`.
    pub outliers: usize,
    pub iterations: usize,
    pub status: IcpStatus,
    pub cap: f64,
    /// Rmse of each accepted (improving) iteration.
    pub history: Vec<f64>,
}

impl IcpResult {
    pub fn failed(&self) -> bool {
        matches!(self.status, IcpStatus::Diverged | IcpStatus::NoCorrespondence)
    }
}

/// Model points with a prebuilt spatial index, reusable across many runs.
pub struct IcpModel {
    points: Vec<Vec3>,
    index: SpatialIndex,
}

impl IcpModel {
    pub fn new(model: &PointCloud) -> Result<Self, PerceptionError> {
        if model.is_empty() {
            return Err(PerceptionError::EmptyCloud);
        }
        Ok(Self {
            points: model.points.clone(),
            index: SpatialIndex::new(&model.points),
        })
    }

    /// Point-to-point ICP estimating `T` with `scene ~ T * model`.
    pub fn refine(&self, scene: &PointCloud, init: &Pose, cfg: &IcpConfig) -> Result<IcpResult, PerceptionError> {
        if scene.is_empty() {
            return Err(PerceptionError::EmptyCloud);
        }
        let cap = cfg
            .max_correspondence
            .unwrap_or_else(|| cfg.cap_factor * scene.median_spacing())
            .max(1e-9);
        let mut t = *init;
        let mut best = (*init, f64::INFINITY);
        let mut history = Vec::new();
        let mut prev = f64::INFINITY;
        let mut rising = 0;
        let mut status = IcpStatus::MaxIterations;
        let mut iterations = 0;
        for it in 1..=cfg.max_iter.max(1) {
            iterations = it;
            let inv = t.inverse();
            let mut src = Vec::with_capacity(scene.len());
            let mut dst = Vec::with_capacity(scene.len());
            let mut sq = 0.0;
            for s in &scene.points {
                let y = inv.transform_point(s);
                let (j, d) = self.index.nearest(&y);
                if d <= cap {
                    src.push(y);
                    dst.push(self.points[j]);
                    sq += d * d;
                }
            }
            if src.len() < 3 {
                status = IcpStatus::NoCorrespondence;
                break;
            }
            let rmse = (sq / src.len() as f64).sqrt();
            if rmse < best.1 {
                best = (t, rmse);
                history.push(rmse);
            }
            if rmse < 1e-12 {
                status = IcpStatus::Converged;
                break;
            }
            if rmse > prev {
                rising += 1;
                if rising >= DIVERGENCE_RUN {
                    status = IcpStatus::Diverged;
                    break;
                }
            } else {
                rising = 0;
                if prev - rmse < cfg.convergence_tol {
                    status = IcpStatus::Converged;
                    break;
                }
            }
            prev = rmse;
            let a = kabsch(&src, &dst);
            t = t.compose(&a.inverse());
        }
        let (pose, rmse) = best;
        let outliers = self.count_outliers(scene, &pose, cap);
        Ok(IcpResult {
            pose,
            rmse: if rmse.is_finite() { rmse } else { f64::INFINITY },
            outliers,
            iterations,
            status,
            cap,
            history,
        })
    }

    pub fn count_outliers(&self, scene: &PointCloud, pose: &Pose, cap: f64) -> usize {
        let inv = pose.inverse();
        scene
            .points
            .iter()
            .filter(|s| self.index.nearest(&inv.transform_point(s)).1 > cap)
            .count()
    }
}

pub fn icp_refine(
    model: &PointCloud,
    scene: &PointCloud,
    init: &Pose,
    cfg: &IcpConfig,
) -> Result<IcpResult, PerceptionError> {
    IcpModel::new(model)?.refine(scene, init, cfg)
}

/// Least-squares rigid transform taking `src` onto `dst`.
pub(crate) fn kabsch(src: &[Vec3], dst: &[Vec3]) -> Pose {
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vec3>() / n;
    let cd = dst.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let sign = (v * u.transpose()).determinant().signum();
    let d = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, if sign == 0.0 { 1.0 } else { sign }));
    let r = Rotation::orthonormalize(&(v * d * u.transpose()));
    Pose::new(cd - r.apply(&cs), r)
}
