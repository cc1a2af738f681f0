use super::{PerceptionError, PointCloud};
use crate::se3::Vec3;
use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RansacConfig {
    pub dist_tol: f64,
    pub iterations: usize,
    pub min_inlier_ratio: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            dist_tol: 0.003,
            iterations: 500,
            min_inlier_ratio: 0.2,
            seed: 0,
        }
    }
}

/// `normal . p + offset = 0` with a unit normal whose z component is non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
    pub inliers: Vec<usize>,
}

impl Plane {
    pub fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) + self.offset
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.normal.x, self.normal.y, self.normal.z, self.offset]
    }
}

fn oriented(n: Vec3, off: f64) -> (Vec3, f64) {
    let flip = n.z < 0.0 || (n.z == 0.0 && (n.y < 0.0 || (n.y == 0.0 && n.x < 0.0)));
    if flip {
        (-n, -off)
    } else {
        (n, off)
    }
}

/// RANSAC plane with a least-squares refit on the winning consensus set.
pub fn extract_plane(cloud: &PointCloud, cfg: &RansacConfig) -> Result<Plane, PerceptionError> {
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Err(PerceptionError::TooFewPoints { need: 3, got: pts.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let count = |n: &Vec3, off: f64| pts.iter().filter(|p| (n.dot(p) + off).abs() <= cfg.dist_tol).count();
    let mut best: Option<(usize, Vec3, f64)> = None;
    for _ in 0..cfg.iterations.max(1) {
        let i = rng.random_range(0..pts.len());
        let j = rng.random_range(0..pts.len());
        let k = rng.random_range(0..pts.len());
        let n = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
        if n.norm() < 1e-12 {
            continue;
        }
        let n = n.normalize();
        let off = -n.dot(&pts[i]);
        let c = count(&n, off);
        if best.is_none_or(|b| c > b.0) {
            best = Some((c, n, off));
        }
    }
    let Some((_, n, off)) = best else {
        return Err(PerceptionError::NoPlane { ratio: 0.0, min: cfg.min_inlier_ratio });
    };
    let inliers: Vec<usize> = (0..pts.len())
        .filter(|&i| (n.dot(&pts[i]) + off).abs() <= cfg.dist_tol)
        .collect();
    let (n, off) = refit(pts, &inliers).unwrap_or((n, off));
    let (n, off) = oriented(n, off);
    let inliers: Vec<usize> = (0..pts.len())
        .filter(|&i| (n.dot(&pts[i]) + off).abs() <= cfg.dist_tol)
        .collect();
    let ratio = inliers.len() as f64 / pts.len() as f64;
    if ratio < cfg.min_inlier_ratio {
        return Err(PerceptionError::NoPlane { ratio, min: cfg.min_inlier_ratio });
    }
    Ok(Plane {
        normal: n,
        offset: off,
        inliers,
    })
}

fn refit(pts: &[Vec3], idx: &[usize]) -> Option<(Vec3, f64)> {
    if idx.len() < 3 {
        return None;
    }
    let mean = idx.iter().map(|&i| pts[i]).sum::<Vec3>() / idx.len() as f64;
    let mut cov = Matrix3::zeros();
    for &i in idx {
        let d = pts[i] - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let j = eig.eigenvalues.imin();
    let n: Vec3 = eig.eigenvectors.column(j).normalize();
    Some((n, -n.dot(&mean)))
}
