use super::SpatialIndex;
use crate::se3::Vec3;
use nalgebra::{Matrix3, SymmetricEigen};

/// Normals from the smallest principal axis of each point's `k` nearest
/// neighbours, oriented toward `viewpoint`.
pub fn estimate_normals(points: &[Vec3], k: usize, viewpoint: &Vec3) -> Vec<Vec3> {
    let index = SpatialIndex::new(points);
    points
        .iter()
        .map(|p| {
            let nn = index.knn(p, k.max(3));
            let mean = nn.iter().map(|&i| points[i]).sum::<Vec3>() / nn.len() as f64;
            let mut cov = Matrix3::zeros();
            for &i in &nn {
                let d = points[i] - mean;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let mut best = 0;
            for j in 1..3 {
                if eig.eigenvalues[j] < eig.eigenvalues[best] {
                    best = j;
                }
            }
            let mut n: Vec3 = eig.eigenvectors.column(best).into_owned();
            if n.norm() < 1e-12 {
                n = (viewpoint - p).normalize();
            } else {
                n.normalize_mut();
            }
            if n.dot(&(viewpoint - p)) < 0.0 {
                n = -n;
            }
            n
        })
        .collect()
}
