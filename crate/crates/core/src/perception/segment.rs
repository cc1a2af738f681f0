use super::{PointCloud, SpatialIndex};
use std::collections::VecDeque;

/// Connected components under the "within `link_distance`" relation. Components
/// smaller than `min_size` are dropped; the rest are ordered by size, largest
/// first, then by their smallest point index. Each component's indices are sorted.
pub fn segment_clusters(cloud: &PointCloud, link_distance: f64, min_size: usize) -> Vec<Vec<usize>> {
    assert!(link_distance > 0.0, "link distance must be positive");
    let n = cloud.len();
    if n == 0 {
        return Vec::new();
    }
    let index = SpatialIndex::new(&cloud.points);
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut q = VecDeque::from([s]);
        while let Some(i) = q.pop_front() {
            for j in index.within(&cloud.points[i], link_distance) {
                if !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                    q.push_back(j);
                }
            }
        }
        if comp.len() >= min_size {
            comp.sort_unstable();
            comps.push(comp);
        }
    }
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::Vec3;

    fn blob(center: Vec3, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|i| center + Vec3::new((i % 5) as f64, ((i / 5) % 5) as f64, (i / 25) as f64) * 0.01)
            .collect()
    }

    #[test]
    fn two_blobs() {
        let mut p = blob(Vec3::zeros(), 50);
        p.extend(blob(Vec3::new(1.0, 0.0, 0.0), 60));
        let c = segment_clusters(&PointCloud::new(p), 0.05, 1);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].len(), 60);
        assert_eq!(c[1], (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn single_blob_and_min_size() {
        let p = PointCloud::new(blob(Vec3::zeros(), 40));
        assert_eq!(segment_clusters(&p, 0.05, 1), vec![(0..40).collect::<Vec<_>>()]);
        assert!(segment_clusters(&p, 0.05, 41).is_empty());
    }

    #[test]
    fn equal_sizes_ordered_by_first_index() {
        let mut p = blob(Vec3::new(2.0, 0.0, 0.0), 30);
        p.extend(blob(Vec3::zeros(), 30));
        let c = segment_clusters(&PointCloud::new(p), 0.05, 1);
        assert_eq!(c[0][0], 0);
        assert_eq!(c[1][0], 30);
    }
}
