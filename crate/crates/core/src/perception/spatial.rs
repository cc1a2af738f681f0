use crate::se3::Vec3;
use kiddo::{ImmutableKdTree, SquaredEuclidean};
use std::num::NonZero;

/// Static kd-tree over a point set. Items are indices into the input slice.
pub struct SpatialIndex {
    tree: ImmutableKdTree<f64, 3>,
    len: usize,
}

impl SpatialIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        Self {
            tree: ImmutableKdTree::new_from_slice(&raw),
            len: points.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Index and Euclidean distance of the closest point.
    pub fn nearest(&self, q: &Vec3) -> (usize, f64) {
        let n = self.tree.nearest_one::<SquaredEuclidean>(&[q.x, q.y, q.z]);
        (n.item as usize, n.distance.sqrt())
    }

    /// Indices within `radius`, sorted ascending.
    pub fn within(&self, q: &Vec3, radius: f64) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .tree
            .within_unsorted::<SquaredEuclidean>(&[q.x, q.y, q.z], radius * radius)
            .into_iter()
            .map(|n| n.item as usize)
            .collect();
        v.sort_unstable();
        v
    }

    /// The `k` nearest indices, closest first.
    pub fn knn(&self, q: &Vec3, k: usize) -> Vec<usize> {
        let Some(k) = NonZero::new(k.min(self.len)) else {
            return Vec::new();
        };
        self.tree
            .nearest_n::<SquaredEuclidean>(&[q.x, q.y, q.z], k)
            .into_iter()
            .map(|n| n.item as usize)
            .collect()
    }
}
