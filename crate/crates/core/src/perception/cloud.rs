use super::{PerceptionError, SpatialIndex};
use crate::mesh::TriMesh;
use crate::se3::{Pose, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, normals: None }
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Self {
        assert_eq!(points.len(), normals.len(), "one normal per point");
        Self {
            points,
            normals: Some(normals),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        self.points.iter().sum::<Vec3>() / self.points.len().max(1) as f64
    }

    pub fn transformed(&self, pose: &Pose) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| pose.transform_point(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| n.iter().map(|v| pose.transform_vector(v)).collect()),
        }
    }

    pub fn subset(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| idx.iter().map(|&i| n[i]).collect()),
        }
    }

    /// Median distance from each point to its nearest other point.
    pub fn median_spacing(&self) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let index = SpatialIndex::new(&self.points);
        let mut d: Vec<f64> = self
            .points
            .iter()
            .map(|p| {
                let nn = index.knn(p, 2);
                (self.points[nn[nn.len() - 1]] - p).norm()
            })
            .collect();
        d.sort_by(f64::total_cmp);
        d[d.len() / 2]
    }

    /// ASCII PLY with `x y z` and, when present, `nx ny nz`.
    pub fn to_ply(&self) -> String {
        let mut s = String::from("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "element vertex {}", self.points.len());
        s.push_str("property double x\nproperty double y\nproperty double z\n");
        if self.normals.is_some() {
            s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
        }
        s.push_str("end_header\n");
        for (i, p) in self.points.iter().enumerate() {
            match &self.normals {
                Some(n) => {
                    let _ = writeln!(s, "{} {} {} {} {} {}", p.x, p.y, p.z, n[i].x, n[i].y, n[i].z);
                }
                None => {
                    let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
                }
            }
        }
        s
    }

    pub fn from_ply(text: &str) -> Result<PointCloud, PerceptionError> {
        let mut lines = text.lines();
        let bad = |m: &str| PerceptionError::Ply(m.to_string());
        if lines.next() != Some("ply") {
            return Err(bad("missing magic"));
        }
        let mut count = None;
        let mut props = 0;
        for line in lines.by_ref() {
            let t: Vec<&str> = line.split_whitespace().collect();
            match t.as_slice() {
                ["end_header"] => break,
                ["element", "vertex", n] => {
                    count = Some(n.parse::<usize>().map_err(|_| bad("vertex count"))?)
                }
                ["property", _, _] => props += 1,
                ["format", "ascii", _] => {}
                _ => {}
            }
        }
        let count = count.ok_or_else(|| bad("no vertex element"))?;
        if props != 3 && props != 6 {
            return Err(bad("expected 3 or 6 vertex properties"));
        }
        let mut points = Vec::with_capacity(count);
        let mut normals = Vec::new();
        for _ in 0..count {
            let line = lines.next().ok_or_else(|| bad("truncated body"))?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| bad("bad number"))?;
            if v.len() != props {
                return Err(bad("wrong value count"));
            }
            points.push(Vec3::new(v[0], v[1], v[2]));
            if props == 6 {
                normals.push(Vec3::new(v[3], v[4], v[5]));
            }
        }
        Ok(if props == 6 {
            PointCloud::with_normals(points, normals)
        } else {
            PointCloud::new(points)
        })
    }
}

/// Area-weighted uniform samples of the mesh surface, with face normals.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> PointCloud {
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut acc = 0.0;
    for t in 0..mesh.triangles.len() {
        acc += mesh.triangle_area(t);
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random::<f64>() * acc;
        let t = cdf.partition_point(|&c| c < x).min(cdf.len() - 1);
        let [a, b, c] = mesh.corners(t);
        let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        points.push(a + (b - a) * u + (c - a) * v);
        normals.push(mesh.triangle_normal(t));
    }
    PointCloud::with_normals(points, normals)
}
