use super::PointCloud;
use crate::camera::CameraIntrinsics;
use crate::mesh::{ray_triangle, TriMesh};
use crate::placement::TableModel;
use crate::se3::{Pose, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A mesh placed in the world.
#[derive(Debug, Clone, Copy)]
pub struct SceneSurface<'a> {
    pub mesh: &'a TriMesh,
    pub pose: Pose,
}

#[derive(Debug, Clone)]
pub struct RenderOutput {
    /// Points and normals in the camera frame.
    pub cloud: PointCloud,
    /// Index of the surface each point came from, `None` for the table.
    pub labels: Vec<Option<usize>>,
    /// Set when no pixel hit anything.
    pub empty: bool,
}

/// Depth rendering of a single mesh (`camera` maps camera to mesh frame).
pub fn render_cloud(mesh: &TriMesh, camera: &Pose, k: &CameraIntrinsics) -> RenderOutput {
    render_scene(
        &[SceneSurface {
            mesh,
            pose: Pose::identity(),
        }],
        None,
        camera,
        k,
        0.0,
        0,
    )
}

/// Ray-cast depth image of the surfaces and the optional table top. Each pixel
/// keeps its nearest hit. With `noise_sigma > 0` the range of every point is
/// perturbed by Gaussian noise along its ray.
pub fn render_scene(
    surfaces: &[SceneSurface],
    table: Option<&TableModel>,
    camera: &Pose,
    k: &CameraIntrinsics,
    noise_sigma: f64,
    seed: u64,
) -> RenderOutput {
    let (w, h) = (k.width as usize, k.height as usize);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut hit: Vec<Option<(Option<usize>, Vec3)>> = vec![None; w * h];
    let world_to_cam = camera.inverse();

    let mut raster = |tri: [Vec3; 3], label: Option<usize>| {
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
        if n.norm() == 0.0 {
            return;
        }
        let n = n.normalize();
        let (u0, u1, v0, v1) = pixel_box(&tri, k);
        for v in v0..v1 {
            for u in u0..u1 {
                let d = k.ray(u as f64, v as f64);
                if let Some(t) = ray_triangle(&Vec3::zeros(), &d, &tri, 1e-9) {
                    let px = v * w + u;
                    if t < depth[px] {
                        depth[px] = t;
                        hit[px] = Some((label, n));
                    }
                }
            }
        }
    };

    for (si, s) in surfaces.iter().enumerate() {
        let to_cam = world_to_cam.compose(&s.pose);
        let verts: Vec<Vec3> = s.mesh.vertices.iter().map(|v| to_cam.transform_point(v)).collect();
        for t in &s.mesh.triangles {
            raster([verts[t[0]], verts[t[1]], verts[t[2]]], Some(si));
        }
    }
    if let Some(tb) = table {
        let [x0, y0, x1, y1] = tb.bounds;
        let c: Vec<Vec3> = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
            .iter()
            .map(|&(x, y)| world_to_cam.transform_point(&Vec3::new(x, y, tb.height)))
            .collect();
        raster([c[0], c[1], c[2]], None);
        raster([c[0], c[2], c[3]], None);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).expect("finite sigma");
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut labels = Vec::new();
    for v in 0..h {
        for u in 0..w {
            let px = v * w + u;
            let Some((label, n)) = hit[px] else { continue };
            let d = k.ray(u as f64, v as f64);
            let mut p = d * depth[px];
            if noise_sigma > 0.0 {
                p += d.normalize() * noise.sample(&mut rng);
            }
            let n = if n.dot(&p) > 0.0 { -n } else { n };
            points.push(p);
            normals.push(n);
            labels.push(label);
        }
    }
    let empty = points.is_empty();
    if empty {
        log::warn!("rendered cloud is empty: nothing inside the view frustum");
    }
    RenderOutput {
        cloud: PointCloud::with_normals(points, normals),
        labels,
        empty,
    }
}

/// Half-open pixel range covering the projected triangle, the whole image
/// when any corner is behind the camera.
fn pixel_box(tri: &[Vec3; 3], k: &CameraIntrinsics) -> (usize, usize, usize, usize) {
    let (w, h) = (k.width as usize, k.height as usize);
    if tri.iter().any(|p| p.z <= 1e-6) {
        if tri.iter().all(|p| p.z <= 1e-6) {
            return (0, 0, 0, 0);
        }
        return (0, w, 0, h);
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in tri {
        let q = k.project(p).expect("in front");
        lo = [lo[0].min(q.x), lo[1].min(q.y)];
        hi = [hi[0].max(q.x), hi[1].max(q.y)];
    }
    let clamp = |x: f64, m: usize| x.max(0.0).min(m as f64) as usize;
    (
        clamp(lo[0].floor(), w),
        clamp(hi[0].floor() + 1.0, w),
        clamp(lo[1].floor(), h),
        clamp(hi[1].floor() + 1.0, h),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::look_at;
    use crate::mesh::primitives;

    #[test]
    fn square_facing_camera_has_unit_depth() {
        let sq = TriMesh::new(
            vec![
                Vec3::new(-0.5, -0.5, 1.0),
                Vec3::new(0.5, -0.5, 1.0),
                Vec3::new(0.5, 0.5, 1.0),
                Vec3::new(-0.5, 0.5, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let k = CameraIntrinsics::centered(100.0, 64, 48);
        let out = render_cloud(&sq, &Pose::identity(), &k);
        assert!(!out.empty);
        for (p, n) in out.cloud.points.iter().zip(out.cloud.normals.as_ref().unwrap()) {
            assert!((p.z - 1.0).abs() < 1e-9);
            assert!((n + Vec3::z()).norm() < 1e-12);
        }
    }

    #[test]
    fn far_face_is_occluded() {
        let cube = primitives::cuboid(0.1, 0.1, 0.1);
        let cam = look_at(&Vec3::new(0.5, 0.02, 0.01), &Vec3::zeros(), &Vec3::z());
        let k = CameraIntrinsics::centered(300.0, 120, 120);
        let out = render_cloud(&cube, &cam, &k);
        let world = out.cloud.transformed(&cam);
        assert!(!world.is_empty());
        assert!(world.points.iter().all(|p| p.x > -0.05 + 1e-6));
    }

    #[test]
    fn point_count_scales_with_area() {
        let cube = primitives::cuboid(0.1, 0.1, 0.1);
        let cam = look_at(&Vec3::new(0.3, 0.2, 0.25), &Vec3::zeros(), &Vec3::z());
        let k = CameraIntrinsics::centered(400.0, 200, 200);
        let full = render_cloud(&cube, &cam, &k).cloud.len() as f64;
        let half = render_cloud(&cube, &cam, &k.rescaled(0.5)).cloud.len() as f64;
        assert!((half / full - 0.25).abs() < 0.025, "{half} / {full}");
    }

    #[test]
    fn outside_frustum_is_flagged() {
        let cube = primitives::cuboid(0.1, 0.1, 0.1);
        let cam = look_at(&Vec3::new(1.0, 0.0, 0.0), &Vec3::new(2.0, 0.0, 0.0), &Vec3::z());
        let out = render_cloud(&cube, &cam, &CameraIntrinsics::centered(100.0, 50, 50));
        assert!(out.empty);
    }

    #[test]
    fn noisy_scene_is_seeded_and_labelled() {
        let cube = primitives::cuboid(0.05, 0.05, 0.05);
        let table = TableModel::new(0.0, [-0.3, -0.3, 0.3, 0.3]);
        let s = [SceneSurface {
            mesh: &cube,
            pose: Pose::from_translation(Vec3::new(0.0, 0.0, 0.025)),
        }];
        let cam = look_at(&Vec3::new(0.0, -0.4, 0.5), &Vec3::zeros(), &Vec3::z());
        let k = CameraIntrinsics::centered(200.0, 80, 60);
        let a = render_scene(&s, Some(&table), &cam, &k, 0.002, 9);
        let b = render_scene(&s, Some(&table), &cam, &k, 0.002, 9);
        assert_eq!(a.cloud, b.cloud);
        assert!(a.labels.contains(&None) && a.labels.contains(&Some(0)));
    }
}
