//! Scene files: the objects on the table, the camera, the robot and the
//! noise level. Relative paths are resolved against the scene file.

use crate::error::{read_json, CliError, Result};
use deskasm_core::camera::{look_at, CameraIntrinsics, Sensor};
use deskasm_core::mesh::primitives::{cuboid, l_prism, regular_tetrahedron};
use deskasm_core::mesh::{load_mesh, TriMesh};
use deskasm_core::perception::{render_scene, PointCloud, SceneSurface};
use deskasm_core::placement::{resting_pose, stable_placements, StablePlacement, TableModel};
use deskasm_core::robot::RobotModel;
use deskasm_core::{Pose, Vec3};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeshSource {
    Cuboid {
        size: [f64; 3],
    },
    #[serde(rename_all = "camelCase")]
    LPrism {
        a: f64,
        b: f64,
        t1: f64,
        t2: f64,
        height: f64,
    },
    Tetrahedron {
        edge: f64,
    },
    /// Wavefront OBJ file, scaled into metres.
    Obj {
        path: PathBuf,
        #[serde(default = "unit")]
        scale: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl MeshSource {
    pub fn load(&self, base: &Path) -> Result<TriMesh> {
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        match self {
            MeshSource::Cuboid { size } if positive(size) => Ok(cuboid(size[0], size[1], size[2])),
            MeshSource::LPrism { a, b, t1, t2, height } if positive(&[*a, *b, *t1, *t2, *height]) && t1 < b && t2 < a => {
                Ok(l_prism(*a, *b, *t1, *t2, *height))
            }
            MeshSource::Tetrahedron { edge } if positive(&[*edge]) => Ok(regular_tetrahedron(*edge)),
            MeshSource::Obj { path, scale } => Ok(load_mesh(base.join(path), *scale)?),
            other => Err(CliError::Input(format!("bad builtin mesh dimensions: {other:?}"))),
        }
    }
}

/// Where a part lies: an explicit pose, or a stable placement at a table
/// position and yaw (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoseSpec {
    Resting(Resting),
    Pose(Pose),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resting {
    pub placement: usize,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl PoseSpec {
    pub fn resolve(&self, placements: &[StablePlacement], table: &TableModel, name: &str) -> Result<Pose> {
        match self {
            PoseSpec::Pose(p) => Ok(*p),
            PoseSpec::Resting(r) => {
                let p = placements.get(r.placement).ok_or_else(|| {
                    CliError::Input(format!(
                        "{name}: placement {} requested, the mesh has {}",
                        r.placement,
                        placements.len()
                    ))
                })?;
                Ok(resting_pose(p, table, r.x, r.y, r.yaw))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ObjectEntry {
    pub name: String,
    pub mesh: MeshSource,
    /// Ground truth; required for rendering and error reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<PoseSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CameraConfig {
    pub eye: Vec3,
    pub target: Vec3,
    #[serde(default = "Vec3::z")]
    pub up: Vec3,
    pub intrinsics: CameraIntrinsics,
}

impl CameraConfig {
    pub fn sensor(&self) -> Result<Sensor> {
        let dir = self.target - self.eye;
        if dir.norm() < 1e-9 || dir.normalize().cross(&self.up.normalize()).norm() < 1e-6 {
            return Err(CliError::Input("camera eye, target and up are degenerate".into()));
        }
        Ok(Sensor {
            pose: look_at(&self.eye, &self.target, &self.up),
            intrinsics: self.intrinsics,
        })
    }
}

/// The taught assembly, used to synthesise a demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AssemblyTruth {
    /// B in the frame of A.
    pub relative_pose: Pose,
    #[serde(default = "deskasm_core::teaching::default_approach")]
    pub approach: Vec3,
    pub approach_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SceneConfig {
    pub objects: Vec<ObjectEntry>,
    pub table: TableModel,
    pub camera: CameraConfig,
    /// Robot model JSON; the built-in arm when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<PathBuf>,
    /// Depth noise (m).
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Where the first object should end up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<PoseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assembly: Option<AssemblyTruth>,
}

/// Table used by the built-in scenes.
pub fn desk_table() -> TableModel {
    TableModel::new(0.0, [0.15, -0.3, 0.55, 0.3])
}

/// Kinect-like camera over the front edge of the desk.
pub fn desk_camera() -> CameraConfig {
    CameraConfig {
        eye: Vec3::new(0.35, -0.45, 0.55),
        target: Vec3::new(0.35, 0.0, 0.0),
        up: Vec3::z(),
        intrinsics: CameraIntrinsics::centered(525.0, 640, 480),
    }
}

/// Two blocks: B is stacked onto A, which is first moved to the middle of the
/// desk.
pub fn demo_scene() -> SceneConfig {
    let resting = |placement, x, y, yaw| Some(PoseSpec::Resting(Resting { placement, x, y, yaw }));
    SceneConfig {
        objects: vec![
            ObjectEntry {
                name: "A".into(),
                mesh: MeshSource::Cuboid { size: [0.05, 0.05, 0.03] },
                pose: resting(0, 0.30, 0.15, 0.3),
            },
            ObjectEntry {
                name: "B".into(),
                mesh: MeshSource::Cuboid { size: [0.04, 0.04, 0.04] },
                pose: resting(1, 0.30, -0.15, -0.5),
            },
        ],
        table: desk_table(),
        camera: desk_camera(),
        robot: None,
        noise_sigma: 0.002,
        seed: 0,
        goal: resting(0, 0.42, 0.0, 0.0),
        assembly: Some(AssemblyTruth {
            relative_pose: Pose::from_translation(Vec3::new(0.0, 0.0, 0.035)),
            approach: Vec3::new(0.0, 0.0, -1.0),
            approach_length: 0.04,
        }),
    }
}

#[derive(Debug, Clone)]
pub struct SceneObject {
    pub name: String,
    pub mesh: TriMesh,
    pub placements: Vec<StablePlacement>,
    pub truth: Option<Pose>,
}

/// A scene with meshes loaded and poses resolved.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub objects: Vec<SceneObject>,
    pub sensor: Sensor,
    pub robot: RobotModel,
    pub goal: Option<Pose>,
}

impl SceneConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let cfg: SceneConfig = read_json(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn resolve(&self, base: &Path, margin_fraction: f64) -> Result<Scene> {
        if self.objects.is_empty() {
            return Err(CliError::Input("scene lists no objects".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(CliError::Input(format!("negative noise sigma {}", self.noise_sigma)));
        }
        let mut objects = Vec::with_capacity(self.objects.len());
        for o in &self.objects {
            let mesh = o.mesh.load(base)?;
            mesh.require_watertight()?;
            let placements = stable_placements(&mesh, margin_fraction)?;
            let truth = o.pose.map(|p| p.resolve(&placements, &self.table, &o.name)).transpose()?;
            objects.push(SceneObject {
                name: o.name.clone(),
                mesh,
                placements,
                truth,
            });
        }
        let robot = match &self.robot {
            Some(p) => read_json(&base.join(p))?,
            None => RobotModel::default(),
        };
        let goal = match (&self.goal, objects.first()) {
            (Some(g), Some(a)) => Some(g.resolve(&a.placements, &self.table, &a.name)?),
            _ => None,
        };
        Ok(Scene {
            config: self.clone(),
            objects,
            sensor: self.camera.sensor()?,
            robot,
            goal,
        })
    }
}

impl Scene {
    pub fn object(&self, name: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    /// Noisy world-frame depth cloud of every object with a known pose.
    pub fn render(&self, seed: u64) -> PointCloud {
        self.render_counted(seed).0
    }

    /// As `render`, with the number of points each object contributed
    /// (zero for objects without a pose), in scene order.
    pub fn render_counted(&self, seed: u64) -> (PointCloud, Vec<usize>) {
        let posed: Vec<usize> = (0..self.objects.len()).filter(|&i| self.objects[i].truth.is_some()).collect();
        let surfaces: Vec<SceneSurface> = posed
            .iter()
            .map(|&i| SceneSurface {
                mesh: &self.objects[i].mesh,
                pose: self.objects[i].truth.expect("posed"),
            })
            .collect();
        let out = render_scene(
            &surfaces,
            Some(&self.config.table),
            &self.sensor.pose,
            &self.sensor.intrinsics,
            self.config.noise_sigma,
            seed,
        );
        let mut counts = vec![0; self.objects.len()];
        for l in out.labels.iter().flatten() {
            counts[posed[*l]] += 1;
        }
        (out.cloud.transformed(&self.sensor.pose), counts)
    }
}

/// Centres of the four table quarters.
pub fn quarter_centres(table: &TableModel) -> [(f64, f64); 4] {
    let [x0, y0, x1, y1] = table.bounds;
    let (xa, xb) = (x0 + 0.25 * (x1 - x0), x0 + 0.75 * (x1 - x0));
    let (ya, yb) = (y0 + 0.25 * (y1 - y0), y0 + 0.75 * (y1 - y0));
    [(xa, ya), (xb, ya), (xa, yb), (xb, yb)]
}
