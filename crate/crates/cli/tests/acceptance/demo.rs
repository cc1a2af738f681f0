//! The two-block demo: structure, an independent collision re-check at a
//! finer joint resolution, and byte-identical reruns of every command.

use crate::geom::{capsule_clearance, sat_overlap, self_check, Polytope};
use crate::{ensure, within, Outcome};
use deskasm::commands::{run_demo, Options, Output};
use deskasm::scene::{demo_scene, Scene};
use deskasm_core::collision::TABLE_THICKNESS;
use deskasm_core::plan::{SegmentKind, Trajectory};
use deskasm_core::robot::{JointConfig, RobotModel};
use deskasm_core::teaching::teaching_record_from_json;
use deskasm_core::{Pose, Vec3};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

/// Joint step of the planner's own collision checks.
const PLANNER_STEP: f64 = 0.02;
const FINE_STEP: f64 = PLANNER_STEP / 4.0;
/// Spacing of the points sampled along each capsule axis.
const AXIS_STEP: f64 = 5e-4;
/// Interpenetration accepted where parts rest on the table or on each other.
const CONTACT: f64 = 1e-4;

fn lerp(a: &JointConfig, b: &JointConfig, s: f64) -> JointConfig {
    std::array::from_fn(|i| a[i] + (b[i] - a[i]) * s)
}

#[derive(Default)]
struct Recheck {
    samples: usize,
    min_clearance: f64,
    max_penetration: f64,
}

/// Re-checks every segment at `FINE_STEP` joint resolution. The carried part
/// follows the palm rigidly from its pose at the preceding waypoint.
fn recheck(traj: &Trajectory, scene: &Scene) -> Result<Recheck, String> {
    let robot: &RobotModel = &scene.robot;
    let t = &scene.config.table;
    let [x0, y0, x1, y1] = t.bounds;
    let table = Polytope::aabb(Vec3::new(x0, y0, t.height - TABLE_THICKNESS), Vec3::new(x1, y1, t.height));
    let mesh_of = |name: &str| scene.object(name).map(|o| &o.mesh).ok_or(format!("unknown part {name}"));
    let mut stats = Recheck {
        min_clearance: f64::INFINITY,
        ..Default::default()
    };
    for (si, seg) in traj.segments.iter().enumerate() {
        let mut statics = vec![table.clone()];
        for s in &seg.static_objects {
            statics.push(Polytope::from_mesh(mesh_of(&s.name)?, &s.pose));
        }
        let held = match &seg.object {
            Some(name) => {
                ensure(seg.object_poses.len() == seg.waypoints.len(), || format!("segment {si}: object poses do not match waypoints"))?;
                Some(mesh_of(name)?)
            }
            None => None,
        };
        let w = &seg.waypoints;
        for i in 0..w.len() {
            let next = w.get(i + 1).unwrap_or(&w[i]);
            let span = (0..6).map(|j| (next[j] - w[i][j]).abs()).fold(0.0, f64::max);
            let n = if i + 1 == w.len() { 1 } else { (span / FINE_STEP).ceil().max(1.0) as usize };
            let in_palm = held.map(|_| robot.fk(&w[i]).inverse().compose(&seg.object_poses[i]));
            if let (Some(local), Some(p)) = (in_palm, seg.object_poses.get(i + 1)) {
                let (dp, dr) = robot.fk(next).compose(&local).error_to(p);
                ensure(dp < 1e-9 && dr < 1e-9, || format!("segment {si}: carried part slips at waypoint {i}"))?;
            }
            for k in 0..n {
                let q = lerp(&w[i], next, k as f64 / n as f64);
                stats.samples += 1;
                let at = || format!("segment {si} ({:?}) waypoint {i} sample {k}", seg.kind);
                ensure(robot.within_limits(&q), || format!("{}: joint limits", at()))?;
                let palm = robot.fk(&q);
                let arm = robot.arm_capsules(&q);
                let part = match (held, in_palm) {
                    (Some(m), Some(local)) => Some(Polytope::from_mesh(m, &palm.compose(&local))),
                    _ => None,
                };
                for (ci, c) in arm.iter().chain(&robot.gripper_capsules_at(&palm, seg.opening)).enumerate() {
                    for body in &statics {
                        let d = capsule_clearance(&c.a, &c.b, c.radius, body, AXIS_STEP);
                        stats.min_clearance = stats.min_clearance.min(d);
                        ensure(d > 0.0, || format!("{}: capsule {ci} hits the scene ({d:e})", at()))?;
                    }
                }
                if let Some(part) = &part {
                    for c in &arm {
                        let d = capsule_clearance(&c.a, &c.b, c.radius, part, AXIS_STEP);
                        ensure(d > 0.0, || format!("{}: arm hits the carried part ({d:e})", at()))?;
                    }
                    for body in &statics {
                        let o = sat_overlap(part, body);
                        stats.max_penetration = stats.max_penetration.max(o);
                        ensure(o <= CONTACT, || format!("{}: carried part penetrates by {o:e}", at()))?;
                    }
                }
            }
        }
    }
    Ok(stats)
}

fn artifact<'a>(out: &'a Output, file: &str) -> Result<&'a str, String> {
    out.artifact(file).ok_or(format!("run produced no {file}"))
}

pub fn criterion_7() -> Outcome {
    self_check()?;
    let t0 = Instant::now();
    let opts = Options::default();
    let out = run_demo(None, &opts).map_err(|e| e.to_string())?;
    let plan_time = t0.elapsed();
    let again = run_demo(None, &opts).map_err(|e| e.to_string())?;
    ensure(out.artifacts == again.artifacts, || "a rerun with the same seed differs".into())?;

    let traj: Trajectory = serde_json::from_str(artifact(&out, "trajectory.json")?).map_err(|e| e.to_string())?;
    let record = teaching_record_from_json(artifact(&out, "teaching.json")?).map_err(|e| e.to_string())?;
    let report: serde_json::Value = serde_json::from_str(artifact(&out, "report.json")?).map_err(|e| e.to_string())?;
    let goal_a: Pose = serde_json::from_value(report["goalA"].clone()).map_err(|e| e.to_string())?;
    let scene = demo_scene().resolve(Path::new("."), opts.config.margin_fraction).map_err(|e| e.to_string())?;

    // Place A, then carry B over, then insert it.
    let segs = &traj.segments;
    let is = |i: usize, kind: SegmentKind, obj: &str| segs[i].kind == kind && segs[i].object.as_deref() == Some(obj);
    let last_a = (0..segs.len()).rev().find(|&i| is(i, SegmentKind::Transfer, "A")).ok_or("A is never carried")?;
    let first_b = (0..segs.len()).find(|&i| is(i, SegmentKind::Transfer, "B")).ok_or("B is never carried")?;
    // The arm may retreat empty-handed after letting go.
    let insert = (0..segs.len()).rev().find(|&i| segs[i].object.is_some()).ok_or("nothing is carried")?;
    let retreat_only = segs[insert + 1..].iter().all(|s| s.kind == SegmentKind::Transit);
    ensure(last_a < first_b && first_b < insert && is(insert, SegmentKind::Insert, "B") && retreat_only, || {
        let seq: Vec<String> = segs.iter().map(|s| format!("{:?}:{}", s.kind, s.object.as_deref().unwrap_or("-"))).collect();
        format!("segments are not A, then B, then the insertion: {}", seq.join(" "))
    })?;
    let a_final = *segs[last_a].object_poses.last().ok_or("empty transfer")?;
    let (dp, dr) = a_final.error_to(&goal_a);
    ensure(dp < 1e-6 && dr < 1e-6, || format!("A is left {dp:e} m, {dr:e} rad from its goal"))?;

    let b_path = &segs[insert].object_poses;
    let (b0, b1) = (b_path[0].position, b_path[b_path.len() - 1].position);
    let along = (b1 - b0).normalize();
    let approach = a_final.rotation.apply(&record.approach);
    ensure(along.dot(&approach) > 1.0 - 1e-6, || format!("insertion moves along {along:?}, approach is {approach:?}"))?;
    let lateral = b_path
        .iter()
        .map(|p| {
            let r = p.position - b0;
            (r - along * r.dot(&along)).norm()
        })
        .fold(0.0, f64::max);
    ensure(lateral < 1e-6, || format!("insertion strays {lateral:e} m off its line"))?;
    let (ep, er) = a_final.inverse().compose(&b_path[b_path.len() - 1]).error_to(&record.relative_pose);
    ensure(ep < 1e-5 && er < 1e-4, || format!("B ends {ep:e} m, {er:e} rad from the taught pose"))?;

    let t1 = Instant::now();
    let stats = recheck(&traj, &scene)?;
    within(plan_time + t1.elapsed(), 180.0, "demo run and re-check")?;
    Ok(format!(
        "{} segments ({} transit, {} transfer, 1 insert along the approach, lateral {:.1e} m); \
         {} samples at {} rad clear, min capsule clearance {:.2} mm, max part contact {:.1e} m; rerun identical ({:.1} s run, {:.1} s check)",
        segs.len(),
        traj.count(SegmentKind::Transit),
        traj.count(SegmentKind::Transfer),
        lateral,
        stats.samples,
        FINE_STEP,
        stats.min_clearance * 1e3,
        stats.max_penetration.max(0.0),
        plan_time.as_secs_f64(),
        t1.elapsed().as_secs_f64()
    ))
}

struct Run {
    stdout: Vec<u8>,
    files: Vec<(String, Vec<u8>)>,
}

fn run_cli(args: &[&str], out_dir: &Path) -> Result<Run, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_deskasm"))
        .args(args)
        .arg("--json")
        .arg("--out-dir")
        .arg(out_dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("deskasm {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim())
    })?;
    let mut files = Vec::new();
    for entry in std::fs::read_dir(out_dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            files.push((name, std::fs::read(&path).map_err(|e| e.to_string())?));
        }
    }
    files.sort();
    Ok(Run { stdout: out.stdout, files })
}

pub fn criterion_8() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scene = dir.path().join("scene.json");
    std::fs::write(&scene, serde_json::to_string_pretty(&demo_scene()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let scene = scene.to_string_lossy().into_owned();
    let demo_dir: PathBuf = dir.path().join("run-demo-0");
    let path_in = |f: &str| demo_dir.join(f).to_string_lossy().into_owned();
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("run-demo", vec!["run-demo".into(), "--scene".into(), scene.clone(), "--seed".into(), "7".into()]),
        ("placements", vec!["placements".into(), "--scene".into(), scene.clone()]),
        ("teach", vec!["teach".into(), path_in("recording.json")]),
        ("detect", vec!["detect".into(), "--scene".into(), scene.clone(), "--seed".into(), "7".into()]),
        (
            "plan",
            vec!["plan".into(), "--scene".into(), scene.clone(), "--teaching".into(), path_in("teaching.json"), "--seed".into(), "7".into()],
        ),
    ];
    let mut files = 0;
    for (name, args) in &commands {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let first = run_cli(&args, &dir.path().join(format!("{name}-0")))?;
        let second = run_cli(&args, &dir.path().join(format!("{name}-1")))?;
        ensure(!first.files.is_empty(), || format!("{name} wrote no JSON"))?;
        ensure(first.stdout == second.stdout, || format!("{name}: --json output differs between runs"))?;
        for ((fa, a), (fb, b)) in first.files.iter().zip(&second.files) {
            ensure(fa == fb && a == b, || format!("{name}: {fa} differs between runs"))?;
        }
        ensure(first.files.len() == second.files.len(), || format!("{name}: runs wrote different files"))?;
        files += first.files.len();
    }
    Ok(format!(
        "{} commands run twice through the binary, {files} JSON artifacts and all --json output byte-identical ({:.1} s)",
        commands.len(),
        t0.elapsed().as_secs_f64()
    ))
}
