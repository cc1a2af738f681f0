//! Rough detection against synthetic ground truth, in each table quarter.

use crate::{ensure, tilt_residual, within, Outcome};
use deskasm::config::RunConfig;
use deskasm::experiments::{detect_and_correct, library_for};
use deskasm::report::ErrorRow;
use deskasm::scene::{desk_camera, desk_table, quarter_centres, MeshSource, ObjectEntry, PoseSpec, Resting, SceneConfig};
use deskasm_core::placement::CorrectionMode;
use std::path::Path;
use std::time::Instant;

const SIGMA: f64 = 0.002;

fn scene_with(mesh: &MeshSource, placement: usize, x: f64, y: f64, yaw: f64, seed: u64) -> SceneConfig {
    SceneConfig {
        objects: vec![ObjectEntry {
            name: "part".into(),
            mesh: mesh.clone(),
            pose: Some(PoseSpec::Resting(Resting { placement, x, y, yaw })),
        }],
        table: desk_table(),
        camera: desk_camera(),
        robot: None,
        noise_sigma: SIGMA,
        seed,
        goal: None,
        assembly: None,
    }
}

/// Largest |value| of each of x, y and yaw.
fn max_xy_yaw(rows: &[ErrorRow]) -> [f64; 3] {
    rows.iter().fold([0.0f64; 3], |m, r| {
        [m[0].max(r.dx_mm.abs()), m[1].max(r.dy_mm.abs()), m[2].max(r.dyaw_deg.abs())]
    })
}

pub fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let l = MeshSource::LPrism {
        a: 0.06,
        b: 0.04,
        t1: 0.02,
        t2: 0.015,
        height: 0.03,
    };
    let tall = MeshSource::LPrism {
        a: 0.08,
        b: 0.06,
        t1: 0.02,
        t2: 0.02,
        height: 0.05,
    };
    let cfg = RunConfig::default();
    let mut trials = Vec::new();
    for (mesh, take) in [(&l, 6), (&tall, 2)] {
        let probe = scene_with(mesh, 0, 0.3, 0.0, 0.0, 0).resolve(Path::new("."), cfg.margin_fraction).map_err(|e| e.to_string())?;
        let n = probe.objects[0].placements.len();
        ensure(n >= take, || format!("{mesh:?} has {n} placements, {take} needed"))?;
        let library = library_for(&probe.objects[0]).map_err(|e| e.to_string())?;
        for pi in 0..take {
            trials.push((mesh, pi, library.clone()));
        }
    }
    let (mut rough, mut corrected) = (Vec::new(), Vec::new());
    let mut residual = 0.0f64;
    let mut wrong = Vec::new();
    for (mesh, pi, library) in &trials {
        for (qi, (x, y)) in quarter_centres(&desk_table()).into_iter().enumerate() {
            let yaw = 0.3 + *pi as f64 * 0.7 + qi as f64 * 1.1;
            let seed = (*pi * 10 + qi) as u64;
            let scene = scene_with(mesh, *pi, x, y, yaw, seed)
                .resolve(Path::new("."), cfg.margin_fraction)
                .map_err(|e| e.to_string())?;
            let cloud = scene.render(seed);
            let dcfg = cfg.detect_for(SIGMA, seed);
            let obj = &scene.objects[0];
            let out = detect_and_correct(obj, library, &cloud, &scene.sensor, &scene.config.table, &dcfg, CorrectionMode::YawInvariant)
                .map_err(|e| format!("placement {pi} quarter {qi}: {e}"))?;
            let truth = obj.truth.expect("scene has ground truth");
            let label = format!("p{pi} q{qi}");
            if out.placement != *pi {
                wrong.push(label.clone());
                continue;
            }
            residual = residual
                .max((out.corrected.position.z - truth.position.z).abs())
                .max(tilt_residual(&out.corrected.rotation, &truth.rotation));
            rough.push(ErrorRow::between(label.clone(), &out.detection.raw_pose, &truth));
            corrected.push(ErrorRow::between(label, &out.corrected, &truth));
        }
    }
    ensure(wrong.is_empty(), || format!("wrong placement in {}", wrong.join(", ")))?;
    ensure(residual <= 1e-9, || format!("corrected roll/pitch/z residual {residual:e}"))?;
    let (r, c) = (max_xy_yaw(&rough), max_xy_yaw(&corrected));
    ensure(c.iter().zip(&r).all(|(c, r)| *c <= 2.0 * r + 1e-9), || {
        format!("corrected max x/y/yaw {c:?} against rough {r:?}")
    })?;
    let max_tilt = rough
        .iter()
        .map(|r| r.droll_deg.abs().max(r.dpitch_deg.abs()))
        .fold(0.0f64, f64::max);
    within(t0.elapsed(), 120.0, "32 detections")?;
    Ok(format!(
        "{} trials; rough max |x| {:.1} mm |y| {:.1} mm |yaw| {:.1} deg, roll/pitch up to {:.1} deg; corrected {:.1} mm {:.1} mm {:.1} deg, roll/pitch/z residual {:.0e} ({:.1} s)",
        rough.len(),
        r[0],
        r[1],
        r[2],
        max_tilt,
        c[0],
        c[1],
        c[2],
        residual,
        t0.elapsed().as_secs_f64()
    ))
}
