//! The five commands. Each returns its JSON artifacts, a human summary and
//! stage timings; only `main` touches stdout and the output directory.

use crate::config::{stage_seed, RunConfig, Stage};
use crate::error::{read_json, read_text, CliError, Result};
use crate::experiments::{detect_and_correct, library_for, synthetic_recording, DetectionOutcome};
use crate::report::{ErrorRow, PrecisionReport};
use crate::scene::{Scene, SceneConfig};
use deskasm_core::mesh::{load_mesh, TriMesh};
use deskasm_core::perception::PerceptionError;
use deskasm_core::placement::{stable_placements, CorrectionMode, StablePlacement};
use deskasm_core::plan::{assemble_pipeline, AssemblySpec, PartModel, PipelineInput, PipelineReport, SegmentKind};
use deskasm_core::se3::rpy_from_rot;
use deskasm_core::teaching::{teach, teaching_record_from_json, MarkerModel, TaughtObject, TeachingRecord, TeachingSample};
use deskasm_core::{Pose, Vec3};
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Settings shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: RunConfig,
    /// Overrides the scene seed.
    pub seed: Option<u64>,
    /// Overrides `config.correction`.
    pub mode: Option<CorrectionMode>,
}

impl Options {
    fn mode(&self) -> CorrectionMode {
        self.mode.unwrap_or(self.config.correction)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file: &'static str,
    pub json: String,
}

#[derive(Debug, Clone, Default)]
pub struct Output {
    /// The first artifact is the one printed by `--json`.
    pub artifacts: Vec<Artifact>,
    pub summary: String,
    pub timing: Vec<(&'static str, f64)>,
}

impl Output {
    fn push<T: Serialize>(&mut self, file: &'static str, value: &T) {
        let mut json = serde_json::to_string_pretty(value).expect("artifacts serialize");
        json.push('\n');
        self.artifacts.push(Artifact { file, json });
    }

    pub fn artifact(&self, file: &str) -> Option<&str> {
        self.artifacts.iter().find(|a| a.file == file).map(|a| a.json.as_str())
    }
}

struct Clock {
    last: Instant,
    laps: Vec<(&'static str, f64)>,
}

impl Clock {
    fn start() -> Self {
        Self {
            last: Instant::now(),
            laps: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.laps.push((stage, (now - self.last).as_secs_f64()));
        self.last = now;
    }
}

// ---------------------------------------------------------------- placements

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PlacementListing {
    pub name: String,
    pub placements: Vec<StablePlacement>,
}

fn placement_table(out: &mut String, l: &PlacementListing) {
    let _ = writeln!(out, "{}: {} stable placements", l.name, l.placements.len());
    let _ = writeln!(
        out,
        "{:>3} {:>10} {:>10} {:>10}   {:>24}",
        "#", "height mm", "margin mm", "inrad mm", "roll/pitch/yaw deg"
    );
    for (i, p) in l.placements.iter().enumerate() {
        let [r, pi, y] = rpy_from_rot(&p.rest_rotation).to_degrees();
        let _ = writeln!(
            out,
            "{:>3} {:>10.2} {:>10.2} {:>10.2}   {:>7.1} {:>7.1} {:>7.1}",
            i,
            p.support_height * 1e3,
            p.stability_margin * 1e3,
            p.inradius * 1e3,
            r,
            pi,
            y
        );
    }
}

/// Stable placements of an OBJ file, or of every object in a scene.
pub fn placements(mesh: Option<(&Path, f64)>, scene: Option<&Path>, opts: &Options) -> Result<Output> {
    let mut clock = Clock::start();
    let mut meshes: Vec<(String, TriMesh)> = Vec::new();
    match (mesh, scene) {
        (Some((path, scale)), _) => {
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            meshes.push((name, load_mesh(path, scale)?));
        }
        (None, Some(scene)) => {
            let (cfg, base) = SceneConfig::load(scene)?;
            for o in &cfg.objects {
                meshes.push((o.name.clone(), o.mesh.load(&base)?));
            }
        }
        (None, None) => return Err(CliError::Input("placements needs a mesh file or --scene".into())),
    }
    let mut listings = Vec::new();
    for (name, mesh) in meshes {
        mesh.require_watertight()?;
        let placements = stable_placements(&mesh, opts.config.margin_fraction)?;
        listings.push(PlacementListing { name, placements });
    }
    clock.lap("placements");
    let mut out = Output::default();
    for l in &listings {
        placement_table(&mut out.summary, l);
    }
    out.push("placements.json", &listings);
    out.timing = clock.laps;
    Ok(out)
}

// --------------------------------------------------------------------- teach

/// A marker demonstration: corners of both markers in each image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Recording {
    pub object_a: TaughtObject,
    pub object_b: TaughtObject,
    pub samples: Vec<TeachingSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach_length: Option<f64>,
    /// True pose of B in A, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TeachingReport {
    /// One row per sample.
    pub samples: PrecisionReport,
    /// The aggregated relative pose.
    pub taught: ErrorRow,
}

fn teaching_report(record: &TeachingRecord, truth: &Pose) -> TeachingReport {
    let rows = record
        .samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.relative_pose.map(|p| ErrorRow::between(format!("sample {i}"), &p, truth)))
        .collect();
    TeachingReport {
        samples: PrecisionReport::new(rows),
        taught: ErrorRow::between("taught", &record.relative_pose, truth),
    }
}

fn teach_recording(rec: &Recording) -> Result<(TeachingRecord, Option<TeachingReport>)> {
    let record = teach(
        rec.object_a.clone(),
        rec.object_b.clone(),
        rec.samples.clone(),
        rec.approach,
        rec.approach_length,
    )?;
    let report = rec.ground_truth.map(|t| teaching_report(&record, &t));
    Ok((record, report))
}

fn teaching_summary(out: &mut String, record: &TeachingRecord, report: Option<&TeachingReport>) {
    let t = record.relative_pose.position;
    let [r, p, y] = rpy_from_rot(&record.relative_pose.rotation).to_degrees();
    let _ = writeln!(
        out,
        "taught {} in {} from {} samples: t = ({:.4}, {:.4}, {:.4}) m, rpy = ({:.2}, {:.2}, {:.2}) deg",
        record.object_b.name,
        record.object_a.name,
        record.samples.len(),
        t.x,
        t.y,
        t.z,
        r,
        p,
        y
    );
    if let Some(rep) = report {
        let mut table = rep.samples.clone();
        table.rows.push(rep.taught.clone());
        table.mean_abs = rep.samples.mean_abs.clone();
        out.push_str(&table.table());
    }
}

pub fn teach_cmd(recording: &Path) -> Result<Output> {
    let mut clock = Clock::start();
    let rec: Recording = read_json(recording)?;
    let (record, report) = teach_recording(&rec)?;
    clock.lap("teach");
    let mut out = Output::default();
    teaching_summary(&mut out.summary, &record, report.as_ref());
    out.push("teaching.json", &record);
    if let Some(r) = &report {
        out.push("teaching_report.json", r);
    }
    out.timing = clock.laps;
    Ok(out)
}

// -------------------------------------------------------------------- detect

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionReport {
    pub mode: CorrectionMode,
    pub outcomes: Vec<DetectionOutcome>,
    /// Raw detections against ground truth.
    pub rough: PrecisionReport,
    pub corrected: PrecisionReport,
}

fn load_scene(path: Option<&Path>, opts: &Options) -> Result<Scene> {
    let (cfg, base) = match path {
        Some(p) => SceneConfig::load(p)?,
        None => (crate::scene::demo_scene(), PathBuf::new()),
    };
    let mut scene = cfg.resolve(&base, opts.config.margin_fraction)?;
    if let Some(s) = opts.seed {
        scene.config.seed = s;
    }
    Ok(scene)
}

/// Detects the named objects (all when `names` is empty) in one rendering.
fn detect_objects(scene: &Scene, names: &[&str], opts: &Options) -> Result<DetectionReport> {
    let seed = scene.config.seed;
    let (cloud, visible) = scene.render_counted(stage_seed(seed, Stage::Render));
    let dcfg = opts.config.detect_for(scene.config.noise_sigma, stage_seed(seed, Stage::Detect));
    let mut outcomes = Vec::new();
    for (o, seen) in scene.objects.iter().zip(&visible) {
        if !names.is_empty() && !names.contains(&o.name.as_str()) {
            continue;
        }
        if o.truth.is_some() && *seen == 0 {
            return Err(CliError::Detection {
                object: o.name.clone(),
                source: PerceptionError::OutOfView,
            });
        }
        let library = library_for(o)?;
        outcomes.push(detect_and_correct(
            o,
            &library,
            &cloud,
            &scene.sensor,
            &scene.config.table,
            &dcfg,
            opts.mode(),
        )?);
    }
    let rows = |f: fn(&DetectionOutcome) -> Pose| {
        outcomes
            .iter()
            .filter_map(|o| o.truth.map(|t| ErrorRow::between(o.object.clone(), &f(o), &t)))
            .collect::<Vec<_>>()
    };
    let rough = PrecisionReport::new(rows(|o| o.detection.raw_pose));
    let corrected = PrecisionReport::new(rows(|o| o.corrected));
    Ok(DetectionReport {
        mode: opts.mode(),
        outcomes,
        rough,
        corrected,
    })
}

fn detection_summary(out: &mut String, rep: &DetectionReport) {
    for o in &rep.outcomes {
        let truth = match o.true_placement {
            Some(p) => format!(" (true {p})"),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{}: segment of {} points, icp rmse {:.2} mm, placement {}{}",
            o.object,
            o.detection.segment_size,
            o.detection.icp_rmse * 1e3,
            o.placement,
            truth
        );
    }
    if !rep.rough.rows.is_empty() {
        let _ = writeln!(out, "rough detection:");
        out.push_str(&rep.rough.table());
        let _ = writeln!(out, "after placement correction ({:?}):", rep.mode);
        out.push_str(&rep.corrected.table());
    }
}

pub fn detect_cmd(scene: Option<&Path>, opts: &Options) -> Result<Output> {
    let mut clock = Clock::start();
    let scene = load_scene(scene, opts)?;
    clock.lap("load");
    let rep = detect_objects(&scene, &[], opts)?;
    clock.lap("detect");
    let mut out = Output::default();
    detection_summary(&mut out.summary, &rep);
    out.push("detection.json", &rep);
    out.timing = clock.laps;
    Ok(out)
}

// ---------------------------------------------------------------------- plan

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub teaching: Option<TeachingReport>,
    pub detection: DetectionReport,
    /// Where A is meant to rest once the parts are assembled.
    pub goal_a: Pose,
    pub pipeline: PipelineReport,
}

fn plan_scene(scene: &Scene, record: &TeachingRecord, opts: &Options, clock: &mut Clock, out: &mut Output) -> Result<RunReport> {
    let (na, nb) = (record.object_a.name.as_str(), record.object_b.name.as_str());
    for n in [na, nb] {
        if scene.object(n).is_none() {
            return Err(CliError::Input(format!("the teaching record names {n}, which is not in the scene")));
        }
    }
    let detection = detect_objects(scene, &[na, nb], opts)?;
    clock.lap("detect");
    let pose_of = |n: &str| detection.outcomes.iter().find(|o| o.object == n).map(|o| o.corrected).expect("detected");
    let (init_a, init_b) = (pose_of(na), pose_of(nb));

    let part = |n: &str| {
        let o = scene.object(n).expect("checked above");
        PartModel::new(n, o.mesh.clone(), &scene.robot, &opts.config.grasp, opts.config.margin_fraction)
    };
    let (a, b) = (part(na)?, part(nb)?);
    clock.lap("grasps");

    let goal_a = scene.goal.unwrap_or(init_a);
    let spec = AssemblySpec::from_record(record, Pose::identity())?.with_resting_goal(&goal_a);
    let mut pcfg = opts.config.pipeline;
    pcfg.trrt.seed = stage_seed(scene.config.seed, Stage::Motion);
    let input = PipelineInput {
        robot: &scene.robot,
        table: &scene.config.table,
        a: &a,
        b: &b,
        init_a,
        init_b,
        spec,
    };
    let result = assemble_pipeline(&input, &pcfg)?;
    clock.lap("plan");

    detection_summary(&mut out.summary, &detection);
    let t = &result.trajectory;
    let _ = writeln!(
        out.summary,
        "trajectory: {} segments ({} transit, {} transfer, {} insert), {} waypoints",
        t.segments.len(),
        t.count(SegmentKind::Transit),
        t.count(SegmentKind::Transfer),
        t.count(SegmentKind::Insert),
        result.report.waypoints
    );
    for s in &result.report.steps {
        let _ = writeln!(
            out.summary,
            "  {}: {} keyframes, {} regrasps{}",
            s.object,
            s.keyframes,
            s.regrasps,
            if s.skipped { " (already in place)" } else { "" }
        );
    }
    let _ = writeln!(
        out.summary,
        "assembled B: {:.3} mm, {:.3} deg from the taught pose",
        result.report.assembled_position_error * 1e3,
        result.report.assembled_rotation_error.to_degrees()
    );
    out.push("keyframes.json", &result.plans);
    out.push("trajectory.json", &result.trajectory);
    Ok(RunReport {
        seed: scene.config.seed,
        teaching: None,
        detection,
        goal_a,
        pipeline: result.report,
    })
}

fn finish_run(mut out: Output, report: &RunReport, clock: Clock) -> Output {
    // The run report goes first so that `--json` prints it.
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    out.artifacts.insert(0, Artifact { file: "report.json", json });
    out.timing = clock.laps;
    out
}

pub fn plan_cmd(scene: Option<&Path>, teaching: &Path, opts: &Options) -> Result<Output> {
    let mut clock = Clock::start();
    let scene = load_scene(scene, opts)?;
    let record = teaching_record_from_json(&read_text(teaching)?)?;
    clock.lap("load");
    let mut out = Output::default();
    let report = plan_scene(&scene, &record, opts, &mut clock, &mut out)?;
    Ok(finish_run(out, &report, clock))
}

/// Synthesises a demonstration from the scene's assembly truth, teaches it,
/// then detects and assembles the parts.
pub fn run_demo(scene: Option<&Path>, opts: &Options) -> Result<Output> {
    let mut clock = Clock::start();
    let scene = load_scene(scene, opts)?;
    let truth = scene
        .config
        .assembly
        .ok_or_else(|| CliError::Input("run-demo needs an `assembly` entry in the scene".into()))?;
    if scene.objects.len() < 2 {
        return Err(CliError::Input("run-demo needs two objects".into()));
    }
    clock.lap("load");

    let side = opts.config.teaching.marker_side;
    let taught = |i: usize| -> Result<TaughtObject> {
        Ok(TaughtObject {
            name: scene.objects[i].name.clone(),
            marker: MarkerModel::new(i as u32 + 1, side, Pose::identity())?,
        })
    };
    let (ta, tb) = (taught(0)?, taught(1)?);
    let samples = synthetic_recording(
        &ta,
        &tb,
        &truth.relative_pose,
        &opts.config.teaching,
        stage_seed(scene.config.seed, Stage::Teach),
    )?;
    let recording = Recording {
        object_a: ta,
        object_b: tb,
        samples,
        approach: Some(truth.approach),
        approach_length: Some(truth.approach_length),
        ground_truth: Some(truth.relative_pose),
    };
    let (record, teaching) = teach_recording(&recording)?;
    clock.lap("teach");

    let mut out = Output::default();
    teaching_summary(&mut out.summary, &record, teaching.as_ref());
    out.push("recording.json", &recording);
    out.push("teaching.json", &record);
    let mut report = plan_scene(&scene, &record, opts, &mut clock, &mut out)?;
    report.teaching = teaching;
    Ok(finish_run(out, &report, clock))
}
