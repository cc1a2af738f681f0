//! Assembly planning: retraction and world grasps, the regrasp graph, joint
//! space motion planning, and the two-step pipeline that ties them together.

mod assembly;
mod graph;
mod pipeline;
mod trrt;

pub use assembly::{
    pre_assembly_poses, retract_grasps, world_grasps, AssemblySpec, Retracted, WorldGrasps,
    DEFAULT_RETRACTION_SCALE,
};
pub use graph::{
    build_grasp_graph, search_keyframes, Circle, CircleSpec, Edge, EdgeKind, GraphConfig, GraphEnds,
    GraphNode, GraphWorld, GraspGraph, Keyframe, KeyframePlan, Layer, NodeRef,
};
pub use pipeline::{
    assemble_pipeline, PartModel, PipelineConfig, PipelineInput, PipelineOutput, PipelineReport, Segment,
    SegmentKind, StaticObject, StepReport, Trajectory, CONTACT_TOL,
};
pub use trrt::{densify, interpolate, path_length, plan_motion, segment_free, ConfigSpace, TrrtConfig};

use crate::grasp::GraspError;
use crate::placement::PlacementError;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum PlanError {
    #[error("invalid assembly spec: {0}")]
    BadSpec(&'static str),
    #[error("invalid grasp graph: {0}")]
    BadGraph(&'static str),
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("no path from the initial pose to the goal ({0})")]
    NoPath(String),
    #[error("motion start is in collision")]
    StartInCollision,
    #[error("motion goal is in collision")]
    GoalInCollision,
    #[error("no motion found after {iterations} iterations ({tree} tree nodes)")]
    MotionTimeout { iterations: usize, tree: usize },
    #[error("straight-line motion failed: {0}")]
    Cartesian(&'static str),
    #[error("goal poses collide: {0}")]
    GoalCollision(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<PlanError>,
    },
}

impl PlanError {
    pub fn at(self, stage: impl Into<String>) -> Self {
        PlanError::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// The error under all stage labels.
    pub fn root(&self) -> &PlanError {
        match self {
            PlanError::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
