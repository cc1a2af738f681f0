//! Desk-scale simulator for teaching-by-demonstration assembly.
//!
//! The crate covers both phases of the system. Teaching recovers the relative
//! pose of two parts from marker observations. Execution detects each part on
//! a table from depth data, snaps the estimate onto a stable placement, then
//! plans grasps, regrasps and arm motions that put the parts together.

pub mod camera;
pub mod collision;
pub mod grasp;
pub mod mesh;
pub mod perception;
pub mod placement;
pub mod plan;
pub mod robot;
pub mod se3;
pub mod teaching;

pub use se3::{Pose, Rotation, RpyAngles, Vec3};
