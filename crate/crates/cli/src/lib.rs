//! Batch front-end of the deskasm simulator: scene and run configuration
//! files, the commands, and the reports they print.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod scene;
