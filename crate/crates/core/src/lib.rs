//! Moveability analysis for planar five-bar parallel manipulators among obstacles.

pub mod cli;
pub mod collision;
pub mod decomposition;
pub mod geometry;
pub mod kinematics;
pub mod moveability;
