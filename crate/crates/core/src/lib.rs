//! Simulated tactile grasping workbench.
//!
//! Objects are watertight triangle meshes placed on a table. A top-down depth image drives
//! grasp selection, a parallel-jaw gripper with gel tactile pads closes until both pads
//! read enough force, and a quasi-static stick-slip lift labels the attempt. Attempts are
//! gathered into balanced, versioned datasets.

pub mod geometry;
pub mod scene;
pub mod tactile;
pub mod grasping;
pub mod dataset;
