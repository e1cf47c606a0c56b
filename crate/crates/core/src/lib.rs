//! Hierarchical articulated-object manipulation stack.
//!
//! The crate bundles a kinematic scene simulator with depth/label rendering,
//! a task planner with success verification, antipodal grasp keyframing for
//! rigid items, a conditional diffusion policy for articulated parts, an
//! affordance memory bank with geometric retrieval, part-level correspondence
//! transfer across object instances, the hybrid controller that ties the
//! branches together, and a procedural L0–L4 benchmark harness.

pub mod config;
pub mod error;
pub mod geom;
pub mod memory;
pub mod policy;
pub mod rigid;
pub mod sim;
pub mod transfer;

pub use config::Config;
pub use error::{Error, Result};
