//! Geometry-aware grasp synthesis for multi-fingered hands.
//!
//! The pipeline turns a single partial depth view of an object into a grasp:
//!
//! 1. [`camera`] renders synthetic depth images of a primitive scene,
//!    backprojects them into point clouds, and normalizes them into a
//!    camera-oriented object frame.
//! 2. [`pointsdf`] trains an implicit signed-distance model over those clouds
//!    and answers SDF queries (with spatial gradients) anywhere in space.
//! 3. [`grasp`] scores grasp configurations with a learned success classifier
//!    over the shared cloud embedding, regularized by a Gaussian-mixture prior.
//! 4. [`opt`] solves the constrained grasp synthesis problem over the full
//!    arm-hand joint configuration with explicit collision constraints against
//!    both the environment ([`sdf`]) and the reconstructed object.
//!
//! Supporting modules: [`nn`] (dense networks with reverse-mode gradients),
//! [`kinematics`] (forward kinematics, Jacobians, IK), [`mesh`] (isosurface
//! extraction), [`metrics`] (reconstruction evaluation), and [`data`]
//! (synthetic grasp datasets with an analytic success oracle).

pub mod camera;
pub mod data;
pub mod error;
pub mod grasp;
pub mod kinematics;
pub mod mesh;
pub mod metrics;
pub mod nn;
pub mod opt;
pub mod pointsdf;
pub mod sdf;
pub mod transform;

pub use error::{Error, Result};
pub use transform::RigidTransform;
