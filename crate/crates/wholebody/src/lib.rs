//! Statically balanced whole-body motion planning for floating-base robots.
//!
//! Standard sampling-based planners (RRT, RRT-Connect, PRM, EST, SBL) run
//! unmodified over state spaces whose three primitives — uniform sampling,
//! near sampling, and interpolation — project every state onto the balance
//! manifold with a whole-body IK solver. Planning can happen directly in
//! configuration space or in the SE(3) pose space of one or more
//! end-effectors, where every pose state carries an associated full-body
//! configuration.
//!
//! The crate is organized as:
//!
//! - [`model`]: robot/scene data model and the structured text file formats
//! - [`kinematics`]: forward kinematics, CoM, Jacobians, SE(3) utilities
//! - [`collision`]: narrow-phase primitive tests and state/motion validity
//! - [`ik`]: the whole-body IK solver, balance test, support polygon
//! - [`spaces`]: the balance-projecting state spaces and run metrics
//! - [`planners`]: the sampling-based planners and trajectory costs
//! - [`bench`]: benchmark grid runner, task configs, CSV/JSON reports

pub mod bench;
pub mod collision;
pub mod ik;
pub mod kinematics;
pub mod model;
pub mod planners;
pub mod spaces;

pub use model::{Configuration, RobotModel, Scene};
