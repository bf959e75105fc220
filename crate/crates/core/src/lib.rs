//! PI servo-control with operational box constraints on the commanded
//! control and on a limited output, enforced by a min-norm,
//! control-barrier-function augmentation with integrator anti-windup.
//!
//! The pieces, bottom-up:
//!
//! - [`numerics`]: dense matrices, LU, eigenvalue real parts, CARE.
//! - [`plant`]: the LTI plant, its integrator-extended form and
//!   relative-degree classification of the limited output.
//! - [`lqr`]: baseline PI gains `[K_I, K_P]` from an LQR design.
//! - [`servo`]: baseline law, saturation and anti-windup integrator.
//! - [`augmentation`]: closed-form min-norm QP solution for `(v, w)`.
//! - [`oracle`]: brute-force active-set QP solver used to check it.
//! - [`sim`]: fixed-step RK4 closed-loop simulation and metrics.
//! - [`scenario`], [`report`], [`cli`]: scenario files, CSV/SVG output and
//!   the command-line front end.

pub mod augmentation;
pub mod cli;
pub mod error;
pub mod lqr;
pub mod numerics;
pub mod oracle;
pub mod plant;
pub mod presets;
pub mod report;
pub mod scenario;
pub mod servo;
pub mod sim;
pub mod verify;

pub use augmentation::{
    AugmentationConfig, AugmentationParams, AugmentationSolution, ConstraintMaps, FilterGain, Limits,
    MultiplierMode, Multipliers,
};
pub use error::{Error, Result};
pub use lqr::{design_lqr_servo, LqrDesign, LqrWeights, ServoGains};
pub use numerics::Matrix;
pub use oracle::{kkt_residual, oracle_solve, QpInstance, QpSolution};
pub use plant::{ExtendedSystem, PlantModel, RelativeDegree};
pub use sim::{ClosedLoopState, CommandProfile, Metrics, Scenario, SimFlags, Simulator, Telemetry};
