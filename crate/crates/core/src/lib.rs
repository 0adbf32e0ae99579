//! Joint policy learning and actuator placement for stochastic PDEs on a
//! one-dimensional domain.
//!
//! The crate is layered bottom-up:
//!
//! * [`field`]: grids, discrete fields, quadrature inner products and
//!   space-time white noise increments.
//! * [`banded`]: banded LU factorization used by the implicit steppers.
//! * [`models`]: semi-implicit steppers for the heat, Burgers, Nagumo and
//!   damped Euler-Bernoulli equations.
//! * [`policy`]: a two-hidden-layer ReLU network with hand-written reverse
//!   mode gradients.
//! * [`actuation`]: Gaussian actuator footprints, the control field and the
//!   grid rounding map used for placement.
//! * [`optimizer`]: batched rollouts, path cost terms, Gibbs weights, the
//!   episodic loss and the joint ADAM update.
//! * [`verify`]: Monte-Carlo checks of the change-of-measure identities.
//! * [`experiment`]: configuration, presets, checkpoints and CSV artifacts.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuation;
pub mod banded;
pub mod error;
pub mod experiment;
pub mod field;
pub mod models;
pub mod optimizer;
pub mod policy;
pub mod seed;
pub mod verify;


pub use error::{Error, Result};
pub use field::{BoundaryCondition, Field, Grid1D, SecondOrderState, WienerIncrement};
pub use models::{
    BurgersModel, EulerBernoulliModel, HeatModel, ImplicitSolver, Model, NagumoModel, State,
    TimeScheme,
};


pub use actuation::{ActuatorSet, InfluenceMatrix};
pub use experiment::{run_experiment, Checkpoint, ExperimentConfig, Mode, ModelKind, Scale, Session};
pub use optimizer::{CostConfig, CostTerms, LossReport, OptimizerState, Region, RolloutRecord};
pub use policy::{GradientTape, PolicyGrad, PolicyParams};
