//! Gradient regularization computed by finite differences or double
//! backpropagation, and the diagonal linear network model used to study its
//! implicit bias.
//!
//! The crate is organized bottom-up:
//!
//! - [`objective`]: parameter vectors, datasets, and losses with analytic
//!   gradients and Hessian-vector products.
//! - [`gr`]: the regularizer gradient `∇R = H∇L` and its forward/backward
//!   finite-difference approximations.
//! - [`train`]: full-batch gradient descent with GR, SAM and flooding updates.
//! - [`theory`]: implicit-bias quantities of diagonal linear networks.
//! - [`cost`]: matrix-multiplication counts per update.
//! - [`harness`]: synthetic data, experiment configs, sweeps and checks.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod error;
pub mod gr;
pub mod harness;
pub mod objective;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
pub use gr::{GrConfig, GrMethod};
pub use objective::{beta_from_w, Dataset, DlnObjective, LinearMseObjective, Objective, ParamVector};
pub use theory::AlphaVector;
pub use train::{FloodConfig, SamConfig, TrainConfig, TrainOutcome, TrainStatus, TrajectoryAccumulators};
