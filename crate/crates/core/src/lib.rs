//! Primal-dual subgradient methods for GAN training.
//!
//! The crate is organized bottom-up:
//!
//! * [`saddle`] solves `maximize f0(x) s.t. f_i(x) >= 0, x in X` by driving the
//!   Lagrangian to a saddle point, either with exact primal maximization
//!   (dual-driven) or with simultaneous projected subgradient steps
//!   (primal-dual-driven).
//! * [`divergence`] lists the objective/constraint pairs that turn the generic
//!   program into a GAN variant, with their closed-form optimal discriminators.
//! * [`finite_gan`] trains a GAN over a finite alphabet directly in function
//!   space, with the discriminator values as primal and the generated
//!   probabilities as dual variables.
//! * [`kde`], [`nn`] and [`trainer`] implement the parameterized training loop
//!   where the generator is pushed toward the dual-updated target distribution
//!   through a Gaussian-kernel estimate of its own output distribution.

// `!(x > 0.0)` is how validation rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod divergence;
pub mod error;
pub mod finite_gan;
pub mod kde;
pub mod nn;
pub mod saddle;
pub mod trainer;

pub use divergence::{Divergence, DivergenceKind, Interval};
pub use error::{Error, Result};
pub use saddle::{SaddleIterate, SaddleProblem, SolveMode, SolveReport, StepSchedule};
