//! Numerical laboratory for radial solutions of the energy-critical
//! semilinear heat equation `u_t - Δu = |u|^{p-1} u`, `p = (n+2)/(n-2)`.
//!
//! The crate is organised by subsystem:
//!
//! * [`kernel`]: Aubin-Talenti bubbles, their zero modes, the bubble energy
//!   and the unstable eigenpair of the linearized operator.
//! * [`solver`]: radial method-of-lines integrator with blowup tracking.
//! * [`diagnostics`]: localized monotonicity quantity, density classifier,
//!   Pohozaev invariants.
//! * [`decomposition`]: orthogonal bubble fits, parameter tracks, bubble trees.
//! * [`tangent`]: parabolic rescalings and self-similar profiles.
//!
//! Data-parallel loops go through [`par`], which falls back to plain
//! iterators when the `parallel` feature is disabled.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomposition;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod interp;
pub mod kernel;
pub mod linalg;
pub mod par;
pub mod quadrature;
pub mod solver;
pub mod tangent;

pub use error::{LabError, Result};
pub use grid::{GridSpec, RadialField, RadialGrid};
pub use kernel::{BubbleParams, Dimension, SpectralData};
