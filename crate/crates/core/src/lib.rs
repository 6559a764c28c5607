//! Algebra of one block-spin renormalization-group step on finite lattices.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: spaces with bilinear forms, operators, adjoints, the
//!   inversion (Woodbury-type) identities.
//! * [`lattice`]: torus lattices, block pavings and averaging operators.
//! * [`kernels`]: the quadratic kernels `Q̌, S, Š, Δ, C` of one step and their
//!   algebraic identities.
//! * [`series`] and [`polynomial`]: truncated multivariate power series and the
//!   interaction polynomial `P`.
//! * [`action`]: the actions `A`, `A_eff`, `Ǎ`, their gradients, the
//!   preparation identity and the fluctuation exponent `δA`.
//! * [`fields`]: background, critical and next-scale background fields, as
//!   formal series and by Newton's method.
//! * [`gaussian`]: Gaussian integrals and the integral form of one step.

pub mod action;
pub mod ensemble;
pub mod error;
pub mod fields;
pub mod gaussian;
pub mod kernels;
pub mod lattice;
pub mod linalg;
pub mod polynomial;
pub mod series;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, FieldVector, Operator, Space, SpaceSpec, C64};
