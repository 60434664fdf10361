//! Dynamical-flow field model on 4-D Euclidean space.
//!
//! The crate is organised bottom-up:
//!
//! * [`exterior`]: lattices, cochains, `d`, Hodge star, pairings, sphere flux.
//! * [`statics`]: point-source flows, the gradient/remainder split, Gauss laws.
//! * [`wavefield`]: leapfrog evolution of the flow 1-form.
//! * [`relativity`]: null coordinates, the 2x2 endomorphism algebra, Lorentz group.
//! * [`action`]: the discretised least-action functional for strings and fields.
//! * [`quantization`]: cylindrical numbers, factorizations, old-quantum orbit selection.
//! * [`amplitude`]: circular densities and their complex amplitude.
//! * [`runner`]: scenario files, the CLI pipeline and the self-test.

// `!(x <= tol)` is deliberate: NaN must fail. Index loops mirror lattice indexing.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod action;
pub mod amplitude;
pub mod error;
pub mod exterior;
pub mod quadrature;
pub mod quantization;
pub mod relativity;
pub mod runner;
pub mod solver;
pub mod statics;
pub mod wavefield;

pub use error::{FlowError, Result};
