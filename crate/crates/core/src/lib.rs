//! Fractional-calculus numerics built around the recursive Prony-series
//! approximation of the Caputo derivative.
//!
//! The crate holds the analytic references ([`caputo`]), the history-summing
//! baselines ([`cumulative`]), the fixed-storage recursion and its error
//! profile ([`prony`]), the parameter fitter ([`optimizer`]) and three
//! applications: a 1D fractional diffusion solver ([`fde`]), a rheometer
//! benchmark for a fractional viscoelastic liver model ([`mechanics`]) and an
//! energy-stability harness for a linear viscoelastic bar ([`stability`]).
//! [`polystudy`] runs the polynomial refinement study across methods.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod caputo;
pub mod cumulative;
pub mod error;
pub mod fde;
pub mod mechanics;
pub mod optimizer;
pub mod polystudy;
pub mod prony;
pub mod quad;
pub mod stability;

pub use error::{Error, Result};
