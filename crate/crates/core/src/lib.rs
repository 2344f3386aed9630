//! Arbitrage-free pricing from one-step markets to life-contingent cash flows.
//!
//! The crate is organised bottom-up:
//!
//! * [`market`] detects arbitrage in a one-step payoff matrix (phase-one
//!   simplex on the Farkas alternative) and otherwise returns a stochastic
//!   discount factor.
//! * [`tree`] prices adapted processes on a leveled uncertainty tree with
//!   per-edge risk-neutral probabilities and one-step discount factors.
//! * [`mortality`] provides survival models (constant force, de Moivre,
//!   Gompertz, life tables).
//! * [`valuation`] values risk-free, whole-life and continuous-annuity
//!   contracts both by quadrature and by backward Runge-Kutta integration of
//!   the pricing ODE.

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod market;
pub mod mortality;
pub mod quadrature;
pub mod simplex;
pub mod tree;
pub mod valuation;

pub use error::{PricingError, Result};

/// One-sided limit to evaluate at a jump of a piecewise function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}
