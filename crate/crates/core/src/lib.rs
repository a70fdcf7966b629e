//! Numerical laboratory for analytic saddle-node normal forms.
//!
//! The library is organised bottom-up:
//!
//! * [`gamma`] — log-gamma, signed gamma, digamma, Euler beta, and a
//!   signed-log scalar type used wherever values outgrow `f64`.
//! * [`quad`] — adaptive Gauss–Kronrod quadrature.
//! * [`series`] — truncated power series with explicit truncation-order
//!   bookkeeping (products, powers).
//! * [`nonlinearity`] — coefficient providers for the analytic
//!   nonlinearity, hypothesis validation, and composition of the
//!   nonlinearity with a candidate manifold series.
//! * [`center`] — the critical-parameter invariant-graph recursion, its
//!   divergent-series normalisation, and the limit constant.
//! * [`unfolding`] — the near-resonant weights, weak-manifold recursion,
//!   and the tracking-series evaluators.
//! * [`flow`] — planar vector fields, an adaptive RK integrator with
//!   event detection, and manifold-shooting experiments.
//! * [`locus`] — parameter scans of the limit constant's zero locus.

pub mod center;
pub mod error;
pub mod flow;
pub mod gamma;
pub mod locus;
pub mod nonlinearity;
pub mod quad;
pub mod series;
pub mod unfolding;

pub use error::{Error, Result};
