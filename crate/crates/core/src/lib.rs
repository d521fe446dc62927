//! Differential-geometry toolkit for almost Ricci–Bourguignon solitons:
//! chart-level curvature by Taylor-jet differentiation, soliton residuals,
//! integral identities on compact charts, and a 2D conformal flow integrator.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod catalog;
pub mod chartcalc;
pub mod cli;
pub mod integrals;
pub mod jet;
pub mod quad;
pub mod rbflow;
pub mod soliton;
