//! Exponential-sum solutions of the Legendre-transformed elliptic complex
//! Monge-Ampère equation, the hyper-Kähler 4-metrics they generate, and
//! pointwise numerical certification of their geometric identities.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod curvature;
pub mod expsum;
pub mod geometry;
pub mod jets;
pub mod spectrum;
pub mod verify;

pub use num_complex::Complex64;
