//! Independent verification oracles for the elliptical-process stack.
//!
//! Everything in this crate is implemented from scratch, on purpose: the
//! production crates are validated by comparing against these routines, so
//! they must not share any numerical code with them beyond the language
//! primitives. Expect straightforward, textbook implementations rather than
//! tuned ones.
//!
//! - [`quad`] — adaptive Gauss–Kronrod (G7, K15) and fixed Gauss–Legendre
//!   quadrature, plus the consistency-integral density oracle.
//! - [`linalg`] — dense LU with partial pivoting: solve, determinant.
//! - [`fd`] — central finite-difference gradients.
//! - [`gp`] — a self-contained exact Gaussian-process regressor (squared
//!   exponential kernel plus diagonal noise).
//! - [`stats`] — Monte Carlo summary helpers (means, covariances, standard
//!   errors, KS test).

pub mod fd;
pub mod gp;
pub mod linalg;
pub mod quad;
pub mod stats;

pub use fd::fd_gradient;
pub use gp::GpReference;
pub use quad::{density_by_quadrature, gauss_legendre, integrate, QuadError, QuadResult};
