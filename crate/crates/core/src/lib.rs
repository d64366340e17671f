//! Nonlinear spectral gaps of reversible Markov chains and average-distortion
//! embeddings of finite metric spaces into Hilbert space.
//!
//! The modules follow the computational pipeline:
//!
//! * [`markov`] — reversible stochastic matrices, spectra, lazy powers;
//! * [`spaces`] — finite metrics, normed spaces, snowflakes, configurations;
//! * [`rayleigh`] — nonlinear Rayleigh quotients and spectral gaps;
//! * [`mazur`] — vector-valued Mazur maps and gap extrapolation;
//! * [`john`] — minimum-volume ellipsoids and Hilbertian approximation;
//! * [`embed`] — average-distortion embeddings by semidefinite programming;
//! * [`expander`] — random regular graphs and nonembeddability bounds.

// Input validation writes `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embed;
pub mod error;
pub mod expander;
pub mod john;
pub mod linalg;
pub mod lp;
pub mod markov;
pub mod mazur;
pub mod num;
pub mod rayleigh;
pub mod spaces;

pub use error::{Error, Result};
