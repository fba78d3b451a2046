//! Differentially private majority ensembling via data-dependent randomized
//! response (DaRRM).
//!
//! Given `K` mechanisms that are each `(ε, Δ)`-DP and output a bit, DaRRM
//! observes the vote sum `L`, releases the true majority with probability
//! `γ(L)` and a fair coin otherwise. This crate provides:
//!
//! * [`dist`]: exact Poisson-Binomial, Binomial and hypergeometric masses;
//! * [`gammas`]: the closed-form noise functions (subsampling, double
//!   subsampling, constant) and the `NoiseFn` file format;
//! * [`privacy`]: the privacy cost objective, the finite corner reduction,
//!   verifiers, composition theorems and the GNMax accountant;
//! * [`lp`] and [`optimizer`]: a dense simplex and the linear program whose
//!   solution is the utility-optimal `γ`;
//! * [`mechanism`]: executable mechanisms and their exact output laws;
//! * [`eval`]: error (TV distance) computations and dominance checks.
//!
//! The numerical core is generic over the scalar type; the aliases below fix
//! it to `f64`/`f32`.

pub mod dist;
pub mod error;
pub mod eval;
pub mod gammas;
pub mod lp;
pub mod mechanism;
pub mod optimizer;
pub mod privacy;
mod scalar;

pub use error::{DarrmError, Result};
pub use scalar::{Real, Scalar};

pub type Pmf64 = dist::Pmf<f64>;
pub type Pmf32 = dist::Pmf<f32>;
pub type ProbVector64 = dist::ProbVector<f64>;
pub type ProbVector32 = dist::ProbVector<f32>;
pub type NoiseFn64 = gammas::NoiseFn<f64>;
pub type NoiseFn32 = gammas::NoiseFn<f32>;
pub type CornerSet64 = privacy::CornerSet<f64>;
pub type LinearProgram64 = lp::LinearProgram<f64>;
