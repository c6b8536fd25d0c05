//! Multivariate supOU processes.
//!
//! A supOU process superposes Ornstein–Uhlenbeck kernels `e^{A(t−s)}` over a
//! random, stable mean-reversion matrix `A` drawn from a mixing measure `π`,
//! all driven by a Lévy basis with generating quadruple `(γ, Σ, ν, π)`.
//!
//! * [`matfun`]: matrix exponentials, fractional powers, Lyapunov solves.
//! * [`basis`]: Lévy measures, mixing measures, condition checkers, atom sampler.
//! * [`process`]: simulation and second-order structure of the vector process.
//! * [`psd`]: the positive semi-definite variant and a stochastic volatility model.
//! * [`inference`]: empirical moments and the Gamma-ray moment estimator.

pub mod error;
pub mod basis;
pub mod matfun;
pub mod par;
pub mod process;
pub mod psd;
pub mod inference;

pub use error::{ErrorCategory, Result, SupouError};
