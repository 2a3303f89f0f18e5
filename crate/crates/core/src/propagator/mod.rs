//! Path-integral kernel machinery and the Schrödinger-like evolution of the
//! strategy wave function.
//!
//! Monte Carlo and quadrature facts about the short-time kernel are checked
//! in Wick mode, where it is a real Gaussian. Evolution runs in Lorentzian
//! mode with an alternating-direction Crank–Nicolson scheme.

mod evolve;
mod kernel;
mod potential;
mod rho;

pub use evolve::{evolve, laplacian_norm, Evolution, WaveFunction};
pub use kernel::{
    kernel_normalization_check, kernel_value, l_epsilon, two_point_correlation, CorrelationEstimate, KernelMode,
    KernelSpec, NormalizationReport,
};
pub use potential::{assemble_rhs, effective_scalar_f, potential_v, EffectiveScalar, TensorField, BACKGROUND_TRACE};
pub use rho::{optimal_rho, optimal_rho_on, RhoReport};
