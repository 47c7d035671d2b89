//! Special constants and the quadrature behind them.

pub mod coeffs;
pub mod quadrature;

pub use coeffs::{
    a_coeff, a_coeff_with, a_coeffs, a_eta_coeff, a_eta_coeffs, b_coeff, c_coeff,
    key_identity_residual, l_coeff, ln_c_coeff, ln_factorial, spectral_roots, MmrCoefficients,
    NormalizedParams, SpectralRoots,
};
pub use quadrature::{
    integrate_graded, quad_gamma_weight, quad_gamma_weight_with, Quadrature, QuadratureConfig,
};
