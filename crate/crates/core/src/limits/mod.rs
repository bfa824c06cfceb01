//! Limiting determinantal kernels and the special functions they are built
//! from: the Airy function, orthonormal Hermite functions, the extended
//! Hermite (stationary eigenvalue) kernel, the extended Airy kernel, the
//! transition kernel between them, and the double-integral limit of the
//! slow-region kernel.

mod airy;
mod extended;
mod hermite;

pub use airy::{airy_ai, airy_ai_prime, airy_ai_series, AI_PRIME_ZERO, AI_ZERO};
pub use extended::{
    dbm_limit_kernel, dbm_to_2_kernel, dbm_to_2_kernel_ucontour, extended_airy_contour,
    extended_airy_gauge, extended_airy_lambda, gaussian_airy_convolution_reference,
};
pub use hermite::{
    dbm_kernel, dbm_kernel_integral, dbm_kernel_tail_split, ou_transition, HermiteBasis,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LimitsError {
    #[error("argument {0} outside the supported range |x| <= {1}")]
    OutOfRange(f64, f64),
    #[error("matrix size must be at least 1")]
    EmptyMatrix,
    #[error("tail truncation did not certify below {bound:.3e} within {terms} terms")]
    TailNotCertified { bound: f64, terms: usize },
    #[error("the line contour must lie left of the circle: L={l}, R={r}")]
    LineInsideCircle { l: f64, r: f64 },
    #[error("time separation {0} too small for the oscillatory branch")]
    DegenerateTimeGap(f64),
}

/// A scaled observation point of a limit process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitPoint {
    pub tau: f64,
    pub s: f64,
}

impl LimitPoint {
    pub fn new(tau: f64, s: f64) -> Self {
        LimitPoint { tau, s }
    }

    /// Parabolically shifted coordinate `s - tau^2`.
    pub fn shifted(&self) -> f64 {
        self.s - self.tau * self.tau
    }
}
