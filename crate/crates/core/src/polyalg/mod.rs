//! Polynomial representations: monomial and Chebyshev univariate forms and
//! sparse multivariate polynomials with the substitution the compiler needs.
//!
//! Coefficients are `f64` throughout; field encoding lives in [`crate::mpc`].

mod cheb;
mod dd;
mod multi;
mod uni;

use thiserror::Error;

pub use cheb::{chebyshev_nodes, ChebSeries, ConversionConfig};
pub use multi::{Exponents, PolyLimits, SerializedPoly, SerializedTerm, SparseMultiPoly};
pub use uni::UniPoly;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("degree {degree} exceeds the configured cap {cap}")]
    DegreeCap { degree: usize, cap: usize },
    #[error("expansion too large: {terms} terms exceeds the cap {cap}")]
    TooManyTerms { terms: usize, cap: usize },
    #[error(
        "monomial conversion of degree {degree} is ill-conditioned \
         (relative error {error:.3e} > {tolerance:.1e}); use a lower degree"
    )]
    Conditioning {
        degree: usize,
        error: f64,
        tolerance: f64,
    },
    #[error("variable count mismatch: {left} vs {right}")]
    VarMismatch { left: usize, right: usize },
    #[error("degenerate interval [{lo}, {hi}]")]
    Interval { lo: f64, hi: f64 },
}

impl PolyError {
    /// Whether the error means a symbolic expansion outgrew its caps.
    pub fn is_expansion_limit(&self) -> bool {
        matches!(self, PolyError::DegreeCap { .. } | PolyError::TooManyTerms { .. })
    }
}

/// `mp_eval(compose(p, q), x)`, convenience for callers holding a univariate
/// outer polynomial.
pub fn compose_uni_with_mp(
    p: &UniPoly,
    q: &SparseMultiPoly,
    limits: &PolyLimits,
) -> Result<SparseMultiPoly, PolyError> {
    q.compose_into(p, limits)
}
