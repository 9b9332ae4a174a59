//! Fixed-point field encoding, additive k-of-k sharing of expanded
//! polynomial coefficients, and local party evaluation.
//!
//! Every party multiplies its coefficient shares by public monomial values,
//! so the whole evaluation has multiplicative depth one in the field and no
//! party ever needs a message from another. Fixed-point truncation happens
//! once, in the clear, when the client decodes the summed outputs.

mod field;
mod files;
mod fixed;
mod party;
mod secret_input;
mod sharing;
mod transcript;

use thiserror::Error;

pub use field::{Field, MERSENNE_EXPONENTS};
pub use files::{
    load_party_output, load_party_program, party_output_from_json, party_output_to_json, party_program_from_json,
    party_program_to_json, save_party_output, save_party_program,
};
pub use fixed::{Fixed, FixedPointParams, Scale, DEFAULT_FIELD_BITS, DEFAULT_FRAC_BITS};
pub use party::{
    clear_fixed_eval, deal_program, monomial_value, party_eval_public_input, reconstruct_output, PartyOutput,
    PartyProgram, PublicStructure, Reconstruction,
};
pub use secret_input::{
    encode_powers, mask_coefficients, mask_powers, secret_input_eval, share_input_powers, CorrelationDealer,
    InputPowerShares, MaskedProducts, ProductScheme, QueryCorrelation, TermSlot,
};
pub use sharing::{reconstruct, share_secret, Share};
pub use transcript::{Channel, Session, Transcript};

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(
        "field overflow: magnitude {value:e} exceeds the bound {bound}; \
         use a larger field or fewer fractional bits"
    )]
    Overflow { value: f64, bound: f64 },
    #[error("cannot combine values at scales {left} and {right}")]
    ScaleMismatch { left: Scale, right: Scale },
    #[error("additive sharing needs at least 2 parties, got {k}")]
    TooFewParties { k: usize },
    #[error("party {party} appears more than once")]
    DuplicateParty { party: usize },
    #[error("missing share from party {party}")]
    MissingParty { party: usize },
    #[error("program fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("input width mismatch: expected {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("secret-input evaluation supports one input variable, program has {vars}")]
    Multivariate { vars: usize },
    #[error("missing correlated randomness: {0}")]
    MissingCorrelation(String),
    #[error("malformed share data: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
