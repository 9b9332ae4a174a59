//! Polynomial compilation of pre-trained feed-forward networks and their
//! communication-less evaluation under additive secret sharing.
//!
//! The pipeline is:
//!
//! 1. [`model`] loads a trained network and provides the float reference
//!    forward pass.
//! 2. [`approx`] replaces every activation and pooling function by a
//!    Chebyshev interpolant, converted to the monomial basis by [`polyalg`].
//! 3. [`compiler`] turns the network into a nested polynomial program that
//!    evaluates each unit once, and optionally expands it into one
//!    multivariate polynomial per output unit.
//! 4. [`mpc`] encodes the expanded coefficients as fixed-point field
//!    elements, shares them additively between `k` parties and lets every
//!    party evaluate its share locally. Parties never talk to each other;
//!    the client sums the output shares.
//! 5. [`harness`] holds the degree sweep and cost profiling used by the CLI.

pub mod approx;
pub mod compiler;
pub mod error;
pub mod harness;
pub mod model;
pub mod mpc;
pub mod polyalg;
pub mod toy;

pub use error::{Error, Result};
