//! Error type shared by all core operations.

use alloc::string::String;

/// Errors raised by network, attack and training operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A tensor did not have the shape a layer or operation expected.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    /// A value left the numeric domain (NaN or infinity).
    #[error("numeric domain error in {0}: non-finite value encountered")]
    NonFinite(String),

    /// A configuration value violated its invariant.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
