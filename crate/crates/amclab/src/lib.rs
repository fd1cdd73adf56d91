//! Link-adaptation laboratory for a multi-antenna downlink.
//!
//! The crate simulates a base station with a large uniform linear array
//! serving a handful of single-antenna users through a clustered-scatterer
//! fading channel, labels every frame with the highest modulation-and-coding
//! scheme that still meets a coded error-rate target under zero-forcing
//! precoding, and trains policies that predict that label from raw channel
//! snapshots alone, with no receiver feedback. Policies include a
//! convolutional network with a recurrent head, a convolution-only ablation,
//! a calibrated SNR lookup table, and a Q-learning agent, all built on the
//! in-crate `autodiff` kernel so results are bit-reproducible.
//!
//! Everything downstream of a master seed is deterministic: the channel
//! generator is counter-based (any frame can be produced out of order), the
//! training loop is single-threaded in effect even when data-parallel, and
//! binary artifacts round-trip byte-exactly.

pub mod autodiff;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod datastore;
pub mod evalreport;
pub mod linalg;
pub mod models;
pub mod phy;
pub mod rng;
pub mod special;

/// Crate-wide error taxonomy. Variants map one-to-one onto process exit
/// codes so failures are scriptable: configuration 2, data 3, numeric 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid or inconsistent configuration (unknown key, bad value, shape mismatch requested).
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed or inconsistent data artifact (file format, shape, checksum).
    #[error("data error: {0}")]
    Data(String),
    /// Numerical failure (singular channel, non-finite value).
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Tool version string recorded in every output directory.
pub fn version_string() -> String {
    format!("amclab {}", env!("CARGO_PKG_VERSION"))
}
