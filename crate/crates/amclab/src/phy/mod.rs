//! Physical-layer oracle: zero-forcing precoding, per-user link quality,
//! QAM error-rate math, and the mapping from link quality to the highest
//! sustainable modulation-and-coding scheme.

mod ber;
mod mcs;
mod oracle;
mod precode;

pub use ber::{coded_ber, monte_carlo_ber, qam_ber_uncoded};
pub use mcs::{McsEntry, McsTable, FIRST_INDEX, LAST_INDEX, N_CLASSES};
pub(crate) use mcs::fnv1a;
pub use oracle::{label_frame, oracle_mcs};
pub use precode::{post_zf_sinr, zf_precoder};

use crate::{Error, Result};

/// Link-level constants shared by labeling and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkConfig {
    /// Total transmit power split evenly across users, watts.
    pub tx_power_w: f64,
    /// Receiver noise power, watts. The default is calibrated so that labels
    /// over the static uncorrelated scenario cover every table row.
    pub noise_power: f64,
    /// Coded bit error rate a scheme must meet to be feasible.
    pub ber_threshold: f64,
    /// Coding gain coefficient in dB per halving of the code rate.
    pub coding_gain_coeff_db: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            tx_power_w: 1.0,
            noise_power: 0.06,
            ber_threshold: 1e-3,
            coding_gain_coeff_db: 3.0,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tx_power_w > 0.0 && self.tx_power_w.is_finite()) {
            return Err(Error::Config(format!("tx_power_w must be positive, got {}", self.tx_power_w)));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::Config(format!("noise_power must be positive, got {}", self.noise_power)));
        }
        if !(self.ber_threshold > 0.0 && self.ber_threshold < 0.5) {
            return Err(Error::Config(format!(
                "ber_threshold must lie in (0, 0.5), got {}",
                self.ber_threshold
            )));
        }
        if !(self.coding_gain_coeff_db >= 0.0 && self.coding_gain_coeff_db.is_finite()) {
            return Err(Error::Config(format!(
                "coding_gain_coeff_db must be non-negative, got {}",
                self.coding_gain_coeff_db
            )));
        }
        Ok(())
    }
}

/// Post-precoding signal-to-interference-plus-noise ratios, one linear
/// value per user, all finite and positive by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SinrVector(Vec<f64>);

impl SinrVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Numeric(format!("non-positive or non-finite SINR in {values:?}")));
        }
        Ok(SinrVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Linear SINR of one user.
    pub fn user(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// SINR of one user in decibels.
    pub fn user_db(&self, k: usize) -> f64 {
        10.0 * self.0[k].log10()
    }
}
