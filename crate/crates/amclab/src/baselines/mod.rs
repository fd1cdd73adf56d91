//! Comparison policies that bracket the sequence models from below: a
//! calibrated SNR-threshold lookup table and a deep Q-learning agent.

mod dqn;
mod lut;

pub use dqn::{
    dqn_act, dqn_train, write_dqn_curve, DqnConfig, DqnCurvePoint, QNet, Replay, Transition,
};
pub use lut::{calibrate_lut, lut_predict, LutThresholds};
