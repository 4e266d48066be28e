//! Synthetic season generator: a configurable league whose rallies are drawn
//! from a known kernel, used as the verification oracle for the fitting
//! pipeline.
//!
//! The generator and the closed-form oracles in [`kernel`] share the
//! structural probability tables in [`tables`], so every quantity the
//! pipeline estimates (sideout probabilities, effect orderings, the
//! substitution gap) has an exact or simulation-based reference value.

pub mod kernel;
pub mod league;
pub mod tables;

mod generate;

pub use generate::{generate_season, MatchResult, SyntheticSeason};
pub use kernel::{
    kernel_from_model, kernel_v, mc_point_win_prob, true_kernel, true_reception_delta, Kernel,
};
pub use league::{
    build_league, schedule, EffectSds, GroundTruth, League, PlayerEffects, SyntheticConfig,
    TeamUnit,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },
}
