//! Point-level Markov model: state grammar, empirical transition counts with
//! support back-off, absorption probabilities, and conditional baselines over
//! the attack outcome tree.

pub mod absorb;
pub mod baseline;
pub mod state;
pub mod transition;

pub use absorb::{absorb, absorb_with_tol, PwpTable, DEFAULT_RESIDUAL_TOL, DEFAULT_STEPS};
pub use baseline::{
    cells_of, AttackContext, BackoffLevel, Baselines, Cell, OutcomeCategory, SplitFlags,
    DEFAULT_BASELINE_SUPPORT,
};
pub use state::{encode_state_sequence, EncodeError, Side, StateKey, Touch, Touches};
pub use transition::{TransitionModel, DEFAULT_SUPPORT};

use crate::error::ErrorCategory;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("NonConvergent: after {n_steps} steps {} state(s) keep more than {tolerance:e} non-terminal mass, worst {}: {:.3e}",
        offenders.len(),
        offenders.first().map(|(s, _)| s.as_str()).unwrap_or("-"),
        offenders.first().map(|(_, r)| *r).unwrap_or(0.0))]
    NonConvergent {
        n_steps: u32,
        tolerance: f64,
        offenders: Vec<(String, f64)>,
    },
    #[error(
        "NoSupport: no baseline observations for state {state} cell {cell} at any back-off level"
    )]
    NoSupport { state: String, cell: String },
}

impl MarkovError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            MarkovError::Encode(_) => ErrorCategory::Data,
            MarkovError::NonConvergent { .. } => ErrorCategory::Numerical,
            MarkovError::NoSupport { .. } => ErrorCategory::Data,
        }
    }
}
