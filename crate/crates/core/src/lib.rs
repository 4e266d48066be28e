//! Core library: charted-contact ingestion, the point-state Markov model,
//! EM-REML mixed models, strength-of-schedule adjustment, Points Gained
//! attribution, and a synthetic season generator used for end-to-end
//! verification.

pub mod attribution;
pub mod error;
pub mod ingest;
pub mod markov;
pub mod mixed;
pub mod pipeline;
pub mod sos;
pub mod synth;
pub mod types;

pub use error::{Error, ErrorCategory, Result};
pub use types::{
    ConferenceId, ContactRecord, ContactRef, CourtZone, EvalCode, LineupState, MatchId, PlayerId,
    PointLog, Position, SkillType, TeamId, TeamLineup,
};
