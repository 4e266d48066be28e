//! Strength-of-schedule models: the serve/receive regression dataset, the
//! attack outcome tree with blocker/digger responsibility assignment, and
//! the random-effects fits over both.

mod attack;
mod responsibility;
mod serve;

pub use attack::{
    attack_model_factors, build_attack_dataset, defensive_sos_terms, fit_attack_models,
    in_model_subset, label_point_attacks, model_has_defense, model_has_digger, offensive_sos_terms,
    AttackDataset, AttackModels, AttackObservation, RawAttack,
};
pub use responsibility::{
    alignment_for, assign_blocker, assign_digger, build_responsibility_tables, ResponsibilityTable,
    TableEntry, DEFAULT_TABLE_SUPPORT,
};
pub use serve::{
    build_serve_dataset, fit_serve_model, receiving_terms, serve_factors, serve_levels,
    serving_terms, ServeObservation,
};

use thiserror::Error;

/// How a blocker/digger identity was determined.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub enum Provenance {
    /// A touch by the player exists.
    Observed,
    /// No touch; identity taken from the responsibility table at full support.
    Inferred,
    /// No touch and the table key was below support; a pooled fallback chose
    /// the position.
    BackOff,
}

/// Factor names shared by the serve and attack models (and by attribution).
pub mod factors {
    pub const SRV_CONF: &str = "srv_conf";
    pub const SRV_TEAM: &str = "srv_team";
    pub const SERVER: &str = "server";
    pub const RCV_CONF: &str = "rcv_conf";
    pub const RCV_TEAM: &str = "rcv_team";
    pub const RECEIVER: &str = "receiver";
    pub const OFF_CONF: &str = "off_conf";
    pub const OFF_TEAM: &str = "off_team";
    pub const ATTACKER: &str = "attacker";
    pub const SETTER: &str = "setter";
    pub const DEF_CONF: &str = "def_conf";
    pub const DEF_TEAM: &str = "def_team";
    pub const BLOCKER: &str = "blocker";
    pub const DIGGER: &str = "digger";
}

/// Globally unique level label for a team nested in its conference.
pub fn team_level(conf: &crate::types::ConferenceId, team: &crate::types::TeamId) -> String {
    format!("{conf}|{team}")
}

/// Globally unique level label for a player nested in their team.
pub fn player_level(team: &crate::types::TeamId, player: &crate::types::PlayerId) -> String {
    format!("{team}|{player}")
}

/// Sum of the BLUPs for the given (factor, level) pairs, with unseen levels
/// contributing their prior mean of zero.
pub fn blup_sum(fit: &crate::mixed::MixedFit, terms: &[(String, String)]) -> f64 {
    terms
        .iter()
        .map(|(factor, level)| {
            fit.blups
                .get(factor)
                .and_then(|m| m.get(level))
                .copied()
                .unwrap_or(0.0)
        })
        .sum()
}

#[derive(Debug, Error)]
pub enum SosError {
    #[error("MissingState: no win-probability estimate for state {state} at any back-off level")]
    MissingState { state: String },
    #[error("NoAlignment: cannot resolve defensive positions for {team} at {match_id} set {set_index} point {point_index}: {reason}")]
    NoAlignment {
        team: String,
        match_id: String,
        set_index: u32,
        point_index: u32,
        reason: String,
    },
    #[error("NoSupport: no baseline observations for state {state} cell {cell}")]
    NoSupport { state: String, cell: String },
}
