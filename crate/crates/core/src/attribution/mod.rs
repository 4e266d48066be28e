//! Points Gained attribution: per-contact credit for servers, receivers,
//! attackers, setters, blockers and diggers, raw and SoS-adjusted, plus
//! aggregation, the Pythagorean application and the defensive-specialist
//! substitution report.

mod aggregate;
mod ds;
mod pg;
mod pythagorean;

pub use aggregate::{aggregate, AggregateBasis, AggregateLevel, AggregateRow, MinContacts};
pub use ds::{ds_substitution_report, DsSubstitutionReport};
pub use pg::{pg_attack, pg_serve_receive};
pub use pythagorean::{fit_alpha, pythagorean_winpct, AlphaFit, DEFAULT_ALPHA};

use crate::sos::Provenance;
use crate::types::{ConferenceId, ContactRef, PlayerId, SkillType, TeamId};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Server,
    Receiver,
    Attacker,
    Setter,
    Blocker,
    Digger,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Server => "Server",
            Role::Receiver => "Receiver",
            Role::Attacker => "Attacker",
            Role::Setter => "Setter",
            Role::Blocker => "Blocker",
            Role::Digger => "Digger",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which defining equation an entry came from: the serve/receive model or
/// one of the seven attack components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    Sv,
    Attack(u8),
}

impl Component {
    pub fn label(self) -> String {
        match self {
            Component::Sv => "SV".to_string(),
            Component::Attack(k) => k.to_string(),
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// One credited share of one contact. With S the signed, share-weighted SoS
/// term, `adjusted_pg = raw_pg - sos` holds exactly, and setting every BLUP
/// and intercept to zero collapses adjusted onto raw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointsGainedEntry {
    pub contact: ContactRef,
    pub player: PlayerId,
    pub team: TeamId,
    pub conference: ConferenceId,
    pub skill: SkillType,
    pub role: Role,
    pub component: Component,
    /// Fraction of the role-side credit carried by this player.
    pub share: f64,
    /// +1 when the response is scored from this player's perspective.
    pub sign: f64,
    /// The component response being divided.
    pub y: f64,
    /// sign x share x (intercept + opposing-side BLUPs).
    pub sos: f64,
    /// Own-side conference+team BLUPs: excluded from PG, kept for
    /// inspection.
    pub own_side_sos: f64,
    pub raw_pg: f64,
    pub adjusted_pg: f64,
    /// How a blocker/digger identity was resolved, when applicable.
    pub provenance: Option<Provenance>,
}

impl PointsGainedEntry {
    /// Construct with the raw/adjusted arithmetic applied once, centrally.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn build(
        contact: ContactRef,
        player: PlayerId,
        team: TeamId,
        conference: ConferenceId,
        skill: SkillType,
        role: Role,
        component: Component,
        share: f64,
        sign: f64,
        y: f64,
        sos_term: f64,
        own_side_sos: f64,
        provenance: Option<Provenance>,
    ) -> Self {
        let raw_pg = sign * share * y;
        let sos = sign * share * sos_term;
        PointsGainedEntry {
            contact,
            player,
            team,
            conference,
            skill,
            role,
            component,
            share,
            sign,
            y,
            sos,
            own_side_sos,
            raw_pg,
            adjusted_pg: raw_pg - sos,
            provenance,
        }
    }
}

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("MissingRatio: component {component} was reached but its model is unavailable")]
    MissingRatio { component: u8 },
    #[error("UnknownEntity: '{entity}' has no entries or lineup appearances")]
    UnknownEntity { entity: String },
    #[error("DegenerateSeason: points scored and allowed are both zero")]
    DegenerateSeason,
    #[error(
        "InsufficientClassData: class '{class}' has {found} qualifying player(s), need {needed}"
    )]
    InsufficientClassData {
        class: String,
        found: usize,
        needed: usize,
    },
}
