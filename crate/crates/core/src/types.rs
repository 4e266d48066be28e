//! Shared domain types: identifiers, evaluation codes, skills, zones and
//! the per-point record structures produced by ingest.

use serde::{Deserialize, Serialize};
use std::fmt;

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

id_type!(PlayerId);
id_type!(TeamId);
id_type!(ConferenceId);
id_type!(MatchId);

/// Five-point contact evaluation scale. `Poor` ('/') and `Error` ('=') share
/// scale 0 but remain distinct symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvalCode {
    Perfect,  // '#'
    Positive, // '+'
    Ok,       // '!', receptions and digs only
    Negative, // '-'
    Poor,     // '/'
    Error,    // '='
}

impl EvalCode {
    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '#' => Some(EvalCode::Perfect),
            '+' => Some(EvalCode::Positive),
            '!' => Some(EvalCode::Ok),
            '-' => Some(EvalCode::Negative),
            '/' => Some(EvalCode::Poor),
            '=' => Some(EvalCode::Error),
            _ => None,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            EvalCode::Perfect => '#',
            EvalCode::Positive => '+',
            EvalCode::Ok => '!',
            EvalCode::Negative => '-',
            EvalCode::Poor => '/',
            EvalCode::Error => '=',
        }
    }

    pub fn scale(self) -> u8 {
        match self {
            EvalCode::Perfect => 4,
            EvalCode::Positive => 3,
            EvalCode::Ok => 2,
            EvalCode::Negative => 1,
            EvalCode::Poor | EvalCode::Error => 0,
        }
    }

    /// Whether this code ends the point against the contacting team for the
    /// given skill. '=' always does; '/' only for serves and attacks (a poor
    /// reception or dig stays in play).
    pub fn is_terminal_error(self, skill: SkillType) -> bool {
        match self {
            EvalCode::Error => true,
            EvalCode::Poor => matches!(skill, SkillType::Serve | SkillType::Attack),
            _ => false,
        }
    }

    pub fn valid_for(self, skill: SkillType) -> bool {
        match self {
            EvalCode::Ok => matches!(skill, SkillType::Reception | SkillType::Dig),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SkillType {
    Serve,
    Reception,
    Set,
    Attack,
    Dig,
    Block,
}

impl SkillType {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "serve" => Some(SkillType::Serve),
            "reception" => Some(SkillType::Reception),
            "set" => Some(SkillType::Set),
            "attack" => Some(SkillType::Attack),
            "dig" => Some(SkillType::Dig),
            "block" => Some(SkillType::Block),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SkillType::Serve => "Serve",
            SkillType::Reception => "Reception",
            SkillType::Set => "Set",
            SkillType::Attack => "Attack",
            SkillType::Dig => "Dig",
            SkillType::Block => "Block",
        }
    }
}

impl fmt::Display for SkillType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Court zone 1-9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CourtZone(u8);

impl CourtZone {
    pub fn new(zone: u8) -> Option<Self> {
        (1..=9).contains(&zone).then_some(CourtZone(zone))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Front zones lie along the net (2, 3, 4); everything else counts as back
    /// court for back-off purposes.
    pub fn is_front(self) -> bool {
        matches!(self.0, 2..=4)
    }
}

impl fmt::Display for CourtZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One charted touch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub match_id: MatchId,
    pub set_index: u32,
    pub point_index: u32,
    pub possession_index: u32,
    pub player: PlayerId,
    pub team: TeamId,
    pub conference: ConferenceId,
    pub skill: SkillType,
    pub eval: EvalCode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub attack_code: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start_xy: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub end_zone: Option<CourtZone>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetterRow {
    Front,
    Back,
}

/// Rotation snapshot for one team at the start of a point. Slot 1 is the
/// serving position (back right); slots advance clockwise 1 -> 6 -> 5 -> 4 ->
/// 3 -> 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamLineup {
    pub team: TeamId,
    /// slots[i] holds the player in rotation slot i+1.
    pub slots: [PlayerId; 6],
    /// 1-based rotation slot of the setter.
    pub setter_slot: u8,
}

impl TeamLineup {
    pub fn setter(&self) -> &PlayerId {
        &self.slots[(self.setter_slot - 1) as usize]
    }

    pub fn setter_row(&self) -> SetterRow {
        if matches!(self.setter_slot, 2..=4) {
            SetterRow::Front
        } else {
            SetterRow::Back
        }
    }

    pub fn contains(&self, player: &PlayerId) -> bool {
        self.slots.iter().any(|p| p == player)
    }
}

/// Lineups of both teams for one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineupState {
    pub match_id: MatchId,
    pub set_index: u32,
    pub point_index: u32,
    pub home: TeamLineup,
    pub away: TeamLineup,
}

impl LineupState {
    pub fn for_team(&self, team: &TeamId) -> Option<&TeamLineup> {
        if &self.home.team == team {
            Some(&self.home)
        } else if &self.away.team == team {
            Some(&self.away)
        } else {
            None
        }
    }
}

/// One rally: ordered contacts plus resolved context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointLog {
    pub match_id: MatchId,
    pub set_index: u32,
    pub point_index: u32,
    pub serving_team: TeamId,
    pub receiving_team: TeamId,
    pub winner: TeamId,
    pub contacts: Vec<ContactRecord>,
    pub lineup: LineupState,
    /// Inferred libero per team, when one exists for the set.
    #[serde(default)]
    pub liberos: std::collections::BTreeMap<TeamId, PlayerId>,
    /// True when the final contact carries no error/kill code and the winner
    /// had to be taken from context (e.g. an uncharted fault).
    #[serde(default)]
    pub irregular_ending: bool,
}

/// Stable reference to one contact within the corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContactRef {
    pub match_id: MatchId,
    pub set_index: u32,
    pub point_index: u32,
    pub contact_index: usize,
}

impl ContactRef {
    pub fn new(point: &PointLog, contact_index: usize) -> Self {
        ContactRef {
            match_id: point.match_id.clone(),
            set_index: point.set_index,
            point_index: point.point_index,
            contact_index,
        }
    }
}

/// Defensive court position used for blocker/digger responsibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Position {
    FL,
    FM,
    FR,
    BL,
    BM,
    BR,
}

impl Position {
    pub const ALL: [Position; 6] = [
        Position::FL,
        Position::FM,
        Position::FR,
        Position::BL,
        Position::BM,
        Position::BR,
    ];
    pub const FRONT: [Position; 3] = [Position::FL, Position::FM, Position::FR];

    pub fn is_front(self) -> bool {
        matches!(self, Position::FL | Position::FM | Position::FR)
    }

    pub fn name(self) -> &'static str {
        match self {
            Position::FL => "FL",
            Position::FM => "FM",
            Position::FR => "FR",
            Position::BL => "BL",
            Position::BM => "BM",
            Position::BR => "BR",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "FL" => Some(Position::FL),
            "FM" => Some(Position::FM),
            "FR" => Some(Position::FR),
            "BL" => Some(Position::BL),
            "BM" => Some(Position::BM),
            "BR" => Some(Position::BR),
            _ => None,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
