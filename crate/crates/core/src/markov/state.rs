//! Point-state grammar. A state is (side, touch subsequence of the current
//! possession). Attacks carry their attack code instead of an evaluation;
//! the following contact is the richer description of the attack outcome.
//!
//! The first point of a match renders as
//! `(S, SV) -> (R, R#) -> (R, R#S#) -> ... -> (S, W)`.

use crate::types::{EvalCode, PointLog, SkillType};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Which side is in possession, relative to the serving team of the point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    /// Serving team.
    S,
    /// Receiving team.
    R,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::S => Side::R,
            Side::R => Side::S,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Side::S => 'S',
            Side::R => 'R',
        }
    }
}

/// One touch within a possession as it appears in a state key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Touch {
    Serve,
    Reception(EvalCode),
    Set(EvalCode),
    /// Attack with its attack code; an empty code is the coarsened generic
    /// attack and renders as a bare `A`.
    Attack(String),
    Dig(EvalCode),
    Block(EvalCode),
}

impl fmt::Display for Touch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Touch::Serve => f.write_str("SV"),
            Touch::Reception(e) => write!(f, "R{}", e.symbol()),
            Touch::Set(e) => write!(f, "S{}", e.symbol()),
            Touch::Attack(code) => write!(f, "A{code}"),
            Touch::Dig(e) => write!(f, "D{}", e.symbol()),
            Touch::Block(e) => write!(f, "B{}", e.symbol()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Touches {
    Rally(Vec<Touch>),
    /// Terminal: the side has won the point.
    Win,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateKey {
    pub side: Side,
    pub touches: Touches,
}

impl StateKey {
    pub fn win(side: Side) -> Self {
        StateKey {
            side,
            touches: Touches::Win,
        }
    }

    pub fn serve() -> Self {
        StateKey {
            side: Side::S,
            touches: Touches::Rally(vec![Touch::Serve]),
        }
    }

    pub fn rally(side: Side, touches: Vec<Touch>) -> Self {
        StateKey {
            side,
            touches: Touches::Rally(touches),
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.touches, Touches::Win)
    }

    pub fn last_touch(&self) -> Option<&Touch> {
        match &self.touches {
            Touches::Rally(ts) => ts.last(),
            Touches::Win => None,
        }
    }

    /// First back-off level: replace attack codes with the generic attack.
    pub fn coarsen_attack(&self) -> StateKey {
        match &self.touches {
            Touches::Win => self.clone(),
            Touches::Rally(ts) => StateKey::rally(
                self.side,
                ts.iter()
                    .map(|t| match t {
                        Touch::Attack(_) => Touch::Attack(String::new()),
                        other => other.clone(),
                    })
                    .collect(),
            ),
        }
    }

    /// Second back-off level: keep only the last touch (with a generic attack
    /// code).
    pub fn coarsen_last(&self) -> StateKey {
        match &self.touches {
            Touches::Win => self.clone(),
            Touches::Rally(ts) => {
                let last = match ts.last() {
                    Some(Touch::Attack(_)) => Touch::Attack(String::new()),
                    Some(other) => other.clone(),
                    None => return self.clone(),
                };
                StateKey::rally(self.side, vec![last])
            }
        }
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, ", self.side.letter())?;
        match &self.touches {
            Touches::Win => f.write_str("W")?,
            Touches::Rally(ts) => {
                for t in ts {
                    write!(f, "{t}")?;
                }
            }
        }
        f.write_str(")")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("contact {index} of {match_id} point {point_index}: {skill} with eval '{eval}' is outside the state grammar")]
    UnencodableContact {
        match_id: String,
        point_index: u32,
        index: usize,
        skill: SkillType,
        eval: char,
    },
}

/// Encode a validated point as its ordered state sequence: one state per
/// contact plus the terminal state. Possession boundaries reset the touch
/// subsequence; sides are labeled relative to the serving team of the point.
pub fn encode_state_sequence(point: &PointLog) -> Result<Vec<StateKey>, EncodeError> {
    let mut states = Vec::with_capacity(point.contacts.len() + 1);
    let mut touches: Vec<Touch> = Vec::new();
    let mut current_possession: Option<u32> = None;

    for (index, c) in point.contacts.iter().enumerate() {
        if !c.eval.valid_for(c.skill) {
            return Err(EncodeError::UnencodableContact {
                match_id: point.match_id.0.clone(),
                point_index: point.point_index,
                index,
                skill: c.skill,
                eval: c.eval.symbol(),
            });
        }
        if current_possession != Some(c.possession_index) {
            touches.clear();
            current_possession = Some(c.possession_index);
        }
        let side = if c.team == point.serving_team {
            Side::S
        } else {
            Side::R
        };
        let touch = match c.skill {
            SkillType::Serve => Touch::Serve,
            SkillType::Reception => Touch::Reception(c.eval),
            SkillType::Set => Touch::Set(c.eval),
            SkillType::Attack => Touch::Attack(c.attack_code.clone().unwrap_or_default()),
            SkillType::Dig => Touch::Dig(c.eval),
            SkillType::Block => Touch::Block(c.eval),
        };
        touches.push(touch);
        states.push(StateKey::rally(side, touches.clone()));
    }

    let winner_side = if point.winner == point.serving_team {
        Side::S
    } else {
        Side::R
    };
    states.push(StateKey::win(winner_side));
    Ok(states)
}
