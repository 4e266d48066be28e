//! Libero inference: the libero is the one player who makes contacts in a set
//! without ever appearing in the lineup.

use super::IngestError;
use crate::types::*;
use std::collections::{BTreeMap, BTreeSet};

/// Key: (match, set, team).
pub type LiberoKey = (MatchId, u32, TeamId);

/// For each team-set, find the unique contacting player absent from every
/// lineup of the set. More than one such player is ambiguous and an error;
/// none means no libero is identified.
pub fn infer_libero(
    contacts: &[ContactRecord],
    lineups: &[LineupState],
) -> Result<BTreeMap<LiberoKey, PlayerId>, IngestError> {
    let mut on_lineup: BTreeMap<(MatchId, u32, TeamId), BTreeSet<PlayerId>> = BTreeMap::new();
    for l in lineups {
        for team in [&l.home, &l.away] {
            on_lineup
                .entry((l.match_id.clone(), l.set_index, team.team.clone()))
                .or_default()
                .extend(team.slots.iter().cloned());
        }
    }

    let mut contacting: BTreeMap<(MatchId, u32, TeamId), BTreeSet<PlayerId>> = BTreeMap::new();
    for c in contacts {
        contacting
            .entry((c.match_id.clone(), c.set_index, c.team.clone()))
            .or_default()
            .insert(c.player.clone());
    }

    let mut out = BTreeMap::new();
    for (key, players) in contacting {
        let lineup_players = on_lineup.get(&key);
        let off_lineup: Vec<&PlayerId> = players
            .iter()
            .filter(|p| lineup_players.is_none_or(|set| !set.contains(*p)))
            .collect();
        match off_lineup.as_slice() {
            [] => {}
            [one] => {
                out.insert(key, (*one).clone());
            }
            many => {
                return Err(IngestError::AmbiguousLibero {
                    match_id: key.0 .0,
                    set_index: key.1,
                    team: key.2 .0,
                    candidates: many.iter().map(|p| p.0.clone()).collect(),
                })
            }
        }
    }
    Ok(out)
}
