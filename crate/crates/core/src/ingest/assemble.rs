//! Partition parsed contacts into validated rallies (`PointLog`s).

use super::libero::infer_libero;
use super::parse::{PointRef, Rejection};
use super::IngestError;
use crate::types::*;
use std::collections::BTreeMap;

#[derive(Debug, Default)]
pub struct AssembledPoints {
    pub points: Vec<PointLog>,
    /// Points dropped during validation, with the reason.
    pub issues: Vec<Rejection>,
}

/// Derive the winner from the terminal contact. `None` means the ending is
/// irregular (no error/kill code) and the winner must come from context.
fn winner_from_terminal(contact: &ContactRecord, other_team: &TeamId) -> Option<TeamId> {
    if contact.eval.is_terminal_error(contact.skill) {
        return Some(other_team.clone());
    }
    if contact.eval == EvalCode::Perfect
        && matches!(
            contact.skill,
            SkillType::Attack | SkillType::Serve | SkillType::Block
        )
    {
        return Some(contact.team.clone());
    }
    None
}

/// Group contacts into points, derive winners, and validate possession
/// structure. Invalid points are dropped and reported; callers running in
/// strict mode treat any issue as fatal.
pub fn assemble_points(
    records: &[ContactRecord],
    lineups: &[LineupState],
    recorded_winners: &BTreeMap<PointRef, TeamId>,
) -> Result<AssembledPoints, IngestError> {
    let lineup_index: BTreeMap<PointRef, &LineupState> = lineups
        .iter()
        .map(|l| ((l.match_id.clone(), l.set_index, l.point_index), l))
        .collect();
    let liberos = infer_libero(records, lineups)?;

    // Group in source order.
    let mut groups: Vec<(PointRef, Vec<ContactRecord>)> = Vec::new();
    for r in records {
        let key = (r.match_id.clone(), r.set_index, r.point_index);
        match groups.last_mut() {
            Some((k, contacts)) if *k == key => contacts.push(r.clone()),
            _ => groups.push((key, vec![r.clone()])),
        }
    }

    // Serving team of the next point in each set, for irregular endings.
    let mut next_server: BTreeMap<PointRef, TeamId> = BTreeMap::new();
    for window in groups.windows(2) {
        let (ref key, _) = window[0];
        let (ref next_key, ref next_contacts) = window[1];
        if key.0 == next_key.0 && key.1 == next_key.1 {
            if let Some(first) = next_contacts.first() {
                next_server.insert(key.clone(), first.team.clone());
            }
        }
    }

    let mut out = AssembledPoints::default();
    'points: for (key, contacts) in &groups {
        let describe = format!("{} set {} point {}", key.0, key.1, key.2);
        let fail = |out: &mut AssembledPoints, reason: String| {
            out.issues.push(Rejection { row: 0, reason });
        };

        let Some(lineup) = lineup_index.get(key) else {
            fail(&mut out, format!("{describe}: no lineup"));
            continue;
        };
        let first = &contacts[0];
        if first.skill != SkillType::Serve {
            fail(
                &mut out,
                format!("{describe}: first contact is not a serve"),
            );
            continue;
        }
        let serving_team = first.team.clone();
        let receiving_team = if lineup.home.team == serving_team {
            lineup.away.team.clone()
        } else if lineup.away.team == serving_team {
            lineup.home.team.clone()
        } else {
            fail(
                &mut out,
                format!("{describe}: serving team {serving_team} not in lineup"),
            );
            continue;
        };

        // Possession structure: non-decreasing indices, one team per
        // possession, alternating sides.
        let mut last_possession = 0u32;
        let mut last_possession_team: Option<&TeamId> = None;
        for c in contacts.iter() {
            if c.possession_index < last_possession {
                fail(&mut out, format!("{describe}: possession index decreases"));
                continue 'points;
            }
            if c.possession_index == last_possession {
                if let Some(team) = last_possession_team {
                    if team != &c.team {
                        fail(
                            &mut out,
                            format!(
                                "{describe}: NonAlternatingPossession (two teams share possession {})",
                                c.possession_index
                            ),
                        );
                        continue 'points;
                    }
                }
            } else {
                if let Some(team) = last_possession_team {
                    if team == &c.team {
                        fail(
                            &mut out,
                            format!(
                                "{describe}: NonAlternatingPossession (possession {} does not change sides)",
                                c.possession_index
                            ),
                        );
                        continue 'points;
                    }
                }
                last_possession = c.possession_index;
            }
            last_possession_team = Some(&c.team);
        }

        let terminal = contacts.last().unwrap();
        let other = if terminal.team == serving_team {
            &receiving_team
        } else {
            &serving_team
        };
        let (winner, irregular_ending) = match winner_from_terminal(terminal, other) {
            Some(w) => (w, false),
            None => match recorded_winners.get(key).or_else(|| next_server.get(key)) {
                Some(w) => (w.clone(), true),
                None => {
                    fail(
                        &mut out,
                        format!("{describe}: irregular ending and winner unknown"),
                    );
                    continue;
                }
            },
        };
        if let Some(recorded) = recorded_winners.get(key) {
            if !irregular_ending && recorded != &winner {
                fail(
                    &mut out,
                    format!(
                        "{describe}: InconsistentWinner (recorded {recorded}, terminal contact implies {winner})"
                    ),
                );
                continue;
            }
        }

        let mut point_liberos = BTreeMap::new();
        for team in [&serving_team, &receiving_team] {
            if let Some(lib) = liberos.get(&(key.0.clone(), key.1, team.clone())) {
                point_liberos.insert(team.clone(), lib.clone());
            }
        }

        out.points.push(PointLog {
            match_id: key.0.clone(),
            set_index: key.1,
            point_index: key.2,
            serving_team,
            receiving_team,
            winner,
            contacts: contacts.clone(),
            lineup: (*lineup).clone(),
            liberos: point_liberos,
            irregular_ending,
        });
    }
    Ok(out)
}
