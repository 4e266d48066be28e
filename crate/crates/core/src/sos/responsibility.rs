//! Responsibility tables: who, by defensive position, is accountable for a
//! given attack when no block or dig touch was charted. Keys are the attack
//! code (blockers) and attack code x end zone (diggers); the modal observed
//! position wins, with pooled fallbacks below the support threshold.

use super::{Provenance, SosError};
use crate::ingest::resolve_defensive_positions;
use crate::types::{PlayerId, PointLog, Position, SkillType, TeamId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_TABLE_SUPPORT: u64 = 25;

/// Modal position for one table key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub position: Position,
    /// Total observations behind the key.
    pub count: u64,
    /// Observations at the modal position.
    pub modal_count: u64,
    /// The mode was tied; the first position in FL < FM < FR < BL < BM < BR
    /// order was chosen.
    pub tied: bool,
}

fn modal(counts: &BTreeMap<Position, u64>) -> Option<TableEntry> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return None;
    }
    let max = *counts.values().max().unwrap();
    let mut at_max = counts.iter().filter(|(_, &c)| c == max);
    let position = *at_max.next().unwrap().0;
    let tied = at_max.next().is_some();
    Some(TableEntry {
        position,
        count: total,
        modal_count: max,
        tied,
    })
}

/// Blocker and digger responsibility lookups with pooled fallbacks.
#[derive(Debug, Clone, Default)]
pub struct ResponsibilityTable {
    /// attack code -> modal front-row block position.
    pub blocker: BTreeMap<String, TableEntry>,
    pub blocker_pooled: Option<TableEntry>,
    /// (attack code, end zone) -> modal dig position.
    pub digger: BTreeMap<(String, u8), TableEntry>,
    /// end zone -> modal dig position, pooled over attack codes.
    pub digger_by_zone: BTreeMap<u8, TableEntry>,
    pub digger_pooled: Option<TableEntry>,
    pub min_support: u64,
    /// Human-readable descriptions of tied modes, for the run log.
    pub ties: Vec<String>,
}

impl ResponsibilityTable {
    /// Modal block position for an attack code: the exact key when it meets
    /// the support threshold, the pooled table otherwise, and a fixed
    /// front-middle default when nothing was ever observed.
    pub fn blocker_position(&self, code: &str) -> (Position, Provenance) {
        if let Some(e) = self.blocker.get(code) {
            if e.count >= self.min_support {
                return (e.position, Provenance::Inferred);
            }
        }
        match &self.blocker_pooled {
            Some(e) => (e.position, Provenance::BackOff),
            None => (Position::FM, Provenance::BackOff),
        }
    }

    /// Modal dig position for (attack code, end zone), backing off first over
    /// the code, then over the zone, then to a fixed back-right default.
    pub fn digger_position(&self, code: &str, zone: Option<u8>) -> (Position, Provenance) {
        if let Some(z) = zone {
            if let Some(e) = self.digger.get(&(code.to_string(), z)) {
                if e.count >= self.min_support {
                    return (e.position, Provenance::Inferred);
                }
            }
            if let Some(e) = self.digger_by_zone.get(&z) {
                if e.count >= self.min_support {
                    return (e.position, Provenance::BackOff);
                }
            }
        }
        match &self.digger_pooled {
            Some(e) => (e.position, Provenance::BackOff),
            None => (Position::BR, Provenance::BackOff),
        }
    }
}

fn position_of(alignment: &BTreeMap<Position, PlayerId>, player: &PlayerId) -> Option<Position> {
    alignment
        .iter()
        .find(|(_, p)| *p == player)
        .map(|(pos, _)| *pos)
}

fn defending_team(point: &PointLog, attacking: &TeamId) -> TeamId {
    if *attacking == point.serving_team {
        point.receiving_team.clone()
    } else {
        point.serving_team.clone()
    }
}

pub fn alignment_for(
    point: &PointLog,
    team: &TeamId,
) -> Result<BTreeMap<Position, PlayerId>, SosError> {
    let no_alignment = |reason: String| SosError::NoAlignment {
        team: team.to_string(),
        match_id: point.match_id.to_string(),
        set_index: point.set_index,
        point_index: point.point_index,
        reason,
    };
    let lineup = point
        .lineup
        .for_team(team)
        .ok_or_else(|| no_alignment("team absent from lineup record".to_string()))?;
    resolve_defensive_positions(lineup, point.liberos.get(team))
        .map_err(|e| no_alignment(e.to_string()))
}

/// Tally observed block and dig touches into modal-position tables.
pub fn build_responsibility_tables(
    points: &[PointLog],
    min_support: u64,
) -> Result<ResponsibilityTable, SosError> {
    let mut block_counts: BTreeMap<String, BTreeMap<Position, u64>> = BTreeMap::new();
    let mut block_pooled: BTreeMap<Position, u64> = BTreeMap::new();
    let mut dig_counts: BTreeMap<(String, u8), BTreeMap<Position, u64>> = BTreeMap::new();
    let mut dig_zone: BTreeMap<u8, BTreeMap<Position, u64>> = BTreeMap::new();
    let mut dig_pooled: BTreeMap<Position, u64> = BTreeMap::new();

    for point in points {
        for (i, c) in point.contacts.iter().enumerate() {
            if c.skill != SkillType::Attack {
                continue;
            }
            let Some(code) = c.attack_code.as_deref() else {
                continue;
            };
            let def = defending_team(point, &c.team);
            let alignment = alignment_for(point, &def)?;

            if let Some(block) = point.contacts.get(i + 1) {
                if block.skill == SkillType::Block && block.team == def {
                    if let Some(pos) = position_of(&alignment, &block.player) {
                        if pos.is_front() {
                            *block_counts
                                .entry(code.to_string())
                                .or_default()
                                .entry(pos)
                                .or_default() += 1;
                            *block_pooled.entry(pos).or_default() += 1;
                        }
                    }
                }
            }

            // First touch past any block: the dig, when the defense kept the
            // ball up on their side.
            let dig = point.contacts[i + 1..]
                .iter()
                .find(|t| t.skill != SkillType::Block);
            if let Some(dig) = dig {
                if dig.skill == SkillType::Dig && dig.team == def {
                    if let Some(pos) = position_of(&alignment, &dig.player) {
                        *dig_pooled.entry(pos).or_default() += 1;
                        if let Some(zone) = c.end_zone {
                            *dig_counts
                                .entry((code.to_string(), zone.get()))
                                .or_default()
                                .entry(pos)
                                .or_default() += 1;
                            *dig_zone
                                .entry(zone.get())
                                .or_default()
                                .entry(pos)
                                .or_default() += 1;
                        }
                    }
                }
            }
        }
    }

    let mut table = ResponsibilityTable {
        min_support,
        ..Default::default()
    };
    for (code, counts) in block_counts {
        if let Some(e) = modal(&counts) {
            if e.tied {
                table
                    .ties
                    .push(format!("blocker[{code}]: tie at {}", e.position));
            }
            table.blocker.insert(code, e);
        }
    }
    table.blocker_pooled = modal(&block_pooled);
    for ((code, zone), counts) in dig_counts {
        if let Some(e) = modal(&counts) {
            if e.tied {
                table
                    .ties
                    .push(format!("digger[{code},{zone}]: tie at {}", e.position));
            }
            table.digger.insert((code, zone), e);
        }
    }
    for (zone, counts) in dig_zone {
        if let Some(e) = modal(&counts) {
            table.digger_by_zone.insert(zone, e);
        }
    }
    table.digger_pooled = modal(&dig_pooled);
    Ok(table)
}

/// Resolve a player for a table position via the defensive alignment of the
/// point, preferring an observed touch when one exists.
pub fn assign_blocker(
    observed: Option<&PlayerId>,
    code: &str,
    table: &ResponsibilityTable,
    alignment: &BTreeMap<Position, PlayerId>,
) -> (PlayerId, Provenance) {
    if let Some(p) = observed {
        return (p.clone(), Provenance::Observed);
    }
    let (pos, provenance) = table.blocker_position(code);
    (alignment[&pos].clone(), provenance)
}

pub fn assign_digger(
    observed: Option<&PlayerId>,
    code: &str,
    zone: Option<u8>,
    table: &ResponsibilityTable,
    alignment: &BTreeMap<Position, PlayerId>,
) -> (PlayerId, Provenance) {
    if let Some(p) = observed {
        return (p.clone(), Provenance::Observed);
    }
    let (pos, provenance) = table.digger_position(code, zone);
    (alignment[&pos].clone(), provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::test_fixtures::table_sample_point;

    #[test]
    fn modal_tie_breaks_in_position_order() {
        let counts = BTreeMap::from([(Position::BL, 3), (Position::FM, 3), (Position::FR, 1)]);
        let e = modal(&counts).unwrap();
        assert_eq!(e.position, Position::FM);
        assert!(e.tied);
        assert_eq!(e.count, 7);
        assert_eq!(e.modal_count, 3);
    }

    #[test]
    fn sample_rally_block_touch_lands_in_blocker_table() {
        // The V5 swing is blocked by the front-middle defender; repeat the
        // point to clear the support threshold.
        let points = vec![table_sample_point(); 30];
        let table = build_responsibility_tables(&points, 25).unwrap();
        let e = &table.blocker["V5"];
        assert_eq!(e.position, Position::FM);
        assert_eq!(e.count, 30);
        assert!(!e.tied);
        assert_eq!(
            table.blocker_position("V5"),
            (Position::FM, Provenance::Inferred)
        );
    }

    #[test]
    fn sample_rally_digs_land_in_digger_table() {
        // X6 to zone 9 is dug by Louisville; V5 to zone 9 is blocked, so the
        // next non-block touch (a Louisville dig) belongs to the attacking
        // side and must not count.
        let points = vec![table_sample_point(); 30];
        let table = build_responsibility_tables(&points, 25).unwrap();
        assert!(table.digger.contains_key(&("X6".to_string(), 9)));
        assert!(!table.digger.contains_key(&("V5".to_string(), 9)));
    }

    #[test]
    fn below_support_keys_back_off_to_pooled() {
        let points = vec![table_sample_point(); 10];
        let table = build_responsibility_tables(&points, 25).unwrap();
        // 10 < 25 observations for V5, but the pooled table has them all.
        let (pos, provenance) = table.blocker_position("V5");
        assert_eq!(provenance, Provenance::BackOff);
        assert_eq!(pos, Position::FM);
        // Unknown codes also reach the pooled fallback.
        assert_eq!(
            table.digger_position("Z9", Some(4)),
            (
                table.digger_pooled.as_ref().unwrap().position,
                Provenance::BackOff
            )
        );
    }

    #[test]
    fn empty_table_uses_fixed_defaults() {
        let table = ResponsibilityTable {
            min_support: 25,
            ..Default::default()
        };
        assert_eq!(table.blocker_position("X5").0, Position::FM);
        assert_eq!(table.digger_position("X5", Some(6)).0, Position::BR);
    }

    #[test]
    fn observed_touch_wins_over_table() {
        let points = vec![table_sample_point(); 30];
        let table = build_responsibility_tables(&points, 25).unwrap();
        let point = table_sample_point();
        let alignment = alignment_for(&point, &TeamId::from("Texas")).unwrap();
        let caffey = PlayerId::from("Kayla Caffey");
        let (p, provenance) = assign_blocker(Some(&caffey), "V5", &table, &alignment);
        assert_eq!(p, caffey);
        assert_eq!(provenance, Provenance::Observed);
        let (p, provenance) = assign_blocker(None, "V5", &table, &alignment);
        assert_eq!(p, caffey); // FM defender is Caffey herself
        assert_eq!(provenance, Provenance::Inferred);
    }
}
