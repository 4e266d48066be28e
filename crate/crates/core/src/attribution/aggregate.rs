//! Aggregation of the Points Gained ledger to player, team or conference
//! rows with per-skill columns (serve, pass, set, attack, block).

use super::PointsGainedEntry;
use crate::types::{ConferenceId, ContactRef, PointLog, SkillType, TeamId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregateLevel {
    Player,
    Team,
    Conference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregateBasis {
    /// Divide every column by sets played.
    PerSet,
    /// Divide every column by total credited contacts.
    PerContact,
    /// Divide each skill column by that skill's credited contacts.
    PerOpportunity,
}

/// Minimum distinct-contact thresholds per skill column; a column below its
/// threshold is suppressed. Applied at the player level only.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct MinContacts {
    pub srv: u64,
    pub pass: u64,
    pub set: u64,
    pub att: u64,
    pub blk: u64,
}

impl MinContacts {
    pub fn uniform(n: u64) -> Self {
        MinContacts {
            srv: n,
            pass: n,
            set: n,
            att: n,
            blk: n,
        }
    }

    fn for_column(&self, col: usize) -> u64 {
        [self.srv, self.pass, self.set, self.att, self.blk][col]
    }
}

/// One aggregated row: identity, exposure, and basis-scaled PG columns.
/// Suppressed columns (below the minimum-contact filter) are absent; the
/// totals sum the surviving columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub entity: String,
    pub team: Option<String>,
    pub conference: Option<String>,
    /// Coarse position class from the skill mix; presentation only.
    pub pos: String,
    pub sets: u64,
    pub contacts: u64,
    pub srv: Option<f64>,
    pub pass: Option<f64>,
    pub set: Option<f64>,
    pub att: Option<f64>,
    pub blk: Option<f64>,
    /// Adjusted PG, basis-scaled, summed over the shown columns.
    pub total: f64,
    /// Same aggregation over raw PG.
    pub total_raw: f64,
    /// Mean per-entry SoS term.
    pub mean_sos: f64,
}

impl AggregateRow {
    pub fn columns(&self) -> [Option<f64>; 5] {
        [self.srv, self.pass, self.set, self.att, self.blk]
    }
}

fn column_of(skill: SkillType) -> usize {
    match skill {
        SkillType::Serve => 0,
        SkillType::Reception | SkillType::Dig => 1,
        SkillType::Set => 2,
        SkillType::Attack => 3,
        SkillType::Block => 4,
    }
}

#[derive(Default)]
struct Acc {
    adj: [f64; 5],
    raw: [f64; 5],
    contacts: [BTreeSet<ContactRef>; 5],
    sos_sum: f64,
    n_entries: u64,
    team: Option<TeamId>,
    conference: Option<ConferenceId>,
}

fn position_class(counts: &[u64; 5]) -> String {
    let (srv, pass, set, att, blk) = (counts[0], counts[1], counts[2], counts[3], counts[4]);
    let playing = pass + set + att + blk;
    if playing == 0 {
        return if srv > 0 { "SRV" } else { "-" }.to_string();
    }
    if set * 2 >= playing {
        "S".to_string()
    } else if att == 0 && pass > 0 {
        "L/DS".to_string()
    } else if att > 0 && pass > 0 {
        "OH".to_string()
    } else if att > 0 {
        "MB/OPP".to_string()
    } else {
        "-".to_string()
    }
}

/// Aggregate the ledger. `points` supplies lineup-based sets-played counts;
/// rows come back sorted by adjusted total, descending.
pub fn aggregate(
    entries: &[PointsGainedEntry],
    points: &[PointLog],
    level: AggregateLevel,
    basis: AggregateBasis,
    min_contacts: &MinContacts,
) -> Vec<AggregateRow> {
    let mut accs: BTreeMap<String, Acc> = BTreeMap::new();
    for e in entries {
        let key = match level {
            AggregateLevel::Player => e.player.to_string(),
            AggregateLevel::Team => e.team.to_string(),
            AggregateLevel::Conference => e.conference.to_string(),
        };
        let acc = accs.entry(key).or_default();
        let col = column_of(e.skill);
        acc.adj[col] += e.adjusted_pg;
        acc.raw[col] += e.raw_pg;
        acc.contacts[col].insert(e.contact.clone());
        acc.sos_sum += e.sos;
        acc.n_entries += 1;
        acc.team.get_or_insert_with(|| e.team.clone());
        acc.conference.get_or_insert_with(|| e.conference.clone());
    }

    // Sets played per entity, from lineup membership.
    let mut sets: BTreeMap<String, BTreeSet<(String, u32)>> = BTreeMap::new();
    let mut conf_of_team: BTreeMap<TeamId, ConferenceId> = BTreeMap::new();
    for p in points {
        for c in &p.contacts {
            conf_of_team
                .entry(c.team.clone())
                .or_insert_with(|| c.conference.clone());
        }
    }
    for p in points {
        let set_key = (p.match_id.to_string(), p.set_index);
        for lineup in [&p.lineup.home, &p.lineup.away] {
            match level {
                AggregateLevel::Player => {
                    for player in &lineup.slots {
                        sets.entry(player.to_string())
                            .or_default()
                            .insert(set_key.clone());
                    }
                    if let Some(lib) = p.liberos.get(&lineup.team) {
                        sets.entry(lib.to_string())
                            .or_default()
                            .insert(set_key.clone());
                    }
                }
                AggregateLevel::Team => {
                    sets.entry(lineup.team.to_string())
                        .or_default()
                        .insert(set_key.clone());
                }
                AggregateLevel::Conference => {
                    if let Some(conf) = conf_of_team.get(&lineup.team) {
                        sets.entry(conf.to_string())
                            .or_default()
                            .insert(set_key.clone());
                    }
                }
            }
        }
    }

    let mut rows: Vec<AggregateRow> = accs
        .into_iter()
        .map(|(entity, acc)| {
            let counts: [u64; 5] = std::array::from_fn(|i| acc.contacts[i].len() as u64);
            let total_contacts: u64 = counts.iter().sum();
            let n_sets = sets.get(&entity).map_or(0, |s| s.len() as u64);
            let mut cols_adj: [Option<f64>; 5] = [None; 5];
            let mut cols_raw: [Option<f64>; 5] = [None; 5];
            for i in 0..5 {
                if counts[i] == 0 {
                    continue;
                }
                if level == AggregateLevel::Player && counts[i] < min_contacts.for_column(i) {
                    continue;
                }
                let denom = match basis {
                    AggregateBasis::PerSet => n_sets.max(1) as f64,
                    AggregateBasis::PerContact => total_contacts.max(1) as f64,
                    AggregateBasis::PerOpportunity => counts[i] as f64,
                };
                cols_adj[i] = Some(acc.adj[i] / denom);
                cols_raw[i] = Some(acc.raw[i] / denom);
            }
            AggregateRow {
                pos: position_class(&counts),
                team: (level == AggregateLevel::Player)
                    .then(|| acc.team.as_ref().map(|t| t.to_string()).unwrap_or_default()),
                conference: (level != AggregateLevel::Conference).then(|| {
                    acc.conference
                        .as_ref()
                        .map(|c| c.to_string())
                        .unwrap_or_default()
                }),
                entity,
                sets: n_sets,
                contacts: total_contacts,
                srv: cols_adj[0],
                pass: cols_adj[1],
                set: cols_adj[2],
                att: cols_adj[3],
                blk: cols_adj[4],
                total: cols_adj.iter().flatten().sum(),
                total_raw: cols_raw.iter().flatten().sum(),
                mean_sos: acc.sos_sum / acc.n_entries.max(1) as f64,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.total
            .partial_cmp(&a.total)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.entity.cmp(&b.entity))
    });
    rows
}
