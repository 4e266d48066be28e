//! Defensive-specialist substitution value: compare reception quality of
//! back-row specialists against the outside hitters they could replace, and
//! translate the per-reception gap into a point-win-rate effect.

use super::{AttributionError, PointsGainedEntry, Role};
use crate::types::{PlayerId, PointLog};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Lineup back-row fraction above which a non-attacking passer counts as a
/// defensive specialist.
pub const DS_BACK_FRACTION: f64 = 0.9;
/// Fraction below which an attacking non-passer counts as front-row-only.
pub const FRONT_ONLY_MAX_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DsSubstitutionReport {
    pub ds_players: usize,
    pub all_around_players: usize,
    pub front_only_players: usize,
    pub ds_receptions: usize,
    pub all_around_receptions: usize,
    /// Mean adjusted reception PG per opportunity, by class.
    pub ds_mean: f64,
    pub all_around_mean: f64,
    /// DS minus all-around: the per-opportunity value of substituting.
    pub delta: f64,
    pub delta_se: f64,
    /// Substitutable reception opportunities (all-around OH receptions) per
    /// point.
    pub opportunities_per_point: f64,
    /// delta x opportunities: implied point-win-rate change.
    pub implied_point_delta: f64,
}

#[derive(Default)]
struct PlayerStats {
    appearances: u64,
    back_row: u64,
    attacks: BTreeSet<crate::types::ContactRef>,
    reception_pg: Vec<f64>,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn ds_substitution_report(
    entries: &[PointsGainedEntry],
    points: &[PointLog],
) -> Result<DsSubstitutionReport, AttributionError> {
    let mut stats: BTreeMap<PlayerId, PlayerStats> = BTreeMap::new();
    let mut liberos: BTreeSet<PlayerId> = BTreeSet::new();
    // Back-row slots are 1, 5, 6.
    for p in points {
        liberos.extend(p.liberos.values().cloned());
        for lineup in [&p.lineup.home, &p.lineup.away] {
            for (i, player) in lineup.slots.iter().enumerate() {
                let s = stats.entry(player.clone()).or_default();
                s.appearances += 1;
                if matches!(i + 1, 1 | 5 | 6) {
                    s.back_row += 1;
                }
            }
        }
    }
    for e in entries {
        let s = stats.entry(e.player.clone()).or_default();
        match e.role {
            Role::Attacker => {
                s.attacks.insert(e.contact.clone());
            }
            Role::Receiver => s.reception_pg.push(e.adjusted_pg),
            _ => {}
        }
    }

    let mut ds: Vec<f64> = Vec::new();
    let mut all_around: Vec<f64> = Vec::new();
    let mut n_ds = 0usize;
    let mut n_all_around = 0usize;
    let mut n_front_only = 0usize;
    for (player, s) in &stats {
        if liberos.contains(player) || s.appearances == 0 {
            continue;
        }
        let back_fraction = s.back_row as f64 / s.appearances as f64;
        let passes = !s.reception_pg.is_empty();
        let attacks = !s.attacks.is_empty();
        if passes && !attacks && back_fraction >= DS_BACK_FRACTION {
            n_ds += 1;
            ds.extend(&s.reception_pg);
        } else if passes && attacks {
            n_all_around += 1;
            all_around.extend(&s.reception_pg);
        } else if attacks && !passes && back_fraction <= FRONT_ONLY_MAX_FRACTION {
            n_front_only += 1;
        }
    }

    let insufficient = |class: &str, found: usize| AttributionError::InsufficientClassData {
        class: class.to_string(),
        found,
        needed: 1,
    };
    if n_ds == 0 || ds.len() < 2 {
        return Err(insufficient("defensive specialist", n_ds));
    }
    if n_all_around == 0 || all_around.len() < 2 {
        return Err(insufficient("all-around outside hitter", n_all_around));
    }

    let (ds_mean, ds_se) = mean_se(&ds);
    let (oh_mean, oh_se) = mean_se(&all_around);
    let delta = ds_mean - oh_mean;
    let delta_se = (ds_se.powi(2) + oh_se.powi(2)).sqrt();
    let opportunities_per_point = all_around.len() as f64 / points.len().max(1) as f64;
    Ok(DsSubstitutionReport {
        ds_players: n_ds,
        all_around_players: n_all_around,
        front_only_players: n_front_only,
        ds_receptions: ds.len(),
        all_around_receptions: all_around.len(),
        ds_mean,
        all_around_mean: oh_mean,
        delta,
        delta_se,
        opportunities_per_point,
        implied_point_delta: delta * opportunities_per_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::Component;
    use crate::types::*;
    use std::collections::BTreeMap as Map;

    fn point(idx: u32, home_slots: [&str; 6]) -> PointLog {
        let team = |name: &str, slots: [&str; 6]| TeamLineup {
            team: TeamId::from(name),
            slots: slots.map(PlayerId::from),
            setter_slot: 1,
        };
        PointLog {
            match_id: MatchId::from("m"),
            set_index: 1,
            point_index: idx,
            serving_team: TeamId::from("H"),
            receiving_team: TeamId::from("A"),
            winner: TeamId::from("H"),
            contacts: vec![],
            lineup: LineupState {
                match_id: MatchId::from("m"),
                set_index: 1,
                point_index: idx,
                home: team("H", home_slots),
                away: team("A", ["a1", "a2", "a3", "a4", "a5", "a6"]),
            },
            liberos: Map::new(),
            irregular_ending: false,
        }
    }

    fn entry(player: &str, role: Role, skill: SkillType, idx: u32, pg: f64) -> PointsGainedEntry {
        PointsGainedEntry {
            contact: ContactRef {
                match_id: MatchId::from("m"),
                set_index: 1,
                point_index: idx,
                contact_index: 0,
            },
            player: PlayerId::from(player),
            team: TeamId::from("H"),
            conference: ConferenceId::from("C"),
            skill,
            role,
            component: Component::Sv,
            share: 1.0,
            sign: 1.0,
            y: pg,
            sos: 0.0,
            own_side_sos: 0.0,
            raw_pg: pg,
            adjusted_pg: pg,
            provenance: None,
        }
    }

    fn fixture(ds_pg: f64, oh_pg: f64) -> (Vec<PointsGainedEntry>, Vec<PointLog>) {
        // "ds" always sits in a back-row slot; "oh" attacks and passes;
        // "fo" attacks from the front row only.
        let points: Vec<PointLog> = (1..=10)
            .map(|i| point(i, ["ds", "oh", "fo", "s1", "s2", "s3"]))
            .collect();
        let mut entries = Vec::new();
        for i in 1..=4u32 {
            entries.push(entry("ds", Role::Receiver, SkillType::Reception, i, ds_pg));
            entries.push(entry(
                "oh",
                Role::Receiver,
                SkillType::Reception,
                i + 4,
                oh_pg,
            ));
            entries.push(entry("oh", Role::Attacker, SkillType::Attack, i, 0.0));
            entries.push(entry("fo", Role::Attacker, SkillType::Attack, i + 4, 0.0));
        }
        (entries, points)
    }

    #[test]
    fn identical_distributions_give_zero_delta() {
        let (entries, points) = fixture(0.05, 0.05);
        let r = ds_substitution_report(&entries, &points).unwrap();
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.implied_point_delta, 0.0);
        assert_eq!(r.ds_players, 1);
        assert_eq!(r.all_around_players, 1);
        assert_eq!(r.front_only_players, 1);
    }

    #[test]
    fn paper_arithmetic_shape() {
        // 2.3% per opportunity and 0.4 opportunities per point here.
        let (entries, points) = fixture(0.1, 0.077);
        let r = ds_substitution_report(&entries, &points).unwrap();
        assert!((r.delta - 0.023).abs() < 1e-12);
        assert!((r.opportunities_per_point - 0.4).abs() < 1e-12);
        assert!((r.implied_point_delta - 0.023 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn missing_class_is_an_error() {
        let (entries, points) = fixture(0.1, 0.077);
        let no_ds: Vec<_> = entries
            .iter()
            .filter(|e| e.player.as_str() != "ds")
            .cloned()
            .collect();
        assert!(matches!(
            ds_substitution_report(&no_ds, &points),
            Err(AttributionError::InsufficientClassData { .. })
        ));
    }
}
