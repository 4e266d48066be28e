//! League construction: conferences, teams, rosters with fixed role slots,
//! and the drawn ground-truth effects every rally outcome is tilted by.

use super::SynthError;
use crate::types::{ConferenceId, PlayerId, TeamId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Fixed roster role slots; indices into `TeamUnit::players`.
pub const ROLE_SETTER: usize = 0;
pub const ROLE_OH1: usize = 1;
pub const ROLE_OH2: usize = 2;
pub const ROLE_MB1: usize = 3;
pub const ROLE_MB2: usize = 4;
pub const ROLE_OPP: usize = 5;
pub const ROLE_LIBERO: usize = 6;
pub const ROLE_DS: usize = 7;

/// On-court service order starting from the setter, expressed as roster
/// indices: S, OH, MB, OPP, OH, MB.
pub const COURT_ORDER: [usize; 6] = [
    ROLE_SETTER,
    ROLE_OH1,
    ROLE_MB1,
    ROLE_OPP,
    ROLE_OH2,
    ROLE_MB2,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSds {
    pub server: f64,
    pub receiver: f64,
    pub attacker: f64,
    pub setter: f64,
    pub blocker: f64,
    pub digger: f64,
    pub team: f64,
    pub conference: f64,
}

impl Default for EffectSds {
    fn default() -> Self {
        EffectSds {
            server: 0.20,
            receiver: 0.20,
            attacker: 0.25,
            setter: 0.10,
            blocker: 0.20,
            digger: 0.15,
            team: 0.10,
            conference: 0.05,
        }
    }
}

impl EffectSds {
    pub fn zero() -> Self {
        EffectSds {
            server: 0.0,
            receiver: 0.0,
            attacker: 0.0,
            setter: 0.0,
            blocker: 0.0,
            digger: 0.0,
            team: 0.0,
            conference: 0.0,
        }
    }

    fn all(&self) -> [f64; 8] {
        [
            self.server,
            self.receiver,
            self.attacker,
            self.setter,
            self.blocker,
            self.digger,
            self.team,
            self.conference,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub conferences: usize,
    pub teams_per_conference: usize,
    /// At least 8: six starters plus a libero and a defensive specialist.
    pub players_per_team: usize,
    pub matches: usize,
    pub points_per_match: usize,
    pub effects: EffectSds,
    /// Added to the defensive specialist's reception effect, creating a known
    /// substitution-value gap.
    pub ds_gap: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            conferences: 2,
            teams_per_conference: 4,
            players_per_team: 8,
            matches: 40,
            points_per_match: 70,
            effects: EffectSds::default(),
            ds_gap: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |reason: &str| SynthError::InvalidConfig {
            reason: reason.to_string(),
        };
        if self.conferences < 1 {
            return Err(bad("at least one conference is required"));
        }
        if self.teams_per_conference < 2 && self.conferences < 2 {
            return Err(bad("at least two teams are required to schedule matches"));
        }
        if self.players_per_team < 8 {
            return Err(bad(
                "players_per_team must be >= 8 (six starters, libero, defensive specialist)",
            ));
        }
        if self.matches < 1 || self.points_per_match < 1 {
            return Err(bad("matches and points_per_match must be positive"));
        }
        for sd in self.effects.all() {
            if !sd.is_finite() || sd < 0.0 {
                return Err(bad("effect standard deviations must be finite and >= 0"));
            }
        }
        if !self.ds_gap.is_finite() {
            return Err(bad("ds_gap must be finite"));
        }
        Ok(())
    }

    pub fn total_teams(&self) -> usize {
        self.conferences * self.teams_per_conference
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TeamUnit {
    pub id: TeamId,
    pub conference: ConferenceId,
    /// Roster in role order; see the `ROLE_*` constants.
    pub players: Vec<PlayerId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlayerEffects {
    pub server: f64,
    pub receiver: f64,
    pub attacker: f64,
    pub setter: f64,
    pub blocker: f64,
    pub digger: f64,
}

/// The drawn parameters behind a season: everything a recovery test needs to
/// score fitted estimates against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub players: BTreeMap<PlayerId, PlayerEffects>,
    pub teams: BTreeMap<TeamId, f64>,
    pub conferences: BTreeMap<ConferenceId, f64>,
}

impl GroundTruth {
    /// Combined side effect: conference + team quality.
    pub fn side(&self, conf: &ConferenceId, team: &TeamId) -> f64 {
        self.conferences.get(conf).copied().unwrap_or(0.0)
            + self.teams.get(team).copied().unwrap_or(0.0)
    }

    pub fn player(&self, p: &PlayerId) -> PlayerEffects {
        self.players.get(p).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone)]
pub struct League {
    pub teams: Vec<TeamUnit>,
    pub truth: GroundTruth,
}

/// Deterministically draw the league for a config: ids are positional
/// (`C0T1`, `C0T1-p3`) and effects are independent normals scaled by the
/// configured standard deviations.
pub fn build_league(config: &SyntheticConfig, rng: &mut ChaCha8Rng) -> League {
    let sds = &config.effects;
    let mut teams = Vec::with_capacity(config.total_teams());
    let mut truth = GroundTruth {
        players: BTreeMap::new(),
        teams: BTreeMap::new(),
        conferences: BTreeMap::new(),
    };
    let mut normal = |sd: f64| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        z * sd
    };
    for ci in 0..config.conferences {
        let conf = ConferenceId::new(format!("C{ci}"));
        truth
            .conferences
            .insert(conf.clone(), normal(sds.conference));
        for ti in 0..config.teams_per_conference {
            let team = TeamId::new(format!("C{ci}T{ti}"));
            truth.teams.insert(team.clone(), normal(sds.team));
            let mut players = Vec::with_capacity(config.players_per_team);
            for pi in 0..config.players_per_team {
                let player = PlayerId::new(format!("C{ci}T{ti}-p{pi}"));
                let mut e = PlayerEffects {
                    server: normal(sds.server),
                    receiver: normal(sds.receiver),
                    attacker: normal(sds.attacker),
                    setter: normal(sds.setter),
                    blocker: normal(sds.blocker),
                    digger: normal(sds.digger),
                };
                if pi == ROLE_DS {
                    e.receiver += config.ds_gap;
                }
                truth.players.insert(player.clone(), e);
                players.push(player);
            }
            teams.push(TeamUnit {
                id: team,
                conference: conf.clone(),
                players,
            });
        }
    }
    League { teams, truth }
}

/// Round-robin pairings cycled until `matches` fixtures exist.
pub fn schedule(config: &SyntheticConfig) -> Vec<(usize, usize)> {
    let n = config.total_teams();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    (0..config.matches)
        .map(|m| pairs[m % pairs.len()])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn config_validation() {
        assert!(SyntheticConfig::default().validate().is_ok());
        let c = SyntheticConfig {
            players_per_team: 7,
            ..SyntheticConfig::default()
        };
        assert!(matches!(
            c.validate(),
            Err(SynthError::InvalidConfig { .. })
        ));
        let mut c = SyntheticConfig::default();
        c.effects.server = -0.1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn league_is_seed_deterministic() {
        let config = SyntheticConfig::default();
        let a = build_league(&config, &mut ChaCha8Rng::seed_from_u64(7));
        let b = build_league(&config, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a.truth.players, b.truth.players);
        assert_eq!(a.teams.len(), 8);
        assert_eq!(a.teams[0].players.len(), 8);
    }

    #[test]
    fn ds_gap_lands_on_the_ds_receiver_effect() {
        let config = SyntheticConfig {
            effects: EffectSds::zero(),
            ds_gap: 0.3,
            ..SyntheticConfig::default()
        };
        let league = build_league(&config, &mut ChaCha8Rng::seed_from_u64(1));
        for team in &league.teams {
            let ds = league.truth.player(&team.players[ROLE_DS]);
            let oh = league.truth.player(&team.players[ROLE_OH1]);
            assert_eq!(ds.receiver, 0.3);
            assert_eq!(oh.receiver, 0.0);
        }
    }

    #[test]
    fn schedule_cycles_all_pairs() {
        let config = SyntheticConfig {
            matches: 56,
            ..SyntheticConfig::default()
        };
        let fixtures = schedule(&config);
        assert_eq!(fixtures.len(), 56);
        // 8 teams -> 28 distinct pairs, cycled twice.
        assert_eq!(fixtures[0], fixtures[28]);
        assert_ne!(fixtures[0], fixtures[1]);
    }
}
