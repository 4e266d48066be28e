//! Season simulation: play every scheduled match rally by rally, emitting
//! charted contacts that round-trip through the ingest pipeline. Matches are
//! independent (each owns an rng derived from the season seed), so generation
//! parallelizes without changing the output.

use super::league::{
    build_league, schedule, GroundTruth, SyntheticConfig, TeamUnit, COURT_ORDER, ROLE_DS,
    ROLE_LIBERO, ROLE_OH2, ROLE_OPP, ROLE_SETTER,
};
use super::tables::*;
use super::SynthError;
use crate::error::Result;
use crate::ingest::resolve_defensive_positions;
use crate::types::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MatchResult {
    pub match_id: MatchId,
    pub home: TeamId,
    pub away: TeamId,
    pub home_points: u32,
    pub away_points: u32,
}

#[derive(Debug, Clone)]
pub struct SyntheticSeason {
    pub points: Vec<PointLog>,
    pub match_results: Vec<MatchResult>,
    pub teams: Vec<TeamUnit>,
    pub truth: GroundTruth,
    pub config: SyntheticConfig,
}

impl SyntheticSeason {
    pub fn contacts(&self) -> Vec<ContactRecord> {
        self.points
            .iter()
            .flat_map(|p| p.contacts.clone())
            .collect()
    }

    /// Winner per point, as recorded in the charting export.
    pub fn recorded_winners(&self) -> BTreeMap<(MatchId, u32, u32), TeamId> {
        self.points
            .iter()
            .map(|p| {
                (
                    (p.match_id.clone(), p.set_index, p.point_index),
                    p.winner.clone(),
                )
            })
            .collect()
    }

    /// Write the contact log (canonical columns plus a `winner` column, which
    /// irregular endings need) and the two-rows-per-point lineup file.
    pub fn write_files<W: Write, V: Write>(&self, contacts: &mut W, lineups: &mut V) -> Result<()> {
        let mut cw = csv::Writer::from_writer(contacts);
        cw.write_record([
            "match_id",
            "set",
            "point",
            "possession",
            "player",
            "team",
            "conference",
            "skill",
            "eval",
            "attack_code",
            "start_x",
            "start_y",
            "end_zone",
            "winner",
        ])?;
        for p in &self.points {
            for c in &p.contacts {
                cw.write_record([
                    c.match_id.as_str(),
                    &c.set_index.to_string(),
                    &c.point_index.to_string(),
                    &c.possession_index.to_string(),
                    c.player.as_str(),
                    c.team.as_str(),
                    c.conference.as_str(),
                    c.skill.name(),
                    &c.eval.symbol().to_string(),
                    c.attack_code.as_deref().unwrap_or(""),
                    "",
                    "",
                    &c.end_zone.map(|z| z.to_string()).unwrap_or_default(),
                    p.winner.as_str(),
                ])?;
            }
        }
        cw.flush()
            .map_err(|e| crate::error::Error::io("<contacts>".to_string(), e))?;

        let mut lw = csv::Writer::from_writer(lineups);
        lw.write_record([
            "match_id",
            "set",
            "point",
            "team",
            "slot1",
            "slot2",
            "slot3",
            "slot4",
            "slot5",
            "slot6",
            "setter_slot",
        ])?;
        for p in &self.points {
            for side in [&p.lineup.home, &p.lineup.away] {
                let mut rec = vec![
                    p.match_id.as_str().to_string(),
                    p.set_index.to_string(),
                    p.point_index.to_string(),
                    side.team.as_str().to_string(),
                ];
                rec.extend(side.slots.iter().map(|s| s.as_str().to_string()));
                rec.push(side.setter_slot.to_string());
                lw.write_record(&rec)?;
            }
        }
        lw.flush()
            .map_err(|e| crate::error::Error::io("<lineups>".to_string(), e))?;
        Ok(())
    }
}

/// SplitMix64 finalizer, used to derive independent per-match seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_season(
    config: &SyntheticConfig,
) -> std::result::Result<SyntheticSeason, SynthError> {
    config.validate()?;
    let mut league_rng = ChaCha8Rng::seed_from_u64(mix(config.seed));
    let league = build_league(config, &mut league_rng);
    let fixtures = schedule(config);

    let per_match: Vec<(Vec<PointLog>, MatchResult)> = fixtures
        .par_iter()
        .enumerate()
        .map(|(m, &(hi, ai))| {
            let seed = mix(config.seed ^ mix(m as u64 + 1));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            play_match(
                config,
                &league.truth,
                &league.teams[hi],
                &league.teams[ai],
                MatchId::new(format!("m{:04}", m + 1)),
                &mut rng,
            )
        })
        .collect();

    let mut points = Vec::new();
    let mut match_results = Vec::new();
    for (pts, result) in per_match {
        points.extend(pts);
        match_results.push(result);
    }
    Ok(SyntheticSeason {
        points,
        match_results,
        teams: league.teams,
        truth: league.truth,
        config: config.clone(),
    })
}

/// Per-point view of one team: lineup with any DS substitution applied,
/// defensive alignment, and the roster behind them.
struct SideCtx<'a> {
    unit: &'a TeamUnit,
    lineup: TeamLineup,
    alignment: BTreeMap<Position, PlayerId>,
}

impl<'a> SideCtx<'a> {
    fn new(unit: &'a TeamUnit, rotation: usize) -> SideCtx<'a> {
        let mut slots: Vec<PlayerId> = Vec::with_capacity(6);
        let mut setter_slot = 1u8;
        for slot in 1u8..=6 {
            let pos = (slot as usize - 1 + rotation) % 6;
            let mut role = COURT_ORDER[pos];
            if role == ROLE_SETTER {
                setter_slot = slot;
            }
            // The defensive specialist genuinely substitutes for the second
            // outside hitter whenever that hitter rotates to the back row.
            if role == ROLE_OH2 && !matches!(slot, 2..=4) {
                role = ROLE_DS;
            }
            slots.push(unit.players[role].clone());
        }
        let lineup = TeamLineup {
            team: unit.id.clone(),
            slots: slots.try_into().unwrap(),
            setter_slot,
        };
        let alignment =
            resolve_defensive_positions(&lineup, Some(&unit.players[ROLE_LIBERO])).unwrap();
        SideCtx {
            unit,
            lineup,
            alignment,
        }
    }

    fn libero(&self) -> &PlayerId {
        &self.unit.players[ROLE_LIBERO]
    }

    /// Player running the offense this rotation: the setter while front row,
    /// the opposite (who stands three slots away, so is then front row) while
    /// the setter is back row. Distinct set-duty players per team keep the
    /// setter identity distinguishable from the team itself.
    fn acting_setter(&self) -> &PlayerId {
        if matches!(self.lineup.setter_slot, 2..=4) {
            &self.unit.players[ROLE_SETTER]
        } else {
            &self.unit.players[ROLE_OPP]
        }
    }

    fn server(&self) -> &PlayerId {
        &self.lineup.slots[0]
    }

    /// Primary passers: the libero plus the back-row outside hitter (or the
    /// specialist standing in for one).
    fn receivers(&self) -> Vec<&PlayerId> {
        let mut out = vec![self.libero()];
        for slot in [1usize, 5, 6] {
            let p = &self.lineup.slots[slot - 1];
            if p == &self.unit.players[ROLE_OH2]
                || p == &self.unit.players[super::league::ROLE_OH1]
                || p == &self.unit.players[ROLE_DS]
            {
                out.push(p);
            }
        }
        out
    }

    /// Front-row hitters: slots 2-4 minus whoever is running the offense.
    fn attackers(&self) -> Vec<&PlayerId> {
        let setter = self.acting_setter();
        (2u8..=4)
            .map(|s| &self.lineup.slots[s as usize - 1])
            .filter(|p| *p != setter)
            .collect()
    }
}

struct PointSim<'a> {
    rng: &'a mut ChaCha8Rng,
    truth: &'a GroundTruth,
    match_id: MatchId,
    point_index: u32,
    contacts: Vec<ContactRecord>,
    possession: u32,
    last_team: Option<TeamId>,
}

impl PointSim<'_> {
    fn push(
        &mut self,
        side: &SideCtx<'_>,
        player: PlayerId,
        skill: SkillType,
        eval: EvalCode,
        attack_code: Option<String>,
        end_zone: Option<CourtZone>,
    ) {
        if self.last_team.as_ref() != Some(&side.unit.id) {
            self.possession += 1;
            self.last_team = Some(side.unit.id.clone());
        }
        self.contacts.push(ContactRecord {
            match_id: self.match_id.clone(),
            set_index: 1,
            point_index: self.point_index,
            possession_index: self.possession,
            player,
            team: side.unit.id.clone(),
            conference: side.unit.conference.clone(),
            skill,
            eval,
            attack_code,
            start_xy: None,
            end_zone,
        });
    }

    fn bern(&mut self, p: f64) -> bool {
        self.rng.gen::<f64>() < p
    }

    fn pick<'b, T>(&mut self, items: &'b [(T, f64)]) -> &'b T {
        let mut u = self.rng.gen::<f64>();
        for (item, p) in items {
            if u < *p {
                return item;
            }
            u -= p;
        }
        &items.last().unwrap().0
    }

    fn side_effect(&self, side: &SideCtx<'_>) -> f64 {
        self.truth.side(&side.unit.conference, &side.unit.id)
    }
}

/// Outcome of one rally.
struct Rally {
    winner: TeamId,
    irregular: bool,
}

fn play_rally(sim: &mut PointSim<'_>, serving: &SideCtx<'_>, receiving: &SideCtx<'_>) -> Rally {
    let win = |side: &SideCtx<'_>, irregular: bool| Rally {
        winner: side.unit.id.clone(),
        irregular,
    };

    // Serve.
    let server = sim.server_of(serving);
    if sim.bern(P_SERVE_ERROR) {
        sim.push(
            serving,
            server,
            SkillType::Serve,
            EvalCode::Error,
            None,
            None,
        );
        return win(receiving, false);
    }
    sim.push(
        serving,
        server.clone(),
        SkillType::Serve,
        EvalCode::Negative,
        None,
        None,
    );

    // Reception.
    let receiver = {
        let cands = receiving.receivers();
        cands[sim.rng.gen_range(0..cands.len())].clone()
    };
    let tilt = sim.side_effect(serving) + sim.truth.player(&server).server
        - sim.side_effect(receiving)
        - sim.truth.player(&receiver).receiver;
    let eval = *sim.pick(&reception_dist(tilt));
    sim.push(receiving, receiver, SkillType::Reception, eval, None, None);
    if eval == EvalCode::Error {
        return win(serving, false);
    }

    // Alternating attack possessions until the rally resolves.
    let (mut off, mut def) = (receiving, serving);
    loop {
        let setter = off.acting_setter().clone();
        let set_eval = *sim.pick(&SET_EVALS);
        sim.push(off, setter.clone(), SkillType::Set, set_eval, None, None);

        let attacker = {
            let cands = off.attackers();
            cands[sim.rng.gen_range(0..cands.len())].clone()
        };
        let code = (*sim.pick(&ATTACK_CODES)).to_string();
        let zone = *sim.pick(end_zone_dist(&code));
        let zone = CourtZone::new(zone).unwrap();
        let o = sim.side_effect(off)
            + sim.truth.player(&attacker).attacker
            + sim.truth.player(&setter).setter;
        // Responsibility is positional: the likely blocker and digger are
        // chosen before the outcome so their skill tilts it.
        let blocker = def.alignment[sim.pick(blocker_position_dist(&code))].clone();
        let digger = def.alignment[sim.pick(digger_position_dist(zone.get()))].clone();
        let b = sim.side_effect(def) + sim.truth.player(&blocker).blocker;
        let d = sim.side_effect(def) + sim.truth.player(&digger).digger;

        let forced_kill = sim.contacts.len() > MAX_RALLY_CONTACTS;
        let attack = |sim: &mut PointSim<'_>, off: &SideCtx<'_>, eval: EvalCode| {
            sim.push(
                off,
                attacker.clone(),
                SkillType::Attack,
                eval,
                Some(code.clone()),
                Some(zone),
            );
        };

        if !forced_kill && sim.bern(p_attack_error(o)) {
            attack(sim, off, EvalCode::Error);
            return win(def, false);
        }
        if forced_kill || sim.bern(p_clean(o, b)) {
            // No block touch.
            if forced_kill || sim.bern(p_clean_kill(o, d)) {
                attack(sim, off, EvalCode::Perfect);
                return win(off, false);
            }
            attack(sim, off, EvalCode::Negative);
            let dig_eval = *sim.pick(&dig_dist(d));
            sim.push(def, digger, SkillType::Dig, dig_eval, None, None);
            std::mem::swap(&mut off, &mut def);
            continue;
        }
        // Block touch.
        attack(sim, off, EvalCode::Negative);
        if sim.bern(p_block_error(b)) {
            sim.push(def, blocker, SkillType::Block, EvalCode::Error, None, None);
            return win(off, false);
        }
        if sim.bern(p_through(o, b)) {
            sim.push(
                def,
                blocker,
                SkillType::Block,
                EvalCode::Positive,
                None,
                None,
            );
            if sim.bern(p_through_kill(o, d)) {
                // Deflection lands: last touch is the kept block, so the
                // ending carries no kill code and the winner is contextual.
                return win(off, true);
            }
            let dig_eval = *sim.pick(&dig_dist(d));
            sim.push(def, digger, SkillType::Dig, dig_eval, None, None);
            std::mem::swap(&mut off, &mut def);
            continue;
        }
        // Deflected back into the attacking court.
        if sim.bern(P_RETURN_DUG) {
            sim.push(
                def,
                blocker,
                SkillType::Block,
                EvalCode::Positive,
                None,
                None,
            );
            let cover = off.alignment[sim.pick(&RETURN_DIG_POSITIONS)].clone();
            let cd = sim.side_effect(off) + sim.truth.player(&cover).digger;
            let dig_eval = *sim.pick(&dig_dist(cd));
            sim.push(off, cover, SkillType::Dig, dig_eval, None, None);
            // Still the same side's ball.
            continue;
        }
        sim.push(
            def,
            blocker,
            SkillType::Block,
            EvalCode::Perfect,
            None,
            None,
        );
        return win(def, false);
    }
}

impl PointSim<'_> {
    fn server_of(&self, side: &SideCtx<'_>) -> PlayerId {
        side.server().clone()
    }
}

fn play_match(
    config: &SyntheticConfig,
    truth: &GroundTruth,
    home: &TeamUnit,
    away: &TeamUnit,
    match_id: MatchId,
    rng: &mut ChaCha8Rng,
) -> (Vec<PointLog>, MatchResult) {
    let mut points = Vec::with_capacity(config.points_per_match);
    let mut rotations = [0usize, 0];
    let mut server = 0usize; // 0 = home
    let (mut home_points, mut away_points) = (0u32, 0u32);

    for point_index in 1..=config.points_per_match as u32 {
        let home_ctx = SideCtx::new(home, rotations[0]);
        let away_ctx = SideCtx::new(away, rotations[1]);
        let (serving, receiving) = if server == 0 {
            (&home_ctx, &away_ctx)
        } else {
            (&away_ctx, &home_ctx)
        };

        let mut sim = PointSim {
            rng,
            truth,
            match_id: match_id.clone(),
            point_index,
            contacts: Vec::new(),
            possession: 0,
            last_team: None,
        };
        let rally = play_rally(&mut sim, serving, receiving);
        let contacts = sim.contacts;

        let winner_is_home = rally.winner == home.id;
        if winner_is_home {
            home_points += 1;
        } else {
            away_points += 1;
        }
        let mut liberos = BTreeMap::new();
        liberos.insert(home.id.clone(), home.players[ROLE_LIBERO].clone());
        liberos.insert(away.id.clone(), away.players[ROLE_LIBERO].clone());
        points.push(PointLog {
            match_id: match_id.clone(),
            set_index: 1,
            point_index,
            serving_team: serving.unit.id.clone(),
            receiving_team: receiving.unit.id.clone(),
            winner: rally.winner.clone(),
            contacts,
            lineup: LineupState {
                match_id: match_id.clone(),
                set_index: 1,
                point_index,
                home: home_ctx.lineup.clone(),
                away: away_ctx.lineup.clone(),
            },
            liberos,
            irregular_ending: rally.irregular,
        });

        // Winner serves the next point, rotating first on a sideout.
        let winner_idx = if winner_is_home { 0 } else { 1 };
        if winner_idx != server {
            rotations[winner_idx] = (rotations[winner_idx] + 1) % 6;
            server = winner_idx;
        }
    }

    let result = MatchResult {
        match_id,
        home: home.id.clone(),
        away: away.id.clone(),
        home_points,
        away_points,
    };
    (points, result)
}
