//! Attack outcome labeling, split responses over the outcome tree, and the
//! seven attack models. Each attack is decomposed into sequential
//! indicators (error, blocked, block error, block-through) plus conditional
//! win-probability residuals at the leaves; every response is centered
//! against the empirical baseline of its pre-attack state.

use super::responsibility::{assign_blocker, assign_digger, ResponsibilityTable};
use super::{factors, player_level, team_level, Provenance, SosError};
use crate::markov::{
    baseline::AttackContext, encode_state_sequence, Baselines, Cell, OutcomeCategory, PwpTable,
    SplitFlags, StateKey,
};
use crate::mixed::{fit, FactorSpec, FitOptions, MixedError, MixedFit, Observation};
use crate::types::{ConferenceId, ContactRef, PlayerId, PointLog, SkillType, TeamId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One labeled attack before identities and responses are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAttack {
    /// Contact index of the attack within the point.
    pub index: usize,
    pub flags: SplitFlags,
    /// First non-block contact after the attack; `None` means the point
    /// ended before another playable touch.
    pub post_contact: Option<usize>,
    pub block_contact: Option<usize>,
    pub dig_contact: Option<usize>,
}

/// Label every attack in a point against the outcome tree. Returns the
/// labeled attacks and the number excluded as unlabelable (an in-play swing
/// with no further touch that the defense nevertheless won, or a touch
/// sequence outside the grammar).
pub fn label_point_attacks(point: &PointLog) -> (Vec<RawAttack>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for (i, c) in point.contacts.iter().enumerate() {
        if c.skill != SkillType::Attack {
            continue;
        }
        let def = if c.team == point.serving_team {
            &point.receiving_team
        } else {
            &point.serving_team
        };
        let post_contact = point.contacts[i + 1..]
            .iter()
            .position(|t| t.skill != SkillType::Block)
            .map(|off| i + 1 + off);

        if c.eval.is_terminal_error(SkillType::Attack) {
            out.push(RawAttack {
                index: i,
                flags: SplitFlags::attack_error(),
                post_contact: None,
                block_contact: None,
                dig_contact: None,
            });
            continue;
        }

        let block_contact = match point.contacts.get(i + 1) {
            Some(b) if b.skill == SkillType::Block && b.team == *def => Some(i + 1),
            _ => None,
        };

        let raw = match block_contact {
            None => match post_contact {
                // Ball played straight to the defense: clean attack.
                Some(j) if point.contacts[j].team == *def => RawAttack {
                    index: i,
                    flags: SplitFlags::clean(),
                    post_contact,
                    block_contact: None,
                    dig_contact: (point.contacts[j].skill == SkillType::Dig).then_some(j),
                },
                // Attacking team touches again without a charted block, or
                // the defense won without touching the ball: unlabelable.
                Some(_) => {
                    skipped += 1;
                    continue;
                }
                None if point.winner == c.team => RawAttack {
                    index: i,
                    flags: SplitFlags::clean(),
                    post_contact: None,
                    block_contact: None,
                    dig_contact: None,
                },
                None => {
                    skipped += 1;
                    continue;
                }
            },
            Some(b) => {
                let block = &point.contacts[b];
                if block.eval.is_terminal_error(SkillType::Block) {
                    RawAttack {
                        index: i,
                        flags: SplitFlags::block_error(),
                        post_contact: None,
                        block_contact,
                        dig_contact: None,
                    }
                } else {
                    // Side of the next touch decides return vs through; with
                    // no further touch the winner does.
                    let through = match post_contact {
                        Some(j) => point.contacts[j].team == *def,
                        None => point.winner == c.team,
                    };
                    let flags = if through {
                        SplitFlags::block_through()
                    } else {
                        SplitFlags::block_return()
                    };
                    let dig_contact = post_contact.filter(|&j| {
                        through
                            && point.contacts[j].skill == SkillType::Dig
                            && point.contacts[j].team == *def
                    });
                    RawAttack {
                        index: i,
                        flags,
                        post_contact,
                        block_contact,
                        dig_contact,
                    }
                }
            }
        };
        out.push(raw);
    }
    (out, skipped)
}

/// One fully-resolved attack: identities, tree flags, and the seven split
/// responses (absent when the attack never reached that split).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackObservation {
    pub contact: ContactRef,
    pub attacker: PlayerId,
    pub setter: PlayerId,
    pub off_team: TeamId,
    pub off_conf: ConferenceId,
    pub def_team: TeamId,
    pub def_conf: ConferenceId,
    pub blocker: Option<(PlayerId, Provenance)>,
    pub digger: Option<(PlayerId, Provenance)>,
    pub attack_code: String,
    pub end_zone: Option<u8>,
    pub pre_state: StateKey,
    pub post_state: StateKey,
    pub flags: SplitFlags,
    /// Win probability of the attacking side at the post state.
    pub w_post: f64,
    pub responses: [Option<f64>; 7],
    /// True when any baseline lookup for this attack used a back-off tier.
    pub baseline_backoff: bool,
}

/// The attack dataset with the artifacts needed to interpret it.
#[derive(Debug, Clone)]
pub struct AttackDataset {
    pub observations: Vec<AttackObservation>,
    pub baselines: Baselines,
    pub table: ResponsibilityTable,
    pub unlabelable: usize,
}

/// Setter on record for an attack: the preceding set in the same possession,
/// falling back to the designated setter of the lineup.
fn setter_for(point: &PointLog, attack_index: usize) -> Option<PlayerId> {
    let attack = &point.contacts[attack_index];
    for c in point.contacts[..attack_index].iter().rev() {
        if c.possession_index != attack.possession_index {
            break;
        }
        if c.skill == SkillType::Set && c.team == attack.team {
            return Some(c.player.clone());
        }
    }
    point
        .lineup
        .for_team(&attack.team)
        .map(|l| l.setter().clone())
}

fn split_responses(
    pre: &StateKey,
    flags: &SplitFlags,
    w_post: f64,
    baselines: &Baselines,
) -> Result<([Option<f64>; 7], bool), SosError> {
    use crate::markov::BackoffLevel;
    let mut backed_off = false;
    let mut mean = |cell: Cell| -> Result<f64, SosError> {
        let (m, level) = baselines.mean(pre, cell).map_err(|_| SosError::NoSupport {
            state: pre.to_string(),
            cell: format!("{cell:?}"),
        })?;
        if level != BackoffLevel::Exact {
            backed_off = true;
        }
        Ok(m)
    };

    let mut responses: [Option<f64>; 7] = [None; 7];
    let x1_cell = if flags.x1 { Cell::Error } else { Cell::NoError };
    responses[0] = Some(mean(x1_cell)? - mean(Cell::All)?);
    if let Some(x2) = flags.x2 {
        let cell = if x2 { Cell::Clean } else { Cell::Blocked };
        responses[1] = Some(mean(cell)? - mean(Cell::NoError)?);
        if x2 {
            responses[6] = Some(w_post - mean(Cell::Clean)?);
        }
    }
    if let Some(x3) = flags.x3 {
        let cell = if x3 {
            Cell::BlockError
        } else {
            Cell::BlockKept
        };
        responses[2] = Some(mean(cell)? - mean(Cell::Blocked)?);
    }
    if let Some(x4) = flags.x4 {
        let cell = if x4 { Cell::Through } else { Cell::Return };
        responses[3] = Some(mean(cell)? - mean(Cell::BlockKept)?);
        if x4 {
            responses[5] = Some(w_post - mean(Cell::Through)?);
        } else {
            responses[4] = Some(w_post - mean(Cell::Return)?);
        }
    }
    Ok((responses, backed_off))
}

/// Build the attack dataset: label the tree, fit baselines, build the
/// responsibility tables, then resolve identities and responses.
pub fn build_attack_dataset(
    points: &[PointLog],
    pwp: &PwpTable,
    table_support: u64,
    baseline_support: u64,
) -> Result<AttackDataset, SosError> {
    // Conference lookup so the defending side resolves even for teams with
    // no touch in a given point.
    let mut confs: BTreeMap<TeamId, ConferenceId> = BTreeMap::new();
    for p in points {
        for c in &p.contacts {
            confs
                .entry(c.team.clone())
                .or_insert_with(|| c.conference.clone());
        }
    }

    let table = super::responsibility::build_responsibility_tables(points, table_support)?;

    // Phase one: label and collect baseline contexts.
    struct Labeled {
        point: usize,
        raw: RawAttack,
        pre: StateKey,
        post: StateKey,
        w_post: f64,
    }
    let mut labeled: Vec<Labeled> = Vec::new();
    let mut contexts: Vec<AttackContext> = Vec::new();
    let mut unlabelable = 0usize;
    for (pi, point) in points.iter().enumerate() {
        let Ok(states) = encode_state_sequence(point) else {
            let n_attacks = point
                .contacts
                .iter()
                .filter(|c| c.skill == SkillType::Attack)
                .count();
            unlabelable += n_attacks;
            continue;
        };
        let (raws, skipped) = label_point_attacks(point);
        unlabelable += skipped;
        for raw in raws {
            let att_side = states[raw.index].side;
            let post = match raw.post_contact {
                Some(j) => states[j].clone(),
                None => states.last().expect("terminal state").clone(),
            };
            let w_post =
                pwp.win_prob_for(att_side, &post)
                    .ok_or_else(|| SosError::MissingState {
                        state: post.to_string(),
                    })?;
            contexts.push(AttackContext {
                pre: states[raw.index].clone(),
                flags: raw.flags,
                w_post,
            });
            labeled.push(Labeled {
                point: pi,
                pre: states[raw.index].clone(),
                raw,
                post,
                w_post,
            });
        }
    }
    let baselines = Baselines::fit(&contexts, baseline_support);

    // Phase two: identities and responses.
    let mut observations = Vec::with_capacity(labeled.len());
    for l in labeled {
        let point = &points[l.point];
        let attack = &point.contacts[l.raw.index];
        let def_team = if attack.team == point.serving_team {
            point.receiving_team.clone()
        } else {
            point.serving_team.clone()
        };
        let def_conf = confs
            .get(&def_team)
            .cloned()
            .unwrap_or_else(|| ConferenceId::new(""));
        let setter = setter_for(point, l.raw.index).ok_or_else(|| SosError::NoAlignment {
            team: attack.team.to_string(),
            match_id: point.match_id.to_string(),
            set_index: point.set_index,
            point_index: point.point_index,
            reason: "attacking team absent from lineup record".to_string(),
        })?;
        let code = attack.attack_code.clone().unwrap_or_default();
        let zone = attack.end_zone.map(|z| z.get());
        let category = l.raw.flags.category();

        // Blocker for every non-error attack; digger only where a dig could
        // occur (clean and block-through branches).
        let needs_blocker = !l.raw.flags.x1;
        let needs_digger = matches!(
            category,
            OutcomeCategory::CleanAttack | OutcomeCategory::BlockThrough
        );
        let (blocker, digger) = if needs_blocker || needs_digger {
            let alignment = super::responsibility::alignment_for(point, &def_team)?;
            let blocker = needs_blocker.then(|| {
                assign_blocker(
                    l.raw.block_contact.map(|j| &point.contacts[j].player),
                    &code,
                    &table,
                    &alignment,
                )
            });
            let digger = needs_digger.then(|| {
                assign_digger(
                    l.raw.dig_contact.map(|j| &point.contacts[j].player),
                    &code,
                    zone,
                    &table,
                    &alignment,
                )
            });
            (blocker, digger)
        } else {
            (None, None)
        };

        let (responses, baseline_backoff) =
            split_responses(&l.pre, &l.raw.flags, l.w_post, &baselines)?;
        observations.push(AttackObservation {
            contact: ContactRef::new(point, l.raw.index),
            attacker: attack.player.clone(),
            setter,
            off_team: attack.team.clone(),
            off_conf: attack.conference.clone(),
            def_team,
            def_conf,
            blocker,
            digger,
            attack_code: code,
            end_zone: zone,
            pre_state: l.pre,
            post_state: l.post,
            flags: l.raw.flags,
            w_post: l.w_post,
            responses,
            baseline_backoff,
        });
    }

    Ok(AttackDataset {
        observations,
        baselines,
        table,
        unlabelable,
    })
}

/// Offense-side (factor, level) pairs of an attack observation.
pub fn offensive_sos_terms(obs: &AttackObservation) -> Vec<(String, String)> {
    vec![
        (factors::OFF_CONF.to_string(), obs.off_conf.to_string()),
        (
            factors::OFF_TEAM.to_string(),
            team_level(&obs.off_conf, &obs.off_team),
        ),
        (
            factors::ATTACKER.to_string(),
            player_level(&obs.off_team, &obs.attacker),
        ),
        (
            factors::SETTER.to_string(),
            player_level(&obs.off_team, &obs.setter),
        ),
    ]
}

/// Defense-side (factor, level) pairs; the digger term exists only for the
/// dig-branch models.
pub fn defensive_sos_terms(obs: &AttackObservation, with_digger: bool) -> Vec<(String, String)> {
    let mut terms = vec![
        (factors::DEF_CONF.to_string(), obs.def_conf.to_string()),
        (
            factors::DEF_TEAM.to_string(),
            team_level(&obs.def_conf, &obs.def_team),
        ),
    ];
    if let Some((blocker, _)) = &obs.blocker {
        terms.push((
            factors::BLOCKER.to_string(),
            player_level(&obs.def_team, blocker),
        ));
    }
    if with_digger {
        if let Some((digger, _)) = &obs.digger {
            terms.push((
                factors::DIGGER.to_string(),
                player_level(&obs.def_team, digger),
            ));
        }
    }
    terms
}

/// Whether model `k` (1-based) includes defense factors / the digger.
pub fn model_has_defense(k: usize) -> bool {
    k >= 2
}

pub fn model_has_digger(k: usize) -> bool {
    matches!(k, 6 | 7)
}

/// Membership of an observation in model `k`'s subset.
pub fn in_model_subset(k: usize, flags: &SplitFlags) -> bool {
    match k {
        1 => true,
        2 => !flags.x1,
        3 => flags.x2 == Some(false),
        4 => flags.x3 == Some(false),
        5 => flags.x4 == Some(false),
        6 => flags.x4 == Some(true),
        7 => flags.x2 == Some(true),
        _ => false,
    }
}

pub fn attack_model_factors(k: usize) -> Vec<FactorSpec> {
    let mut specs = vec![
        FactorSpec::new(factors::OFF_CONF),
        FactorSpec::nested(factors::OFF_TEAM, factors::OFF_CONF),
        FactorSpec::nested(factors::ATTACKER, factors::OFF_TEAM),
        FactorSpec::nested(factors::SETTER, factors::OFF_TEAM),
    ];
    if model_has_defense(k) {
        specs.push(FactorSpec::new(factors::DEF_CONF));
        specs.push(FactorSpec::nested(factors::DEF_TEAM, factors::DEF_CONF));
        specs.push(FactorSpec::nested(factors::BLOCKER, factors::DEF_TEAM));
        if model_has_digger(k) {
            specs.push(FactorSpec::nested(factors::DIGGER, factors::DEF_TEAM));
        }
    }
    specs
}

/// The seven fitted attack models; a model with fewer than two rows in its
/// subset is absent.
#[derive(Debug, Clone)]
pub struct AttackModels {
    pub fits: Vec<Option<MixedFit>>,
    pub rows: Vec<usize>,
}

impl AttackModels {
    pub fn fit_for(&self, k: usize) -> Option<&MixedFit> {
        self.fits.get(k - 1).and_then(|f| f.as_ref())
    }
}

pub fn fit_attack_models(
    observations: &[AttackObservation],
    options: &FitOptions,
) -> Result<AttackModels, MixedError> {
    let mut fits = Vec::with_capacity(7);
    let mut rows = Vec::with_capacity(7);
    for k in 1..=7 {
        let data: Vec<Observation> = observations
            .iter()
            .filter(|o| in_model_subset(k, &o.flags))
            .filter_map(|o| {
                let y = o.responses[k - 1]?;
                let mut levels: BTreeMap<String, String> =
                    offensive_sos_terms(o).into_iter().collect();
                if model_has_defense(k) {
                    levels.extend(defensive_sos_terms(o, model_has_digger(k)));
                }
                Some(Observation::new(y, levels))
            })
            .collect();
        rows.push(data.len());
        if data.len() < 2 {
            fits.push(None);
            continue;
        }
        fits.push(Some(fit(&attack_model_factors(k), &data, options)?));
    }
    Ok(AttackModels { fits, rows })
}
