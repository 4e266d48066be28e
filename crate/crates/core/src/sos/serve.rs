//! Serve/receive regression dataset. Each in-play serve contributes one
//! observation whose response is the win-probability swing of the reception,
//! signed so that larger values mean a better serve.

use super::{factors, player_level, team_level, SosError};
use crate::markov::{encode_state_sequence, PwpTable, StateKey};
use crate::mixed::{fit, FactorSpec, FitOptions, MixedError, MixedFit, Observation};
use crate::types::{ConferenceId, ContactRef, PlayerId, PointLog, SkillType, TeamId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One in-play serve with its reception outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServeObservation {
    pub contact: ContactRef,
    pub server: PlayerId,
    pub serving_team: TeamId,
    pub serving_conf: ConferenceId,
    pub receiver: PlayerId,
    pub receiving_team: TeamId,
    pub receiving_conf: ConferenceId,
    pub pre_state: StateKey,
    pub post_state: StateKey,
    /// -(v(post) - v(pre)): positive when the serve hurt the receiving team.
    pub y: f64,
}

/// Build the serve dataset. Service errors are excluded (the server's error
/// cost is captured elsewhere); points without a charted reception are
/// skipped.
pub fn build_serve_dataset(
    points: &[PointLog],
    pwp: &PwpTable,
) -> Result<Vec<ServeObservation>, SosError> {
    let mut out = Vec::new();
    for point in points {
        let Some(serve) = point.contacts.first() else {
            continue;
        };
        if serve.skill != SkillType::Serve || serve.eval.is_terminal_error(SkillType::Serve) {
            continue;
        }
        let Some(reception) = point.contacts.get(1) else {
            continue;
        };
        if reception.skill != SkillType::Reception {
            continue;
        }
        let Ok(states) = encode_state_sequence(point) else {
            continue;
        };
        let pre_state = states[0].clone();
        let post_state = states[1].clone();
        let v_pre = pwp.v(&pre_state).ok_or_else(|| SosError::MissingState {
            state: pre_state.to_string(),
        })?;
        let v_post = pwp.v(&post_state).ok_or_else(|| SosError::MissingState {
            state: post_state.to_string(),
        })?;
        out.push(ServeObservation {
            contact: ContactRef::new(point, 0),
            server: serve.player.clone(),
            serving_team: serve.team.clone(),
            serving_conf: serve.conference.clone(),
            receiver: reception.player.clone(),
            receiving_team: reception.team.clone(),
            receiving_conf: reception.conference.clone(),
            pre_state,
            post_state,
            y: -(v_post - v_pre),
        });
    }
    Ok(out)
}

/// Factor-level assignment of one serve observation, with globally unique
/// nested labels.
pub fn serve_levels(obs: &ServeObservation) -> BTreeMap<String, String> {
    BTreeMap::from([
        (factors::SRV_CONF.to_string(), obs.serving_conf.to_string()),
        (
            factors::SRV_TEAM.to_string(),
            team_level(&obs.serving_conf, &obs.serving_team),
        ),
        (
            factors::SERVER.to_string(),
            player_level(&obs.serving_team, &obs.server),
        ),
        (
            factors::RCV_CONF.to_string(),
            obs.receiving_conf.to_string(),
        ),
        (
            factors::RCV_TEAM.to_string(),
            team_level(&obs.receiving_conf, &obs.receiving_team),
        ),
        (
            factors::RECEIVER.to_string(),
            player_level(&obs.receiving_team, &obs.receiver),
        ),
    ])
}

/// Serving-side (factor, level) pairs: conference, team, server.
pub fn serving_terms(obs: &ServeObservation) -> Vec<(String, String)> {
    vec![
        (factors::SRV_CONF.to_string(), obs.serving_conf.to_string()),
        (
            factors::SRV_TEAM.to_string(),
            team_level(&obs.serving_conf, &obs.serving_team),
        ),
        (
            factors::SERVER.to_string(),
            player_level(&obs.serving_team, &obs.server),
        ),
    ]
}

/// Receiving-side (factor, level) pairs: conference, team, receiver.
pub fn receiving_terms(obs: &ServeObservation) -> Vec<(String, String)> {
    vec![
        (
            factors::RCV_CONF.to_string(),
            obs.receiving_conf.to_string(),
        ),
        (
            factors::RCV_TEAM.to_string(),
            team_level(&obs.receiving_conf, &obs.receiving_team),
        ),
        (
            factors::RECEIVER.to_string(),
            player_level(&obs.receiving_team, &obs.receiver),
        ),
    ]
}

pub fn serve_factors() -> Vec<FactorSpec> {
    vec![
        FactorSpec::new(factors::SRV_CONF),
        FactorSpec::nested(factors::SRV_TEAM, factors::SRV_CONF),
        FactorSpec::nested(factors::SERVER, factors::SRV_TEAM),
        FactorSpec::new(factors::RCV_CONF),
        FactorSpec::nested(factors::RCV_TEAM, factors::RCV_CONF),
        FactorSpec::nested(factors::RECEIVER, factors::RCV_TEAM),
    ]
}

/// Fit the six-factor crossed serve model.
pub fn fit_serve_model(
    observations: &[ServeObservation],
    options: &FitOptions,
) -> Result<MixedFit, MixedError> {
    let data: Vec<Observation> = observations
        .iter()
        .map(|o| Observation::new(o.y, serve_levels(o)))
        .collect();
    fit(&serve_factors(), &data, options)
}
