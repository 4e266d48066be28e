//! The defining Points Gained equations: serve/receive credit and the
//! component-wise attack credit with variance-ratio splits.

use super::{AttributionError, Component, PointsGainedEntry, Role};
use crate::mixed::{variance_ratio, MixedFit};
use crate::sos::{
    blup_sum, defensive_sos_terms, factors, model_has_digger, offensive_sos_terms, receiving_terms,
    serving_terms, AttackModels, AttackObservation, ServeObservation,
};
use crate::types::SkillType;

fn component(fit: &MixedFit, factor: &str) -> f64 {
    fit.components.get(factor).copied().unwrap_or(0.0)
}

fn own_team_terms(terms: &[(String, String)]) -> Vec<(String, String)> {
    // Conference and team labels only; the player's own effect is the thing
    // being measured, not an adjustment.
    terms
        .iter()
        .filter(|(f, _)| {
            matches!(
                f.as_str(),
                factors::SRV_CONF
                    | factors::SRV_TEAM
                    | factors::RCV_CONF
                    | factors::RCV_TEAM
                    | factors::OFF_CONF
                    | factors::OFF_TEAM
                    | factors::DEF_CONF
                    | factors::DEF_TEAM
            )
        })
        .cloned()
        .collect()
}

/// Serve/receive credit: the server gains what the reception swing cost the
/// receiving side, net of who was receiving; the receiver gains the
/// opposite, net of who was serving.
pub fn pg_serve_receive(obs: &ServeObservation, fit: &MixedFit) -> [PointsGainedEntry; 2] {
    let srv = serving_terms(obs);
    let rcv = receiving_terms(obs);
    let server = PointsGainedEntry::build(
        obs.contact.clone(),
        obs.server.clone(),
        obs.serving_team.clone(),
        obs.serving_conf.clone(),
        SkillType::Serve,
        Role::Server,
        Component::Sv,
        1.0,
        1.0,
        obs.y,
        fit.intercept + blup_sum(fit, &rcv),
        blup_sum(fit, &own_team_terms(&srv)),
        None,
    );
    let receiver = PointsGainedEntry::build(
        obs.contact.clone(),
        obs.receiver.clone(),
        obs.receiving_team.clone(),
        obs.receiving_conf.clone(),
        SkillType::Reception,
        Role::Receiver,
        Component::Sv,
        1.0,
        -1.0,
        obs.y,
        fit.intercept + blup_sum(fit, &srv),
        blup_sum(fit, &own_team_terms(&rcv)),
        None,
    );
    [server, receiver]
}

/// Attack credit: for each component the attack reached, the offensive side
/// splits the response between attacker and setter by the fitted variance
/// ratio, and the defensive side mirrors it with the opposite sign — the
/// blocker alone on the block branch, blocker and digger by their ratio on
/// the dig branches.
pub fn pg_attack(
    obs: &AttackObservation,
    models: &AttackModels,
) -> Result<Vec<PointsGainedEntry>, AttributionError> {
    let mut entries = Vec::new();
    for k in 1u8..=7 {
        let Some(y) = obs.responses[(k - 1) as usize] else {
            continue;
        };
        let fit = models
            .fit_for(k as usize)
            .ok_or(AttributionError::MissingRatio { component: k })?;
        let with_digger = model_has_digger(k as usize);
        let off_terms = offensive_sos_terms(obs);
        let def_terms = defensive_sos_terms(obs, with_digger);

        let (att_share, _) = variance_ratio(
            component(fit, factors::ATTACKER),
            component(fit, factors::SETTER),
        );
        let off_sos = fit.intercept + blup_sum(fit, &def_terms);
        let off_own = blup_sum(fit, &own_team_terms(&off_terms));
        for (role, skill, player, share) in [
            (Role::Attacker, SkillType::Attack, &obs.attacker, att_share),
            (Role::Setter, SkillType::Set, &obs.setter, 1.0 - att_share),
        ] {
            entries.push(PointsGainedEntry::build(
                obs.contact.clone(),
                player.clone(),
                obs.off_team.clone(),
                obs.off_conf.clone(),
                skill,
                role,
                Component::Attack(k),
                share,
                1.0,
                y,
                off_sos,
                off_own,
                None,
            ));
        }

        if k >= 2 {
            let def_sos = fit.intercept + blup_sum(fit, &off_terms);
            let def_own = blup_sum(fit, &own_team_terms(&def_terms));
            let blk_share = if with_digger {
                variance_ratio(
                    component(fit, factors::BLOCKER),
                    component(fit, factors::DIGGER),
                )
                .0
            } else {
                1.0
            };
            if let Some((blocker, provenance)) = &obs.blocker {
                entries.push(PointsGainedEntry::build(
                    obs.contact.clone(),
                    blocker.clone(),
                    obs.def_team.clone(),
                    obs.def_conf.clone(),
                    SkillType::Block,
                    Role::Blocker,
                    Component::Attack(k),
                    blk_share,
                    -1.0,
                    y,
                    def_sos,
                    def_own,
                    Some(*provenance),
                ));
            }
            if with_digger {
                if let Some((digger, provenance)) = &obs.digger {
                    entries.push(PointsGainedEntry::build(
                        obs.contact.clone(),
                        digger.clone(),
                        obs.def_team.clone(),
                        obs.def_conf.clone(),
                        SkillType::Dig,
                        Role::Digger,
                        Component::Attack(k),
                        1.0 - blk_share,
                        -1.0,
                        y,
                        def_sos,
                        def_own,
                        Some(*provenance),
                    ));
                }
            }
        }
    }
    Ok(entries)
}
