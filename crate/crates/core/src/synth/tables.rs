//! Structural probabilities of the generator. Player effects enter as
//! additive tilts on outcome logits, so the zero-effect kernel and every
//! conditional mean are computable in closed form. The constants are tuned
//! so a rally continues past an attack with probability ≈ 0.54, keeping the
//! non-terminal mass after ~100 transitions far below 1e-9.

use crate::types::{EvalCode, Position};

pub const P_SERVE_ERROR: f64 = 0.08;
pub const P_RETURN_DUG: f64 = 0.75;
/// Safety cap: force a kill once a rally grows absurd (unreachable under
/// the shipped constants).
pub const MAX_RALLY_CONTACTS: usize = 250;

pub const ATTACK_CODES: [(&str, f64); 3] = [("X5", 0.45), ("V5", 0.30), ("X6", 0.25)];

pub const SET_EVALS: [(EvalCode, f64); 3] = [
    (EvalCode::Perfect, 0.70),
    (EvalCode::Positive, 0.20),
    (EvalCode::Negative, 0.10),
];

/// Reception outcomes with base weights and quality scores; '=' is an ace.
pub const RECEPTION_EVALS: [(EvalCode, f64, f64); 6] = [
    (EvalCode::Perfect, 0.30, 2.0),
    (EvalCode::Positive, 0.25, 1.0),
    (EvalCode::Ok, 0.15, 0.0),
    (EvalCode::Negative, 0.15, -1.0),
    (EvalCode::Poor, 0.07, -2.0),
    (EvalCode::Error, 0.08, -3.0),
];

/// In-play dig outcomes with base weights and quality scores.
pub const DIG_EVALS: [(EvalCode, f64, f64); 5] = [
    (EvalCode::Perfect, 0.30, 2.0),
    (EvalCode::Positive, 0.30, 1.0),
    (EvalCode::Ok, 0.20, 0.0),
    (EvalCode::Negative, 0.15, -1.0),
    (EvalCode::Poor, 0.05, -2.0),
];

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// P(attack error); decreases with offensive skill.
pub fn p_attack_error(o: f64) -> f64 {
    sigmoid(logit(0.07) - o)
}

/// P(no block touch | in play); good hitters avoid the block, good blockers
/// get hands on more balls.
pub fn p_clean(o: f64, b: f64) -> f64 {
    sigmoid(logit(0.55) + o - b)
}

/// P(blocker error | blocked).
pub fn p_block_error(b: f64) -> f64 {
    sigmoid(logit(0.10) - b)
}

/// P(ball continues into the defense | block kept the ball up).
pub fn p_through(o: f64, b: f64) -> f64 {
    sigmoid(logit(0.50) + o - b)
}

/// P(kill | clean attack).
pub fn p_clean_kill(o: f64, d: f64) -> f64 {
    sigmoid(logit(0.50) + o - d)
}

/// P(kill | ball through the block).
pub fn p_through_kill(o: f64, d: f64) -> f64 {
    sigmoid(logit(0.45) + o - d)
}

/// Reception distribution under a serve-minus-receive tilt `s`: positive `s`
/// pushes mass toward the poor outcomes.
pub fn reception_dist(s: f64) -> Vec<(EvalCode, f64)> {
    let weights: Vec<(EvalCode, f64)> = RECEPTION_EVALS
        .iter()
        .map(|&(e, base, q)| (e, base * (-q * s).exp()))
        .collect();
    normalize(weights)
}

/// Dig-evaluation distribution under a digger-skill tilt `d`.
pub fn dig_dist(d: f64) -> Vec<(EvalCode, f64)> {
    let weights: Vec<(EvalCode, f64)> = DIG_EVALS
        .iter()
        .map(|&(e, base, q)| (e, base * (q * d).exp()))
        .collect();
    normalize(weights)
}

fn normalize(mut weights: Vec<(EvalCode, f64)>) -> Vec<(EvalCode, f64)> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut weights {
        *w /= total;
    }
    weights
}

/// End-zone distribution per attack code.
pub fn end_zone_dist(code: &str) -> &'static [(u8, f64)] {
    match code {
        "X5" => &[(5, 0.50), (6, 0.30), (1, 0.20)],
        "V5" => &[(9, 0.50), (8, 0.30), (7, 0.20)],
        _ => &[(1, 0.40), (6, 0.35), (9, 0.25)],
    }
}

/// Front-row position likely to get hands on each attack code.
pub fn blocker_position_dist(code: &str) -> &'static [(Position, f64)] {
    match code {
        "X5" => &[
            (Position::FL, 0.60),
            (Position::FM, 0.30),
            (Position::FR, 0.10),
        ],
        "V5" => &[
            (Position::FM, 0.50),
            (Position::FL, 0.30),
            (Position::FR, 0.20),
        ],
        _ => &[
            (Position::FR, 0.50),
            (Position::FM, 0.35),
            (Position::FL, 0.15),
        ],
    }
}

/// Defensive position responsible for balls landing in each zone.
pub fn digger_position_dist(zone: u8) -> &'static [(Position, f64)] {
    match zone {
        1 => &[
            (Position::BL, 0.50),
            (Position::BM, 0.30),
            (Position::BR, 0.20),
        ],
        5 => &[
            (Position::BM, 0.50),
            (Position::BL, 0.25),
            (Position::BR, 0.25),
        ],
        6 => &[
            (Position::BR, 0.50),
            (Position::BM, 0.30),
            (Position::FR, 0.20),
        ],
        7 => &[
            (Position::BL, 0.55),
            (Position::BM, 0.25),
            (Position::FL, 0.20),
        ],
        8 => &[
            (Position::BM, 0.60),
            (Position::BL, 0.20),
            (Position::BR, 0.20),
        ],
        _ => &[
            (Position::BR, 0.55),
            (Position::BM, 0.25),
            (Position::BL, 0.20),
        ],
    }
}

/// Position on the attacking side that chases a block deflection.
pub const RETURN_DIG_POSITIONS: [(Position, f64); 3] = [
    (Position::BM, 0.50),
    (Position::BL, 0.30),
    (Position::BR, 0.20),
];

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_dist(pairs: &[(f64,)]) {
        let total: f64 = pairs.iter().map(|p| p.0).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_static_tables_are_distributions() {
        assert_dist(&ATTACK_CODES.map(|(_, p)| (p,)));
        assert_dist(&SET_EVALS.map(|(_, p)| (p,)));
        assert_dist(&RECEPTION_EVALS.map(|(_, p, _)| (p,)));
        assert_dist(&DIG_EVALS.map(|(_, p, _)| (p,)));
        for code in ["X5", "V5", "X6"] {
            let z: f64 = end_zone_dist(code).iter().map(|(_, p)| p).sum();
            assert!((z - 1.0).abs() < 1e-12);
            let b: f64 = blocker_position_dist(code).iter().map(|(_, p)| p).sum();
            assert!((b - 1.0).abs() < 1e-12);
        }
        for zone in 1..=9 {
            let d: f64 = digger_position_dist(zone).iter().map(|(_, p)| p).sum();
            assert!((d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tilts_move_probabilities_the_right_way() {
        assert!(p_attack_error(1.0) < p_attack_error(0.0));
        assert!(p_clean(1.0, 0.0) > p_clean(0.0, 0.0));
        assert!(p_clean(0.0, 1.0) < p_clean(0.0, 0.0));
        assert!(p_clean_kill(0.0, 1.0) < p_clean_kill(0.0, 0.0));
        // A strong server shifts reception mass toward the ace.
        let base = reception_dist(0.0);
        let tilted = reception_dist(1.0);
        assert!(tilted.last().unwrap().1 > base.last().unwrap().1);
        assert!(tilted[0].1 < base[0].1);
    }

    #[test]
    fn rally_continuation_stays_under_budget() {
        // At zero effects, P(rally continues past one attack) must stay
        // below 0.55 so that 100-step residual mass is far below 1e-9.
        let clean = p_clean(0.0, 0.0) * (1.0 - p_clean_kill(0.0, 0.0));
        let blocked = 1.0 - p_clean(0.0, 0.0);
        let kept = blocked * (1.0 - p_block_error(0.0));
        let through = kept * p_through(0.0, 0.0) * (1.0 - p_through_kill(0.0, 0.0));
        let returned = kept * (1.0 - p_through(0.0, 0.0)) * P_RETURN_DUG;
        let continue_p = (1.0 - p_attack_error(0.0)) * (clean + through + returned);
        assert!(continue_p < 0.55, "continuation {continue_p}");
    }
}
