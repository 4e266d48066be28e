//! Pythagorean expectation at point granularity: translate a team's point
//! share into an expected match-win fraction.

use super::AttributionError;
use serde::{Deserialize, Serialize};

/// Exponent fitted to match outcomes.
pub const DEFAULT_ALPHA: f64 = 9.3;

/// PS^a / (PS^a + PA^a).
pub fn pythagorean_winpct(
    points_scored: f64,
    points_allowed: f64,
    alpha: f64,
) -> Result<f64, AttributionError> {
    if points_scored <= 0.0 && points_allowed <= 0.0 {
        return Err(AttributionError::DegenerateSeason);
    }
    // Work with the point share so huge totals cannot overflow the powers.
    let share = points_scored / (points_scored + points_allowed);
    let num = share.powf(alpha);
    let den = num + (1.0 - share).powf(alpha);
    Ok(num / den)
}

/// One team season: points scored/allowed and the realized match-win
/// fraction.
pub type SeasonRecord = (f64, f64, f64);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    /// Mean squared error at the optimum.
    pub objective: f64,
    pub n_seasons: usize,
}

fn sse(records: &[SeasonRecord], alpha: f64) -> f64 {
    records
        .iter()
        .map(|&(ps, pa, win)| {
            let pred = pythagorean_winpct(ps, pa, alpha).unwrap_or(0.5);
            (pred - win).powi(2)
        })
        .sum()
}

/// Least-squares exponent over team seasons, by golden-section search on
/// [0.5, 30]; the objective is smooth and unimodal there.
pub fn fit_alpha(records: &[SeasonRecord]) -> Result<AlphaFit, AttributionError> {
    if records.is_empty() {
        return Err(AttributionError::DegenerateSeason);
    }
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.5f64, 30.0f64);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (sse(records, x1), sse(records, x2));
    while hi - lo > 1e-6 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = sse(records, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = sse(records, x2);
        }
    }
    let alpha = 0.5 * (lo + hi);
    Ok(AlphaFit {
        alpha,
        objective: sse(records, alpha) / records.len() as f64,
        n_seasons: records.len(),
    })
}
