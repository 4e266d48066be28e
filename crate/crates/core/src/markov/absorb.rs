//! Absorption: sideout probabilities v(s) via matrix powering. 100 steps is a
//! convergence device, so we square repeatedly (P^128 covers it) and enforce
//! the residual-mass tolerance instead of counting steps literally.

use super::state::{Side, StateKey};
use super::transition::TransitionModel;
use super::MarkovError;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_STEPS: u32 = 100;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-9;

/// Sideout probability table: v(s) = P(receiving team wins the point | s).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PwpTable {
    pub v: BTreeMap<StateKey, f64>,
    /// Row visit counts, for export and support reporting.
    pub counts: BTreeMap<StateKey, u64>,
    /// Non-terminal mass left per state after powering.
    pub residuals: BTreeMap<StateKey, f64>,
    /// Raw -> coarse states folded during counting; lookups resolve through
    /// this before the structural back-off chain.
    pub backoff: BTreeMap<StateKey, StateKey>,
    /// Requested step count and the power of two actually used.
    pub n_steps: u32,
    pub effective_steps: u32,
}

impl PwpTable {
    /// Sideout probability with back-off: exact state, then generic attack
    /// code, then last touch only.
    pub fn v(&self, s: &StateKey) -> Option<f64> {
        if s.is_terminal() {
            return Some(match s.side {
                Side::R => 1.0,
                Side::S => 0.0,
            });
        }
        let mut cur = s.clone();
        for _ in 0..2 {
            match self.backoff.get(&cur) {
                Some(next) => cur = next.clone(),
                None => break,
            }
        }
        for candidate in [cur.clone(), cur.coarsen_attack(), cur.coarsen_last()] {
            if let Some(&v) = self.v.get(&candidate) {
                return Some(v);
            }
        }
        None
    }

    /// Point-win probability of the team in possession at `s`.
    pub fn w(&self, s: &StateKey) -> Option<f64> {
        self.v(s).map(|v| match s.side {
            Side::R => v,
            Side::S => 1.0 - v,
        })
    }

    /// Point-win probability of `side` at state `s` (regardless of who is in
    /// possession).
    pub fn win_prob_for(&self, side: Side, s: &StateKey) -> Option<f64> {
        self.v(s).map(|v| match side {
            Side::R => v,
            Side::S => 1.0 - v,
        })
    }
}

/// Dense row-stochastic matrix of the model.
fn dense_matrix(model: &TransitionModel) -> DMatrix<f64> {
    let n = model.states.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in model.probs.iter().enumerate() {
        for &(j, p) in row {
            m[(i, j)] = p;
        }
    }
    m
}

/// Compute v(s) as the n-step probability of landing in (R, W).
pub fn absorb(model: &TransitionModel, n_steps: u32) -> Result<PwpTable, MarkovError> {
    absorb_with_tol(model, n_steps, DEFAULT_RESIDUAL_TOL)
}

pub fn absorb_with_tol(
    model: &TransitionModel,
    n_steps: u32,
    residual_tol: f64,
) -> Result<PwpTable, MarkovError> {
    if model.is_empty() {
        return Ok(PwpTable {
            v: BTreeMap::new(),
            counts: BTreeMap::new(),
            residuals: BTreeMap::new(),
            backoff: BTreeMap::new(),
            n_steps,
            effective_steps: 0,
        });
    }

    let mut m = dense_matrix(model);
    let mut squarings = 0u32;
    while (1u32 << squarings) < n_steps {
        squarings += 1;
    }
    for _ in 0..squarings {
        m = &m * &m;
    }
    let effective_steps = 1u32 << squarings;

    let rw = model.terminal_index(Side::R);
    let sw = model.terminal_index(Side::S);

    let mut v = BTreeMap::new();
    let mut counts = BTreeMap::new();
    let mut residuals = BTreeMap::new();
    let mut offenders: Vec<(String, f64)> = Vec::new();
    for (i, s) in model.states.iter().enumerate() {
        let p_rw = rw.map_or(0.0, |j| m[(i, j)]);
        let p_sw = sw.map_or(0.0, |j| m[(i, j)]);
        let residual = (1.0 - p_rw - p_sw).max(0.0);
        v.insert(s.clone(), p_rw.clamp(0.0, 1.0));
        counts.insert(s.clone(), model.row_totals[i]);
        residuals.insert(s.clone(), residual);
        if residual > residual_tol {
            offenders.push((s.to_string(), residual));
        }
    }
    if !offenders.is_empty() {
        return Err(MarkovError::NonConvergent {
            n_steps,
            tolerance: residual_tol,
            offenders,
        });
    }

    Ok(PwpTable {
        v,
        counts,
        residuals,
        backoff: model.backoff.clone(),
        n_steps,
        effective_steps,
    })
}
