//! Empirical transition model over point states, with support-threshold
//! back-off for rare states.

use super::state::{encode_state_sequence, EncodeError, Side, StateKey};
use crate::types::PointLog;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_SUPPORT: u64 = 20;

/// Sparse counts and row-normalized probabilities over observed states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionModel {
    /// Dense state ids in deterministic (sorted) order.
    pub states: Vec<StateKey>,
    /// Sparse transition counts per row.
    pub counts: Vec<BTreeMap<usize, u64>>,
    /// Row-normalized probabilities; terminal rows are absorbing self-loops.
    pub probs: Vec<Vec<(usize, f64)>>,
    pub row_totals: Vec<u64>,
    pub support: u64,
    /// Raw state -> coarsened state, for states folded by the support
    /// threshold (identity entries omitted).
    pub backoff: BTreeMap<StateKey, StateKey>,
}

impl TransitionModel {
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &StateKey) -> Option<usize> {
        self.states.binary_search(s).ok()
    }

    /// Resolve a raw state through the back-off map.
    pub fn resolve(&self, s: &StateKey) -> StateKey {
        let mut cur = s.clone();
        // Back-off application composes at most twice (attack code, then
        // history truncation).
        for _ in 0..2 {
            match self.backoff.get(&cur) {
                Some(next) => cur = next.clone(),
                None => break,
            }
        }
        cur
    }

    /// Fit from encoded state sequences.
    pub fn from_sequences(sequences: &[Vec<StateKey>], support: u64) -> TransitionModel {
        // Source-row visit totals at the raw level.
        let mut backoff: BTreeMap<StateKey, StateKey> = BTreeMap::new();
        // Two back-off passes: generic attack code, then history truncation.
        for coarsen in [StateKey::coarsen_attack, StateKey::coarsen_last] {
            let mut totals: BTreeMap<StateKey, u64> = BTreeMap::new();
            for seq in sequences {
                for s in seq.iter().take(seq.len().saturating_sub(1)) {
                    let resolved = resolve(&backoff, s);
                    *totals.entry(resolved).or_default() += 1;
                }
            }
            for (s, total) in &totals {
                if *total < support && !s.is_terminal() {
                    let folded = coarsen(s);
                    if folded != *s {
                        backoff.insert(s.clone(), folded);
                    }
                }
            }
        }

        // Collect final states and counts.
        let mut state_set: BTreeSet<StateKey> = BTreeSet::new();
        for seq in sequences {
            for s in seq {
                state_set.insert(resolve(&backoff, s));
            }
        }
        let states: Vec<StateKey> = state_set.into_iter().collect();
        let index: BTreeMap<&StateKey, usize> =
            states.iter().enumerate().map(|(i, s)| (s, i)).collect();

        let mut counts: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); states.len()];
        for seq in sequences {
            for pair in seq.windows(2) {
                let a = index[&resolve(&backoff, &pair[0])];
                let b = index[&resolve(&backoff, &pair[1])];
                *counts[a].entry(b).or_default() += 1;
            }
        }

        let row_totals: Vec<u64> = counts.iter().map(|r| r.values().sum()).collect();
        let probs: Vec<Vec<(usize, f64)>> = states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.is_terminal() {
                    vec![(i, 1.0)]
                } else {
                    let total = row_totals[i] as f64;
                    counts[i]
                        .iter()
                        .map(|(&j, &c)| (j, c as f64 / total))
                        .collect()
                }
            })
            .collect();

        TransitionModel {
            states,
            counts,
            probs,
            row_totals,
            support,
            backoff,
        }
    }

    /// Encode and count transitions over a corpus of points.
    pub fn fit(points: &[PointLog], support: u64) -> Result<TransitionModel, EncodeError> {
        let sequences: Vec<Vec<StateKey>> = points
            .iter()
            .map(encode_state_sequence)
            .collect::<Result<_, _>>()?;
        Ok(Self::from_sequences(&sequences, support))
    }

    pub fn terminal_index(&self, side: Side) -> Option<usize> {
        self.index_of(&StateKey::win(side))
    }
}

fn resolve(backoff: &BTreeMap<StateKey, StateKey>, s: &StateKey) -> StateKey {
    let mut cur = s.clone();
    for _ in 0..2 {
        match backoff.get(&cur) {
            Some(next) => cur = next.clone(),
            None => break,
        }
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::test_fixtures::table_sample_point;
    use crate::markov::state::{Touch, Touches};
    use crate::types::EvalCode;

    #[test]
    fn single_point_yields_eleven_unit_counts() {
        let model = TransitionModel::fit(&[table_sample_point()], 0).unwrap();
        let total: u64 = model.counts.iter().flat_map(|r| r.values()).sum();
        assert_eq!(total, 11);
        assert!(model
            .counts
            .iter()
            .flat_map(|r| r.values())
            .all(|&c| c == 1));
        // 12 distinct states in the sample rally.
        assert_eq!(model.states.len(), 12);
    }

    #[test]
    fn duplicating_points_doubles_counts_but_not_probabilities() {
        let p = table_sample_point();
        let one = TransitionModel::fit(std::slice::from_ref(&p), 0).unwrap();
        let two = TransitionModel::fit(&[p.clone(), p], 0).unwrap();
        assert_eq!(one.states, two.states);
        for (r1, r2) in one.counts.iter().zip(&two.counts) {
            for (k, c) in r1 {
                assert_eq!(r2[k], 2 * c);
            }
        }
        assert_eq!(one.probs, two.probs);
    }

    #[test]
    fn rows_are_stochastic() {
        let model = TransitionModel::fit(&[table_sample_point()], 0).unwrap();
        for row in &model.probs {
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rare_states_fold_through_backoff() {
        // With a huge support threshold every composite state folds down to
        // its last touch with a generic attack code.
        let model = TransitionModel::fit(&[table_sample_point()], 1000).unwrap();
        for s in &model.states {
            match &s.touches {
                Touches::Win => {}
                Touches::Rally(ts) => {
                    assert_eq!(ts.len(), 1, "state {s} not fully coarsened");
                    if let Touch::Attack(code) = &ts[0] {
                        assert!(code.is_empty());
                    }
                }
            }
        }
        // The serve state cannot coarsen further and must survive.
        assert!(model.index_of(&StateKey::serve()).is_some());
        // Reception eval codes survive coarsening; e.g. R# folds to itself.
        assert!(model
            .index_of(&StateKey::rally(
                Side::R,
                vec![Touch::Reception(EvalCode::Perfect)]
            ))
            .is_some());
    }
}
