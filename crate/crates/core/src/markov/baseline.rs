//! Conditional win-probability baselines over the attack outcome tree.
//!
//! For each pre-attack state we track the empirical mean of w(s') within
//! each cell of the tree (unconditional, each indicator split, and the three
//! leaves). Rare pre-states back off by dropping the attack code, then the
//! evaluation history.

use super::state::StateKey;
use super::MarkovError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_BASELINE_SUPPORT: u64 = 20;

/// Outcome-tree indicators for one attack. `x1` is always observed; deeper
/// splits exist only when the attack reaches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFlags {
    /// Attack error.
    pub x1: bool,
    /// Clean attack (no block touch); defined when x1 = 0.
    pub x2: Option<bool>,
    /// Block error; defined when x1 = x2 = 0.
    pub x3: Option<bool>,
    /// Block-through; defined when x1 = x2 = x3 = 0.
    pub x4: Option<bool>,
}

impl SplitFlags {
    pub fn attack_error() -> Self {
        SplitFlags {
            x1: true,
            x2: None,
            x3: None,
            x4: None,
        }
    }

    pub fn clean() -> Self {
        SplitFlags {
            x1: false,
            x2: Some(true),
            x3: None,
            x4: None,
        }
    }

    pub fn block_error() -> Self {
        SplitFlags {
            x1: false,
            x2: Some(false),
            x3: Some(true),
            x4: None,
        }
    }

    pub fn block_return() -> Self {
        SplitFlags {
            x1: false,
            x2: Some(false),
            x3: Some(false),
            x4: Some(false),
        }
    }

    pub fn block_through() -> Self {
        SplitFlags {
            x1: false,
            x2: Some(false),
            x3: Some(false),
            x4: Some(true),
        }
    }

    /// Exactly one of the five outcome categories holds.
    pub fn category(&self) -> OutcomeCategory {
        if self.x1 {
            OutcomeCategory::AttackError
        } else if self.x2 == Some(true) {
            OutcomeCategory::CleanAttack
        } else if self.x3 == Some(true) {
            OutcomeCategory::BlockError
        } else if self.x4 == Some(true) {
            OutcomeCategory::BlockThrough
        } else {
            OutcomeCategory::BlockReturn
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeCategory {
    AttackError,
    CleanAttack,
    BlockError,
    BlockThrough,
    BlockReturn,
}

/// A training observation: pre-attack state, tree flags, and w(s') from the
/// attacking side's perspective.
#[derive(Debug, Clone)]
pub struct AttackContext {
    pub pre: StateKey,
    pub flags: SplitFlags,
    pub w_post: f64,
}

/// Cells of the outcome tree for which baselines are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cell {
    /// All attacks from the pre-state.
    All,
    /// x1 = 0 / x1 = 1.
    NoError,
    Error,
    /// Within x1 = 0: blocked (x2 = 0) / clean (x2 = 1).
    Blocked,
    Clean,
    /// Within blocked: block kept in play (x3 = 0) / block error (x3 = 1).
    BlockKept,
    BlockError,
    /// Within kept: return (x4 = 0) / through (x4 = 1).
    Return,
    Through,
}

impl Cell {
    pub const ALL: [Cell; 9] = [
        Cell::All,
        Cell::NoError,
        Cell::Error,
        Cell::Blocked,
        Cell::Clean,
        Cell::BlockKept,
        Cell::BlockError,
        Cell::Return,
        Cell::Through,
    ];
}

/// Cells an observation with the given flags contributes to.
pub fn cells_of(flags: &SplitFlags) -> Vec<Cell> {
    let mut cells = vec![Cell::All];
    if flags.x1 {
        cells.push(Cell::Error);
        return cells;
    }
    cells.push(Cell::NoError);
    match flags.x2 {
        Some(true) => {
            cells.push(Cell::Clean);
            return cells;
        }
        Some(false) => cells.push(Cell::Blocked),
        None => return cells,
    }
    match flags.x3 {
        Some(true) => {
            cells.push(Cell::BlockError);
            return cells;
        }
        Some(false) => cells.push(Cell::BlockKept),
        None => return cells,
    }
    match flags.x4 {
        Some(true) => cells.push(Cell::Through),
        Some(false) => cells.push(Cell::Return),
        None => {}
    }
    cells
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct CellStats {
    sum: f64,
    count: u64,
}

type CellMap = BTreeMap<(StateKey, Cell), CellStats>;

/// Back-off depth used to answer a baseline query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BackoffLevel {
    Exact,
    GenericAttack,
    LastTouch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Baselines {
    exact: CellMap,
    generic: CellMap,
    last: CellMap,
    pub support: u64,
}

impl Baselines {
    pub fn fit(contexts: &[AttackContext], support: u64) -> Baselines {
        let mut exact = BTreeMap::new();
        let mut generic = BTreeMap::new();
        let mut last = BTreeMap::new();
        for ctx in contexts {
            let g = ctx.pre.coarsen_attack();
            let l = ctx.pre.coarsen_last();
            for cell in cells_of(&ctx.flags) {
                for (map, key) in [
                    (&mut exact, ctx.pre.clone()),
                    (&mut generic, g.clone()),
                    (&mut last, l.clone()),
                ] {
                    let stats: &mut CellStats = map.entry((key, cell)).or_default();
                    stats.sum += ctx.w_post;
                    stats.count += 1;
                }
            }
        }
        Baselines {
            exact,
            generic,
            last,
            support,
        }
    }

    /// Mean w(s') for the cell, backing off when the exact pre-state cell has
    /// fewer observations than the support threshold.
    pub fn mean(&self, pre: &StateKey, cell: Cell) -> Result<(f64, BackoffLevel), MarkovError> {
        let tiers: [(&CellMap, StateKey, BackoffLevel); 3] = [
            (&self.exact, pre.clone(), BackoffLevel::Exact),
            (
                &self.generic,
                pre.coarsen_attack(),
                BackoffLevel::GenericAttack,
            ),
            (&self.last, pre.coarsen_last(), BackoffLevel::LastTouch),
        ];
        // Any non-empty tier at or above support wins; otherwise fall through
        // to the deepest non-empty tier.
        let mut fallback: Option<(f64, BackoffLevel)> = None;
        for (map, key, level) in tiers {
            if let Some(stats) = map.get(&(key, cell)) {
                if stats.count > 0 {
                    let mean = stats.sum / stats.count as f64;
                    if stats.count >= self.support {
                        return Ok((mean, level));
                    }
                    if fallback.is_none() {
                        fallback = Some((mean, level));
                    }
                }
            }
        }
        fallback.ok_or(MarkovError::NoSupport {
            state: pre.to_string(),
            cell: format!("{cell:?}"),
        })
    }

    /// Empirical conditional-mean map for one cell, over every exact
    /// pre-state seen in training.
    pub fn conditional_w_baseline(&self, cell: Cell) -> BTreeMap<StateKey, f64> {
        let mut out = BTreeMap::new();
        for ((state, c), stats) in &self.exact {
            if *c == cell && stats.count > 0 {
                out.insert(state.clone(), stats.sum / stats.count as f64);
            }
        }
        out
    }

    pub fn exact_count(&self, pre: &StateKey, cell: Cell) -> u64 {
        self.exact.get(&(pre.clone(), cell)).map_or(0, |s| s.count)
    }
}
