//! Closed-form oracles for the generator: the exact zero-effect transition
//! kernel, its absorption probabilities, a Monte Carlo rollout, and the
//! analytic reception-gap effect. These are computed independently of the
//! fitting pipeline so they can stand as test oracles against it.

use super::tables::*;
use crate::markov::{Side, StateKey, Touch, Touches, TransitionModel};
use crate::types::EvalCode;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub type Kernel = BTreeMap<StateKey, Vec<(StateKey, f64)>>;

fn append(s: &StateKey, t: Touch) -> StateKey {
    let Touches::Rally(ts) = &s.touches else {
        unreachable!("cannot extend a terminal state");
    };
    let mut ts = ts.clone();
    ts.push(t);
    StateKey::rally(s.side, ts)
}

/// Transition row of one non-terminal state at zero effects.
fn transitions(s: &StateKey) -> Vec<(StateKey, f64)> {
    let side = s.side;
    let opp = side.other();
    let mut out: Vec<(StateKey, f64)> = Vec::new();

    if *s == StateKey::serve() {
        out.push((StateKey::win(Side::R), P_SERVE_ERROR));
        for (e, p) in reception_dist(0.0) {
            let state = StateKey::rally(Side::R, vec![Touch::Reception(e)]);
            out.push((state, (1.0 - P_SERVE_ERROR) * p));
        }
        return out;
    }

    match s.last_touch().expect("non-empty rally state") {
        Touch::Reception(EvalCode::Error) => {
            // Ace: the serving side wins.
            out.push((StateKey::win(opp), 1.0));
        }
        Touch::Reception(_) | Touch::Dig(_) => {
            for (e, p) in SET_EVALS {
                out.push((append(s, Touch::Set(e)), p));
            }
        }
        Touch::Set(_) => {
            for (code, p) in ATTACK_CODES {
                out.push((append(s, Touch::Attack(code.to_string())), p));
            }
        }
        Touch::Attack(_) => {
            let e1 = p_attack_error(0.0);
            let clean = p_clean(0.0, 0.0);
            let ck = p_clean_kill(0.0, 0.0);
            let be = p_block_error(0.0);
            let th = p_through(0.0, 0.0);
            out.push((StateKey::win(opp), e1));
            let in_play = 1.0 - e1;
            out.push((StateKey::win(side), in_play * clean * ck));
            for (e, p) in dig_dist(0.0) {
                let dig = StateKey::rally(opp, vec![Touch::Dig(e)]);
                out.push((dig, in_play * clean * (1.0 - ck) * p));
            }
            let blocked = in_play * (1.0 - clean);
            let block = |e| StateKey::rally(opp, vec![Touch::Block(e)]);
            out.push((block(EvalCode::Error), blocked * be));
            let kept = blocked * (1.0 - be);
            out.push((
                block(EvalCode::Positive),
                kept * (th + (1.0 - th) * P_RETURN_DUG),
            ));
            out.push((
                block(EvalCode::Perfect),
                kept * (1.0 - th) * (1.0 - P_RETURN_DUG),
            ));
        }
        Touch::Block(EvalCode::Error) => out.push((StateKey::win(opp), 1.0)),
        // Stuff: the blocking side wins.
        Touch::Block(EvalCode::Perfect) => out.push((StateKey::win(side), 1.0)),
        Touch::Block(_) => {
            // Kept block: renormalize over the outcomes that chart `B+`.
            let th = p_through(0.0, 0.0);
            let tk = p_through_kill(0.0, 0.0);
            let z = th + (1.0 - th) * P_RETURN_DUG;
            out.push((StateKey::win(opp), th * tk / z));
            for (e, p) in dig_dist(0.0) {
                out.push((append(s, Touch::Dig(e)), th * (1.0 - tk) * p / z));
                let cover = StateKey::rally(opp, vec![Touch::Dig(e)]);
                out.push((cover, (1.0 - th) * P_RETURN_DUG * p / z));
            }
        }
        Touch::Serve => unreachable!("bare serve handled above"),
    }
    out
}

/// The exact point-state kernel of the generator at zero effects, reachable
/// from the opening serve. Terminal states carry no row.
pub fn true_kernel() -> Kernel {
    let mut kernel = Kernel::new();
    let mut queue = vec![StateKey::serve()];
    while let Some(s) = queue.pop() {
        if s.is_terminal() || kernel.contains_key(&s) {
            continue;
        }
        let row = transitions(&s);
        for (next, _) in &row {
            if !next.is_terminal() && !kernel.contains_key(next) {
                queue.push(next.clone());
            }
        }
        kernel.insert(s, row);
    }
    kernel
}

/// Express a fitted transition model as a kernel, so rollouts and the
/// powering oracle can consume fitted and exact chains interchangeably.
pub fn kernel_from_model(model: &TransitionModel) -> Kernel {
    let mut kernel = Kernel::new();
    for (i, s) in model.states.iter().enumerate() {
        if s.is_terminal() {
            continue;
        }
        let row = model.probs[i]
            .iter()
            .map(|&(j, p)| (model.states[j].clone(), p))
            .collect();
        kernel.insert(s.clone(), row);
    }
    kernel
}

/// Sideout probability per state by dense matrix powering (128 steps),
/// independent of `markov::absorb`. Terminal states are included.
pub fn kernel_v(kernel: &Kernel) -> BTreeMap<StateKey, f64> {
    let mut index: BTreeMap<&StateKey, usize> = BTreeMap::new();
    let mut states: Vec<&StateKey> = Vec::new();
    let rw = StateKey::win(Side::R);
    let sw = StateKey::win(Side::S);
    for s in kernel.keys().chain([&rw, &sw]) {
        index.entry(s).or_insert_with(|| {
            states.push(s);
            states.len() - 1
        });
    }
    let n = states.len();
    let mut m = DMatrix::zeros(n, n);
    for (s, row) in kernel {
        let i = index[s];
        for (next, p) in row {
            m[(i, index[next])] += p;
        }
    }
    m[(index[&rw], index[&rw])] = 1.0;
    m[(index[&sw], index[&sw])] = 1.0;
    for _ in 0..7 {
        m = &m * &m;
    }
    let rw_col = index[&rw];
    states
        .iter()
        .enumerate()
        .map(|(i, s)| ((*s).clone(), m[(i, rw_col)]))
        .collect()
}

/// Monte Carlo estimate of P(receiving side wins | start), with its binomial
/// standard error.
pub fn mc_point_win_prob(
    kernel: &Kernel,
    start: &StateKey,
    n_sim: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let mut wins = 0usize;
    for _ in 0..n_sim {
        let mut s = start.clone();
        loop {
            if s.is_terminal() {
                if s.side == Side::R {
                    wins += 1;
                }
                break;
            }
            let row = &kernel[&s];
            let mut u = rng.gen::<f64>();
            let mut chosen = &row.last().expect("non-empty row").0;
            for (next, p) in row {
                if u < *p {
                    chosen = next;
                    break;
                }
                u -= p;
            }
            s = chosen.clone();
        }
    }
    let p = wins as f64 / n_sim as f64;
    (p, (p * (1.0 - p) / n_sim as f64).sqrt())
}

/// Exact change in the receiving side's point-win probability when the
/// receiver's effect increases by `gap`: the reception distribution shifts
/// and is integrated against the post-reception sideout probabilities.
pub fn true_reception_delta(v: &BTreeMap<StateKey, f64>, gap: f64) -> f64 {
    let base = reception_dist(0.0);
    let tilted = reception_dist(-gap);
    base.iter()
        .zip(&tilted)
        .map(|(&(e, p0), &(_, p1))| {
            let state = StateKey::rally(Side::R, vec![Touch::Reception(e)]);
            (p1 - p0) * v[&state]
        })
        .sum()
}
