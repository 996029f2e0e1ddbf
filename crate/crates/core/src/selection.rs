//! Final-model choice by description length, and a Monte Carlo estimate of
//! how many individuals a tournament never picks.

use std::ops::Range;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::data::Dataset;
use crate::engine::Individual;
use crate::expr::{sum_squared_error, Symbol, Tree};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectionError {
    #[error("cannot select from an empty front")]
    EmptyFront,
    #[error("no rows to score on")]
    NoRows,
}

/// Codelengths in nats.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MdlScore {
    pub residual_codelength: f64,
    pub structure_codelength: f64,
    pub parameter_codelength: f64,
    pub total: f64,
}

/// `(n/2) ln(SSE/n) + length ln(alphabet) + (coefficients/2) ln n`.
///
/// SSE is floored at the smallest positive double so exact fits stay finite.
pub fn mdl_score(
    sse: f64,
    rows: usize,
    length: usize,
    coefficients: usize,
    alphabet: usize,
) -> MdlScore {
    let n = rows as f64;
    let sse = if sse.is_nan() {
        f64::INFINITY
    } else {
        sse.max(f64::MIN_POSITIVE)
    };
    let residual = 0.5 * n * (sse / n).ln();
    let structure = length as f64 * (alphabet as f64).ln();
    let parameter = 0.5 * coefficients as f64 * n.ln();
    MdlScore {
        residual_codelength: residual,
        structure_codelength: structure,
        parameter_codelength: parameter,
        total: residual + structure + parameter,
    }
}

/// Score of `tree` on `rows`; every node carries a coefficient.
pub fn mdl_of_tree<T: Scalar>(tree: &Tree<T>, data: &Dataset<T>, rows: Range<usize>) -> MdlScore {
    let pred = tree.evaluate(data, rows.clone());
    let sse = sum_squared_error(&pred, &data.target()[rows.clone()]).as_f64();
    mdl_score(
        sse,
        rows.len(),
        tree.len(),
        tree.len(),
        Symbol::primitive_count(data.feature_count()),
    )
}

/// Index of the lowest total; ties go to the shorter model, then the earlier.
pub fn mdl_argmin(scores: &[(MdlScore, usize)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (s, len)) in scores.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let (bs, blen) = &scores[b];
                let (a, c) = (nan_last(s.total), nan_last(bs.total));
                a < c || (a == c && len < blen)
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

fn nan_last(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

/// Picks the front member with the shortest description of `rows`.
pub fn mdl_select<'a, T: Scalar>(
    front: &[&'a Individual<T>],
    data: &Dataset<T>,
    rows: Range<usize>,
) -> Result<(&'a Individual<T>, MdlScore), SelectionError> {
    if front.is_empty() {
        return Err(SelectionError::EmptyFront);
    }
    if rows.is_empty() {
        return Err(SelectionError::NoRows);
    }
    let scored: Vec<(MdlScore, usize)> = front
        .iter()
        .map(|i| (mdl_of_tree(&i.tree, data, rows.clone()), i.length))
        .collect();
    let k = mdl_argmin(&scored).ok_or(SelectionError::EmptyFront)?;
    Ok((front[k], scored[k].0))
}

/// Mean fraction of a population of `n` never chosen over `n` tournaments
/// of size `t`, sampled with replacement, fitness being distinct ranks.
pub fn tournament_loss<R: Rng + ?Sized>(n: usize, t: usize, trials: usize, rng: &mut R) -> f64 {
    assert!(n >= 2 && t >= 1 && trials >= 1);
    let mut chosen = vec![false; n];
    let mut lost = 0usize;
    for _ in 0..trials {
        chosen.fill(false);
        for _ in 0..n {
            // index is the fitness rank, so the winner is the largest draw
            let w = (0..t).map(|_| rng.random_range(0..n)).max().unwrap_or(0);
            chosen[w] = true;
        }
        lost += chosen.iter().filter(|&&c| !c).count();
    }
    lost as f64 / (n * trials) as f64
}
