//! Non-dominated sorting, crowding distance and crowded selection for two
//! minimized objectives.

use std::cmp::Ordering;

use rand::Rng;

use crate::scalar::Scalar;

/// `a` is no worse than `b` in both objectives and strictly better in one.
#[inline]
pub fn dominates<T: PartialOrd>(a: &[T; 2], b: &[T; 2]) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Pareto rank of every point; rank 0 is the non-dominated set.
pub fn non_dominated_sort<T: PartialOrd>(objectives: &[[T; 2]]) -> Vec<usize> {
    let n = objectives.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&objectives[i], &objectives[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&objectives[j], &objectives[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut rank = vec![usize::MAX; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut r = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = r;
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        current = next;
        r += 1;
    }
    rank
}

/// Groups indices by rank, each front in ascending index order.
pub fn fronts(ranks: &[usize]) -> Vec<Vec<usize>> {
    let count = ranks.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); count];
    for (i, &r) in ranks.iter().enumerate() {
        out[r].push(i);
    }
    out
}

/// Crowding distance of each member of `front` (same order). Boundary
/// points of every objective get infinity.
pub fn crowding_distance<T: Scalar>(objectives: &[[T; 2]], front: &[usize]) -> Vec<T> {
    let n = front.len();
    let mut dist = vec![T::zero(); n];
    if n <= 2 {
        dist.fill(T::infinity());
        return dist;
    }
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..2 {
        order.sort_by(|&a, &b| {
            objectives[front[a]][m]
                .partial_cmp(&objectives[front[b]][m])
                .unwrap_or(Ordering::Equal)
                .then(front[a].cmp(&front[b]))
        });
        let lo = objectives[front[order[0]]][m];
        let hi = objectives[front[order[n - 1]]][m];
        dist[order[0]] = T::infinity();
        dist[order[n - 1]] = T::infinity();
        let range = hi - lo;
        if !(range > T::zero()) || !range.is_finite() {
            continue;
        }
        for k in 1..n - 1 {
            let gap = objectives[front[order[k + 1]]][m] - objectives[front[order[k - 1]]][m];
            dist[order[k]] += gap / range;
        }
    }
    dist
}

/// Crowded comparison: lower rank first, then larger crowding distance.
pub fn crowded_cmp<T: PartialOrd>(
    rank_a: usize,
    crowd_a: T,
    rank_b: usize,
    crowd_b: T,
) -> Ordering {
    rank_a
        .cmp(&rank_b)
        .then_with(|| crowd_b.partial_cmp(&crowd_a).unwrap_or(Ordering::Equal))
}

/// Binary crowded tournament with replacement; returns the winner's index.
pub fn select_parent<T: PartialOrd + Copy, R: Rng + ?Sized>(
    ranks: &[usize],
    crowding: &[T],
    rng: &mut R,
) -> usize {
    let n = ranks.len();
    let a = rng.random_range(0..n);
    let b = rng.random_range(0..n);
    match crowded_cmp(ranks[a], crowding[a], ranks[b], crowding[b]) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => {
            if rng.random_bool(0.5) {
                a
            } else {
                b
            }
        }
    }
}

/// Survivors of a merged population.
#[derive(Clone, Debug)]
pub struct Survivors<T> {
    /// Indices into the merged population, in survival order.
    pub indices: Vec<usize>,
    pub ranks: Vec<usize>,
    pub crowding: Vec<T>,
}

/// Keeps the best `keep` points by rank, filling the last admitted front by
/// descending crowding distance.
pub fn environmental_selection<T: Scalar>(objectives: &[[T; 2]], keep: usize) -> Survivors<T> {
    let ranks = non_dominated_sort(objectives);
    let mut out = Survivors {
        indices: Vec::with_capacity(keep),
        ranks: Vec::with_capacity(keep),
        crowding: Vec::with_capacity(keep),
    };
    for (r, front) in fronts(&ranks).into_iter().enumerate() {
        if out.indices.len() >= keep {
            break;
        }
        let cd = crowding_distance(objectives, &front);
        let mut members: Vec<(usize, T)> = front.into_iter().zip(cd).collect();
        let room = keep - out.indices.len();
        if members.len() > room {
            members.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            });
            members.truncate(room);
        }
        for (i, d) in members {
            out.indices.push(i);
            out.ranks.push(r);
            out.crowding.push(d);
        }
    }
    out
}
