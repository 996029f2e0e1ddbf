//! Crossover and mutation with incremental hash maintenance.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::Serialize;

use crate::creator::TreeCreator;
use crate::expr::{Node, Symbol, Tree};
use crate::scalar::Scalar;
use crate::zobrist::{SwapDescriptor, ZobristError, ZobristTable};

/// Spread of the multiplicative coefficient perturbation.
pub const COEFFICIENT_SIGMA: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_length: usize,
    pub max_depth: usize,
}

impl Limits {
    pub fn admits<T: Scalar>(&self, tree: &Tree<T>) -> bool {
        tree.len() <= self.max_length && tree.depth() <= self.max_depth
    }
}

/// A tree produced from a parent, its hash, and the key difference when the
/// change was structural.
#[derive(Clone, Debug)]
pub struct Offspring<T> {
    pub tree: Tree<T>,
    pub hash: u64,
    pub swap: Option<SwapDescriptor>,
}

/// Replaces the subtree of `p1` at `cut` with the subtree of `p2` rooted at
/// `donor_root`. Limits are not checked.
pub fn crossover_at<T: Scalar>(
    table: &ZobristTable,
    p1: &Tree<T>,
    p1_hash: u64,
    cut: usize,
    p2: &Tree<T>,
    donor_root: usize,
) -> Result<Offspring<T>, ZobristError> {
    let donor = &p2.nodes()[p2.subtree_range(donor_root)];
    splice(table, p1, p1_hash, cut, donor)
}

fn splice<T: Scalar>(
    table: &ZobristTable,
    parent: &Tree<T>,
    parent_hash: u64,
    cut: usize,
    donor: &[Node<T>],
) -> Result<Offspring<T>, ZobristError> {
    let swap = SwapDescriptor::replacement(parent, parent_hash, cut, donor);
    let tree = parent.replace_subtree(cut, donor);
    let hash = table.hash_after_swap(&swap, &tree)?;
    debug_assert_eq!(Ok(hash), table.hash(&tree));
    Ok(Offspring {
        tree,
        hash,
        swap: Some(swap),
    })
}

/// Subtree crossover: a uniform cut point in `p1` receives a subtree of `p2`
/// drawn uniformly among those that keep the child within `limits`. Returns
/// a copy of `p1` when no subtree fits.
pub fn crossover<T: Scalar, R: Rng + ?Sized>(
    table: &ZobristTable,
    p1: &Tree<T>,
    p1_hash: u64,
    p2: &Tree<T>,
    limits: Limits,
    rng: &mut R,
) -> Result<Offspring<T>, ZobristError> {
    let cut = rng.random_range(0..p1.len());
    let room = (limits.max_length + p1.nodes()[cut].length).saturating_sub(p1.len());
    let level = p1.levels()[cut];
    let depth_room = (limits.max_depth + 1).saturating_sub(level);
    let heights = p2.heights();
    let fits: Vec<usize> = (0..p2.len())
        .filter(|&j| p2.nodes()[j].length <= room && heights[j] <= depth_room)
        .collect();
    if fits.is_empty() {
        return Ok(Offspring {
            tree: p1.clone(),
            hash: p1_hash,
            swap: None,
        });
    }
    let j = fits[rng.random_range(0..fits.len())];
    crossover_at(table, p1, p1_hash, cut, p2, j)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum MutationKind {
    InsertSubtree,
    RemoveSubtree,
    ReplaceSubtree,
    ChangeFunction,
    ChangeVariable,
    ChangeCoefficient,
}

impl MutationKind {
    pub const ALL: [MutationKind; 6] = [
        MutationKind::InsertSubtree,
        MutationKind::RemoveSubtree,
        MutationKind::ReplaceSubtree,
        MutationKind::ChangeFunction,
        MutationKind::ChangeVariable,
        MutationKind::ChangeCoefficient,
    ];
}

pub struct Mutator<'a> {
    pub table: &'a ZobristTable,
    pub creator: &'a TreeCreator,
    pub limits: Limits,
}

impl<'a> Mutator<'a> {
    /// Insertion points: nodes whose subtree can be pushed one level down.
    fn insert_points<T: Scalar>(&self, tree: &Tree<T>) -> Vec<usize> {
        if tree.len() + 1 > self.limits.max_length {
            return Vec::new();
        }
        let levels = tree.levels();
        let heights = tree.heights();
        (0..tree.len())
            .filter(|&i| levels[i] + heights[i] <= self.limits.max_depth)
            .collect()
    }

    pub fn applicable<T: Scalar>(&self, tree: &Tree<T>) -> Vec<MutationKind> {
        let has_function = tree.nodes().iter().any(|n| n.symbol.is_function());
        let has_variable = tree.nodes().iter().any(|n| n.symbol.is_variable());
        MutationKind::ALL
            .into_iter()
            .filter(|k| match k {
                MutationKind::InsertSubtree => !self.insert_points(tree).is_empty(),
                MutationKind::RemoveSubtree | MutationKind::ChangeFunction => has_function,
                MutationKind::ChangeVariable => has_variable && self.creator.features() >= 2,
                MutationKind::ReplaceSubtree | MutationKind::ChangeCoefficient => true,
            })
            .collect()
    }

    /// Applies one applicable operator chosen uniformly.
    pub fn mutate<T: Scalar, R: Rng + ?Sized>(
        &self,
        tree: &Tree<T>,
        hash: u64,
        rng: &mut R,
    ) -> Result<(Offspring<T>, MutationKind), ZobristError> {
        let kinds = self.applicable(tree);
        let kind = kinds[rng.random_range(0..kinds.len())];
        Ok((self.apply(kind, tree, hash, rng)?, kind))
    }

    /// Applies `kind`, which must be applicable to `tree`.
    pub fn apply<T: Scalar, R: Rng + ?Sized>(
        &self,
        kind: MutationKind,
        tree: &Tree<T>,
        hash: u64,
        rng: &mut R,
    ) -> Result<Offspring<T>, ZobristError> {
        let nodes = tree.nodes();
        let pick = |rng: &mut R, pred: &dyn Fn(&Node<T>) -> bool| -> usize {
            let c: Vec<usize> = (0..nodes.len()).filter(|&i| pred(&nodes[i])).collect();
            c[rng.random_range(0..c.len())]
        };
        match kind {
            MutationKind::InsertSubtree => {
                let points = self.insert_points(tree);
                let i = points[rng.random_range(0..points.len())];
                let pool: &[Symbol] = if tree.len() + 2 <= self.limits.max_length {
                    &Symbol::FUNCTIONS
                } else {
                    &Symbol::UNARY
                };
                let f = pool[rng.random_range(0..pool.len())];
                let old = &nodes[tree.subtree_range(i)];
                let mut donor = vec![Node {
                    symbol: f,
                    coefficient: T::one(),
                    length: old.len() + f.arity(),
                }];
                if f.arity() == 2 {
                    let leaf = self.creator.terminal_node::<T, R>(rng);
                    if rng.random_bool(0.5) {
                        donor.extend_from_slice(old);
                        donor.push(leaf);
                    } else {
                        donor.push(leaf);
                        donor.extend_from_slice(old);
                    }
                } else {
                    donor.extend_from_slice(old);
                }
                splice(self.table, tree, hash, i, &donor)
            }
            MutationKind::RemoveSubtree => {
                let i = pick(rng, &|n| n.symbol.is_function());
                let kids: Vec<usize> = tree.children(i).collect();
                let c = kids[rng.random_range(0..kids.len())];
                let donor = nodes[tree.subtree_range(c)].to_vec();
                splice(self.table, tree, hash, i, &donor)
            }
            MutationKind::ReplaceSubtree => {
                let i = rng.random_range(0..nodes.len());
                let max_len = self.limits.max_length - (tree.len() - nodes[i].length);
                let max_depth = self.limits.max_depth + 1 - tree.levels()[i];
                let fresh: Tree<T> = self.creator.create(rng, max_len, max_depth);
                splice(self.table, tree, hash, i, fresh.nodes())
            }
            MutationKind::ChangeFunction => {
                let i = pick(rng, &|n| n.symbol.is_function());
                let old = nodes[i].symbol;
                let same: &[Symbol] = if old.arity() == 2 {
                    &Symbol::BINARY
                } else {
                    &Symbol::UNARY
                };
                let others: Vec<Symbol> = same.iter().copied().filter(|&s| s != old).collect();
                let new = others[rng.random_range(0..others.len())];
                self.point(tree, hash, i, new)
            }
            MutationKind::ChangeVariable => {
                let i = pick(rng, &|n| n.symbol.is_variable());
                let Symbol::Variable(f) = nodes[i].symbol else {
                    unreachable!()
                };
                let features = self.creator.features();
                let g = (f + rng.random_range(1..features)) % features;
                self.point(tree, hash, i, Symbol::Variable(g))
            }
            MutationKind::ChangeCoefficient => {
                let i = rng.random_range(0..nodes.len());
                let sigma = COEFFICIENT_SIGMA;
                let factor = LogNormal::new(-0.5 * sigma * sigma, sigma)
                    .map(|d| d.sample(rng))
                    .unwrap_or(1.0);
                let mut child = tree.clone();
                child.set_coefficient(i, nodes[i].coefficient * T::lit(factor));
                Ok(Offspring {
                    tree: child,
                    hash,
                    swap: None,
                })
            }
        }
    }

    fn point<T: Scalar>(
        &self,
        tree: &Tree<T>,
        hash: u64,
        i: usize,
        new: Symbol,
    ) -> Result<Offspring<T>, ZobristError> {
        let swap = SwapDescriptor::point(hash, i, tree.nodes()[i].symbol, new);
        let mut child = tree.clone();
        let mut nodes = child.nodes().to_vec();
        nodes[i].symbol = new;
        child = Tree::from_nodes_unchecked(nodes);
        let h = self.table.hash_incremental(&swap)?;
        debug_assert_eq!(Ok(h), self.table.hash(&child));
        Ok(Offspring {
            tree: child,
            hash: h,
            swap: Some(swap),
        })
    }
}
