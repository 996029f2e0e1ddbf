//! Zobrist hashing of expression trees.
//!
//! A tree's hash is the XOR of one random key per node, looked up by
//! (symbol kind, preorder index). Variables additionally XOR in a per-feature
//! identifier so that `x1` and `x2` hash differently. Coefficients never take
//! part, so trees that differ only in their coefficients collide on purpose.
//!
//! Because XOR is its own inverse, replacing a subtree only requires XOR-ing
//! out the keys that disappear and XOR-ing in the keys that appear. When the
//! replacement changes the tree length, every node after the cut point moves
//! to a new preorder index and contributes one key out and one key in.

use rand::{RngCore, SeedableRng};
use thiserror::Error;

use crate::expr::{Node, Symbol, Tree};
use crate::rng::{mix64, Generator};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZobristError {
    #[error(
        "zobrist table needs at least one symbol and one position (got {symbols}x{positions})"
    )]
    ZeroDimension { symbols: usize, positions: usize },
    #[error("preorder index {index} exceeds the table's maximum tree length {max}")]
    TreeTooLong { index: usize, max: usize },
    #[error("symbol kind {kind} outside a table with {symbols} symbol rows")]
    UnknownSymbol { kind: usize, symbols: usize },
    #[error("variable x{feature} has no identifier ({features} features)")]
    UnknownFeature { feature: usize, features: usize },
}

/// Immutable key matrix plus per-variable identifiers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZobristTable {
    /// Row-major `symbols x positions`.
    keys: Vec<u64>,
    variable_ids: Vec<u64>,
    symbols: usize,
    positions: usize,
    seed: u64,
}

impl ZobristTable {
    /// Table for the built-in primitive set and trees of at most
    /// `max_length` nodes.
    pub fn new(max_length: usize, feature_count: usize, seed: u64) -> Result<Self, ZobristError> {
        Self::build(Symbol::KINDS, max_length, feature_count, seed)
    }

    /// Keys are drawn row by row from one xoshiro256** stream; the variable
    /// identifiers follow immediately after.
    pub fn build(
        symbols: usize,
        positions: usize,
        feature_count: usize,
        seed: u64,
    ) -> Result<Self, ZobristError> {
        if symbols == 0 || positions == 0 {
            return Err(ZobristError::ZeroDimension { symbols, positions });
        }
        let mut rng = Generator::seed_from_u64(seed);
        let keys = (0..symbols * positions).map(|_| rng.next_u64()).collect();
        let variable_ids = (0..feature_count).map(|_| rng.next_u64()).collect();
        Ok(ZobristTable {
            keys,
            variable_ids,
            symbols,
            positions,
            seed,
        })
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    /// Maximum tree length the table can hash.
    pub fn max_length(&self) -> usize {
        self.positions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn variable_ids(&self) -> &[u64] {
        &self.variable_ids
    }

    /// Raw matrix entry for a symbol kind at a position.
    pub fn key(&self, kind: usize, index: usize) -> u64 {
        self.keys[kind * self.positions + index]
    }

    pub fn node_key(&self, symbol: Symbol, index: usize) -> Result<u64, ZobristError> {
        if index >= self.positions {
            return Err(ZobristError::TreeTooLong {
                index,
                max: self.positions,
            });
        }
        let kind = symbol.kind_index();
        if kind >= self.symbols {
            return Err(ZobristError::UnknownSymbol {
                kind,
                symbols: self.symbols,
            });
        }
        let key = self.key(kind, index);
        match symbol {
            Symbol::Variable(f) => match self.variable_ids.get(f) {
                Some(&id) => Ok(key ^ positional_id(id, index)),
                None => Err(ZobristError::UnknownFeature {
                    feature: f,
                    features: self.variable_ids.len(),
                }),
            },
            _ => Ok(key),
        }
    }

    /// Identifier of feature `f` as XOR'd into the key at `index`.
    pub fn variable_id(&self, feature: usize, index: usize) -> Option<u64> {
        self.variable_ids
            .get(feature)
            .map(|&id| positional_id(id, index))
    }

    /// XOR of every node key at its preorder index.
    pub fn hash<T: Scalar>(&self, tree: &Tree<T>) -> Result<u64, ZobristError> {
        self.hash_nodes(tree.nodes(), 0)
    }

    /// Hash contribution of `nodes` placed at preorder indices starting at
    /// `offset`.
    pub fn hash_nodes<T>(&self, nodes: &[Node<T>], offset: usize) -> Result<u64, ZobristError> {
        nodes.iter().enumerate().try_fold(0u64, |h, (k, n)| {
            Ok(h ^ self.node_key(n.symbol, offset + k)?)
        })
    }

    /// Updates `swap.parent_hash` to the hash of the child tree.
    pub fn hash_incremental(&self, swap: &SwapDescriptor) -> Result<u64, ZobristError> {
        let mut h = swap.parent_hash;
        for &(i, s) in swap.removed.iter().chain(&swap.inserted) {
            h ^= self.node_key(s, i)?;
        }
        for &(old, new, s) in &swap.tail {
            h ^= self.node_key(s, old)? ^ self.node_key(s, new)?;
        }
        Ok(h)
    }

    /// Child hash via the incremental update, or by rehashing the child when
    /// that touches fewer keys.
    pub fn hash_after_swap<T: Scalar>(
        &self,
        swap: &SwapDescriptor,
        child: &Tree<T>,
    ) -> Result<u64, ZobristError> {
        if swap.cost() > child.len() {
            self.hash(child)
        } else {
            self.hash_incremental(swap)
        }
    }
}

/// A bare identifier XOR'd in at every position would cancel whenever two
/// variables trade places, so the identifier is mixed with the position.
fn positional_id(id: u64, index: usize) -> u64 {
    mix64(id ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// The key-level difference between a parent and the child obtained by
/// replacing one of its subtrees.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SwapDescriptor {
    pub parent_hash: u64,
    /// Excised nodes at their parent indices.
    pub removed: Vec<(usize, Symbol)>,
    /// Grafted nodes at their child indices.
    pub inserted: Vec<(usize, Symbol)>,
    /// Nodes after the cut whose index moved: (old index, new index, symbol).
    pub tail: Vec<(usize, usize, Symbol)>,
}

impl SwapDescriptor {
    /// Describes `parent.replace_subtree(cut, donor)`.
    pub fn replacement<T: Scalar>(
        parent: &Tree<T>,
        parent_hash: u64,
        cut: usize,
        donor: &[Node<T>],
    ) -> Self {
        let old = parent.subtree_range(cut);
        let nodes = parent.nodes();
        let removed = old.clone().map(|i| (i, nodes[i].symbol)).collect();
        let inserted = donor
            .iter()
            .enumerate()
            .map(|(k, n)| (cut + k, n.symbol))
            .collect();
        let tail = if donor.len() == old.len() {
            Vec::new()
        } else {
            (old.end..nodes.len())
                .map(|i| (i, i + donor.len() - old.len(), nodes[i].symbol))
                .collect()
        };
        SwapDescriptor {
            parent_hash,
            removed,
            inserted,
            tail,
        }
    }

    /// Single node `index` changes symbol without changing arity.
    pub fn point(parent_hash: u64, index: usize, old: Symbol, new: Symbol) -> Self {
        SwapDescriptor {
            parent_hash,
            removed: vec![(index, old)],
            inserted: vec![(index, new)],
            tail: Vec::new(),
        }
    }

    /// Weighted key lookups of the incremental path, compared against the
    /// child length when choosing a strategy.
    pub fn cost(&self) -> usize {
        2 * (self.removed.len() + self.inserted.len() + self.tail.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::creator::TreeCreator;
    use proptest::prelude::*;
    use rand::Rng;
    use Symbol::*;

    fn fig5() -> Tree<f64> {
        Tree::from_symbols(&[
            Mul,
            Add,
            Variable(0),
            Variable(1),
            Sub,
            Variable(2),
            Variable(3),
        ])
        .unwrap()
    }

    fn table() -> ZobristTable {
        ZobristTable::new(20, 4, 0xC0FFEE).unwrap()
    }

    #[test]
    fn table_dimensions() {
        let t = ZobristTable::build(20, 50, 3, 1).unwrap();
        assert_eq!(t.keys().len(), 1000);
        assert_eq!(t.variable_ids().len(), 3);
        assert_eq!(t, ZobristTable::build(20, 50, 3, 1).unwrap());
        assert_eq!(
            ZobristTable::build(0, 5, 1, 1),
            Err(ZobristError::ZeroDimension {
                symbols: 0,
                positions: 5
            })
        );
        assert!(ZobristTable::build(3, 0, 1, 1).is_err());
    }

    #[test]
    fn seeds_give_different_tables() {
        let a = ZobristTable::build(20, 50, 0, 1).unwrap();
        let b = ZobristTable::build(20, 50, 0, 2).unwrap();
        let differ = a
            .keys()
            .iter()
            .zip(b.keys())
            .filter(|(x, y)| x != y)
            .count();
        assert!(differ >= 990, "{differ}");
    }

    #[test]
    fn variable_keys() {
        let t = table();
        let k1 = t.node_key(Variable(0), 0).unwrap();
        let k2 = t.node_key(Variable(1), 0).unwrap();
        assert_ne!(k1, k2);
        assert_eq!(
            k1 ^ t.variable_id(0, 0).unwrap(),
            t.key(Variable(0).kind_index(), 0)
        );
        assert_eq!(t.node_key(Add, 0).unwrap(), t.key(0, 0));
        assert_eq!(
            t.node_key(Add, 20),
            Err(ZobristError::TreeTooLong { index: 20, max: 20 })
        );
        assert!(matches!(
            t.node_key(Variable(9), 0),
            Err(ZobristError::UnknownFeature { .. })
        ));
        let single = |f| {
            t.hash(&Tree::<f64>::from_symbols(&[Variable(f)]).unwrap())
                .unwrap()
        };
        assert_ne!(single(0), single(1));
    }

    #[test]
    fn full_hash_matches_hand_expansion() {
        let t = table();
        let h = |s, i| t.node_key(s, i).unwrap();
        let expect = h(Mul, 0)
            ^ h(Add, 1)
            ^ h(Variable(0), 2)
            ^ h(Variable(1), 3)
            ^ h(Sub, 4)
            ^ h(Variable(2), 5)
            ^ h(Variable(3), 6);
        assert_eq!(t.hash(&fig5()).unwrap(), expect);
    }

    #[test]
    fn hash_ignores_coefficients_but_not_order() {
        let t = table();
        let a = fig5();
        let b = a.with_coefficients(&[2.0, -1.0, 0.3, 7.0, 1.0, 9.0, 0.0]);
        assert_eq!(t.hash(&a).unwrap(), t.hash(&b).unwrap());
        let xy = Tree::<f64>::from_symbols(&[Add, Variable(0), Variable(1)]).unwrap();
        let yx = Tree::<f64>::from_symbols(&[Add, Variable(1), Variable(0)]).unwrap();
        assert_ne!(t.hash(&xy).unwrap(), t.hash(&yx).unwrap());
    }

    #[test]
    fn too_long_tree_is_rejected() {
        let t = ZobristTable::new(3, 4, 1).unwrap();
        assert!(matches!(
            t.hash(&fig5()),
            Err(ZobristError::TreeTooLong { index: 3, .. })
        ));
    }

    #[test]
    fn crossover_example_update() {
        // swap (x3 - x4) out and x3^2 in
        let t = table();
        let parent = fig5();
        let ph = t.hash(&parent).unwrap();
        let donor = Tree::<f64>::from_symbols(&[Square, Variable(2)]).unwrap();
        let swap = SwapDescriptor::replacement(&parent, ph, 4, donor.nodes());
        assert!(swap.tail.is_empty());
        let h = |s, i| t.node_key(s, i).unwrap();
        let by_hand = ph
            ^ h(Sub, 4)
            ^ h(Variable(2), 5)
            ^ h(Variable(3), 6)
            ^ h(Square, 4)
            ^ h(Variable(2), 5);
        let child = parent.replace_subtree(4, donor.nodes());
        assert_eq!(t.hash_incremental(&swap).unwrap(), by_hand);
        assert_eq!(t.hash(&child).unwrap(), by_hand);
    }

    #[test]
    fn swapping_identical_subtree_is_identity() {
        let t = table();
        let p = fig5();
        let ph = t.hash(&p).unwrap();
        for cut in 0..p.len() {
            let same = p.subtree(cut);
            let swap = SwapDescriptor::replacement(&p, ph, cut, same.nodes());
            assert_eq!(t.hash_incremental(&swap).unwrap(), ph);
        }
    }

    #[test]
    fn length_changing_swap_has_tail() {
        let t = table();
        let p = fig5();
        let ph = t.hash(&p).unwrap();
        let donor = Tree::<f64>::from_symbols(&[Variable(3)]).unwrap();
        let swap = SwapDescriptor::replacement(&p, ph, 1, donor.nodes());
        assert_eq!(swap.tail.len(), 3);
        assert_eq!(swap.tail[0], (4, 2, Sub));
        let child = p.replace_subtree(1, donor.nodes());
        assert_eq!(t.hash_incremental(&swap).unwrap(), t.hash(&child).unwrap());
        assert_eq!(
            t.hash_after_swap(&swap, &child).unwrap(),
            t.hash(&child).unwrap()
        );
    }

    #[test]
    fn point_change() {
        let t = table();
        let p = fig5();
        let ph = t.hash(&p).unwrap();
        let swap = SwapDescriptor::point(ph, 2, Variable(0), Variable(3));
        let mut nodes = p.nodes().to_vec();
        nodes[2].symbol = Variable(3);
        let child = Tree::new(nodes).unwrap();
        assert_eq!(t.hash_incremental(&swap).unwrap(), t.hash(&child).unwrap());
    }

    #[test]
    fn transposition_same_tree_same_hash() {
        // two different edit sequences reaching (x1 + x2) * x3^2
        let t = table();
        let a = fig5().replace_subtree(
            4,
            Tree::<f64>::from_symbols(&[Square, Variable(2)])
                .unwrap()
                .nodes(),
        );
        let base = Tree::<f64>::from_symbols(&[Mul, Variable(0), Square, Variable(2)]).unwrap();
        let b = base.replace_subtree(
            1,
            Tree::<f64>::from_symbols(&[Add, Variable(0), Variable(1)])
                .unwrap()
                .nodes(),
        );
        assert_eq!(a, b);
        assert_eq!(t.hash(&a).unwrap(), t.hash(&b).unwrap());
    }

    proptest! {
        #[test]
        fn xor_algebra(a: u64, b: u64, c: u64) {
            prop_assert_eq!(a ^ b, b ^ a);
            prop_assert_eq!(a ^ (b ^ c), (a ^ b) ^ c);
            prop_assert_eq!(a ^ b ^ b, a);
        }

        #[test]
        fn incremental_equals_full(seed: u64) {
            let t = ZobristTable::new(20, 5, seed).unwrap();
            let creator = TreeCreator::new(5);
            let mut rng = Generator::seed_from_u64(seed);
            let p = creator.create::<f64, _>(&mut rng, 20, 10);
            let q = creator.create::<f64, _>(&mut rng, 20, 10);
            let cut = rng.random_range(0..p.len());
            let room = 20 - (p.len() - p.nodes()[cut].length);
            let fits: Vec<usize> = (0..q.len()).filter(|&j| q.nodes()[j].length <= room).collect();
            let j = fits[rng.random_range(0..fits.len())];
            let donor = &q.nodes()[q.subtree_range(j)];
            let ph = t.hash(&p).unwrap();
            let swap = SwapDescriptor::replacement(&p, ph, cut, donor);
            let child = p.replace_subtree(cut, donor);
            let full = t.hash(&child).unwrap();
            prop_assert_eq!(t.hash_incremental(&swap).unwrap(), full);
            prop_assert_eq!(t.hash_after_swap(&swap, &child).unwrap(), full);
        }
    }
}
