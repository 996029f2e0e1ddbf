//! Balanced random tree creation.
//!
//! A target length is drawn uniformly, then open child slots are filled
//! breadth-first. A slot becomes a function whenever the remaining length
//! budget (and the depth limit) leaves room for its children, otherwise a
//! terminal. Filling breadth-first keeps the shape bushy rather than
//! spindly, and the greedy budget rule hits the target length exactly unless
//! the depth limit intervenes.

use std::collections::VecDeque;

use rand::Rng;

use crate::expr::{Node, Symbol, Tree};
use crate::scalar::Scalar;

/// Range of initial constant values.
pub const CONSTANT_RANGE: (f64, f64) = (-1.0, 1.0);

#[derive(Clone, Debug)]
pub struct TreeCreator {
    features: usize,
}

impl TreeCreator {
    pub fn new(features: usize) -> Self {
        TreeCreator { features }
    }

    pub fn features(&self) -> usize {
        self.features
    }

    /// Random tree of uniform length in `1..=max_length`, depth at most
    /// `max_depth`.
    pub fn create<T: Scalar, R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        max_length: usize,
        max_depth: usize,
    ) -> Tree<T> {
        let target = rng.random_range(1..=max_length.max(1));
        self.create_with_length(rng, target, max_depth)
    }

    pub fn create_with_length<T: Scalar, R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        target: usize,
        max_depth: usize,
    ) -> Tree<T> {
        Tree::from_nodes_unchecked(self.create_nodes(rng, target.max(1), max_depth.max(1)))
    }

    fn create_nodes<T: Scalar, R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        target: usize,
        max_depth: usize,
    ) -> Vec<Node<T>> {
        struct Proto {
            symbol: Symbol,
            children: Vec<usize>,
        }
        let mut arena: Vec<Proto> = Vec::with_capacity(target);
        // (parent arena index, level of the slot)
        let mut slots: VecDeque<(Option<usize>, usize)> = VecDeque::from([(None, 1)]);
        while let Some((parent, level)) = slots.pop_front() {
            // every open slot will hold at least one node
            let lower_bound = arena.len() + 1 + slots.len();
            let budget = target.saturating_sub(lower_bound);
            let symbol = if level < max_depth && budget >= 1 {
                let pool: &[Symbol] = if budget >= 2 {
                    &Symbol::FUNCTIONS
                } else {
                    &Symbol::UNARY
                };
                pool[rng.random_range(0..pool.len())]
            } else {
                self.random_terminal(rng)
            };
            let id = arena.len();
            arena.push(Proto {
                symbol,
                children: Vec::with_capacity(symbol.arity()),
            });
            if let Some(p) = parent {
                arena[p].children.push(id);
            }
            for _ in 0..symbol.arity() {
                slots.push_back((Some(id), level + 1));
            }
        }
        let mut nodes = Vec::with_capacity(arena.len());
        let mut lengths = vec![1usize; arena.len()];
        for id in (0..arena.len()).rev() {
            lengths[id] += arena[id]
                .children
                .iter()
                .map(|&c| lengths[c])
                .sum::<usize>();
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let symbol = arena[id].symbol;
            nodes.push(Node {
                symbol,
                coefficient: self.initial_coefficient(rng, symbol),
                length: lengths[id],
            });
            stack.extend(arena[id].children.iter().rev());
        }
        nodes
    }

    /// Constant or variable with equal probability; variables pick a
    /// feature uniformly.
    pub fn random_terminal<R: Rng + ?Sized>(&self, rng: &mut R) -> Symbol {
        if self.features == 0 || rng.random_bool(0.5) {
            Symbol::Constant
        } else {
            Symbol::Variable(rng.random_range(0..self.features))
        }
    }

    pub fn initial_coefficient<T: Scalar, R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        symbol: Symbol,
    ) -> T {
        match symbol {
            Symbol::Constant => T::lit(rng.random_range(CONSTANT_RANGE.0..CONSTANT_RANGE.1)),
            _ => T::one(),
        }
    }

    pub fn terminal_node<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> Node<T> {
        let s = self.random_terminal(rng);
        Node::new(s, self.initial_coefficient(rng, s))
    }
}
