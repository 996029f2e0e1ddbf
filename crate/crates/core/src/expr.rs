//! Expression trees stored as preorder node arrays.
//!
//! Every node records the length of the subtree rooted at it, so the subtree
//! of node `i` is the contiguous range `i..i + nodes[i].length`. Crossover and
//! subtree mutation are therefore plain slice splices.
//!
//! Each node carries a multiplicative coefficient. Constants keep their value
//! in that coefficient and evaluate to it directly. Arithmetic is raw IEEE:
//! `1/0`, `ln|0|` and friends produce non-finite values that the fitness layer
//! maps to the worst objective.

use std::fmt;
use std::ops::Range;

use thiserror::Error;

use crate::data::Dataset;
use crate::scalar::Scalar;

/// Rows are evaluated in blocks of this size to keep the node buffers hot.
pub(crate) const CHUNK: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("malformed preorder sequence at node {index}")]
    Malformed { index: usize },
    #[error("empty tree")]
    Empty,
    #[error("coefficient of node {index} is not finite")]
    NonFiniteCoefficient { index: usize },
    #[error("prediction and target lengths differ ({pred} vs {target})")]
    LengthMismatch { pred: usize, target: usize },
    #[error("need at least two rows, got {0}")]
    TooFewRows(usize),
    #[error("target is constant; coefficient of determination undefined")]
    DegenerateTarget,
    #[error("variable x{index} is out of range for {features} features")]
    FeatureOutOfRange { index: usize, features: usize },
}

/// Primitive symbols: nine functions plus the two terminal kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Add,
    Sub,
    Mul,
    Div,
    Exp,
    LogAbs,
    Sin,
    SqrtAbs,
    Square,
    Constant,
    /// 0-based feature column.
    Variable(usize),
}

impl Symbol {
    /// Number of symbol kinds, i.e. rows of the Zobrist table.
    pub const KINDS: usize = 11;

    pub const FUNCTIONS: [Symbol; 9] = [
        Symbol::Add,
        Symbol::Sub,
        Symbol::Mul,
        Symbol::Div,
        Symbol::Exp,
        Symbol::LogAbs,
        Symbol::Sin,
        Symbol::SqrtAbs,
        Symbol::Square,
    ];
    pub const BINARY: [Symbol; 4] = [Symbol::Add, Symbol::Sub, Symbol::Mul, Symbol::Div];
    pub const UNARY: [Symbol; 5] = [
        Symbol::Exp,
        Symbol::LogAbs,
        Symbol::Sin,
        Symbol::SqrtAbs,
        Symbol::Square,
    ];

    pub fn arity(self) -> usize {
        match self {
            Symbol::Add | Symbol::Sub | Symbol::Mul | Symbol::Div => 2,
            Symbol::Exp | Symbol::LogAbs | Symbol::Sin | Symbol::SqrtAbs | Symbol::Square => 1,
            Symbol::Constant | Symbol::Variable(_) => 0,
        }
    }

    /// Row index in the Zobrist key matrix. All variables share one row and
    /// are told apart by their per-feature identifier.
    pub fn kind_index(self) -> usize {
        match self {
            Symbol::Add => 0,
            Symbol::Sub => 1,
            Symbol::Mul => 2,
            Symbol::Div => 3,
            Symbol::Exp => 4,
            Symbol::LogAbs => 5,
            Symbol::Sin => 6,
            Symbol::SqrtAbs => 7,
            Symbol::Square => 8,
            Symbol::Constant => 9,
            Symbol::Variable(_) => 10,
        }
    }

    pub fn is_function(self) -> bool {
        self.arity() > 0
    }

    pub fn is_variable(self) -> bool {
        matches!(self, Symbol::Variable(_))
    }

    /// Size of the primitive set for a dataset with `features` columns.
    pub fn primitive_count(features: usize) -> usize {
        Self::FUNCTIONS.len() + 1 + features
    }

    fn token(self) -> &'static str {
        match self {
            Symbol::Add => "add",
            Symbol::Sub => "sub",
            Symbol::Mul => "mul",
            Symbol::Div => "div",
            Symbol::Exp => "exp",
            Symbol::LogAbs => "logabs",
            Symbol::Sin => "sin",
            Symbol::SqrtAbs => "sqrtabs",
            Symbol::Square => "square",
            Symbol::Constant => "const",
            Symbol::Variable(_) => "var",
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Variable(i) => write!(f, "var:{i}"),
            s => f.write_str(s.token()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node<T> {
    pub symbol: Symbol,
    pub coefficient: T,
    /// Node count of the subtree rooted here, itself included.
    pub length: usize,
}

impl<T: Scalar> Node<T> {
    pub fn new(symbol: Symbol, coefficient: T) -> Self {
        Node {
            symbol,
            coefficient,
            length: 1,
        }
    }
}

/// An expression in preorder. Immutable once built; variation operators
/// produce new trees.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    /// Builds a tree from preorder nodes, recomputing every subtree length
    /// from symbol arities.
    pub fn new(mut nodes: Vec<Node<T>>) -> Result<Self, ExprError> {
        if nodes.is_empty() {
            return Err(ExprError::Empty);
        }
        let mut stack: Vec<usize> = Vec::with_capacity(nodes.len());
        for i in (0..nodes.len()).rev() {
            if !nodes[i].coefficient.is_finite() {
                return Err(ExprError::NonFiniteCoefficient { index: i });
            }
            let arity = nodes[i].symbol.arity();
            if stack.len() < arity {
                return Err(ExprError::Malformed { index: i });
            }
            let mut length = 1;
            for _ in 0..arity {
                length += stack.pop().unwrap_or_default();
            }
            nodes[i].length = length;
            stack.push(length);
        }
        if stack.len() != 1 {
            return Err(ExprError::Malformed { index: 0 });
        }
        Ok(Tree { nodes })
    }

    /// Preorder symbols with every coefficient set to one.
    pub fn from_symbols(symbols: &[Symbol]) -> Result<Self, ExprError> {
        Self::new(symbols.iter().map(|&s| Node::new(s, T::one())).collect())
    }

    /// Wraps nodes whose lengths are already consistent.
    pub(crate) fn from_nodes_unchecked(nodes: Vec<Node<T>>) -> Self {
        debug_assert!(Tree::new(nodes.clone()).map(|t| t.nodes == nodes) == Ok(true));
        Tree { nodes }
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn coefficients(&self) -> impl Iterator<Item = T> + '_ {
        self.nodes.iter().map(|n| n.coefficient)
    }

    /// Same structure with the given coefficients, in preorder.
    pub fn with_coefficients(&self, coefficients: &[T]) -> Self {
        assert_eq!(coefficients.len(), self.len());
        let nodes = self
            .nodes
            .iter()
            .zip(coefficients)
            .map(|(n, &c)| Node {
                coefficient: c,
                ..*n
            })
            .collect();
        Tree { nodes }
    }

    pub fn set_coefficient(&mut self, index: usize, value: T) {
        self.nodes[index].coefficient = value;
    }

    pub fn subtree_range(&self, i: usize) -> Range<usize> {
        i..i + self.nodes[i].length
    }

    pub fn subtree(&self, i: usize) -> Tree<T> {
        Tree {
            nodes: self.nodes[self.subtree_range(i)].to_vec(),
        }
    }

    /// Indices of the children of node `i`, left to right.
    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let mut next = i + 1;
        (0..self.nodes[i].symbol.arity()).map(move |_| {
            let c = next;
            next += self.nodes[c].length;
            c
        })
    }

    /// Height of every subtree; a leaf has height 1.
    pub fn heights(&self) -> Vec<usize> {
        let mut h = vec![1; self.len()];
        for i in (0..self.len()).rev() {
            let m = self.children(i).map(|c| h[c]).max().unwrap_or(0);
            h[i] = m + 1;
        }
        h
    }

    /// Level of every node; the root is at level 1.
    pub fn levels(&self) -> Vec<usize> {
        let mut lv = vec![1; self.len()];
        for i in 0..self.len() {
            let l = lv[i] + 1;
            let mut c = i + 1;
            for _ in 0..self.nodes[i].symbol.arity() {
                lv[c] = l;
                c += self.nodes[c].length;
            }
        }
        lv
    }

    pub fn depth(&self) -> usize {
        self.heights()[0]
    }

    /// Copy of `self` with the subtree at `cut` replaced by `donor`, which
    /// must itself be a well-formed subtree.
    pub fn replace_subtree(&self, cut: usize, donor: &[Node<T>]) -> Tree<T> {
        let old = self.subtree_range(cut);
        let delta = donor.len() as isize - old.len() as isize;
        let mut nodes = Vec::with_capacity((self.len() as isize + delta) as usize);
        nodes.extend_from_slice(&self.nodes[..cut]);
        nodes.extend_from_slice(donor);
        nodes.extend_from_slice(&self.nodes[old.end..]);
        if delta != 0 {
            for (j, node) in nodes[..cut].iter_mut().enumerate() {
                if j + node.length > cut {
                    node.length = (node.length as isize + delta) as usize;
                }
            }
        }
        Tree::from_nodes_unchecked(nodes)
    }

    /// Preorder `symbol[:feature]` tokens without coefficients; equal strings
    /// mean structurally identical trees.
    pub fn canonical(&self) -> String {
        let mut s = String::with_capacity(self.len() * 6);
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&n.symbol.to_string());
        }
        s
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n.symbol {
                Symbol::Variable(i) => Some(i),
                _ => None,
            })
            .max()
    }

    pub fn check_features(&self, features: usize) -> Result<(), ExprError> {
        match self.max_feature() {
            Some(index) if index >= features => {
                Err(ExprError::FeatureOutOfRange { index, features })
            }
            _ => Ok(()),
        }
    }

    /// Predictions for `rows` of `data`.
    ///
    /// Panics if `rows` exceeds the dataset or a variable has no column.
    pub fn evaluate(&self, data: &Dataset<T>, rows: Range<usize>) -> Vec<T> {
        let mut out = Vec::with_capacity(rows.len());
        let mut buf = vec![T::zero(); self.len() * CHUNK];
        let mut start = rows.start;
        while start < rows.end {
            let end = (start + CHUNK).min(rows.end);
            self.eval_chunk(data, start..end, &mut buf, None);
            out.extend_from_slice(&buf[..end - start]);
            start = end;
        }
        out
    }

    /// Evaluates one block of at most [`CHUNK`] rows. Node `i` writes its
    /// output to `out[i * CHUNK..]`; when `raw` is given the value before the
    /// coefficient is applied goes to `raw[i * CHUNK..]`.
    pub(crate) fn eval_chunk(
        &self,
        data: &Dataset<T>,
        rows: Range<usize>,
        out: &mut [T],
        mut raw: Option<&mut [T]>,
    ) {
        let m = rows.len();
        debug_assert!(m <= CHUNK);
        for i in (0..self.len()).rev() {
            let node = &self.nodes[i];
            let (head, tail) = out.split_at_mut((i + 1) * CHUNK);
            let dst = &mut head[i * CHUNK..i * CHUNK + m];
            let child = |c: usize| &tail[(c - i - 1) * CHUNK..(c - i - 1) * CHUNK + m];
            match node.symbol {
                Symbol::Constant => {
                    // the value is the coefficient itself
                    dst.fill(node.coefficient);
                    if let Some(raw) = raw.as_deref_mut() {
                        raw[i * CHUNK..i * CHUNK + m].fill(T::one());
                    }
                    continue;
                }
                Symbol::Variable(f) => dst.copy_from_slice(&data.column(f)[rows.clone()]),
                Symbol::Add | Symbol::Sub | Symbol::Mul | Symbol::Div => {
                    let a = child(i + 1);
                    let b = child(i + 1 + self.nodes[i + 1].length);
                    binary(node.symbol, dst, a, b);
                }
                s => unary(s, dst, child(i + 1)),
            }
            if let Some(raw) = raw.as_deref_mut() {
                raw[i * CHUNK..i * CHUNK + m].copy_from_slice(dst);
            }
            let c = node.coefficient;
            if c != T::one() {
                dst.iter_mut().for_each(|v| *v *= c);
            }
        }
    }

    /// Infix rendering with 1-based default variable names `x1, x2, ...`.
    pub fn to_infix(&self) -> String {
        self.to_infix_with(&[])
    }

    /// Infix rendering using `names` for variables where available.
    pub fn to_infix_with(&self, names: &[String]) -> String {
        let mut s = String::new();
        self.write_infix(0, names, &mut s);
        s
    }

    fn write_infix(&self, i: usize, names: &[String], s: &mut String) {
        use std::fmt::Write;
        let node = &self.nodes[i];
        let c = node.coefficient;
        let scaled = c != T::one();
        match node.symbol {
            Symbol::Constant => {
                let _ = write!(s, "{c}");
                return;
            }
            Symbol::Variable(f) => {
                if scaled {
                    let _ = write!(s, "{c} * ");
                }
                match names.get(f) {
                    Some(n) => s.push_str(n),
                    None => {
                        let _ = write!(s, "x{}", f + 1);
                    }
                }
                return;
            }
            _ => {}
        }
        if scaled {
            let _ = write!(s, "{c} * ");
        }
        let mut kids = self.children(i);
        match node.symbol {
            Symbol::Add | Symbol::Sub | Symbol::Mul | Symbol::Div => {
                let op = match node.symbol {
                    Symbol::Add => " + ",
                    Symbol::Sub => " - ",
                    Symbol::Mul => " * ",
                    _ => " / ",
                };
                let (a, b) = (kids.next().unwrap_or(i), kids.next().unwrap_or(i));
                s.push('(');
                self.write_infix(a, names, s);
                s.push_str(op);
                self.write_infix(b, names, s);
                s.push(')');
            }
            Symbol::Square => {
                s.push('(');
                self.write_infix(i + 1, names, s);
                s.push_str(")^2");
            }
            sym => {
                let name = match sym {
                    Symbol::Exp => "exp",
                    Symbol::LogAbs => "log(abs",
                    Symbol::Sin => "sin",
                    _ => "sqrt(abs",
                };
                s.push_str(name);
                s.push('(');
                self.write_infix(i + 1, names, s);
                s.push(')');
                if matches!(sym, Symbol::LogAbs | Symbol::SqrtAbs) {
                    s.push(')');
                }
            }
        }
    }
}

impl<T: Scalar> fmt::Display for Tree<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_infix())
    }
}

#[inline]
fn binary<T: Scalar>(op: Symbol, dst: &mut [T], a: &[T], b: &[T]) {
    let it = dst.iter_mut().zip(a.iter().zip(b));
    match op {
        Symbol::Add => it.for_each(|(d, (&x, &y))| *d = x + y),
        Symbol::Sub => it.for_each(|(d, (&x, &y))| *d = x - y),
        Symbol::Mul => it.for_each(|(d, (&x, &y))| *d = x * y),
        Symbol::Div => it.for_each(|(d, (&x, &y))| *d = x / y),
        _ => unreachable!("not a binary symbol"),
    }
}

#[inline]
fn unary<T: Scalar>(op: Symbol, dst: &mut [T], a: &[T]) {
    let it = dst.iter_mut().zip(a);
    match op {
        Symbol::Exp => it.for_each(|(d, &x)| *d = x.exp()),
        Symbol::LogAbs => it.for_each(|(d, &x)| *d = x.abs().ln()),
        Symbol::Sin => it.for_each(|(d, &x)| *d = x.sin()),
        Symbol::SqrtAbs => it.for_each(|(d, &x)| *d = x.abs().sqrt()),
        Symbol::Square => it.for_each(|(d, &x)| *d = x * x),
        _ => unreachable!("not a unary symbol"),
    }
}

/// Coefficient of determination `1 - SSE/SST`.
///
/// Any non-finite prediction yields negative infinity, the worst value.
pub fn r_squared<T: Scalar>(pred: &[T], target: &[T]) -> Result<T, ExprError> {
    if pred.len() != target.len() {
        return Err(ExprError::LengthMismatch {
            pred: pred.len(),
            target: target.len(),
        });
    }
    if target.len() < 2 {
        return Err(ExprError::TooFewRows(target.len()));
    }
    let sst = total_sum_of_squares(target);
    if !(sst > T::zero()) {
        return Err(ExprError::DegenerateTarget);
    }
    if pred.iter().any(|p| !p.is_finite()) {
        return Ok(T::neg_infinity());
    }
    Ok(T::one() - sum_squared_error(pred, target) / sst)
}

pub fn sum_squared_error<T: Scalar>(pred: &[T], target: &[T]) -> T {
    pred.iter()
        .zip(target)
        .map(|(&p, &y)| (y - p) * (y - p))
        .sum()
}

pub fn total_sum_of_squares<T: Scalar>(target: &[T]) -> T {
    let n = T::lit(target.len() as f64);
    let mean = target.iter().copied().sum::<T>() / n;
    target.iter().map(|&y| (y - mean) * (y - mean)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use Symbol::*;

    fn data(cols: Vec<Vec<f64>>) -> Dataset<f64> {
        let n = cols[0].len();
        let names = (0..cols.len()).map(|i| format!("x{}", i + 1)).collect();
        Dataset::from_columns(names, cols, "y".into(), vec![0.0; n], 0..n, 0..0).unwrap()
    }

    #[test]
    fn arity_table() {
        for s in Symbol::BINARY {
            assert_eq!(s.arity(), 2);
        }
        for s in Symbol::UNARY {
            assert_eq!(s.arity(), 1);
        }
        assert_eq!(Constant.arity(), 0);
        assert_eq!(Variable(3).arity(), 0);
        let kinds: std::collections::BTreeSet<_> = Symbol::FUNCTIONS
            .iter()
            .chain(&[Constant, Variable(0), Variable(7)])
            .map(|s| s.kind_index())
            .collect();
        assert_eq!(kinds.len(), Symbol::KINDS);
    }

    #[test]
    fn lengths_are_recomputed() {
        let t = Tree::<f64>::from_symbols(&[
            Mul,
            Add,
            Variable(0),
            Variable(1),
            Sub,
            Variable(2),
            Variable(3),
        ])
        .unwrap();
        let lens: Vec<_> = t.nodes().iter().map(|n| n.length).collect();
        assert_eq!(lens, vec![7, 3, 1, 1, 3, 1, 1]);
        assert_eq!(t.subtree_range(4), 4..7);
        assert_eq!(t.depth(), 3);
        assert_eq!(t.levels(), vec![1, 2, 3, 3, 2, 3, 3]);
        assert_eq!(t.children(0).collect::<Vec<_>>(), vec![1, 4]);
    }

    #[test]
    fn malformed_sequences_are_rejected() {
        assert_eq!(Tree::<f64>::from_symbols(&[]), Err(ExprError::Empty));
        assert!(matches!(
            Tree::<f64>::from_symbols(&[Add, Variable(0)]),
            Err(ExprError::Malformed { .. })
        ));
        assert!(matches!(
            Tree::<f64>::from_symbols(&[Variable(0), Variable(1)]),
            Err(ExprError::Malformed { .. })
        ));
        let bad = vec![Node::new(Constant, f64::NAN)];
        assert_eq!(
            Tree::new(bad),
            Err(ExprError::NonFiniteCoefficient { index: 0 })
        );
    }

    #[test]
    fn constant_evaluates_to_its_coefficient() {
        let t = Tree::new(vec![Node::new(Constant, 3.5)]).unwrap();
        let d = data(vec![vec![1.0, -2.0, 7.0]]);
        assert_eq!(t.evaluate(&d, 0..3), vec![3.5; 3]);
    }

    #[test]
    fn crossover_child_expression() {
        // (x1 + x2) * x3^2 at x = (1, 2, 2)
        let t =
            Tree::<f64>::from_symbols(&[Mul, Add, Variable(0), Variable(1), Square, Variable(2)])
                .unwrap();
        let d = data(vec![vec![1.0], vec![2.0], vec![2.0]]);
        assert_eq!(t.evaluate(&d, 0..1), vec![12.0]);
    }

    #[test]
    fn log_of_zero_is_negative_infinity() {
        let t = Tree::new(vec![Node::new(LogAbs, 1.0), Node::new(Constant, 0.0)]).unwrap();
        let d = data(vec![vec![0.0, 1.0]]);
        let p = t.evaluate(&d, 0..2);
        assert!(p.iter().all(|v| *v == f64::NEG_INFINITY));
        assert_eq!(p[0], 0.0f64.abs().ln());
    }

    #[test]
    fn coefficients_scale_node_outputs() {
        // 2 * (3 * x1 + 0.5)
        let t = Tree::new(vec![
            Node::new(Add, 2.0),
            Node::new(Variable(0), 3.0),
            Node::new(Constant, 0.5),
        ])
        .unwrap();
        let d = data(vec![vec![1.0, 2.0]]);
        assert_eq!(t.evaluate(&d, 0..2), vec![7.0, 13.0]);
        assert_eq!(t.to_infix(), "2 * (3 * x1 + 0.5)");
    }

    #[test]
    fn evaluation_spans_chunks() {
        let n = 3 * CHUNK + 17;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        let t = Tree::<f64>::from_symbols(&[Sin, Variable(0)]).unwrap();
        let d = data(vec![x.clone()]);
        let p = t.evaluate(&d, 5..n);
        assert_eq!(p.len(), n - 5);
        for (k, v) in p.iter().enumerate() {
            assert_eq!(*v, x[k + 5].sin());
        }
    }

    #[test]
    fn raw_ops_match_scalar_semantics() {
        let x = vec![-4.0, 0.0, 2.5];
        let d = data(vec![x.clone(), vec![0.0, 0.0, 2.0]]);
        for (s, f) in [
            (Exp, f64::exp as fn(f64) -> f64),
            (Sin, f64::sin),
            (Square, |v: f64| v * v),
            (SqrtAbs, |v: f64| v.abs().sqrt()),
            (LogAbs, |v: f64| v.abs().ln()),
        ] {
            let t = Tree::<f64>::from_symbols(&[s, Variable(0)]).unwrap();
            let p = t.evaluate(&d, 0..3);
            for (a, b) in p.iter().zip(&x) {
                assert_eq!(a.to_bits(), f(*b).to_bits(), "{s}");
            }
        }
        let div = Tree::<f64>::from_symbols(&[Div, Variable(0), Variable(1)]).unwrap();
        let p = div.evaluate(&d, 0..3);
        assert_eq!(p[0], f64::NEG_INFINITY);
        assert!(p[1].is_nan());
        assert_eq!(p[2], 1.25);
    }

    #[test]
    fn replace_subtree_fixes_ancestor_lengths() {
        let t = Tree::<f64>::from_symbols(&[
            Mul,
            Add,
            Variable(0),
            Variable(1),
            Sub,
            Variable(2),
            Variable(3),
        ])
        .unwrap();
        let donor = Tree::<f64>::from_symbols(&[Square, Variable(2)]).unwrap();
        let child = t.replace_subtree(4, donor.nodes());
        let expect =
            Tree::<f64>::from_symbols(&[Mul, Add, Variable(0), Variable(1), Square, Variable(2)])
                .unwrap();
        assert_eq!(child, expect);
        let grown = t.replace_subtree(2, t.nodes());
        assert_eq!(grown.len(), 13);
        assert_eq!(Tree::new(grown.nodes().to_vec()).unwrap(), grown);
    }

    #[test]
    fn canonical_ignores_coefficients() {
        let a = Tree::new(vec![
            Node::new(Add, 1.0),
            Node::new(Variable(0), 2.0),
            Node::new(Constant, 5.0),
        ])
        .unwrap();
        let b = a.with_coefficients(&[0.5, -1.0, 9.0]);
        assert_eq!(a.canonical(), "add var:0 const");
        assert_eq!(a.canonical(), b.canonical());
    }

    #[test]
    fn r_squared_cases() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_eq!(r_squared(&[2.5; 4], &y).unwrap(), 0.0);
        assert_eq!(
            r_squared(&[1.0, f64::NAN, 3.0, 4.0], &y).unwrap(),
            f64::NEG_INFINITY
        );
        assert_eq!(
            r_squared(&[1.0; 3], &[2.0; 3]),
            Err(ExprError::DegenerateTarget)
        );
        assert!(matches!(
            r_squared(&[1.0; 3], &y),
            Err(ExprError::LengthMismatch { .. })
        ));
        assert_eq!(r_squared(&[1.0], &[1.0]), Err(ExprError::TooFewRows(1)));
    }

    #[test]
    fn works_in_single_precision() {
        let t = Tree::new(vec![
            Node::new(Mul, 1.0f32),
            Node::new(Variable(0), 2.0),
            Node::new(Constant, 0.25),
        ])
        .unwrap();
        let d = Dataset::from_columns(
            vec!["x".into()],
            vec![vec![4.0f32, 8.0]],
            "y".into(),
            vec![0.0, 0.0],
            0..2,
            0..0,
        )
        .unwrap();
        assert_eq!(t.evaluate(&d, 0..2), vec![2.0f32, 4.0]);
    }
}
