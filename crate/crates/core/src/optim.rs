//! Coefficient fitting by Levenberg-Marquardt.
//!
//! Every node coefficient is a parameter. Derivatives are exact: a forward
//! pass stores each node's value before and after its coefficient is applied,
//! and a reverse pass propagates adjoints from the root. The derivative with
//! respect to the coefficient of node `i` is its adjoint times its
//! pre-coefficient value.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::expr::{Symbol, Tree, CHUNK};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("lambda_init must be positive, got {0}")]
    LambdaInit(f64),
    #[error("need lambda_up > 1 > lambda_down > 0, got up={up} down={down}")]
    LambdaFactors { up: f64, down: f64 },
    #[error("tolerance must be non-negative, got {0}")]
    Tolerance(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub max_iterations: usize,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Stop once an accepted step improves SSE by less than this fraction.
    pub tolerance: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            max_iterations: 10,
            lambda_init: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            tolerance: 1e-8,
        }
    }
}

impl LmConfig {
    pub fn with_iterations(max_iterations: usize) -> Self {
        LmConfig {
            max_iterations,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if !(self.lambda_init > 0.0) {
            return Err(OptimError::LambdaInit(self.lambda_init));
        }
        if !(self.lambda_up > 1.0 && self.lambda_down > 0.0 && self.lambda_down < 1.0) {
            return Err(OptimError::LambdaFactors {
                up: self.lambda_up,
                down: self.lambda_down,
            });
        }
        if !(self.tolerance >= 0.0) {
            return Err(OptimError::Tolerance(self.tolerance));
        }
        Ok(())
    }
}

/// Column-major `rows x coefficients` matrix of prediction derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Jacobian<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[col * self.rows + row]
    }

    pub fn column(&self, col: usize) -> &[T] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }
}

/// Four-lane dot product; the split accumulators let the loop vectorize.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let chunks = n / 4;
    for k in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..n {
        s += a[k] * b[k];
    }
    s
}

/// Sum of squared residuals `y - pred`, with the same lane split as [`dot`].
#[inline]
pub(crate) fn sse<T: Scalar>(pred: &[T], y: &[T]) -> T {
    let n = pred.len().min(y.len());
    let mut acc = [T::zero(); 4];
    let chunks = n / 4;
    for k in 0..chunks {
        for l in 0..4 {
            let d = y[4 * k + l] - pred[4 * k + l];
            acc[l] += d * d;
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..n {
        let d = y[k] - pred[k];
        s += d * d;
    }
    s
}

/// Derivatives of the predictions on `rows` with respect to every node
/// coefficient, in preorder.
pub fn jacobian<T: Scalar>(tree: &Tree<T>, data: &Dataset<T>, rows: Range<usize>) -> Jacobian<T> {
    predict_and_jacobian(tree, data, rows).1
}

pub fn predict_and_jacobian<T: Scalar>(
    tree: &Tree<T>,
    data: &Dataset<T>,
    rows: Range<usize>,
) -> (Vec<T>, Jacobian<T>) {
    let n = rows.len();
    let p = tree.len();
    let mut jac = vec![T::zero(); n * p];
    let mut pred = Vec::with_capacity(n);
    let mut work = Workspace::new(p);
    sweep(tree, data, rows, &mut work, |base, pc, jc| {
        let m = pc.len();
        pred.extend_from_slice(pc);
        for i in 0..p {
            jac[i * n + base..i * n + base + m].copy_from_slice(&jc[i * CHUNK..i * CHUNK + m]);
        }
    });
    (
        pred,
        Jacobian {
            rows: n,
            cols: p,
            data: jac,
        },
    )
}

/// `(J^T J, J^T r)` with `r = y - prediction`, accumulated block by block so
/// the full Jacobian is never stored. `J^T J` is row-major.
pub fn normal_equations<T: Scalar>(
    tree: &Tree<T>,
    data: &Dataset<T>,
    rows: Range<usize>,
) -> (Vec<T>, Vec<T>) {
    normal_equations_in(tree, data, rows, &mut Workspace::new(tree.len()))
}

fn normal_equations_in<T: Scalar>(
    tree: &Tree<T>,
    data: &Dataset<T>,
    rows: Range<usize>,
    work: &mut Workspace<T>,
) -> (Vec<T>, Vec<T>) {
    let p = tree.len();
    let y = &data.target()[rows.clone()];
    let mut jtj = vec![T::zero(); p * p];
    let mut jtr = vec![T::zero(); p];
    let mut residual = [T::zero(); CHUNK];
    sweep(tree, data, rows, work, |base, pc, jc| {
        let m = pc.len();
        for ((r, &t), &v) in residual.iter_mut().zip(&y[base..base + m]).zip(pc) {
            *r = t - v;
        }
        let col = |j: usize| &jc[j * CHUNK..j * CHUNK + m];
        for j in 0..p {
            let cj = col(j);
            jtr[j] += dot(cj, &residual[..m]);
            for k in 0..=j {
                jtj[j * p + k] += dot(cj, col(k));
            }
        }
    });
    for j in 0..p {
        for k in 0..j {
            jtj[k * p + j] = jtj[j * p + k];
        }
    }
    (jtj, jtr)
}

/// Training SSE of `tree` on `rows`, block by block.
fn sse_in<T: Scalar>(
    tree: &Tree<T>,
    data: &Dataset<T>,
    rows: Range<usize>,
    work: &mut Workspace<T>,
) -> T {
    let y = data.target();
    let mut total = T::zero();
    let mut start = rows.start;
    while start < rows.end {
        let end = (start + CHUNK).min(rows.end);
        tree.eval_chunk(data, start..end, &mut work.out, None);
        total += sse(&work.out[..end - start], &y[start..end]);
        start = end;
    }
    total
}

/// Scratch blocks of `p * CHUNK` values for one tree size.
struct Workspace<T> {
    out: Vec<T>,
    raw: Vec<T>,
    adj: Vec<T>,
    jac: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(p: usize) -> Self {
        let block = || vec![T::zero(); p * CHUNK];
        Workspace {
            out: block(),
            raw: block(),
            adj: block(),
            jac: block(),
        }
    }
}

/// Forward and reverse pass over `rows` in blocks of at most [`CHUNK`].
/// `sink` receives the block offset, the block predictions and the block
/// Jacobian, in which coefficient `i` occupies `jac[i * CHUNK..]`.
fn sweep<T: Scalar>(
    tree: &Tree<T>,
    data: &Dataset<T>,
    rows: Range<usize>,
    work: &mut Workspace<T>,
    mut sink: impl FnMut(usize, &[T], &[T]),
) {
    let p = tree.len();
    let nodes = tree.nodes();
    let Workspace { out, raw, adj, jac } = work;
    let mut start = rows.start;
    while start < rows.end {
        let end = (start + CHUNK).min(rows.end);
        let m = end - start;
        tree.eval_chunk(data, start..end, out, Some(raw));
        adj[..m].fill(T::one());
        for i in 0..p {
            let (head, tail) = adj.split_at_mut((i + 1) * CHUNK);
            let ai = &head[i * CHUNK..i * CHUNK + m];
            let gi = &raw[i * CHUNK..i * CHUNK + m];
            for ((d, &a), &g) in jac[i * CHUNK..i * CHUNK + m].iter_mut().zip(ai).zip(gi) {
                *d = a * g;
            }
            let sym = nodes[i].symbol;
            if sym.arity() == 0 {
                continue;
            }
            let c = nodes[i].coefficient;
            let first = i + 1;
            let o = |k: usize| &out[k * CHUNK..k * CHUNK + m];
            let slot = |k: usize| (k - i - 1) * CHUNK;
            match sym {
                Symbol::Add | Symbol::Sub => {
                    let second = first + nodes[first].length;
                    let (sa, sb) = (slot(first), slot(second));
                    let sign = if sym == Symbol::Add { c } else { -c };
                    for r in 0..m {
                        let w = ai[r] * c;
                        tail[sa + r] = w;
                        tail[sb + r] = ai[r] * sign;
                    }
                }
                Symbol::Mul => {
                    let second = first + nodes[first].length;
                    let (oa, ob) = (o(first), o(second));
                    let (sa, sb) = (slot(first), slot(second));
                    for r in 0..m {
                        let w = ai[r] * c;
                        tail[sa + r] = w * ob[r];
                        tail[sb + r] = w * oa[r];
                    }
                }
                Symbol::Div => {
                    let second = first + nodes[first].length;
                    let (oa, ob) = (o(first), o(second));
                    let (sa, sb) = (slot(first), slot(second));
                    for r in 0..m {
                        let w = ai[r] * c;
                        tail[sa + r] = w / ob[r];
                        tail[sb + r] = -w * oa[r] / (ob[r] * ob[r]);
                    }
                }
                Symbol::Exp => {
                    let sa = slot(first);
                    for r in 0..m {
                        tail[sa + r] = ai[r] * c * gi[r];
                    }
                }
                Symbol::LogAbs => {
                    let (oa, sa) = (o(first), slot(first));
                    for r in 0..m {
                        tail[sa + r] = ai[r] * c * oa[r].recip();
                    }
                }
                Symbol::Sin => {
                    let (oa, sa) = (o(first), slot(first));
                    for r in 0..m {
                        tail[sa + r] = ai[r] * c * oa[r].cos();
                    }
                }
                Symbol::SqrtAbs => {
                    let (oa, sa) = (o(first), slot(first));
                    for r in 0..m {
                        tail[sa + r] = ai[r] * c * (oa[r].signum() / (gi[r] + gi[r]));
                    }
                }
                _ => {
                    let (oa, sa) = (o(first), slot(first));
                    for r in 0..m {
                        let x = oa[r];
                        tail[sa + r] = ai[r] * c * (x + x);
                    }
                }
            }
        }
        sink(start - rows.start, &out[..m], &jac[..p * CHUNK]);
        start = end;
    }
}

#[derive(Clone, Debug)]
pub struct LmOutcome<T> {
    pub tree: Tree<T>,
    /// Training SSE of `tree`.
    pub sse: T,
    /// Iterations performed, accepted and rejected.
    pub iterations: usize,
    /// Residual passes plus Jacobian passes.
    pub evaluations: usize,
    /// SSE at the start and after every accepted step.
    pub history: Vec<T>,
}

/// Fits the coefficients of `tree` to the target on `rows`.
///
/// Each iteration solves `(J^T J + lambda * diag(J^T J)) d = J^T r` by
/// Cholesky and accepts the step when it lowers the SSE, shrinking lambda;
/// otherwise lambda grows and the coefficients stay. A failed factorization
/// counts as a rejected step.
pub fn levenberg_marquardt<T: Scalar>(
    tree: &Tree<T>,
    data: &Dataset<T>,
    rows: Range<usize>,
    cfg: &LmConfig,
) -> LmOutcome<T> {
    let mut work = Workspace::new(tree.len());
    let mut current = tree.clone();
    let mut err = sse_in(&current, data, rows.clone(), &mut work);
    let mut out = LmOutcome {
        tree: tree.clone(),
        sse: err,
        iterations: 0,
        evaluations: 1,
        history: vec![err],
    };
    if cfg.max_iterations == 0 || !err.is_finite() || err == T::zero() {
        return out;
    }
    let p = current.len();
    let tol = T::lit(cfg.tolerance);
    let (up, down) = (T::lit(cfg.lambda_up), T::lit(cfg.lambda_down));
    let mut lambda = T::lit(cfg.lambda_init);
    let mut theta: Vec<T> = current.coefficients().collect();
    let mut normal: Option<(Vec<T>, Vec<T>)> = None;
    let mut system = vec![T::zero(); p * p];

    for it in 0..cfg.max_iterations {
        out.iterations = it + 1;
        if normal.is_none() {
            let (jtj, jtr) = normal_equations_in(&current, data, rows.clone(), &mut work);
            out.evaluations += 1;
            if jtj.iter().chain(&jtr).any(|v| !v.is_finite()) {
                break;
            }
            normal = Some((jtj, jtr));
        }
        let Some((jtj, jtr)) = normal.as_ref() else {
            break;
        };
        let max_diag = (0..p).map(|j| jtj[j * p + j]).fold(T::zero(), T::max);
        if !(max_diag > T::zero()) {
            break;
        }
        // zero columns still get a little damping so the system stays definite
        let floor = max_diag * T::lit(1e-12);
        system.copy_from_slice(jtj);
        for j in 0..p {
            system[j * p + j] += lambda * jtj[j * p + j].max(floor);
        }
        let Some(step) = cholesky_solve(&mut system, jtr, p) else {
            lambda *= up;
            continue;
        };
        let trial: Vec<T> = theta.iter().zip(&step).map(|(&a, &d)| a + d).collect();
        if trial.iter().any(|v| !v.is_finite()) {
            lambda *= up;
            continue;
        }
        let candidate = current.with_coefficients(&trial);
        let trial_err = sse_in(&candidate, data, rows.clone(), &mut work);
        out.evaluations += 1;
        if trial_err < err {
            let gain = (err - trial_err) / err;
            theta = trial;
            current = candidate;
            err = trial_err;
            out.history.push(err);
            normal = None;
            lambda = (lambda * down).max(T::min_positive_value());
            if gain < tol || err == T::zero() {
                break;
            }
        } else {
            lambda *= up;
            // the step no longer changes the fit: stationary to within tolerance
            if trial_err.is_finite() && (trial_err - err).abs() <= tol * err {
                break;
            }
            if !lambda.is_finite() {
                break;
            }
        }
    }
    out.tree = current;
    out.sse = err;
    out
}

/// Solves `a x = b` in place for symmetric positive-definite `a` (row-major
/// `n x n`). Returns `None` when a pivot is not positive.
fn cholesky_solve<T: Scalar>(a: &mut [T], b: &[T], n: usize) -> Option<Vec<T>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= a[i * n + k] * x[k];
        }
        x[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= a[k * n + i] * x[k];
        }
        x[i] = s / a[i * n + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
