//! Symbolic regression with an offspring selection genetic algorithm.
//!
//! Expressions are stored in prefix order. Terminals are weighted variables
//! and constants; the function set is configurable from `{sin, exp, log}` and
//! `{+, -, *, /}`. Division and logarithm are protected (`a / 0 = 1`,
//! `log 0 = 0`, `log a = ln |a|`) and every intermediate value is clamped to a
//! finite range, so evaluation never produces NaN or infinities.
//!
//! Fitness is the NMSE of the linearly scaled output (`offset + scale * f(x)`
//! with least-squares `offset` and `scale`). Each generation the elite is
//! copied over and the rest of the population is refilled only with
//! offspring that beat the better of their two parents. The run stops at
//! `max_generations`, or when refilling a generation would take more than
//! `max_selection_pressure * population` offspring trials.

use std::fmt;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

/// Magnitude bound applied to every intermediate value.
const VALUE_LIMIT: f64 = 1e150;
/// Divisors and log arguments below this magnitude are treated as zero.
const PROTECT_EPS: f64 = 1e-12;
/// Offspring generated (and evaluated in parallel) per batch.
const BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Sin,
    Exp,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl UnaryOp {
    fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Sin => a.sin(),
            UnaryOp::Exp => a.min(300.0).exp(),
            UnaryOp::Log => {
                if a.abs() < PROTECT_EPS {
                    0.0
                } else {
                    a.abs().ln()
                }
            }
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Sin => "sin",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
        }
    }
}

impl BinaryOp {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => {
                if b.abs() < PROTECT_EPS {
                    1.0
                } else {
                    a / b
                }
            }
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }
}

fn clamp(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-VALUE_LIMIT, VALUE_LIMIT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Node {
    Const { value: f64 },
    Var { index: usize, weight: f64 },
    Unary { f: UnaryOp },
    Binary { f: BinaryOp },
}

impl Node {
    fn arity(&self) -> usize {
        match self {
            Node::Const { .. } | Node::Var { .. } => 0,
            Node::Unary { .. } => 1,
            Node::Binary { .. } => 2,
        }
    }
}

/// Index one past the end of the subtree rooted at `start`.
fn subtree_end(nodes: &[Node], start: usize) -> usize {
    let mut open = 1usize;
    let mut i = start;
    while open > 0 {
        open = open - 1 + nodes[i].arity();
        i += 1;
    }
    i
}

/// Evaluates a prefix expression over all rows.
fn eval_nodes(nodes: &[Node], x: &[&[f64]], rows: usize) -> Vec<f64> {
    let mut stack: Vec<Vec<f64>> = Vec::with_capacity(8);
    let mut pool: Vec<Vec<f64>> = Vec::new();
    let fresh = |pool: &mut Vec<Vec<f64>>| pool.pop().unwrap_or_else(|| vec![0.0; rows]);
    for node in nodes.iter().rev() {
        match *node {
            Node::Const { value } => {
                let mut b = fresh(&mut pool);
                b.fill(clamp(value));
                stack.push(b);
            }
            Node::Var { index, weight } => {
                let mut b = fresh(&mut pool);
                for (o, v) in b.iter_mut().zip(x[index]) {
                    *o = clamp(weight * v);
                }
                stack.push(b);
            }
            Node::Unary { f } => {
                let a = stack.last_mut().expect("malformed expression");
                for v in a.iter_mut() {
                    *v = clamp(f.apply(*v));
                }
            }
            Node::Binary { f } => {
                let mut a = stack.pop().expect("malformed expression");
                let b = stack.pop().expect("malformed expression");
                for (u, v) in a.iter_mut().zip(&b) {
                    *u = clamp(f.apply(*u, *v));
                }
                pool.push(b);
                stack.push(a);
            }
        }
    }
    stack.pop().unwrap_or_else(|| vec![0.0; rows])
}

/// Least-squares `(offset, scale)` mapping `f` onto `y`, and the resulting NMSE.
fn scaled_nmse(f: &[f64], y: &[f64], y_mean: f64, y_var: f64) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let f_mean = f.iter().sum::<f64>() / n;
    let (mut cov, mut var) = (0.0, 0.0);
    for (a, b) in f.iter().zip(y) {
        let d = a - f_mean;
        cov += d * (b - y_mean);
        var += d * d;
    }
    let scale = if var > 0.0 && (cov / var).is_finite() {
        cov / var
    } else {
        0.0
    };
    let offset = y_mean - scale * f_mean;
    let mse = f
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = offset + scale * a - b;
            e * e
        })
        .sum::<f64>()
        / n;
    let nmse = mse / y_var;
    if nmse.is_finite() {
        (offset, scale, nmse)
    } else {
        (y_mean, 0.0, 1.0)
    }
}

/// A fitted expression with its linear scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    /// Prefix-ordered nodes.
    pub nodes: Vec<Node>,
    pub offset: f64,
    pub scale: f64,
}

impl Expr {
    pub fn predict(&self, x: &[&[f64]], rows: usize) -> Vec<f64> {
        eval_nodes(&self.nodes, x, rows)
            .into_iter()
            .map(|v| clamp(self.offset + self.scale * v))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Prefix rendering with variables shown by name.
    pub fn to_prefix<S: AsRef<str>>(&self, names: &[S]) -> String {
        fn go<S: AsRef<str>>(nodes: &[Node], i: usize, names: &[S], out: &mut String) -> usize {
            match nodes[i] {
                Node::Const { value } => {
                    out.push_str(&value.to_string());
                    i + 1
                }
                Node::Var { index, weight } => {
                    let name = names.get(index).map_or("?", |s| s.as_ref());
                    out.push_str(&format!("(* {weight} {name})"));
                    i + 1
                }
                Node::Unary { f } => {
                    out.push('(');
                    out.push_str(f.symbol());
                    out.push(' ');
                    let next = go(nodes, i + 1, names, out);
                    out.push(')');
                    next
                }
                Node::Binary { f } => {
                    out.push('(');
                    out.push_str(f.symbol());
                    out.push(' ');
                    let next = go(nodes, i + 1, names, out);
                    out.push(' ');
                    let next = go(nodes, next, names, out);
                    out.push(')');
                    next
                }
            }
        }
        let mut body = String::new();
        if !self.nodes.is_empty() {
            go(&self.nodes, 0, names, &mut body);
        }
        format!("(+ {} (* {} {}))", self.offset, self.scale, body)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..self.nodes.len()).map(|i| format!("x{i}")).collect();
        f.write_str(&self.to_prefix(&names))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OsgaParams {
    pub population: usize,
    pub max_generations: usize,
    pub max_selection_pressure: f64,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    /// Maximum expression size in nodes.
    pub max_tree_length: usize,
    pub elites: usize,
    pub unary_ops: Vec<UnaryOp>,
    pub binary_ops: Vec<BinaryOp>,
}

impl Default for OsgaParams {
    fn default() -> Self {
        Self {
            population: 100,
            max_generations: 1000,
            max_selection_pressure: 100.0,
            mutation_rate: 0.25,
            crossover_rate: 1.0,
            max_tree_length: 25,
            elites: 1,
            unary_ops: vec![UnaryOp::Sin, UnaryOp::Exp, UnaryOp::Log],
            binary_ops: vec![BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div],
        }
    }
}

impl OsgaParams {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if self.max_tree_length < 3 {
            return bad("max_tree_length must be at least 3");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) || !(0.0..=1.0).contains(&self.crossover_rate)
        {
            return bad("mutation and crossover rates must be in [0, 1]");
        }
        if !(self.max_selection_pressure >= 1.0) {
            return bad("max_selection_pressure must be at least 1");
        }
        if self.elites >= self.population {
            return bad("elites must be fewer than the population");
        }
        if self.binary_ops.is_empty() && self.unary_ops.is_empty() {
            return bad("function set is empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Individual {
    nodes: Vec<Node>,
    nmse: f64,
}

/// Result of one OSGA run.
#[derive(Debug, Clone)]
pub struct OsgaOutcome {
    pub best: Expr,
    /// Training NMSE of `best`.
    pub best_nmse: f64,
    /// Best training NMSE after initialization and after each generation.
    pub history: Vec<f64>,
    pub generations: usize,
    /// Offspring trials divided by population size in the last generation.
    pub selection_pressure: f64,
}

struct Problem<'a> {
    x: &'a [&'a [f64]],
    y: &'a [f64],
    y_mean: f64,
    y_var: f64,
    params: &'a OsgaParams,
}

impl Problem<'_> {
    fn inputs(&self) -> usize {
        self.x.len()
    }

    fn nmse(&self, nodes: &[Node]) -> f64 {
        let f = eval_nodes(nodes, self.x, self.y.len());
        scaled_nmse(&f, self.y, self.y_mean, self.y_var).2
    }

    fn terminal(&self, rng: &mut Rng) -> Node {
        if rng.random_bool(0.8) {
            Node::Var {
                index: rng.random_range(0..self.inputs()),
                weight: Normal::new(1.0, 1.0).unwrap().sample(rng),
            }
        } else {
            Node::Const {
                value: rng.random_range(-5.0..5.0),
            }
        }
    }

    /// Appends a random subtree of at most `budget` nodes.
    fn grow(&self, rng: &mut Rng, budget: usize, depth: usize, out: &mut Vec<Node>) {
        let p = self.params;
        let leaf = budget < 2 || (depth > 0 && rng.random_bool(0.3));
        if leaf {
            out.push(self.terminal(rng));
            return;
        }
        let binary = budget >= 3
            && !p.binary_ops.is_empty()
            && (p.unary_ops.is_empty() || rng.random_bool(0.75));
        if binary {
            out.push(Node::Binary {
                f: p.binary_ops[rng.random_range(0..p.binary_ops.len())],
            });
            let before = out.len();
            let left = rng.random_range(1..=budget - 2);
            self.grow(rng, left, depth + 1, out);
            let used = out.len() - before;
            self.grow(rng, budget - 1 - used, depth + 1, out);
        } else if !p.unary_ops.is_empty() {
            out.push(Node::Unary {
                f: p.unary_ops[rng.random_range(0..p.unary_ops.len())],
            });
            self.grow(rng, budget - 1, depth + 1, out);
        } else {
            out.push(self.terminal(rng));
        }
    }

    fn random_tree(&self, rng: &mut Rng) -> Vec<Node> {
        let budget = rng.random_range(3..=self.params.max_tree_length);
        let mut nodes = Vec::with_capacity(budget);
        self.grow(rng, budget, 0, &mut nodes);
        nodes
    }

    /// Picks a node index, preferring internal nodes 90% of the time.
    fn pick_point(rng: &mut Rng, nodes: &[Node], allowed: impl Fn(usize) -> bool) -> Option<usize> {
        let internal: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].arity() > 0 && allowed(i))
            .collect();
        let leaves: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].arity() == 0 && allowed(i))
            .collect();
        let use_internal = !internal.is_empty() && (leaves.is_empty() || rng.random_bool(0.9));
        let from = if use_internal { &internal } else { &leaves };
        if from.is_empty() {
            None
        } else {
            Some(from[rng.random_range(0..from.len())])
        }
    }

    /// Subtree crossover: a branch of `a` is replaced by a branch of `b`
    /// such that the child fits `max_tree_length`.
    fn crossover(&self, rng: &mut Rng, a: &[Node], b: &[Node]) -> Vec<Node> {
        let max = self.params.max_tree_length;
        let Some(cut) = Self::pick_point(rng, a, |_| true) else {
            return a.to_vec();
        };
        let cut_end = subtree_end(a, cut);
        let room = max - (a.len() - (cut_end - cut));
        let Some(donor) = Self::pick_point(rng, b, |i| subtree_end(b, i) - i <= room) else {
            return a.to_vec();
        };
        let donor_end = subtree_end(b, donor);
        let mut child = Vec::with_capacity(a.len() - (cut_end - cut) + donor_end - donor);
        child.extend_from_slice(&a[..cut]);
        child.extend_from_slice(&b[donor..donor_end]);
        child.extend_from_slice(&a[cut_end..]);
        child
    }

    fn mutate(&self, rng: &mut Rng, nodes: &mut Vec<Node>) {
        let p = self.params;
        let shake = Normal::new(0.0, 0.5).unwrap();
        match rng.random_range(0..4) {
            // one-point shake
            0 => {
                let leaves: Vec<usize> =
                    (0..nodes.len()).filter(|&i| nodes[i].arity() == 0).collect();
                let i = leaves[rng.random_range(0..leaves.len())];
                shake_terminal(&mut nodes[i], shake.sample(rng));
            }
            // full shake
            1 => {
                for n in nodes.iter_mut() {
                    shake_terminal(n, shake.sample(rng) * 0.2);
                }
            }
            // change node type, keeping arity
            2 => {
                let i = rng.random_range(0..nodes.len());
                nodes[i] = match nodes[i] {
                    Node::Const { .. } | Node::Var { .. } => self.terminal(rng),
                    Node::Unary { .. } => Node::Unary {
                        f: p.unary_ops[rng.random_range(0..p.unary_ops.len())],
                    },
                    Node::Binary { .. } => Node::Binary {
                        f: p.binary_ops[rng.random_range(0..p.binary_ops.len())],
                    },
                };
            }
            // replace branch
            _ => {
                let i = rng.random_range(0..nodes.len());
                let end = subtree_end(nodes, i);
                let room = p.max_tree_length - (nodes.len() - (end - i));
                let mut branch = Vec::new();
                let budget = rng.random_range(1..=room);
                self.grow(rng, budget, 1, &mut branch);
                nodes.splice(i..end, branch);
            }
        }
    }
}

fn shake_terminal(node: &mut Node, delta: f64) {
    match node {
        Node::Const { value } => *value += delta,
        Node::Var { weight, .. } => *weight += delta,
        _ => {}
    }
}

fn roulette(rng: &mut Rng, weights: &[f64], total: f64) -> usize {
    let mut t = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if t < *w {
            return i;
        }
        t -= w;
    }
    weights.len() - 1
}

/// Runs OSGA on inputs `x` and target `y`.
pub fn fit(x: &[&[f64]], y: &[f64], params: &OsgaParams, seed: u64) -> Result<OsgaOutcome> {
    params.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument("symbolic regression needs data".into()));
    }
    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n;
    if !(y_var > 0.0) {
        return Err(Error::ZeroVariance("symbolic target".into()));
    }
    let problem = Problem {
        x,
        y,
        y_mean,
        y_var,
        params,
    };
    let mut rng = seeded(seed);
    let size = params.population;

    let trees: Vec<Vec<Node>> = (0..size).map(|_| problem.random_tree(&mut rng)).collect();
    let mut population: Vec<Individual> = trees
        .into_par_iter()
        .map(|nodes| {
            let nmse = problem.nmse(&nodes);
            Individual { nodes, nmse }
        })
        .collect();
    let best_of = |pop: &[Individual]| -> Individual {
        pop.iter()
            .min_by(|a, b| a.nmse.total_cmp(&b.nmse))
            .cloned()
            .expect("population is never empty")
    };
    let mut best = best_of(&population);
    let mut history = vec![best.nmse];
    let mut generations = 0;
    let mut pressure = 0.0;
    let trial_limit = (params.max_selection_pressure * size as f64).floor() as usize;

    while generations < params.max_generations {
        let weights: Vec<f64> = population.iter().map(|i| 1.0 / (1.0 + i.nmse)).collect();
        let total: f64 = weights.iter().sum();
        let mut ranked: Vec<&Individual> = population.iter().collect();
        ranked.sort_by(|a, b| a.nmse.total_cmp(&b.nmse));
        let mut next: Vec<Individual> =
            ranked.iter().take(params.elites).map(|i| (*i).clone()).collect();

        let mut trials = 0;
        while next.len() < size && trials < trial_limit {
            let batch: Vec<(Vec<Node>, f64)> = (0..BATCH)
                .map(|_| {
                    let p1 = &population[roulette(&mut rng, &weights, total)];
                    let p2 = &population[rng.random_range(0..size)];
                    let mut child = if rng.random_bool(params.crossover_rate) {
                        problem.crossover(&mut rng, &p1.nodes, &p2.nodes)
                    } else {
                        p1.nodes.clone()
                    };
                    if rng.random_bool(params.mutation_rate) {
                        problem.mutate(&mut rng, &mut child);
                    }
                    (child, p1.nmse.min(p2.nmse))
                })
                .collect();
            let scored: Vec<(Individual, f64)> = batch
                .into_par_iter()
                .map(|(nodes, parent)| {
                    let nmse = problem.nmse(&nodes);
                    (Individual { nodes, nmse }, parent)
                })
                .collect();
            for (child, parent) in scored {
                if next.len() >= size || trials >= trial_limit {
                    break;
                }
                trials += 1;
                if child.nmse < parent {
                    next.push(child);
                }
            }
        }

        pressure = trials as f64 / size as f64;
        generations += 1;
        let filled = next.len() >= size;
        let gen_best = best_of(&next);
        if gen_best.nmse < best.nmse {
            best = gen_best;
        }
        history.push(best.nmse);
        if !filled {
            break;
        }
        population = next;
    }

    let f = eval_nodes(&best.nodes, x, y.len());
    let (offset, scale, nmse) = scaled_nmse(&f, y, y_mean, y_var);
    Ok(OsgaOutcome {
        best: Expr {
            nodes: best.nodes,
            offset,
            scale,
        },
        best_nmse: nmse,
        history,
        generations,
        selection_pressure: pressure,
    })
}
