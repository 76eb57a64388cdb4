//! Compiles prenex clauses against the pooled sample set into grounded
//! expression graphs, and evaluates and differentiates their penalty.
//!
//! The leading block of equally quantified variables is expanded into
//! *segments*, one per grounding of that block. Each segment holds the
//! compiled body (with any inner quantifier blocks expanded in place) and
//! only shares the learnable atom leaves with other segments, so segments
//! evaluate independently. The clause truth value aggregates the segment
//! roots (mean for `forall`, `1 - prod(1 - v)` for `exists`) and the penalty
//! is one minus that truth value.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{KnownPredicateTable, SampleId};
use crate::fol::{ClauseAst, Expr, PredicateKind, PredicateSignature, Quantifier};
use crate::par;
use crate::tnorm::{squash_derivative, squash_unchecked, Product, TNorm};

pub const DEFAULT_MAX_GROUNDINGS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundingError {
    #[error("clause expands to {count} groundings, above the cap of {cap}")]
    GroundingTooLarge { count: u128, cap: u64 },
    #[error("guard predicate '{0}' is not a known predicate with a table")]
    UnknownGuardPredicate(String),
    #[error("invalid guard: {0}")]
    InvalidGuard(String),
    #[error("predicate '{0}' is not declared")]
    UnknownPredicate(String),
    #[error("known predicate '{0}' has no table")]
    MissingKnownTable(String),
    #[error("no value supplied for atom {index}")]
    MissingAtomValue { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundingOptions {
    /// Refuse clauses whose full expansion exceeds this many groundings.
    pub max_groundings: u64,
    /// When set, keep at most this many groundings of the leading
    /// quantifier block, drawn uniformly without replacement.
    pub subsample: Option<usize>,
    pub seed: u64,
}

impl Default for GroundingOptions {
    fn default() -> Self {
        Self { max_groundings: DEFAULT_MAX_GROUNDINGS, subsample: None, seed: 0 }
    }
}

/// What a clause is grounded against.
#[derive(Debug, Clone, Copy)]
pub struct GroundingContext<'a> {
    pub signatures: &'a [PredicateSignature],
    /// The pooled sample ids every variable ranges over.
    pub pool: &'a [SampleId],
    pub known: &'a [KnownPredicateTable],
}

impl<'a> GroundingContext<'a> {
    fn signature(&self, name: &str) -> Result<(usize, &'a PredicateSignature), GroundingError> {
        self.signatures
            .iter()
            .enumerate()
            .find(|(_, s)| s.name == name)
            .ok_or_else(|| GroundingError::UnknownPredicate(name.to_string()))
    }

    fn table(&self, name: &str) -> Option<&'a KnownPredicateTable> {
        self.known.iter().find(|t| t.predicate == name)
    }
}

/// A learnable predicate evaluated at a tuple of sample ids. `predicate`
/// indexes the context's signature list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AtomRef {
    pub predicate: usize,
    pub tuple: Vec<SampleId>,
}

/// Segment-local node. Children always precede their parent.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Index into the graph's atom list; evaluates to `squash(f(tuple))`.
    Atom(usize),
    Const(f64),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    UniversalMean(Vec<usize>),
    ExistentialProduct(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Values of the leading block's variables for this grounding.
    pub binding: Vec<SampleId>,
    pub nodes: Vec<Node>,
}

impl Segment {
    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Atom indices referenced by this segment, in node order.
    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Atom(a) => Some(*a),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundedGraph {
    pub atoms: Vec<AtomRef>,
    pub segments: Vec<Segment>,
    /// Quantifier of the leading block.
    pub outer: Quantifier,
    pub outer_vars: Vec<String>,
    /// Predicate names indexed like `AtomRef::predicate`.
    pub predicate_names: Vec<String>,
}

/// Values cached by [`GroundedGraph::eval`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// `squash(f)` per atom.
    pub atom_truth: Vec<f64>,
    /// Node values per segment.
    pub segment_values: Vec<Vec<f64>>,
    /// Truth value of the whole clause.
    pub truth: f64,
    pub penalty: f64,
}

impl Evaluation {
    pub fn segment_truth(&self, segment: usize) -> f64 {
        *self.segment_values[segment].last().expect("segments are non-empty")
    }
}

/// Number of groundings the clause would expand to, before subsampling.
pub fn grounding_count(
    ast: &ClauseAst,
    ctx: &GroundingContext<'_>,
    guard: Option<&str>,
) -> Result<u128, GroundingError> {
    let blocks = quantifier_blocks(ast);
    let pool = ctx.pool.len() as u128;
    let outer = match (guard, blocks.first()) {
        (Some(name), Some(block)) => {
            let table = guard_table(ctx, name, block)?;
            if table.default == 0.0 {
                guard_entries(table, ctx.pool).len() as u128
            } else {
                pow(pool, block.1.len())
            }
        }
        (Some(_), None) => return Err(GroundingError::InvalidGuard("clause has no quantified variables".into())),
        (None, Some(block)) => pow(pool, block.1.len()),
        (None, None) => 1,
    };
    let inner: usize = blocks.iter().skip(1).map(|b| b.1.len()).sum();
    Ok(outer.saturating_mul(pow(pool, inner)))
}

fn pow(base: u128, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base))
}

/// Consecutive variables with the same quantifier.
fn quantifier_blocks(ast: &ClauseAst) -> Vec<(Quantifier, Vec<String>)> {
    let mut blocks: Vec<(Quantifier, Vec<String>)> = Vec::new();
    for (q, v) in &ast.prefix {
        match blocks.last_mut() {
            Some((bq, vars)) if bq == q => vars.push(v.clone()),
            _ => blocks.push((*q, vec![v.clone()])),
        }
    }
    blocks
}

fn guard_table<'a>(
    ctx: &GroundingContext<'a>,
    name: &str,
    block: &(Quantifier, Vec<String>),
) -> Result<&'a KnownPredicateTable, GroundingError> {
    let sig = ctx
        .signatures
        .iter()
        .find(|s| s.name == name && s.kind == PredicateKind::Known)
        .ok_or_else(|| GroundingError::UnknownGuardPredicate(name.to_string()))?;
    let table = ctx.table(name).ok_or_else(|| GroundingError::UnknownGuardPredicate(name.to_string()))?;
    if block.0 != Quantifier::Forall {
        return Err(GroundingError::InvalidGuard("a guard needs a leading universal block".into()));
    }
    if sig.arity != block.1.len() {
        return Err(GroundingError::InvalidGuard(format!(
            "guard '{name}' has arity {} but the leading universal block binds {} variable(s)",
            sig.arity,
            block.1.len()
        )));
    }
    Ok(table)
}

/// Guard tuples made only of pooled ids, in table order.
fn guard_entries<'t>(table: &'t KnownPredicateTable, pool: &[SampleId]) -> Vec<&'t (Vec<SampleId>, f64)> {
    let mut in_pool = vec![false; pool.iter().max().map_or(0, |m| m + 1)];
    for &id in pool {
        in_pool[id] = true;
    }
    table.entries.iter().filter(|(t, _)| t.iter().all(|&id| in_pool.get(id).copied().unwrap_or(false))).collect()
}

/// Decodes a mixed-radix index into a tuple over `pool`. The last variable
/// varies fastest.
fn decode(mut index: u128, pool: &[SampleId], len: usize) -> Vec<SampleId> {
    let n = pool.len() as u128;
    let mut tuple = vec![0; len];
    for slot in tuple.iter_mut().rev() {
        *slot = pool[(index % n) as usize];
        index /= n;
    }
    tuple
}

fn all_tuples(pool: &[SampleId], len: usize) -> Vec<Vec<SampleId>> {
    let total = pow(pool.len() as u128, len);
    (0..total).map(|i| decode(i, pool, len)).collect()
}

/// Compiles a clause into a grounded graph.
///
/// With a guard `d`, the leading universal block ranges over the tuples
/// listed in `d`'s table (or over every tuple when the table default is
/// non-zero) and each grounding contributes `d * (1 - e)` to the penalty.
pub fn ground_clause(
    ast: &ClauseAst,
    ctx: &GroundingContext<'_>,
    guard: Option<&str>,
    options: &GroundingOptions,
) -> Result<GroundedGraph, GroundingError> {
    let blocks = quantifier_blocks(ast);
    let pool = ctx.pool;
    let inner_vars: usize = blocks.iter().skip(1).map(|b| b.1.len()).sum();
    let inner_count = pow(pool.len() as u128, inner_vars);

    // Leading-block groundings with their guard weights.
    let (outer, outer_vars, mut bindings): (Quantifier, Vec<String>, Vec<(Vec<SampleId>, Option<f64>)>) =
        match blocks.first() {
            None => {
                if guard.is_some() {
                    return Err(GroundingError::InvalidGuard("clause has no quantified variables".into()));
                }
                (Quantifier::Forall, Vec::new(), vec![(Vec::new(), None)])
            }
            Some(block) => {
                let outer_count = match guard {
                    Some(name) => {
                        let table = guard_table(ctx, name, block)?;
                        if table.default == 0.0 {
                            guard_entries(table, pool).len() as u128
                        } else {
                            pow(pool.len() as u128, block.1.len())
                        }
                    }
                    None => pow(pool.len() as u128, block.1.len()),
                };
                let kept = match options.subsample {
                    Some(k) if (k as u128) < outer_count => k as u128,
                    _ => outer_count,
                };
                let total = kept.saturating_mul(inner_count);
                if total > options.max_groundings as u128 {
                    return Err(GroundingError::GroundingTooLarge {
                        count: outer_count.saturating_mul(inner_count),
                        cap: options.max_groundings,
                    });
                }
                let selected: Vec<u128> = if kept < outer_count {
                    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                    let mut picked: Vec<u128> = index::sample(&mut rng, outer_count as usize, kept as usize)
                        .into_iter()
                        .map(|i| i as u128)
                        .collect();
                    picked.sort_unstable();
                    picked
                } else {
                    (0..outer_count).collect()
                };
                let bindings = match guard {
                    Some(name) => {
                        let table = guard_table(ctx, name, block)?;
                        if table.default == 0.0 {
                            let entries = guard_entries(table, pool);
                            selected
                                .iter()
                                .map(|&i| {
                                    let (t, d) = entries[i as usize];
                                    (t.clone(), Some(*d))
                                })
                                .collect()
                        } else {
                            selected
                                .iter()
                                .map(|&i| {
                                    let t = decode(i, pool, block.1.len());
                                    let d = table.value(&t);
                                    (t, Some(d))
                                })
                                .collect()
                        }
                    }
                    None => selected.iter().map(|&i| (decode(i, pool, block.1.len()), None)).collect(),
                };
                (block.0, block.1.clone(), bindings)
            }
        };

    let mut compiler = Compiler { ctx, atoms: Vec::new(), atom_index: HashMap::new(), inner_tuples: HashMap::new() };
    let rest = if blocks.is_empty() { &blocks[..] } else { &blocks[1..] };
    let mut segments = Vec::with_capacity(bindings.len());
    for (binding, guard_value) in bindings.drain(..) {
        let mut env: Vec<(String, SampleId)> = outer_vars.iter().cloned().zip(binding.iter().copied()).collect();
        let mut nodes = Vec::new();
        let body = compiler.blocks(rest, &ast.body, &mut env, &mut nodes)?;
        if let Some(d) = guard_value {
            // d -> e, i.e. not(d and not e)
            let d = push(&mut nodes, Node::Const(d));
            let not_e = push(&mut nodes, Node::Not(body));
            let and = push(&mut nodes, Node::And(d, not_e));
            push(&mut nodes, Node::Not(and));
        }
        segments.push(Segment { binding, nodes });
    }

    Ok(GroundedGraph {
        atoms: compiler.atoms,
        segments,
        outer,
        outer_vars,
        predicate_names: ctx.signatures.iter().map(|s| s.name.clone()).collect(),
    })
}

fn push(nodes: &mut Vec<Node>, node: Node) -> usize {
    nodes.push(node);
    nodes.len() - 1
}

struct Compiler<'c, 'a> {
    ctx: &'c GroundingContext<'a>,
    atoms: Vec<AtomRef>,
    atom_index: HashMap<AtomRef, usize>,
    inner_tuples: HashMap<usize, Vec<Vec<SampleId>>>,
}

impl Compiler<'_, '_> {
    fn blocks(
        &mut self,
        blocks: &[(Quantifier, Vec<String>)],
        body: &Expr,
        env: &mut Vec<(String, SampleId)>,
        nodes: &mut Vec<Node>,
    ) -> Result<usize, GroundingError> {
        let Some(((q, vars), rest)) = blocks.split_first() else {
            return self.expr(body, env, nodes);
        };
        let tuples =
            self.inner_tuples.entry(vars.len()).or_insert_with(|| all_tuples(self.ctx.pool, vars.len())).clone();
        let mut children = Vec::with_capacity(tuples.len());
        for tuple in tuples {
            let mark = env.len();
            env.extend(vars.iter().cloned().zip(tuple));
            children.push(self.blocks(rest, body, env, nodes)?);
            env.truncate(mark);
        }
        Ok(push(
            nodes,
            match q {
                Quantifier::Forall => Node::UniversalMean(children),
                Quantifier::Exists => Node::ExistentialProduct(children),
            },
        ))
    }

    fn expr(&mut self, e: &Expr, env: &[(String, SampleId)], nodes: &mut Vec<Node>) -> Result<usize, GroundingError> {
        let node = match e {
            Expr::Atom { predicate, args } => {
                let (index, sig) = self.ctx.signature(predicate)?;
                let tuple: Vec<SampleId> = args
                    .iter()
                    .map(|a| {
                        env.iter()
                            .rev()
                            .find(|(v, _)| v == a)
                            .map(|(_, id)| *id)
                            .expect("parser guarantees every variable is bound")
                    })
                    .collect();
                match sig.kind {
                    PredicateKind::Known => {
                        let table = self
                            .ctx
                            .table(predicate)
                            .ok_or_else(|| GroundingError::MissingKnownTable(predicate.clone()))?;
                        Node::Const(table.value(&tuple))
                    }
                    PredicateKind::Learnable => {
                        let atom = AtomRef { predicate: index, tuple };
                        let next = self.atoms.len();
                        let id = *self.atom_index.entry(atom.clone()).or_insert(next);
                        if id == next {
                            self.atoms.push(atom);
                        }
                        Node::Atom(id)
                    }
                }
            }
            Expr::Not(a) => Node::Not(self.expr(a, env, nodes)?),
            Expr::And(a, b) => {
                let a = self.expr(a, env, nodes)?;
                Node::And(a, self.expr(b, env, nodes)?)
            }
            Expr::Or(a, b) => {
                let a = self.expr(a, env, nodes)?;
                Node::Or(a, self.expr(b, env, nodes)?)
            }
            Expr::Implies(a, b) => {
                let a = self.expr(a, env, nodes)?;
                let b = self.expr(b, env, nodes)?;
                let not_b = push(nodes, Node::Not(b));
                let and = push(nodes, Node::And(a, not_b));
                Node::Not(and)
            }
            Expr::Iff(a, b) => {
                let forward = self.expr(&Expr::implies((**a).clone(), (**b).clone()), env, nodes)?;
                let backward = self.expr(&Expr::implies((**b).clone(), (**a).clone()), env, nodes)?;
                Node::And(forward, backward)
            }
        };
        Ok(push(nodes, node))
    }
}

/// n-ary t-conorm by left fold.
fn disjunction<T: TNorm + ?Sized>(t: &T, values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |acc, v| t.or(acc, v))
}

/// Partial derivatives of the n-ary t-conorm with respect to each operand,
/// using prefix and suffix folds (no division).
fn disjunction_partials<T: TNorm + ?Sized>(t: &T, values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = t.or(values[i], suffix[i + 1]);
    }
    let mut prefix = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (_, d_outer) = t.or_partials(prefix, suffix[i]);
        let (d_inner, _) = t.or_partials(values[i], suffix[i + 1]);
        out.push(d_outer * d_inner);
        prefix = t.or(prefix, values[i]);
    }
    out
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        1.0
    } else {
        par::pairwise_sum(values) / values.len() as f64
    }
}

impl GroundedGraph {
    pub fn grounding_count(&self) -> usize {
        self.segments.len()
    }

    /// Evaluates with the product t-norm. `raw[i]` is the pre-squash value
    /// `f(tuple)` of atom `i`.
    pub fn eval(&self, raw: &[f64]) -> Result<Evaluation, GroundingError> {
        self.eval_with_tnorm(&Product, raw)
    }

    /// Evaluates with raw atom values supplied by a callback.
    pub fn eval_with(&self, mut predict: impl FnMut(&AtomRef) -> Option<f64>) -> Result<Evaluation, GroundingError> {
        let raw = self.collect_raw(&mut predict)?;
        self.eval(&raw)
    }

    pub(crate) fn collect_raw(
        &self,
        predict: &mut impl FnMut(&AtomRef) -> Option<f64>,
    ) -> Result<Vec<f64>, GroundingError> {
        self.atoms
            .iter()
            .enumerate()
            .map(|(index, a)| predict(a).filter(|v| v.is_finite()).ok_or(GroundingError::MissingAtomValue { index }))
            .collect()
    }

    pub fn eval_with_tnorm<T: TNorm + ?Sized>(&self, t: &T, raw: &[f64]) -> Result<Evaluation, GroundingError> {
        if raw.len() != self.atoms.len() {
            return Err(GroundingError::MissingAtomValue { index: raw.len().min(self.atoms.len()) });
        }
        if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
            return Err(GroundingError::MissingAtomValue { index });
        }
        let atom_truth: Vec<f64> = raw.iter().map(|&v| squash_unchecked(v)).collect();
        let segment_values = par::map_slice(&self.segments, |seg| eval_segment(t, seg, &atom_truth));
        let roots: Vec<f64> = segment_values.iter().map(|v| *v.last().expect("non-empty")).collect();
        let truth = match self.outer {
            Quantifier::Forall => mean(&roots),
            Quantifier::Exists => disjunction(t, roots.iter().copied()),
        };
        Ok(Evaluation { atom_truth, segment_values, truth, penalty: 1.0 - truth })
    }

    /// Gradient of `upstream * penalty` with respect to each atom's
    /// pre-squash value.
    pub fn backprop(&self, eval: &Evaluation, raw: &[f64], upstream: f64) -> Result<Vec<f64>, GroundingError> {
        self.backprop_with_tnorm(&Product, eval, raw, upstream)
    }

    pub fn backprop_with_tnorm<T: TNorm + ?Sized>(
        &self,
        t: &T,
        eval: &Evaluation,
        raw: &[f64],
        upstream: f64,
    ) -> Result<Vec<f64>, GroundingError> {
        if raw.len() != self.atoms.len() || eval.atom_truth.len() != self.atoms.len() {
            return Err(GroundingError::MissingAtomValue { index: raw.len().min(self.atoms.len()) });
        }
        let roots: Vec<f64> = (0..self.segments.len()).map(|s| eval.segment_truth(s)).collect();
        // d penalty / d truth = -1
        let seeds: Vec<f64> = match self.outer {
            Quantifier::Forall => vec![-upstream / roots.len().max(1) as f64; roots.len()],
            Quantifier::Exists => disjunction_partials(t, &roots).into_iter().map(|d| -upstream * d).collect(),
        };
        let indices: Vec<usize> = (0..self.segments.len()).collect();
        let contributions =
            par::map_slice(&indices, |&s| backprop_segment(t, &self.segments[s], &eval.segment_values[s], seeds[s]));
        let mut grad = vec![0.0; self.atoms.len()];
        for part in contributions {
            for (atom, g) in part {
                grad[atom] += g;
            }
        }
        for (g, &r) in grad.iter_mut().zip(raw) {
            *g *= squash_derivative(r);
        }
        Ok(grad)
    }

    /// Penalty restricted to the segments accepted by `keep`, aggregated
    /// the same way as the full penalty. `None` when no segment is kept.
    pub fn restricted_penalty(&self, eval: &Evaluation, mut keep: impl FnMut(&Segment) -> bool) -> Option<f64> {
        let roots: Vec<f64> =
            self.segments.iter().enumerate().filter(|(_, s)| keep(s)).map(|(i, _)| eval.segment_truth(i)).collect();
        if roots.is_empty() {
            return None;
        }
        let truth = match self.outer {
            Quantifier::Forall => mean(&roots),
            Quantifier::Exists => disjunction(&Product, roots.iter().copied()),
        };
        Some(1.0 - truth)
    }

    /// Plain-text DAG listing: one line per node with its id, kind,
    /// children and (when an evaluation is given) cached value.
    pub fn dump(&self, eval: Option<&Evaluation>) -> String {
        let mut out = String::new();
        let value = |v: Option<f64>| v.map_or(String::new(), |v| format!(" value={v}"));
        for (i, a) in self.atoms.iter().enumerate() {
            let ids: Vec<String> = a.tuple.iter().map(|id| id.to_string()).collect();
            let _ = writeln!(
                out,
                "{i} atom {}({}){}",
                self.predicate_names[a.predicate],
                ids.join(","),
                value(eval.map(|e| e.atom_truth[i]))
            );
        }
        let mut offset = self.atoms.len();
        let mut roots = Vec::with_capacity(self.segments.len());
        for (s, seg) in self.segments.iter().enumerate() {
            let local = |c: &usize| offset + c;
            for (k, node) in seg.nodes.iter().enumerate() {
                let (kind, children): (&str, Vec<usize>) = match node {
                    Node::Atom(a) => ("ref", vec![*a]),
                    Node::Const(c) => {
                        let _ = writeln!(out, "{} const {c}", offset + k);
                        continue;
                    }
                    Node::Not(c) => ("not", vec![local(c)]),
                    Node::And(a, b) => ("and", vec![local(a), local(b)]),
                    Node::Or(a, b) => ("or", vec![local(a), local(b)]),
                    Node::UniversalMean(cs) => ("forall_mean", cs.iter().map(local).collect()),
                    Node::ExistentialProduct(cs) => ("exists_product", cs.iter().map(local).collect()),
                };
                let kids: Vec<String> = children.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(
                    out,
                    "{} {kind} [{}]{}",
                    offset + k,
                    kids.join(","),
                    value(eval.map(|e| e.segment_values[s][k]))
                );
            }
            roots.push(offset + seg.root());
            offset += seg.nodes.len();
        }
        let kind = match self.outer {
            Quantifier::Forall => "forall_mean",
            Quantifier::Exists => "exists_product",
        };
        let kids: Vec<String> = roots.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{offset} {kind} [{}]{}", kids.join(","), value(eval.map(|e| e.truth)));
        let _ = writeln!(out, "{} one_minus [{offset}]{}", offset + 1, value(eval.map(|e| e.penalty)));
        out
    }
}

fn eval_segment<T: TNorm + ?Sized>(t: &T, seg: &Segment, atom_truth: &[f64]) -> Vec<f64> {
    let mut values: Vec<f64> = Vec::with_capacity(seg.nodes.len());
    for node in &seg.nodes {
        let v = match node {
            Node::Atom(a) => atom_truth[*a],
            Node::Const(c) => *c,
            Node::Not(c) => t.not(values[*c]),
            Node::And(a, b) => t.and(values[*a], values[*b]),
            Node::Or(a, b) => t.or(values[*a], values[*b]),
            Node::UniversalMean(cs) => {
                if cs.is_empty() {
                    1.0
                } else {
                    cs.iter().map(|&c| values[c]).sum::<f64>() / cs.len() as f64
                }
            }
            Node::ExistentialProduct(cs) => disjunction(t, cs.iter().map(|&c| values[c])),
        };
        values.push(v);
    }
    values
}

/// Reverse sweep over one segment. Returns `(atom, d/d atom_truth)` pairs.
fn backprop_segment<T: TNorm + ?Sized>(t: &T, seg: &Segment, values: &[f64], seed: f64) -> Vec<(usize, f64)> {
    let mut adj = vec![0.0; seg.nodes.len()];
    adj[seg.root()] = seed;
    let mut out = Vec::new();
    for k in (0..seg.nodes.len()).rev() {
        let g = adj[k];
        if g == 0.0 {
            continue;
        }
        match &seg.nodes[k] {
            Node::Atom(a) => out.push((*a, g)),
            Node::Const(_) => {}
            Node::Not(c) => adj[*c] -= g,
            Node::And(a, b) => {
                let (da, db) = t.and_partials(values[*a], values[*b]);
                adj[*a] += g * da;
                adj[*b] += g * db;
            }
            Node::Or(a, b) => {
                let (da, db) = t.or_partials(values[*a], values[*b]);
                adj[*a] += g * da;
                adj[*b] += g * db;
            }
            Node::UniversalMean(cs) => {
                let share = g / cs.len() as f64;
                for &c in cs {
                    adj[c] += share;
                }
            }
            Node::ExistentialProduct(cs) => {
                let vals: Vec<f64> = cs.iter().map(|&c| values[c]).collect();
                for (&c, d) in cs.iter().zip(disjunction_partials(t, &vals)) {
                    adj[c] += g * d;
                }
            }
        }
    }
    out
}
