//! Shared test helpers: a naive recursive evaluator written directly from
//! the product t-norm formulas, and seeded generators for clauses and
//! problems.

#![allow(dead_code)]

use std::collections::HashMap;

use folkm::data::{KnownPredicateTable, LabeledSet, SampleId, SampleSet};
use folkm::fol::{parse_clause_file, ClauseAst, Expr, PredicateKind, PredicateSignature, Quantifier};
use folkm::kernel::KernelSpec;
use folkm::objective::LossKind;
use folkm::problem::{GroundingSettings, PredicateDef, Problem};
use folkm::trainer::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Truth<'a> = dyn Fn(&str, &[SampleId]) -> f64 + 'a;

pub fn clamp01(v: f64) -> f64 {
    v.max(0.0).min(1.0)
}

fn expr_truth(e: &Expr, env: &HashMap<String, SampleId>, truth: &Truth) -> f64 {
    match e {
        Expr::Atom { predicate, args } => {
            let ids: Vec<SampleId> = args.iter().map(|a| env[a]).collect();
            truth(predicate, &ids)
        }
        Expr::Not(a) => 1.0 - expr_truth(a, env, truth),
        Expr::And(a, b) => expr_truth(a, env, truth) * expr_truth(b, env, truth),
        Expr::Or(a, b) => {
            let (x, y) = (expr_truth(a, env, truth), expr_truth(b, env, truth));
            x + y - x * y
        }
        Expr::Implies(a, b) => {
            let (x, y) = (expr_truth(a, env, truth), expr_truth(b, env, truth));
            1.0 - x * (1.0 - y)
        }
        Expr::Iff(a, b) => {
            let (x, y) = (expr_truth(a, env, truth), expr_truth(b, env, truth));
            (1.0 - x * (1.0 - y)) * (1.0 - y * (1.0 - x))
        }
    }
}

fn prefix_truth(
    prefix: &[(Quantifier, String)],
    body: &Expr,
    pool: &[SampleId],
    env: &mut HashMap<String, SampleId>,
    truth: &Truth,
) -> f64 {
    let Some(((q, var), rest)) = prefix.split_first() else {
        return expr_truth(body, env, truth);
    };
    let mut values = Vec::new();
    for &id in pool {
        env.insert(var.clone(), id);
        values.push(prefix_truth(rest, body, pool, env, truth));
    }
    env.remove(var);
    match q {
        Quantifier::Forall => {
            if values.is_empty() {
                1.0
            } else {
                values.iter().sum::<f64>() / values.len() as f64
            }
        }
        Quantifier::Exists => 1.0 - values.iter().map(|e| 1.0 - e).product::<f64>(),
    }
}

/// Penalty `1 - truth` of an unguarded clause.
pub fn naive_penalty(ast: &ClauseAst, pool: &[SampleId], truth: &Truth) -> f64 {
    1.0 - prefix_truth(&ast.prefix, &ast.body, pool, &mut HashMap::new(), truth)
}

/// Penalty of a clause guarded by `table`: the mean of `d * (1 - e)` over
/// the admitted groundings of the leading universal block.
pub fn naive_guarded_penalty(ast: &ClauseAst, pool: &[SampleId], table: &KnownPredicateTable, truth: &Truth) -> f64 {
    let block = ast.prefix.iter().take_while(|(q, _)| *q == Quantifier::Forall).count();
    let (outer, rest) = ast.prefix.split_at(block);
    let tuples: Vec<Vec<SampleId>> = if table.default == 0.0 {
        table.entries.iter().map(|(t, _)| t.clone()).filter(|t| t.iter().all(|id| pool.contains(id))).collect()
    } else {
        let mut all = vec![vec![]];
        for _ in 0..block {
            all = all
                .into_iter()
                .flat_map(|t: Vec<SampleId>| pool.iter().map(move |&id| [t.clone(), vec![id]].concat()))
                .collect();
        }
        all
    };
    if tuples.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for t in &tuples {
        let mut env: HashMap<String, SampleId> = outer.iter().map(|(_, v)| v.clone()).zip(t.iter().copied()).collect();
        let e = prefix_truth(rest, &ast.body, pool, &mut env, truth);
        total += table.value(t) * (1.0 - e);
    }
    total / tuples.len() as f64
}

/// Predicates used by the generators: three learnable, one known.
pub fn vocabulary() -> Vec<PredicateSignature> {
    vec![
        PredicateSignature::learnable("P", 1),
        PredicateSignature::learnable("Q", 1),
        PredicateSignature::learnable("R", 2),
        PredicateSignature::known("K", 2),
    ]
}

fn random_body(rng: &mut ChaCha8Rng, vars: &[&str], sigs: &[PredicateSignature], depth: usize) -> String {
    if depth == 0 || rng.random_bool(0.3) {
        let sig = &sigs[rng.random_range(0..sigs.len())];
        let args: Vec<&str> = (0..sig.arity).map(|_| vars[rng.random_range(0..vars.len())]).collect();
        return format!("{}({})", sig.name, args.join(", "));
    }
    let sub = |rng: &mut ChaCha8Rng| random_body(rng, vars, sigs, depth - 1);
    match rng.random_range(0..5) {
        0 => format!("not ({})", sub(rng)),
        1 => format!("({}) and ({})", sub(rng), sub(rng)),
        2 => format!("({}) or ({})", sub(rng), sub(rng)),
        3 => format!("({}) -> ({})", sub(rng), sub(rng)),
        _ => format!("({}) <-> ({})", sub(rng), sub(rng)),
    }
}

/// Random clause text with one or two variables and connective depth at most
/// `max_depth`.
pub fn random_clause_text(rng: &mut ChaCha8Rng, sigs: &[PredicateSignature], max_depth: usize) -> String {
    let vars: &[&str] = if rng.random_bool(0.5) { &["x"] } else { &["x", "y"] };
    let prefix: Vec<String> =
        vars.iter().map(|v| format!("{} {v}", if rng.random_bool(0.6) { "forall" } else { "exists" })).collect();
    let depth = rng.random_range(0..=max_depth);
    format!("{}: {}", prefix.join(" "), random_body(rng, vars, sigs, depth))
}

pub fn random_table(rng: &mut ChaCha8Rng, name: &str, arity: usize, n: usize, default: f64) -> KnownPredicateTable {
    let mut entries = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let t = if arity == 1 { vec![a] } else { vec![a, b] };
            if (arity == 2 || b == 0) && rng.random_bool(0.4) {
                entries.push((t, (rng.random_range(0..=4) as f64) / 4.0));
            }
        }
    }
    KnownPredicateTable::new(name, arity, entries, default).unwrap()
}

pub fn random_samples(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> SampleSet {
    SampleSet::from_rows((0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()).unwrap()
}

fn random_kernel(rng: &mut ChaCha8Rng) -> KernelSpec {
    match rng.random_range(0..3) {
        0 => KernelSpec::Linear,
        1 => KernelSpec::Polynomial { degree: rng.random_range(1..=3), offset: rng.random_range(0.0..1.0) },
        _ => KernelSpec::Rbf { gamma: rng.random_range(0.2..2.0) },
    }
}

/// A problem with 2-3 learnable predicates, a known binary predicate `K`,
/// 1-3 random clauses (possibly guarded by `K`) and `|S| <= max_samples`.
pub fn random_problem(seed: u64, max_samples: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_samples);
    let samples = random_samples(&mut rng, n, 2);
    let n_learn = rng.random_range(2..=3);
    let vocab = vocabulary();
    let mut predicates = Vec::new();
    let mut labeled = Vec::new();
    for sig in vocab.iter().filter(|s| s.kind == PredicateKind::Learnable).take(n_learn) {
        let lambda_pi = rng.random_range(0.5..2.0);
        predicates.push(PredicateDef {
            signature: sig.clone(),
            kernel: Some(random_kernel(&mut rng)),
            lambda_pi,
            lambda_r: rng.random_range(0.01..0.5),
        });
        let mut examples: Vec<(Vec<SampleId>, f64)> = Vec::new();
        for _ in 0..rng.random_range(1..=3) {
            let t: Vec<SampleId> = (0..sig.arity).map(|_| rng.random_range(0..n)).collect();
            if !examples.iter().any(|(e, _)| *e == t) {
                examples.push((t, if rng.random_bool(0.5) { 1.0 } else { 0.0 }));
            }
        }
        labeled.push(LabeledSet::new(sig.name.clone(), examples));
    }
    let default = if rng.random_bool(0.5) { 0.0 } else { 0.5 };
    let table = random_table(&mut rng, "K", 2, n, default);
    predicates.push(PredicateDef {
        signature: PredicateSignature::known("K", 2),
        kernel: None,
        lambda_pi: 0.0,
        lambda_r: 0.0,
    });
    let sigs: Vec<PredicateSignature> = predicates.iter().map(|p| p.signature.clone()).collect();
    let usable: Vec<PredicateSignature> = sigs.clone();

    let mut lines = Vec::new();
    for i in 0..rng.random_range(1..=3) {
        let weight = rng.random_range(0.2..2.0);
        if rng.random_bool(0.25) {
            let body = random_body(&mut rng, &["x", "y"], &usable, 2);
            lines.push(format!("[name=g{i}, w={weight}, guard=K] forall x, y: {body}"));
        } else {
            lines.push(format!("[name=c{i}, w={weight}] {}", random_clause_text(&mut rng, &usable, 3)));
        }
    }
    let clauses = parse_clause_file(&lines.join("\n"), &sigs).unwrap();
    Problem {
        samples,
        unlabeled: (0..n).collect(),
        predicates,
        labeled,
        known: vec![table],
        clauses,
        loss: if rng.random_bool(0.5) { LossKind::Squared } else { LossKind::Hinge },
        grounding: GroundingSettings::default(),
        train: TrainConfig::default(),
    }
}

/// Relative-or-absolute closeness used by the gradient checks.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= (rel * a.abs().max(b.abs())).max(abs)
}
