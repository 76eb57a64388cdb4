mod common;

use folkm::data::{LabeledSet, SampleSet};
use folkm::fol::PredicateSignature;
use folkm::kernel::KernelSpec;
use folkm::objective::{LossKind, Objective};
use folkm::problem::{GroundingSettings, PredicateDef, Problem};
use folkm::toy::{two_blobs, ToyConfig};
use folkm::trainer::{predict, train, train_from, write_trace, Stage, TrainConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn single_predicate(rows: Vec<Vec<f64>>, labels: Vec<f64>, kernel: KernelSpec, lambda_r: f64) -> Problem {
    let examples = labels.into_iter().enumerate().map(|(i, y)| (vec![i], y)).collect();
    Problem {
        samples: SampleSet::from_rows(rows).unwrap(),
        unlabeled: vec![],
        predicates: vec![PredicateDef {
            signature: PredicateSignature::learnable("A", 1),
            kernel: Some(kernel),
            lambda_pi: 1.0,
            lambda_r,
        }],
        labeled: vec![LabeledSet::new("A", examples)],
        known: vec![],
        clauses: vec![],
        loss: LossKind::Squared,
        grounding: GroundingSettings::default(),
        train: TrainConfig {
            learning_rate: 0.05,
            step_growth: 1.05,
            max_epochs_stage1: 50_000,
            grad_tol: 1e-11,
            ..TrainConfig::default()
        },
    }
}

#[test]
fn two_point_linear_fit_matches_direct_solve() {
    let rows = vec![vec![1.0, 0.5], vec![-0.5, 2.0]];
    let p = single_predicate(rows.clone(), vec![1.0, 0.0], KernelSpec::Linear, 0.01);
    let obj = Objective::compile(&p).unwrap();
    let state = train(&obj, &p.train).unwrap();

    // (G + n lr I) w = y with G the linear Gram matrix.
    let g = DMatrix::from_fn(2, 2, |i, j| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>());
    let a = &g + DMatrix::identity(2, 2) * 0.02;
    let w = a.lu().solve(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
    for i in 0..2 {
        assert!((state.weights[0][i] - w[i]).abs() < 1e-4, "w[{i}] = {} vs {}", state.weights[0][i], w[i]);
    }
}

#[test]
fn stage_one_reaches_the_same_fit_from_any_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let p = single_predicate(rows, vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0], KernelSpec::Rbf { gamma: 1.0 }, 0.1);
    let obj = Objective::compile(&p).unwrap();
    let reference = obj.outputs(&train(&obj, &p.train).unwrap().weights).unwrap();
    for _ in 0..5 {
        let init = vec![(0..6).map(|_| rng.random_range(-2.0..2.0)).collect()];
        let state = train_from(&obj, &p.train, init).unwrap();
        let f = obj.outputs(&state.weights).unwrap();
        for (a, b) in f[0].iter().zip(&reference[0]) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }
}

#[test]
fn stage_one_objective_never_increases() {
    let p = two_blobs(&ToyConfig::default());
    let cfg = TrainConfig { max_epochs_stage1: 400, max_epochs_stage2: 50, ..p.train.clone() };
    let obj = Objective::compile(&p).unwrap();
    let state = train(&obj, &cfg).unwrap();
    let stage1: Vec<f64> = state.trace.iter().filter(|r| r.stage == Stage::Labeled).map(|r| r.objective).collect();
    assert_eq!(stage1.len(), state.stage1_epochs);
    assert!(stage1.windows(2).all(|w| w[1] <= w[0]));
    let epochs: Vec<usize> = state.trace.iter().map(|r| r.epoch).collect();
    assert!(epochs.windows(2).all(|w| w[1] == w[0] + 1));
}

#[test]
fn default_learning_rate_is_monotone_too() {
    let p = two_blobs(&ToyConfig::default());
    let cfg = TrainConfig { max_epochs_stage1: 200, max_epochs_stage2: 1, ..TrainConfig::default() };
    let state = train(&Objective::compile(&p).unwrap(), &cfg).unwrap();
    let stage1: Vec<f64> = state.trace.iter().filter(|r| r.stage == Stage::Labeled).map(|r| r.objective).collect();
    assert!(stage1.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn no_clause_problem_keeps_stage_one_objective() {
    let mut p = two_blobs(&ToyConfig::default());
    p.clauses.clear();
    let obj = Objective::compile(&p).unwrap();
    let state = train(&obj, &p.train).unwrap();
    assert_eq!(state.stage2_epochs, 0);
    let stage1_e = obj.evaluate(&state.stage1_weights, 0.0).unwrap().objective;
    assert_eq!(state.final_breakdown.objective, stage1_e);
    assert!(state.trace.iter().all(|r| r.penalty == 0.0));
}

/// Independent penalty of `forall x: A(x) -> B(x)` from raw outputs.
fn implication_penalty(a: &[f64], b: &[f64]) -> f64 {
    let total: f64 = a.iter().zip(b).map(|(&x, &y)| common::clamp01(x) * (1.0 - common::clamp01(y))).sum();
    total / a.len() as f64
}

#[test]
fn stage_two_halves_the_penalty_and_a_low_penalty_point_exists() {
    let p = two_blobs(&ToyConfig::default());
    let obj = Objective::compile(&p).unwrap();
    let state = train(&obj, &p.train).unwrap();
    let entry = state.trace[state.stage1_epochs].penalty;
    assert_eq!(state.trace[state.stage1_epochs].stage, Stage::Abstraction);
    let last = state.final_breakdown.penalty;
    assert!(last <= 0.5 * entry, "V went from {entry} to {last}");

    // Grid oracle: B's weights replaced by c times A's stage-1 weights.
    let (a, b) = (obj.model_index("A").unwrap(), obj.model_index("B").unwrap());
    assert_eq!(obj.models[a].support, obj.models[b].support);
    let f = obj.outputs(&state.stage1_weights).unwrap();
    assert!((implication_penalty(&f[a], &f[b]) - entry).abs() < 1e-12);
    let best = (0..=40)
        .map(|k| {
            let c = k as f64 * 0.25;
            let fb: Vec<f64> = f[a].iter().map(|v| c * v).collect();
            implication_penalty(&f[a], &fb)
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best < 0.5 * entry, "grid best {best} vs entry {entry}");
}

#[test]
fn ramped_run_still_satisfies_the_clause() {
    let mut p = two_blobs(&ToyConfig::default());
    p.train.constraint_ramp_epochs = 50;
    let obj = Objective::compile(&p).unwrap();
    let state = train(&obj, &p.train).unwrap();
    assert!(state.final_breakdown.penalty < 0.05);
    assert!(state.stage2_epochs >= 50);
}

#[test]
fn trace_is_identical_across_thread_counts() {
    let p = two_blobs(&ToyConfig::default());
    let cfg = TrainConfig { max_epochs_stage1: 300, max_epochs_stage2: 300, ..p.train.clone() };
    let obj = Objective::compile(&p).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| write_trace(&train(&obj, &cfg).unwrap().trace))
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
}

#[test]
fn zero_model_predicts_zero() {
    let p = two_blobs(&ToyConfig::default());
    let obj = Objective::compile(&p).unwrap();
    let cfg =
        TrainConfig { max_epochs_stage1: 1, max_epochs_stage2: 1, learning_rate: 1e-300, ..TrainConfig::default() };
    let mut state = train(&obj, &cfg).unwrap();
    for e in &mut state.expansions {
        e.weights.iter_mut().for_each(|w| *w = 0.0);
    }
    assert_eq!(predict(&state, &p.samples, "A", &[3]).unwrap(), (0.0, 0.0));
}
