//! Seeded two-blob problem used by the examples and the acceptance suite.
//!
//! Samples `0..n` form blob 1 and `n..2n` blob 2. `A` is labeled positive on
//! the first ten blob-1 samples; `B` is labeled positive on sample 0 and
//! negative on the first blob-2 sample. One clause links them:
//! `forall x: A(x) -> B(x)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{LabeledSet, SampleSet};
use crate::fol::{parse_clause_file, PredicateSignature};
use crate::kernel::KernelSpec;
use crate::objective::LossKind;
use crate::problem::{GroundingSettings, PredicateDef, Problem};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub seed: u64,
    pub per_blob: usize,
    /// Blob centres sit at `(-offset, 0)` and `(offset, 0)`.
    pub offset: f64,
    pub std_dev: f64,
    pub gamma: f64,
    pub lambda_r: f64,
    pub lambda_v: f64,
    pub a_labels: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            per_blob: 30,
            offset: 2.0,
            std_dev: 0.5,
            gamma: 0.5,
            lambda_r: 0.01,
            lambda_v: 1.0,
            a_labels: 10,
        }
    }
}

pub fn two_blobs(cfg: &ToyConfig) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.std_dev).expect("positive std dev");
    let mut rows = Vec::with_capacity(2 * cfg.per_blob);
    for centre in [-cfg.offset, cfg.offset] {
        for _ in 0..cfg.per_blob {
            rows.push(vec![centre + noise.sample(&mut rng), noise.sample(&mut rng)]);
        }
    }
    let samples = SampleSet::from_rows(rows).expect("rectangular rows");
    let kernel = KernelSpec::Rbf { gamma: cfg.gamma };
    let predicates = vec![
        PredicateDef {
            signature: PredicateSignature::learnable("A", 1),
            kernel: Some(kernel),
            lambda_pi: 1.0,
            lambda_r: cfg.lambda_r,
        },
        PredicateDef {
            signature: PredicateSignature::learnable("B", 1),
            kernel: Some(kernel),
            lambda_pi: 1.0,
            lambda_r: cfg.lambda_r,
        },
    ];
    let signatures: Vec<_> = predicates.iter().map(|p| p.signature.clone()).collect();
    let mut clauses =
        parse_clause_file("[name=a_implies_b] forall x: A(x) -> B(x)", &signatures).expect("valid clause");
    clauses[0].weight = cfg.lambda_v;
    let a = (0..cfg.a_labels.min(cfg.per_blob)).map(|i| (vec![i], 1.0)).collect();
    let b = vec![(vec![0], 1.0), (vec![cfg.per_blob], 0.0)];
    Problem {
        unlabeled: (0..samples.len()).collect(),
        samples,
        predicates,
        labeled: vec![LabeledSet::new("A", a), LabeledSet::new("B", b)],
        known: Vec::new(),
        clauses,
        loss: LossKind::Squared,
        grounding: GroundingSettings::default(),
        train: TrainConfig {
            learning_rate: 0.05,
            step_growth: 1.05,
            max_epochs_stage1: 5000,
            max_epochs_stage2: 5000,
            grad_tol: 1e-5,
            constraint_ramp_epochs: 0,
            seed: cfg.seed,
        },
    }
}
