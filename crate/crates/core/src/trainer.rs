//! Two-stage gradient descent.
//!
//! Stage 1 fits the labeled examples (`R + N`) starting from the given
//! weights. Stage 2 continues from the stage-1 solution on `R + N + V`,
//! optionally ramping the constraint weights in linearly. Each epoch takes
//! one full-batch step; a step that would raise the objective is retried
//! with half the learning rate.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{SampleId, SampleSet};
use crate::kernel::{KernelError, KernelExpansion};
use crate::objective::{gradient_norm, Breakdown, Objective, ObjectiveError};
use crate::tnorm::squash_unchecked;

/// Backtracking gives up below this step size and ends the stage.
const MIN_STEP: f64 = 1e-14;
/// The objective may not exceed this multiple of its value at stage entry.
const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Factor applied to the learning rate after every accepted step.
    pub step_growth: f64,
    pub max_epochs_stage1: usize,
    pub max_epochs_stage2: usize,
    /// A stage ends once the gradient norm drops below this.
    pub grad_tol: f64,
    /// Stage-2 epochs over which clause weights rise from 0 to their value.
    pub constraint_ramp_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            step_growth: 1.0,
            max_epochs_stage1: 10_000,
            max_epochs_stage2: 10_000,
            grad_tol: 1e-6,
            constraint_ramp_epochs: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.step_growth >= 1.0 && self.step_growth.is_finite()) {
            return Err(format!("step_growth must be >= 1, got {}", self.step_growth));
        }
        if self.max_epochs_stage1 == 0 || self.max_epochs_stage2 == 0 {
            return Err("max_epochs_stage1 and max_epochs_stage2 must be positive".into());
        }
        if !(self.grad_tol >= 0.0) {
            return Err(format!("grad_tol must be >= 0, got {}", self.grad_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Init,
    Labeled,
    Abstraction,
    Done,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Init => "init",
            Stage::Labeled => "labeled",
            Stage::Abstraction => "abstraction",
            Stage::Done => "done",
        })
    }
}

/// Objective terms at the start of an epoch, before its step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub stage: Stage,
    pub risk: f64,
    pub regularizer: f64,
    /// Unscaled `sum_h lambda_v_h * penalty_h`, tracked in both stages.
    pub penalty: f64,
    /// The objective being minimised in this stage.
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub expansions: Vec<KernelExpansion>,
    pub weights: Vec<Vec<f64>>,
    pub stage: Stage,
    pub trace: Vec<TraceRow>,
    /// Weights at the end of stage 1.
    pub stage1_weights: Vec<Vec<f64>>,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    /// Full objective `R + N + V` at the final weights.
    pub final_breakdown: Breakdown,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("objective diverged at epoch {epoch}: {objective} > {factor} x {reference}", factor = DIVERGENCE_FACTOR)]
    DivergenceDetected { epoch: usize, objective: f64, reference: f64 },
    #[error("non-finite objective or gradient at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("no learned predicate named '{0}'")]
    UnknownPredicate(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Trains from zero weights.
pub fn train(objective: &Objective, config: &TrainConfig) -> Result<TrainState, TrainError> {
    train_from(objective, config, objective.zero_weights())
}

/// Trains with stage 1 starting from `initial`.
pub fn train_from(
    objective: &Objective,
    config: &TrainConfig,
    initial: Vec<Vec<f64>>,
) -> Result<TrainState, TrainError> {
    config.validate().map_err(TrainError::Config)?;
    let mut weights = initial;
    let mut trace = Vec::new();

    let stage1_epochs =
        descend(objective, config, Stage::Labeled, &mut weights, &mut trace, config.max_epochs_stage1, |_| 0.0)?;
    let stage1_weights = weights.clone();

    let mut stage2_epochs = 0;
    if objective.has_constraints() {
        let ramp = config.constraint_ramp_epochs;
        let scale = move |t: usize| if ramp == 0 { 1.0 } else { ((t + 1) as f64 / ramp as f64).min(1.0) };
        stage2_epochs =
            descend(objective, config, Stage::Abstraction, &mut weights, &mut trace, config.max_epochs_stage2, scale)?;
    }

    let final_breakdown = objective.evaluate(&weights, 1.0)?;
    Ok(TrainState {
        expansions: objective.expansions(&weights)?,
        weights,
        stage: Stage::Done,
        trace,
        stage1_weights,
        stage1_epochs,
        stage2_epochs,
        final_breakdown,
    })
}

fn all_finite(b: &Breakdown, grads: &[Vec<f64>]) -> bool {
    b.objective.is_finite() && grads.iter().flatten().all(|g| g.is_finite())
}

/// Runs one stage and returns the number of epochs taken.
fn descend(
    objective: &Objective,
    config: &TrainConfig,
    stage: Stage,
    weights: &mut Vec<Vec<f64>>,
    trace: &mut Vec<TraceRow>,
    max_epochs: usize,
    scale: impl Fn(usize) -> f64,
) -> Result<usize, TrainError> {
    let first_epoch = trace.len();
    let full_scale = if stage == Stage::Labeled { 0.0 } else { 1.0 };
    let reference = objective.evaluate(weights, full_scale)?.objective;
    let mut lr = config.learning_rate;
    let mut current_scale = scale(0);
    let (mut breakdown, mut grads) = objective.objective_and_gradient(weights, current_scale)?;

    for t in 0..max_epochs {
        let epoch = first_epoch + t;
        let s = scale(t);
        if s != current_scale {
            current_scale = s;
            (breakdown, grads) = objective.objective_and_gradient(weights, s)?;
        }
        if !all_finite(&breakdown, &grads) {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        if reference > 0.0 && breakdown.objective > DIVERGENCE_FACTOR * reference {
            return Err(TrainError::DivergenceDetected { epoch, objective: breakdown.objective, reference });
        }
        let grad_norm = gradient_norm(&grads);
        trace.push(TraceRow {
            epoch,
            stage,
            risk: breakdown.risk,
            regularizer: breakdown.regularizer,
            penalty: breakdown.penalty,
            objective: breakdown.objective,
            grad_norm,
        });
        if grad_norm < config.grad_tol && s >= full_scale {
            return Ok(t + 1);
        }

        loop {
            let candidate: Vec<Vec<f64>> = weights
                .iter()
                .zip(&grads)
                .map(|(w, g)| w.iter().zip(g).map(|(wi, gi)| wi - lr * gi).collect())
                .collect();
            let (cb, cg) = objective.objective_and_gradient(&candidate, s)?;
            if cb.objective.is_finite() && cb.objective <= breakdown.objective {
                *weights = candidate;
                breakdown = cb;
                grads = cg;
                lr *= config.step_growth;
                break;
            }
            lr *= 0.5;
            if lr < MIN_STEP {
                return Ok(t + 1);
            }
        }
    }
    Ok(max_epochs)
}

/// Raw output `f(args)` and truth degree `squash(f(args))` of a learned
/// predicate.
pub fn predict(
    state: &TrainState,
    samples: &SampleSet,
    predicate: &str,
    args: &[SampleId],
) -> Result<(f64, f64), TrainError> {
    predict_with(&state.expansions, samples, predicate, args)
}

pub fn predict_with(
    expansions: &[KernelExpansion],
    samples: &SampleSet,
    predicate: &str,
    args: &[SampleId],
) -> Result<(f64, f64), TrainError> {
    let expansion = expansions
        .iter()
        .find(|e| e.predicate == predicate)
        .ok_or_else(|| TrainError::UnknownPredicate(predicate.to_string()))?;
    let raw = expansion.eval(args, samples)?;
    Ok((raw, squash_unchecked(raw)))
}

/// CSV with header `epoch,stage,R,N,V,E,grad_norm`.
pub fn write_trace(rows: &[TraceRow]) -> String {
    let mut out = String::from("epoch,stage,R,N,V,E,grad_norm\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:?},{:?},{:?},{:?},{:?}\n",
            r.epoch, r.stage, r.risk, r.regularizer, r.penalty, r.objective, r.grad_norm
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledSet;
    use crate::fol::{parse_clause_file, PredicateSignature};
    use crate::kernel::KernelSpec;
    use crate::objective::LossKind;
    use crate::problem::{GroundingSettings, PredicateDef, Problem};

    fn problem(clauses: &str) -> Problem {
        let samples = SampleSet::from_rows(vec![vec![0.0], vec![0.5], vec![3.0], vec![3.5]]).unwrap();
        let defs = vec![
            PredicateDef {
                signature: PredicateSignature::learnable("A", 1),
                kernel: Some(KernelSpec::Rbf { gamma: 1.0 }),
                lambda_pi: 1.0,
                lambda_r: 0.01,
            },
            PredicateDef {
                signature: PredicateSignature::learnable("B", 1),
                kernel: Some(KernelSpec::Rbf { gamma: 1.0 }),
                lambda_pi: 1.0,
                lambda_r: 0.01,
            },
        ];
        let sigs: Vec<_> = defs.iter().map(|d| d.signature.clone()).collect();
        Problem {
            samples,
            unlabeled: vec![0, 1, 2, 3],
            predicates: defs,
            labeled: vec![
                LabeledSet::new("A", vec![(vec![0], 1.0), (vec![1], 1.0), (vec![2], 0.0)]),
                LabeledSet::new("B", vec![(vec![0], 1.0), (vec![3], 0.0)]),
            ],
            known: vec![],
            clauses: parse_clause_file(clauses, &sigs).unwrap(),
            loss: LossKind::Squared,
            grounding: GroundingSettings::default(),
            train: TrainConfig::default(),
        }
    }

    fn config() -> TrainConfig {
        TrainConfig { learning_rate: 0.1, max_epochs_stage1: 500, max_epochs_stage2: 500, ..TrainConfig::default() }
    }

    #[test]
    fn stage_one_trace_is_monotone() {
        let obj = Objective::compile(&problem("forall x: A(x) -> B(x)")).unwrap();
        let state = train(&obj, &config()).unwrap();
        let stage1: Vec<_> = state.trace.iter().filter(|r| r.stage == Stage::Labeled).collect();
        assert!(!stage1.is_empty());
        for pair in stage1.windows(2) {
            assert!(pair[1].objective <= pair[0].objective);
        }
        assert_eq!(state.stage, Stage::Done);
    }

    #[test]
    fn stages_switch_once() {
        let obj = Objective::compile(&problem("forall x: A(x) -> B(x)")).unwrap();
        let state = train(&obj, &config()).unwrap();
        let switches = state.trace.windows(2).filter(|p| p[0].stage != p[1].stage).count();
        assert_eq!(switches, 1);
        assert_eq!(state.trace.len(), state.stage1_epochs + state.stage2_epochs);
        assert!(state.final_breakdown.penalty <= state.trace[state.stage1_epochs].penalty);
    }

    #[test]
    fn no_clauses_skips_stage_two() {
        let obj = Objective::compile(&problem("")).unwrap();
        let state = train(&obj, &config()).unwrap();
        assert_eq!(state.stage2_epochs, 0);
        assert!(state.trace.iter().all(|r| r.stage == Stage::Labeled));
        assert_eq!(state.weights, state.stage1_weights);
    }

    #[test]
    fn zero_weight_clauses_skip_stage_two() {
        let mut p = problem("forall x: A(x) -> B(x)");
        p.clauses[0].weight = 0.0;
        let state = train(&Objective::compile(&p).unwrap(), &config()).unwrap();
        assert_eq!(state.stage2_epochs, 0);
    }

    #[test]
    fn ramp_scales_constraint_term() {
        let obj = Objective::compile(&problem("forall x: A(x) -> B(x)")).unwrap();
        let cfg = TrainConfig { constraint_ramp_epochs: 4, grad_tol: 0.0, max_epochs_stage2: 6, ..config() };
        let state = train(&obj, &cfg).unwrap();
        let stage2: Vec<_> = state.trace.iter().filter(|r| r.stage == Stage::Abstraction).collect();
        let first = stage2[0];
        assert!((first.objective - (first.risk + first.regularizer + 0.25 * first.penalty)).abs() < 1e-12);
        let last = stage2.last().unwrap();
        assert!((last.objective - (last.risk + last.regularizer + last.penalty)).abs() < 1e-12);
    }

    #[test]
    fn predict_returns_raw_and_truth() {
        let obj = Objective::compile(&problem("")).unwrap();
        let state = train(&obj, &config()).unwrap();
        let (raw, truth) = predict(&state, &obj_samples(), "A", &[0]).unwrap();
        assert_eq!(truth, raw.clamp(0.0, 1.0));
        assert!(raw > 0.5);
        assert!(matches!(predict(&state, &obj_samples(), "Z", &[0]), Err(TrainError::UnknownPredicate(_))));
    }

    fn obj_samples() -> SampleSet {
        problem("").samples
    }

    #[test]
    fn invalid_config_is_rejected() {
        let obj = Objective::compile(&problem("")).unwrap();
        let cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(matches!(train(&obj, &cfg), Err(TrainError::Config(_))));
    }

    #[test]
    fn trace_csv_header() {
        let obj = Objective::compile(&problem("")).unwrap();
        let cfg = TrainConfig { max_epochs_stage1: 3, grad_tol: 0.0, ..config() };
        let state = train(&obj, &cfg).unwrap();
        let csv = write_trace(&state.trace);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("epoch,stage,R,N,V,E,grad_norm"));
        assert_eq!(lines.count(), 3);
    }
}
