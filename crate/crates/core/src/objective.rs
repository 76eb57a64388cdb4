//! The training objective `E = R + N + V` over kernel-expansion weights.
//!
//! Every learnable predicate `k` carries a support `S_k` (its labeled tuples
//! plus every tuple at which a clause evaluates it) and the Gram matrix `G_k`
//! over that support. With `f_k = G_k w_k`:
//!
//! * `R = sum_k lambda_pi_k * mean_i loss(f_k(x_i), y_i)`
//! * `N = sum_k lambda_r_k * w_k^T G_k w_k`
//! * `V = sum_h lambda_v_h * penalty_h`
//!
//! and `dE/dw_k = G_k (dR/df_k + dV/df_k) + 2 lambda_r_k f_k`.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::SampleId;
use crate::fol::PredicateKind;
use crate::grounding::{ground_clause, GroundedGraph, GroundingContext, GroundingError};
use crate::kernel::{gram_matrix, Gram, KernelError, KernelExpansion, KernelSpec};
use crate::par;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `(z - y)^2`
    #[default]
    Squared,
    /// `max(0, 1 - (2y - 1)(2z - 1))`
    Hinge,
}

impl LossKind {
    pub fn value(self, z: f64, y: f64) -> f64 {
        match self {
            LossKind::Squared => (z - y) * (z - y),
            LossKind::Hinge => (1.0 - (2.0 * y - 1.0) * (2.0 * z - 1.0)).max(0.0),
        }
    }

    /// `d loss / d z`. The hinge kink takes the zero subgradient.
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            LossKind::Squared => 2.0 * (z - y),
            LossKind::Hinge => {
                let s = 2.0 * y - 1.0;
                if 1.0 - s * (2.0 * z - 1.0) > 0.0 {
                    -2.0 * s
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("predicate '{0}' has lambda_pi > 0 but no labeled examples")]
    EmptyLabeledSet(String),
    #[error("support of predicate '{predicate}' has {size} tuples, above the cap of {cap}")]
    SupportCapExceeded { predicate: String, size: usize, cap: usize },
    #[error("clause '{clause}': {source}")]
    Grounding {
        clause: String,
        #[source]
        source: GroundingError,
    },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("predicate '{predicate}': expected {expected} weights, got {got}")]
    WeightShape { predicate: String, expected: usize, got: usize },
    #[error("no learnable predicate named '{0}'")]
    UnknownPredicate(String),
}

/// A learnable predicate compiled against its support.
#[derive(Debug, Clone)]
pub struct PredicateModel {
    pub name: String,
    pub arity: usize,
    pub kernel: KernelSpec,
    pub lambda_pi: f64,
    pub lambda_r: f64,
    /// Sorted, duplicate-free support tuples.
    pub support: Vec<Vec<SampleId>>,
    pub gram: Gram,
    /// `(support index, target)` per labeled example.
    pub labels: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct CompiledClause {
    pub name: String,
    pub weight: f64,
    pub graph: GroundedGraph,
    /// For each graph atom, `(model index, support index)`.
    pub slots: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Objective {
    pub models: Vec<PredicateModel>,
    pub clauses: Vec<CompiledClause>,
    pub loss: LossKind,
}

/// Objective terms at one point. `penalty` is the unscaled weighted sum
/// `sum_h lambda_v_h * penalty_h`; `objective = risk + regularizer +
/// v_scale * penalty`.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakdown {
    pub risk: f64,
    pub regularizer: f64,
    pub penalty: f64,
    pub clause_penalties: Vec<f64>,
    pub v_scale: f64,
    pub objective: f64,
}

/// Per learnable predicate (in declaration order), the sorted union of its
/// labeled tuples and the tuples its atoms take in the grounded clauses.
pub fn build_supports(
    problem: &Problem,
    graphs: &[GroundedGraph],
    max_support: usize,
) -> Result<Vec<Vec<Vec<SampleId>>>, ObjectiveError> {
    let learnable: Vec<usize> = problem
        .predicates
        .iter()
        .enumerate()
        .filter(|(_, p)| p.signature.kind == PredicateKind::Learnable)
        .map(|(i, _)| i)
        .collect();
    let mut sets: Vec<BTreeSet<Vec<SampleId>>> = vec![BTreeSet::new(); learnable.len()];
    for (set, labeled) in sets.iter_mut().zip(&problem.labeled) {
        set.extend(labeled.examples.iter().map(|(t, _)| t.clone()));
    }
    for graph in graphs {
        for atom in &graph.atoms {
            if let Some(m) = learnable.iter().position(|&i| i == atom.predicate) {
                sets[m].insert(atom.tuple.clone());
            }
        }
    }
    sets.into_iter()
        .zip(&learnable)
        .map(|(set, &i)| {
            if set.len() > max_support {
                Err(ObjectiveError::SupportCapExceeded {
                    predicate: problem.predicates[i].signature.name.clone(),
                    size: set.len(),
                    cap: max_support,
                })
            } else {
                Ok(set.into_iter().collect())
            }
        })
        .collect()
}

impl Objective {
    /// Grounds every clause, builds supports and Gram matrices.
    pub fn compile(problem: &Problem) -> Result<Objective, ObjectiveError> {
        let signatures = problem.signatures();
        let pool = problem.pool();
        let ctx = GroundingContext { signatures: &signatures, pool: &pool, known: &problem.known };
        let options = problem.grounding_options();
        let graphs = problem
            .clauses
            .iter()
            .map(|c| {
                ground_clause(&c.ast, &ctx, c.guard.as_deref(), &options)
                    .map_err(|source| ObjectiveError::Grounding { clause: c.name.clone(), source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let supports = build_supports(problem, &graphs, problem.grounding.max_support)?;

        let learnable: Vec<usize> = problem
            .predicates
            .iter()
            .enumerate()
            .filter(|(_, p)| p.signature.kind == PredicateKind::Learnable)
            .map(|(i, _)| i)
            .collect();
        let mut models = Vec::with_capacity(learnable.len());
        let mut indices: Vec<HashMap<Vec<SampleId>, usize>> = Vec::with_capacity(learnable.len());
        for ((&p, support), labeled) in learnable.iter().zip(supports).zip(&problem.labeled) {
            let def = &problem.predicates[p];
            let name = def.signature.name.clone();
            if def.lambda_pi > 0.0 && labeled.examples.is_empty() {
                return Err(ObjectiveError::EmptyLabeledSet(name));
            }
            let kernel = def.kernel.ok_or_else(|| ObjectiveError::UnknownPredicate(name.clone()))?;
            let gram = gram_matrix(&kernel, &support, &problem.samples)?;
            let index: HashMap<Vec<SampleId>, usize> =
                support.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
            let labels = labeled.examples.iter().map(|(t, y)| (index[t], *y)).collect();
            models.push(PredicateModel {
                name,
                arity: def.signature.arity,
                kernel,
                lambda_pi: def.lambda_pi,
                lambda_r: def.lambda_r,
                support,
                gram,
                labels,
            });
            indices.push(index);
        }

        let clauses = problem
            .clauses
            .iter()
            .zip(graphs)
            .map(|(c, graph)| {
                let slots = graph
                    .atoms
                    .iter()
                    .map(|a| {
                        let m = learnable.iter().position(|&i| i == a.predicate).expect("atoms are learnable");
                        (m, indices[m][&a.tuple])
                    })
                    .collect();
                CompiledClause { name: c.name.clone(), weight: c.weight, graph, slots }
            })
            .collect();
        Ok(Objective { models, clauses, loss: problem.loss })
    }

    pub fn model_index(&self, name: &str) -> Option<usize> {
        self.models.iter().position(|m| m.name == name)
    }

    pub fn zero_weights(&self) -> Vec<Vec<f64>> {
        self.models.iter().map(|m| vec![0.0; m.support.len()]).collect()
    }

    /// True when some clause has a positive weight.
    pub fn has_constraints(&self) -> bool {
        self.clauses.iter().any(|c| c.weight > 0.0)
    }

    fn check_shape(&self, weights: &[Vec<f64>]) -> Result<(), ObjectiveError> {
        if weights.len() != self.models.len() {
            return Err(ObjectiveError::WeightShape {
                predicate: "<all>".into(),
                expected: self.models.len(),
                got: weights.len(),
            });
        }
        for (m, w) in self.models.iter().zip(weights) {
            if w.len() != m.support.len() {
                return Err(ObjectiveError::WeightShape {
                    predicate: m.name.clone(),
                    expected: m.support.len(),
                    got: w.len(),
                });
            }
        }
        Ok(())
    }

    /// `f_k = G_k w_k` on each support.
    pub fn outputs(&self, weights: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ObjectiveError> {
        self.check_shape(weights)?;
        Ok(self.models.iter().zip(weights).map(|(m, w)| par::matvec(m.gram.as_slice(), w)).collect())
    }

    pub fn empirical_risk(&self, outputs: &[Vec<f64>]) -> f64 {
        self.models
            .iter()
            .zip(outputs)
            .filter(|(m, _)| !m.labels.is_empty() && m.lambda_pi != 0.0)
            .map(|(m, f)| {
                let losses: Vec<f64> = m.labels.iter().map(|&(i, y)| self.loss.value(f[i], y)).collect();
                m.lambda_pi * par::pairwise_sum(&losses) / losses.len() as f64
            })
            .fold(0.0, |acc, v| acc + v)
    }

    pub fn regularizer(&self, weights: &[Vec<f64>], outputs: &[Vec<f64>]) -> f64 {
        self.models
            .iter()
            .zip(weights)
            .zip(outputs)
            .map(|((m, w), f)| m.lambda_r * par::dot(w, f))
            .fold(0.0, |acc, v| acc + v)
    }

    fn raw_atoms(&self, clause: &CompiledClause, outputs: &[Vec<f64>]) -> Vec<f64> {
        clause.slots.iter().map(|&(m, i)| outputs[m][i]).collect()
    }

    /// Raw `penalty_h` for every clause.
    pub fn clause_penalties(&self, outputs: &[Vec<f64>]) -> Result<Vec<f64>, ObjectiveError> {
        self.clauses
            .iter()
            .map(|c| {
                let eval = c
                    .graph
                    .eval(&self.raw_atoms(c, outputs))
                    .map_err(|source| ObjectiveError::Grounding { clause: c.name.clone(), source })?;
                Ok(eval.penalty)
            })
            .collect()
    }

    /// Per clause, the penalty over the groundings whose learnable atoms are
    /// all labeled tuples. `None` when no grounding qualifies.
    pub fn labeled_penalties(&self, weights: &[Vec<f64>]) -> Result<Vec<Option<f64>>, ObjectiveError> {
        let outputs = self.outputs(weights)?;
        let labeled: Vec<HashSet<usize>> =
            self.models.iter().map(|m| m.labels.iter().map(|&(i, _)| i).collect()).collect();
        self.clauses
            .iter()
            .map(|c| {
                let eval = c
                    .graph
                    .eval(&self.raw_atoms(c, &outputs))
                    .map_err(|source| ObjectiveError::Grounding { clause: c.name.clone(), source })?;
                Ok(c.graph.restricted_penalty(&eval, |seg| {
                    seg.atoms().all(|a| {
                        let (m, i) = c.slots[a];
                        labeled[m].contains(&i)
                    })
                }))
            })
            .collect()
    }

    fn breakdown(&self, risk: f64, regularizer: f64, clause_penalties: Vec<f64>, v_scale: f64) -> Breakdown {
        let penalty: f64 =
            self.clauses.iter().zip(&clause_penalties).map(|(c, p)| c.weight * p).fold(0.0, |acc, v| acc + v);
        Breakdown {
            risk,
            regularizer,
            penalty,
            clause_penalties,
            v_scale,
            objective: risk + regularizer + v_scale * penalty,
        }
    }

    pub fn evaluate(&self, weights: &[Vec<f64>], v_scale: f64) -> Result<Breakdown, ObjectiveError> {
        let outputs = self.outputs(weights)?;
        let risk = self.empirical_risk(&outputs);
        let regularizer = self.regularizer(weights, &outputs);
        let penalties = self.clause_penalties(&outputs)?;
        Ok(self.breakdown(risk, regularizer, penalties, v_scale))
    }

    /// Objective terms and `dE/dw` with the constraint term scaled by
    /// `v_scale`.
    pub fn objective_and_gradient(
        &self,
        weights: &[Vec<f64>],
        v_scale: f64,
    ) -> Result<(Breakdown, Vec<Vec<f64>>), ObjectiveError> {
        let outputs = self.outputs(weights)?;
        let risk = self.empirical_risk(&outputs);
        let regularizer = self.regularizer(weights, &outputs);

        let mut df: Vec<Vec<f64>> = outputs.iter().map(|f| vec![0.0; f.len()]).collect();
        for ((m, f), d) in self.models.iter().zip(&outputs).zip(df.iter_mut()) {
            if m.labels.is_empty() || m.lambda_pi == 0.0 {
                continue;
            }
            let scale = m.lambda_pi / m.labels.len() as f64;
            for &(i, y) in &m.labels {
                d[i] += scale * self.loss.derivative(f[i], y);
            }
        }

        let mut penalties = Vec::with_capacity(self.clauses.len());
        for c in &self.clauses {
            let raw = self.raw_atoms(c, &outputs);
            let wrap = |source| ObjectiveError::Grounding { clause: c.name.clone(), source };
            let eval = c.graph.eval(&raw).map_err(wrap)?;
            penalties.push(eval.penalty);
            let upstream = v_scale * c.weight;
            if upstream != 0.0 {
                let grad = c.graph.backprop(&eval, &raw, upstream).map_err(wrap)?;
                for (&(m, i), g) in c.slots.iter().zip(grad) {
                    df[m][i] += g;
                }
            }
        }

        let grads = self
            .models
            .iter()
            .zip(&df)
            .zip(&outputs)
            .map(|((m, d), f)| {
                let mut g = par::matvec(m.gram.as_slice(), d);
                for (gi, fi) in g.iter_mut().zip(f) {
                    *gi += 2.0 * m.lambda_r * fi;
                }
                g
            })
            .collect();
        Ok((self.breakdown(risk, regularizer, penalties, v_scale), grads))
    }

    /// Kernel expansions carrying the given weights.
    pub fn expansions(&self, weights: &[Vec<f64>]) -> Result<Vec<KernelExpansion>, ObjectiveError> {
        self.check_shape(weights)?;
        self.models
            .iter()
            .zip(weights)
            .map(|(m, w)| {
                KernelExpansion::new(m.name.clone(), m.arity, m.kernel, m.support.clone(), w.clone())
                    .map_err(ObjectiveError::from)
            })
            .collect()
    }
}

/// Euclidean norm over all weight blocks.
pub fn gradient_norm(grads: &[Vec<f64>]) -> f64 {
    grads.iter().flat_map(|g| g.iter()).map(|g| g * g).fold(0.0, |acc, v| acc + v).sqrt()
}
