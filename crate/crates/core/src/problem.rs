//! Problem configuration (`problem.toml`) and cross-file validation.
//!
//! ```toml
//! [data]
//! samples = "samples.csv"      # id, x_1, ..., x_m
//! unlabeled = "unlabeled.csv"  # optional list of ids; omitted = every sample
//! clauses = "clauses.txt"      # optional
//!
//! [[predicates]]
//! name = "A"
//! arity = 1
//! kind = "learnable"           # default
//! kernel = "rbf(gamma=0.5)"
//! lambda_pi = 1.0
//! lambda_r = 0.01
//! labels = "a.csv"             # optional: id_1, ..., id_n, y
//!
//! [[predicates]]
//! name = "Near"
//! arity = 2
//! kind = "known"
//! table = "near.csv"           # optional: id_1, ..., id_n, value
//! default = 0.0
//!
//! [objective]
//! loss = "squared"             # or "hinge"
//!
//! [grounding]
//! max_groundings = 1000000
//! max_support = 5000
//! # subsample = 10000
//!
//! [train]                      # see TrainConfig
//! ```
//!
//! Relative paths are resolved against the directory holding the config.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    pool_samples, read_id_list, read_known_table, read_labels, read_samples, read_text, write_known_table,
    write_labels, write_samples, DataError, KnownPredicateTable, LabeledSet, SampleId, SampleSet,
};
use crate::fol::{parse_clause_file, ClauseEntry, PredicateKind, PredicateSignature};
use crate::grounding::{GroundingOptions, DEFAULT_MAX_GROUNDINGS};
use crate::kernel::KernelSpec;
use crate::objective::LossKind;
use crate::trainer::TrainConfig;

pub const DEFAULT_MAX_SUPPORT: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateDef {
    pub signature: PredicateSignature,
    /// Present exactly for learnable predicates.
    pub kernel: Option<KernelSpec>,
    pub lambda_pi: f64,
    pub lambda_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundingSettings {
    pub max_groundings: u64,
    pub max_support: usize,
    pub subsample: Option<usize>,
}

impl Default for GroundingSettings {
    fn default() -> Self {
        Self { max_groundings: DEFAULT_MAX_GROUNDINGS, max_support: DEFAULT_MAX_SUPPORT, subsample: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub samples: SampleSet,
    pub unlabeled: Vec<SampleId>,
    pub predicates: Vec<PredicateDef>,
    /// One set per learnable predicate, in declaration order (possibly empty).
    pub labeled: Vec<LabeledSet>,
    pub known: Vec<KnownPredicateTable>,
    pub clauses: Vec<ClauseEntry>,
    pub loss: LossKind,
    pub grounding: GroundingSettings,
    pub train: TrainConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    data: DataSection,
    predicates: Vec<PredicateSection>,
    #[serde(default)]
    objective: ObjectiveSection,
    #[serde(default)]
    grounding: GroundingSettings,
    #[serde(default)]
    train: TrainConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    samples: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unlabeled: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clauses: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ObjectiveSection {
    loss: LossKind,
}

fn default_kind() -> PredicateKind {
    PredicateKind::Learnable
}

fn one() -> f64 {
    1.0
}

fn default_lambda_r() -> f64 {
    0.01
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredicateSection {
    name: String,
    arity: usize,
    #[serde(default = "default_kind")]
    kind: PredicateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<String>,
    #[serde(default = "one")]
    lambda_pi: f64,
    #[serde(default = "default_lambda_r")]
    lambda_r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "is_zero")]
    default: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn config_err(msg: impl Into<String>) -> DataError {
    DataError::Config(msg.into())
}

impl Problem {
    /// Loads and validates a problem from its config file.
    pub fn load(config_path: &Path) -> Result<Problem, DataError> {
        let text = read_text(config_path)?;
        let cfg: ConfigFile =
            toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", config_path.display())))?;
        let base = config_path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| -> PathBuf {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let load_text = |p: &Path| -> Result<(String, String), DataError> {
            let full = resolve(p);
            Ok((read_text(&full)?, full.display().to_string()))
        };

        let (samples_text, samples_path) = load_text(&cfg.data.samples)?;
        let samples = read_samples(&samples_text, &samples_path)?;
        let unlabeled = match &cfg.data.unlabeled {
            Some(p) => {
                let (t, path) = load_text(p)?;
                read_id_list(&t, &path)?
            }
            None => (0..samples.len()).collect(),
        };

        let mut predicates = Vec::new();
        let mut labeled = Vec::new();
        let mut known = Vec::new();
        for p in &cfg.predicates {
            let signature = PredicateSignature::new(p.name.clone(), p.arity, p.kind);
            match p.kind {
                PredicateKind::Learnable => {
                    if p.table.is_some() {
                        return Err(config_err(format!("learnable predicate {} cannot have a table", p.name)));
                    }
                    let kernel_text = p
                        .kernel
                        .as_deref()
                        .ok_or_else(|| config_err(format!("learnable predicate {} needs a kernel", p.name)))?;
                    let kernel: KernelSpec =
                        kernel_text.parse().map_err(|e| config_err(format!("predicate {}: {e}", p.name)))?;
                    let set = match &p.labels {
                        Some(path) => {
                            let (t, path) = load_text(path)?;
                            read_labels(&t, &path, &p.name, p.arity)?
                        }
                        None => LabeledSet::new(p.name.clone(), Vec::new()),
                    };
                    labeled.push(set);
                    predicates.push(PredicateDef {
                        signature,
                        kernel: Some(kernel),
                        lambda_pi: p.lambda_pi,
                        lambda_r: p.lambda_r,
                    });
                }
                PredicateKind::Known => {
                    if p.labels.is_some() || p.kernel.is_some() {
                        return Err(config_err(format!(
                            "known predicate {} takes a table, not labels or a kernel",
                            p.name
                        )));
                    }
                    let table = match &p.table {
                        Some(path) => {
                            let (t, path) = load_text(path)?;
                            read_known_table(&t, &path, &p.name, p.arity, p.default)?
                        }
                        None => KnownPredicateTable::new(p.name.clone(), p.arity, Vec::new(), p.default)?,
                    };
                    known.push(table);
                    predicates.push(PredicateDef { signature, kernel: None, lambda_pi: 0.0, lambda_r: 0.0 });
                }
            }
        }

        let signatures: Vec<PredicateSignature> = predicates.iter().map(|p| p.signature.clone()).collect();
        let clauses = match &cfg.data.clauses {
            Some(p) => {
                let (t, path) = load_text(p)?;
                parse_clause_file(&t, &signatures).map_err(|source| DataError::Clause { path, source })?
            }
            None => Vec::new(),
        };

        let problem = Problem {
            samples,
            unlabeled,
            predicates,
            labeled,
            known,
            clauses,
            loss: cfg.objective.loss,
            grounding: cfg.grounding,
            train: cfg.train,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Checks every cross reference and parameter range.
    pub fn validate(&self) -> Result<(), DataError> {
        let mut names = HashSet::new();
        for p in &self.predicates {
            let s = &p.signature;
            if s.arity < 1 {
                return Err(config_err(format!("predicate {}: arity must be >= 1", s.name)));
            }
            if !names.insert(s.name.as_str()) {
                return Err(config_err(format!("duplicate predicate name {}", s.name)));
            }
            if s.kind == PredicateKind::Learnable {
                let kernel = p.kernel.ok_or_else(|| config_err(format!("predicate {} needs a kernel", s.name)))?;
                kernel.validate().map_err(|e| config_err(format!("predicate {}: {e}", s.name)))?;
                if !(p.lambda_pi >= 0.0 && p.lambda_pi.is_finite()) {
                    return Err(config_err(format!("predicate {}: lambda_pi must be >= 0", s.name)));
                }
                if !(p.lambda_r > 0.0 && p.lambda_r.is_finite()) {
                    return Err(config_err(format!("predicate {}: lambda_r must be > 0", s.name)));
                }
            }
        }
        let learnable: Vec<&PredicateDef> = self.learnable().collect();
        if learnable.len() != self.labeled.len() {
            return Err(config_err("one labeled set is required per learnable predicate"));
        }
        for (def, set) in learnable.iter().zip(&self.labeled) {
            if def.signature.name != set.predicate {
                return Err(config_err(format!(
                    "labeled set for {} listed where {} was expected",
                    set.predicate, def.signature.name
                )));
            }
            for (tuple, y) in &set.examples {
                if tuple.len() != def.signature.arity {
                    return Err(config_err(format!(
                        "labels of {}: tuple {tuple:?} has the wrong arity",
                        set.predicate
                    )));
                }
                if *y != 0.0 && *y != 1.0 {
                    return Err(config_err(format!("labels of {}: target {y} is not 0 or 1", set.predicate)));
                }
                for &id in tuple {
                    self.samples.check_id(id, &format!("labels of {}", set.predicate))?;
                }
            }
        }
        for table in &self.known {
            let def = self
                .predicates
                .iter()
                .find(|p| p.signature.name == table.predicate && p.signature.kind == PredicateKind::Known)
                .ok_or_else(|| config_err(format!("table for undeclared known predicate {}", table.predicate)))?;
            if def.signature.arity != table.arity {
                return Err(config_err(format!("table of {} has the wrong arity", table.predicate)));
            }
            for (tuple, _) in &table.entries {
                for &id in tuple {
                    self.samples.check_id(id, &format!("table of {}", table.predicate))?;
                }
            }
        }
        for &id in &self.unlabeled {
            self.samples.check_id(id, "unlabeled set")?;
        }
        let mut clause_names = HashSet::new();
        for c in &self.clauses {
            if !clause_names.insert(c.name.as_str()) {
                return Err(config_err(format!("duplicate clause name {}", c.name)));
            }
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(config_err(format!("clause {}: weight must be >= 0", c.name)));
            }
        }
        self.train.validate().map_err(config_err)?;
        Ok(())
    }

    pub fn signatures(&self) -> Vec<PredicateSignature> {
        self.predicates.iter().map(|p| p.signature.clone()).collect()
    }

    pub fn learnable(&self) -> impl Iterator<Item = &PredicateDef> {
        self.predicates.iter().filter(|p| p.signature.kind == PredicateKind::Learnable)
    }

    /// The pooled sample set every quantified variable ranges over.
    pub fn pool(&self) -> Vec<SampleId> {
        pool_samples(&self.labeled, &self.unlabeled)
    }

    pub fn grounding_options(&self) -> GroundingOptions {
        GroundingOptions {
            max_groundings: self.grounding.max_groundings,
            subsample: self.grounding.subsample,
            seed: self.train.seed,
        }
    }

    pub fn set_clause_weight(&mut self, name: &str, weight: f64) -> Result<(), DataError> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(config_err(format!("clause {name}: weight must be >= 0")));
        }
        let clause = self
            .clauses
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| config_err(format!("no clause named {name}")))?;
        clause.weight = weight;
        Ok(())
    }

    /// Writes the problem as `problem.toml` plus data files into `dir` and
    /// returns the config path. Numbers are written at full precision.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, DataError> {
        let write = |name: &str, text: String| -> Result<PathBuf, DataError> {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|source| DataError::Io { path: path.clone(), source })?;
            Ok(PathBuf::from(name))
        };
        std::fs::create_dir_all(dir).map_err(|source| DataError::Io { path: dir.to_path_buf(), source })?;

        let samples = write("samples.csv", write_samples(&self.samples))?;
        let unlabeled_text: String = self.unlabeled.iter().map(|id| format!("{id}\n")).collect();
        let unlabeled = write("unlabeled.csv", unlabeled_text)?;
        let clauses = if self.clauses.is_empty() {
            None
        } else {
            let text: String = self
                .clauses
                .iter()
                .map(|c| {
                    let guard = c.guard.as_ref().map_or(String::new(), |g| format!(", guard={g}"));
                    format!("[name={}, w={:?}{guard}] {}\n", c.name, c.weight, c.ast)
                })
                .collect();
            Some(write("clauses.txt", text)?)
        };

        let mut sections = Vec::new();
        let mut learn_idx = 0;
        for (i, p) in self.predicates.iter().enumerate() {
            let s = &p.signature;
            let mut sec = PredicateSection {
                name: s.name.clone(),
                arity: s.arity,
                kind: s.kind,
                kernel: p.kernel.map(|k| k.to_string()),
                lambda_pi: p.lambda_pi,
                lambda_r: p.lambda_r,
                labels: None,
                table: None,
                default: 0.0,
            };
            match s.kind {
                PredicateKind::Learnable => {
                    let set = &self.labeled[learn_idx];
                    learn_idx += 1;
                    if !set.examples.is_empty() {
                        sec.labels = Some(write(&format!("labels_{i}.csv"), write_labels(set))?);
                    }
                }
                PredicateKind::Known => {
                    let table = self
                        .known
                        .iter()
                        .find(|t| t.predicate == s.name)
                        .ok_or_else(|| config_err(format!("no table for {}", s.name)))?;
                    sec.default = table.default;
                    sec.table = Some(write(&format!("table_{i}.csv"), write_known_table(table))?);
                }
            }
            sections.push(sec);
        }
        let cfg = ConfigFile {
            data: DataSection { samples, unlabeled: Some(unlabeled), clauses },
            predicates: sections,
            objective: ObjectiveSection { loss: self.loss },
            grounding: self.grounding,
            train: self.train.clone(),
        };
        let text = toml::to_string(&cfg).map_err(|e| config_err(e.to_string()))?;
        write("problem.toml", text)?;
        Ok(dir.join("problem.toml"))
    }
}
