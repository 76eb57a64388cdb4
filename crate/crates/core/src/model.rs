//! Plain-text model files.
//!
//! ```text
//! folkm-model 1
//! predicate<TAB>A<TAB>1<TAB>rbf(gamma=0.5)<TAB>2
//! 0<TAB>0.25
//! 3<TAB>-0.125
//! ```
//!
//! One block per learned predicate: a header with name, arity, kernel and
//! support size, then one line per support tuple (its ids, then the weight).
//! Weights are written in shortest round-trip form.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data::SampleId;
use crate::kernel::{KernelError, KernelExpansion, KernelSpec};
use crate::problem::Problem;

const MAGIC: &str = "folkm-model 1";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("model predicate '{predicate}': {source}")]
    Kernel {
        predicate: String,
        #[source]
        source: KernelError,
    },
    #[error("model does not match the problem: {0}")]
    Mismatch(String),
}

pub fn write_model(expansions: &[KernelExpansion]) -> String {
    let mut out = format!("{MAGIC}\n");
    for e in expansions {
        out.push_str(&format!("predicate\t{}\t{}\t{}\t{}\n", e.predicate, e.arity, e.kernel, e.support.len()));
        for (tuple, w) in e.support.iter().zip(&e.weights) {
            for id in tuple {
                out.push_str(&format!("{id}\t"));
            }
            out.push_str(&format!("{w:?}\n"));
        }
    }
    out
}

pub fn read_model(text: &str) -> Result<Vec<KernelExpansion>, ModelError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let malformed = |line: usize, message: String| ModelError::Malformed { line, message };
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        Some((n, _)) => return Err(malformed(n, format!("expected '{MAGIC}'"))),
        None => return Err(malformed(1, "empty model file".into())),
    }
    let mut expansions = Vec::new();
    while let Some((n, header)) = lines.next() {
        let fields: Vec<&str> = header.split('\t').collect();
        if fields.len() != 5 || fields[0] != "predicate" {
            return Err(malformed(n, "expected 'predicate<TAB>name<TAB>arity<TAB>kernel<TAB>count'".into()));
        }
        let name = fields[1].to_string();
        let arity: usize = fields[2].parse().map_err(|_| malformed(n, format!("bad arity '{}'", fields[2])))?;
        let kernel: KernelSpec = fields[3].parse().map_err(|e| malformed(n, format!("{e}")))?;
        let count: usize = fields[4].parse().map_err(|_| malformed(n, format!("bad count '{}'", fields[4])))?;
        let mut support = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) =
                lines.next().ok_or_else(|| malformed(n, format!("predicate {name}: missing weight lines")))?;
            let parts: Vec<&str> = line.split('\t').map(str::trim).collect();
            if parts.len() != arity + 1 {
                return Err(malformed(n, format!("expected {arity} ids and a weight")));
            }
            let tuple = parts[..arity]
                .iter()
                .map(|p| p.parse::<SampleId>().map_err(|_| malformed(n, format!("bad sample id '{p}'"))))
                .collect::<Result<Vec<_>, _>>()?;
            let w: f64 = parts[arity].parse().map_err(|_| malformed(n, format!("bad weight '{}'", parts[arity])))?;
            support.push(tuple);
            weights.push(w);
        }
        let expansion = KernelExpansion::new(name.clone(), arity, kernel, support, weights)
            .map_err(|source| ModelError::Kernel { predicate: name, source })?;
        expansions.push(expansion);
    }
    Ok(expansions)
}

pub fn save_model(path: &Path, expansions: &[KernelExpansion]) -> Result<(), ModelError> {
    std::fs::write(path, write_model(expansions)).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })
}

pub fn load_model(path: &Path) -> Result<Vec<KernelExpansion>, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
    read_model(&text)
}

/// Checks that the model covers exactly the problem's learnable predicates
/// with matching arity and kernel, and that its support ids exist.
pub fn check_model(expansions: &[KernelExpansion], problem: &Problem) -> Result<(), ModelError> {
    let learnable: Vec<_> = problem.learnable().collect();
    if learnable.len() != expansions.len() {
        return Err(ModelError::Mismatch(format!(
            "model has {} predicates, problem has {} learnable predicates",
            expansions.len(),
            learnable.len()
        )));
    }
    for def in learnable {
        let s = &def.signature;
        let e = expansions
            .iter()
            .find(|e| e.predicate == s.name)
            .ok_or_else(|| ModelError::Mismatch(format!("predicate {} missing from model", s.name)))?;
        if e.arity != s.arity {
            return Err(ModelError::Mismatch(format!("predicate {}: arity {} vs {}", s.name, e.arity, s.arity)));
        }
        if Some(e.kernel) != def.kernel {
            return Err(ModelError::Mismatch(format!(
                "predicate {}: kernel {} differs from the config",
                s.name, e.kernel
            )));
        }
        if let Some(bad) = e.support.iter().flatten().find(|&&id| id >= problem.samples.len()) {
            return Err(ModelError::Mismatch(format!("predicate {}: support id {bad} is not a sample", s.name)));
        }
    }
    Ok(())
}
