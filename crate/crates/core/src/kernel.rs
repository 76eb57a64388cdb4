//! Kernels over argument tuples, Gram matrices and kernel expansions.
//!
//! A tuple `[x_1, ..., x_n]` of sample ids is treated as the concatenation
//! of its feature vectors in `R^{m*n}`, so the usual vector kernels apply to
//! predicates of any arity.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::data::{SampleId, SampleSet};
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("argument lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("sample id {id} does not exist (|S| = {len})")]
    DanglingSampleId { id: SampleId, len: usize },
    #[error("duplicate support tuple {0:?}")]
    DuplicateTuple(Vec<SampleId>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weight {index} is not finite")]
    NonFiniteWeight { index: usize },
    #[error("tuple {tuple:?} has {got} argument(s), expected {expected}")]
    ArityMismatch { tuple: Vec<SampleId>, expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32, offset: f64 },
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, offset } => {
                if degree < 1 {
                    Err(KernelError::InvalidKernel("polynomial degree must be >= 1".into()))
                } else if !(offset >= 0.0 && offset.is_finite()) {
                    Err(KernelError::InvalidKernel("polynomial offset must be >= 0".into()))
                } else {
                    Ok(())
                }
            }
            KernelSpec::Rbf { gamma } => {
                if gamma > 0.0 && gamma.is_finite() {
                    Ok(())
                } else {
                    Err(KernelError::InvalidKernel("rbf gamma must be > 0".into()))
                }
            }
        }
    }

    /// Evaluates the kernel on two equal-length vectors.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64, KernelError> {
        if a.len() != b.len() {
            return Err(KernelError::LengthMismatch { left: a.len(), right: b.len() });
        }
        Ok(self.eval_parts(a.iter().copied().zip(b.iter().copied())))
    }

    /// Evaluates on tuples of sample ids without materializing the
    /// concatenated vectors. Summation order matches [`KernelSpec::eval`]
    /// on the concatenation.
    pub fn eval_tuples(&self, samples: &SampleSet, a: &[SampleId], b: &[SampleId]) -> f64 {
        let pairs = a
            .iter()
            .zip(b)
            .flat_map(|(&i, &j)| samples.vector(i).iter().copied().zip(samples.vector(j).iter().copied()));
        self.eval_parts(pairs)
    }

    fn eval_parts(&self, pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
        match *self {
            KernelSpec::Linear => pairs.map(|(x, y)| x * y).sum(),
            KernelSpec::Polynomial { degree, offset } => {
                let dot: f64 = pairs.map(|(x, y)| x * y).sum();
                (dot + offset).powi(degree as i32)
            }
            KernelSpec::Rbf { gamma } => {
                let sq: f64 = pairs.map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * sq).exp()
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => f.write_str("linear"),
            KernelSpec::Polynomial { degree, offset } => {
                write!(f, "polynomial(degree={degree}, offset={offset})")
            }
            KernelSpec::Rbf { gamma } => write!(f, "rbf(gamma={gamma})"),
        }
    }
}

/// Parses `linear`, `polynomial(degree=D, offset=C)` or `rbf(gamma=G)`.
/// Omitted parameters default to degree 2, offset 1 and gamma 1.
impl FromStr for KernelSpec {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, params) = match s.find('(') {
            Some(open) => {
                let inner = s[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| KernelError::InvalidKernel(format!("missing ')' in '{s}'")))?;
                (s[..open].trim(), inner)
            }
            None => (s, ""),
        };
        let mut kv = Vec::new();
        for part in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| KernelError::InvalidKernel(format!("expected key=value, got '{part}'")))?;
            let v: f64 = v.trim().parse().map_err(|_| KernelError::InvalidKernel(format!("'{v}' is not a number")))?;
            kv.push((k.trim().to_string(), v));
        }
        let take = |key: &str, default: f64| -> f64 { kv.iter().find(|(k, _)| k == key).map_or(default, |(_, v)| *v) };
        let allowed: &[&str] = match name {
            "linear" => &[],
            "polynomial" | "poly" => &["degree", "offset"],
            "rbf" | "gaussian" => &["gamma"],
            _ => return Err(KernelError::InvalidKernel(format!("unknown kernel '{name}'"))),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(KernelError::InvalidKernel(format!("unknown parameter '{k}' for {name}")));
        }
        let spec = match name {
            "linear" => KernelSpec::Linear,
            "polynomial" | "poly" => {
                let degree = take("degree", 2.0);
                if degree.fract() != 0.0 || degree < 1.0 || degree > u32::MAX as f64 {
                    return Err(KernelError::InvalidKernel("polynomial degree must be a positive integer".into()));
                }
                KernelSpec::Polynomial { degree: degree as u32, offset: take("offset", 1.0) }
            }
            _ => KernelSpec::Rbf { gamma: take("gamma", 1.0) },
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Dense symmetric Gram matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self, KernelError> {
        if data.len() != n * n {
            return Err(KernelError::DimensionMismatch { expected: n * n, got: data.len() });
        }
        Ok(Self { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `G v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, KernelError> {
        if v.len() != self.n {
            return Err(KernelError::DimensionMismatch { expected: self.n, got: v.len() });
        }
        Ok(par::matvec(&self.data, v))
    }
}

fn check_tuple(samples: &SampleSet, tuple: &[SampleId]) -> Result<(), KernelError> {
    match tuple.iter().find(|&&id| id >= samples.len()) {
        Some(&id) => Err(KernelError::DanglingSampleId { id, len: samples.len() }),
        None => Ok(()),
    }
}

fn check_unique(tuples: &[Vec<SampleId>]) -> Result<(), KernelError> {
    let mut seen = HashSet::with_capacity(tuples.len());
    for t in tuples {
        if !seen.insert(t.as_slice()) {
            return Err(KernelError::DuplicateTuple(t.clone()));
        }
    }
    Ok(())
}

/// `G[i][j] = k(tuple_i, tuple_j)`. Rows are computed in parallel; each
/// entry is computed independently so the result does not depend on the
/// thread count.
pub fn gram_matrix(spec: &KernelSpec, tuples: &[Vec<SampleId>], samples: &SampleSet) -> Result<Gram, KernelError> {
    spec.validate()?;
    for t in tuples {
        check_tuple(samples, t)?;
    }
    check_unique(tuples)?;
    if let Some(first) = tuples.first() {
        if let Some(bad) = tuples.iter().find(|t| t.len() != first.len()) {
            return Err(KernelError::ArityMismatch { tuple: bad.clone(), expected: first.len(), got: bad.len() });
        }
    }
    let n = tuples.len();
    let mut data = vec![0.0; n * n];
    par::fill(&mut data, |idx| {
        let (i, j) = (idx / n, idx % n);
        spec.eval_tuples(samples, &tuples[i], &tuples[j])
    });
    Ok(Gram { n, data })
}

/// A learned predicate `f(t) = sum_i w_i k(s_i, t)` over support tuples `s_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelExpansion {
    pub predicate: String,
    pub arity: usize,
    pub kernel: KernelSpec,
    pub support: Vec<Vec<SampleId>>,
    pub weights: Vec<f64>,
}

impl KernelExpansion {
    pub fn new(
        predicate: impl Into<String>,
        arity: usize,
        kernel: KernelSpec,
        support: Vec<Vec<SampleId>>,
        weights: Vec<f64>,
    ) -> Result<Self, KernelError> {
        kernel.validate()?;
        if weights.len() != support.len() {
            return Err(KernelError::DimensionMismatch { expected: support.len(), got: weights.len() });
        }
        if let Some(index) = weights.iter().position(|w| !w.is_finite()) {
            return Err(KernelError::NonFiniteWeight { index });
        }
        if let Some(bad) = support.iter().find(|t| t.len() != arity) {
            return Err(KernelError::ArityMismatch { tuple: bad.clone(), expected: arity, got: bad.len() });
        }
        check_unique(&support)?;
        Ok(Self { predicate: predicate.into(), arity, kernel, support, weights })
    }

    /// A zero-weight expansion over the given support.
    pub fn zeros(
        predicate: impl Into<String>,
        arity: usize,
        kernel: KernelSpec,
        support: Vec<Vec<SampleId>>,
    ) -> Result<Self, KernelError> {
        let n = support.len();
        Self::new(predicate, arity, kernel, support, vec![0.0; n])
    }

    /// `f(args)` for a tuple of known sample ids.
    pub fn eval(&self, args: &[SampleId], samples: &SampleSet) -> Result<f64, KernelError> {
        if args.len() != self.arity {
            return Err(KernelError::ArityMismatch { tuple: args.to_vec(), expected: self.arity, got: args.len() });
        }
        check_tuple(samples, args)?;
        for t in &self.support {
            check_tuple(samples, t)?;
        }
        Ok(self.support.iter().zip(&self.weights).map(|(s, w)| w * self.kernel.eval_tuples(samples, s, args)).sum())
    }

    /// `f(args)` for arbitrary feature vectors, one per argument.
    pub fn eval_vectors(&self, args: &[&[f64]], samples: &SampleSet) -> Result<f64, KernelError> {
        if args.len() != self.arity {
            return Err(KernelError::DimensionMismatch { expected: self.arity, got: args.len() });
        }
        if let Some(bad) = args.iter().find(|a| a.len() != samples.dimension()) {
            return Err(KernelError::DimensionMismatch { expected: samples.dimension(), got: bad.len() });
        }
        let query: Vec<f64> = args.iter().flat_map(|a| a.iter().copied()).collect();
        let mut total = 0.0;
        for (s, w) in self.support.iter().zip(&self.weights) {
            check_tuple(samples, s)?;
            let support: Vec<f64> = s.iter().flat_map(|&id| samples.vector(id).iter().copied()).collect();
            total += w * self.kernel.eval(&support, &query)?;
        }
        Ok(total)
    }
}

/// Unweighted squared RKHS norm `w^T G w`.
pub fn rkhs_norm_sq(expansion: &KernelExpansion, gram: &Gram) -> Result<f64, KernelError> {
    let w = &expansion.weights;
    if gram.size() != w.len() {
        return Err(KernelError::DimensionMismatch { expected: w.len(), got: gram.size() });
    }
    Ok(par::dot(w, &gram.mul_vec(w)?))
}
