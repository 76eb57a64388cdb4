//! Samples, labeled example sets and known-predicate tables, with their CSV
//! readers and writers.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fol::ClauseFileError;

pub type SampleId = usize;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}, row {row}: {message}")]
    Malformed { path: String, row: usize, message: String },
    #[error("{path}, row {row}: expected {expected} value(s), got {got}")]
    DimensionMismatch { path: String, row: usize, expected: usize, got: usize },
    #[error("{location}: sample id {id} does not exist (|S| = {len})")]
    DanglingSampleId { location: String, id: SampleId, len: usize },
    #[error("duplicate sample id {0}")]
    DuplicateSampleId(SampleId),
    #[error("sample ids must be dense 0..{len}; id {missing} is missing")]
    SparseSampleIds { len: usize, missing: SampleId },
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Clause { path: String, source: ClauseFileError },
}

/// The feature vectors of a problem, indexed by dense ids `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dimension: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let dimension = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dimension);
        for (row, v) in rows.into_iter().enumerate() {
            if v.len() != dimension {
                return Err(DataError::DimensionMismatch {
                    path: "<memory>".into(),
                    row,
                    expected: dimension,
                    got: v.len(),
                });
            }
            data.extend(v);
        }
        Ok(Self { dimension, data })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        if self.dimension == 0 {
            0
        } else {
            self.data.len() / self.dimension
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vector(&self, id: SampleId) -> &[f64] {
        &self.data[id * self.dimension..(id + 1) * self.dimension]
    }

    pub fn check_id(&self, id: SampleId, location: &str) -> Result<(), DataError> {
        if id < self.len() {
            Ok(())
        } else {
            Err(DataError::DanglingSampleId { location: location.to_string(), id, len: self.len() })
        }
    }
}

/// Supervised examples `(tuple, y)` with `y` in `{0, 1}` for one predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub predicate: String,
    pub examples: Vec<(Vec<SampleId>, f64)>,
}

impl LabeledSet {
    pub fn new(predicate: impl Into<String>, examples: Vec<(Vec<SampleId>, f64)>) -> Self {
        Self { predicate: predicate.into(), examples }
    }

    pub fn sample_ids(&self) -> impl Iterator<Item = SampleId> + '_ {
        self.examples.iter().flat_map(|(t, _)| t.iter().copied())
    }
}

/// Tabulated truth values for a known predicate. Tuples absent from the
/// table take `default`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownPredicateTable {
    pub predicate: String,
    pub arity: usize,
    /// Entries in file order.
    pub entries: Vec<(Vec<SampleId>, f64)>,
    pub default: f64,
    index: HashMap<Vec<SampleId>, usize>,
}

impl KnownPredicateTable {
    pub fn new(
        predicate: impl Into<String>,
        arity: usize,
        entries: Vec<(Vec<SampleId>, f64)>,
        default: f64,
    ) -> Result<Self, DataError> {
        let predicate = predicate.into();
        if !(0.0..=1.0).contains(&default) {
            return Err(DataError::Config(format!("known predicate {predicate}: default {default} outside [0,1]")));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (tuple, value)) in entries.iter().enumerate() {
            if tuple.len() != arity {
                return Err(DataError::Config(format!(
                    "known predicate {predicate}: tuple {tuple:?} has arity {}, expected {arity}",
                    tuple.len()
                )));
            }
            if !(0.0..=1.0).contains(value) {
                return Err(DataError::Config(format!(
                    "known predicate {predicate}: value {value} for {tuple:?} outside [0,1]"
                )));
            }
            if index.insert(tuple.clone(), i).is_some() {
                return Err(DataError::Config(format!("known predicate {predicate}: duplicate tuple {tuple:?}")));
            }
        }
        Ok(Self { predicate, arity, entries, default, index })
    }

    pub fn value(&self, tuple: &[SampleId]) -> f64 {
        self.index.get(tuple).map_or(self.default, |&i| self.entries[i].1)
    }
}

/// The pooled sample set `S`: every id used as an argument of a labeled
/// example together with the unlabeled ids, deduplicated and sorted.
pub fn pool_samples(labeled: &[LabeledSet], unlabeled: &[SampleId]) -> Vec<SampleId> {
    let mut pooled: BTreeSet<SampleId> = unlabeled.iter().copied().collect();
    for set in labeled {
        pooled.extend(set.sample_ids());
    }
    pooled.into_iter().collect()
}

pub(crate) fn read_text(path: &Path) -> Result<String, DataError> {
    let mut file = std::fs::File::open(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => DataError::MissingFile(path.to_path_buf()),
        _ => DataError::Io { path: path.to_path_buf(), source },
    })?;
    let mut text = String::new();
    file.read_to_string(&mut text).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    Ok(text)
}

fn csv_records(text: &str, path: &str) -> Result<Vec<(usize, Vec<String>)>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Malformed {
            path: path.to_string(),
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

fn parse_id(field: &str, path: &str, row: usize) -> Result<SampleId, DataError> {
    field.parse().map_err(|_| DataError::Malformed {
        path: path.to_string(),
        row,
        message: format!("'{field}' is not a sample id"),
    })
}

fn parse_float(field: &str, path: &str, row: usize) -> Result<f64, DataError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::Malformed {
            path: path.to_string(),
            row,
            message: format!("'{field}' is not a finite number"),
        }),
    }
}

/// Reads `id, x_1, ..., x_m` rows. Rows may come in any order but the ids
/// must be exactly `0..n`.
pub fn read_samples(text: &str, path: &str) -> Result<SampleSet, DataError> {
    let records = csv_records(text, path)?;
    let dimension = records.first().map_or(0, |(_, r)| r.len().saturating_sub(1));
    let n = records.len();
    let mut by_id: HashMap<SampleId, Vec<f64>> = HashMap::with_capacity(n);
    for (line, fields) in &records {
        if fields.len() != dimension + 1 {
            return Err(DataError::DimensionMismatch {
                path: path.to_string(),
                row: *line,
                expected: dimension,
                got: fields.len().saturating_sub(1),
            });
        }
        let id = parse_id(&fields[0], path, *line)?;
        let values = fields[1..].iter().map(|f| parse_float(f, path, *line)).collect::<Result<Vec<_>, _>>()?;
        if by_id.insert(id, values).is_some() {
            return Err(DataError::DuplicateSampleId(id));
        }
    }
    let mut rows = Vec::with_capacity(n);
    for id in 0..n {
        rows.push(by_id.remove(&id).ok_or(DataError::SparseSampleIds { len: n, missing: id })?);
    }
    if dimension == 0 && n > 0 {
        return Err(DataError::Malformed {
            path: path.to_string(),
            row: records[0].0,
            message: "no feature values".into(),
        });
    }
    SampleSet::from_rows(rows)
}

pub fn write_samples(samples: &SampleSet) -> String {
    let mut out = String::new();
    for id in 0..samples.len() {
        let _ = write!(out, "{id}");
        for v in samples.vector(id) {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

/// Reads `id_1, ..., id_n, y` rows with `y` exactly 0 or 1.
pub fn read_labels(text: &str, path: &str, predicate: &str, arity: usize) -> Result<LabeledSet, DataError> {
    let mut examples = Vec::new();
    for (line, fields) in csv_records(text, path)? {
        if fields.len() != arity + 1 {
            return Err(DataError::DimensionMismatch {
                path: path.to_string(),
                row: line,
                expected: arity + 1,
                got: fields.len(),
            });
        }
        let tuple = fields[..arity].iter().map(|f| parse_id(f, path, line)).collect::<Result<Vec<_>, _>>()?;
        let y = parse_float(&fields[arity], path, line)?;
        if y != 0.0 && y != 1.0 {
            return Err(DataError::Malformed {
                path: path.to_string(),
                row: line,
                message: format!("target {y} is not 0 or 1"),
            });
        }
        examples.push((tuple, y));
    }
    Ok(LabeledSet::new(predicate, examples))
}

pub fn write_labels(set: &LabeledSet) -> String {
    write_tuple_values(&set.examples)
}

/// Reads `id_1, ..., id_n, value` rows with values in `[0, 1]`.
pub fn read_known_table(
    text: &str,
    path: &str,
    predicate: &str,
    arity: usize,
    default: f64,
) -> Result<KnownPredicateTable, DataError> {
    let mut entries = Vec::new();
    for (line, fields) in csv_records(text, path)? {
        if fields.len() != arity + 1 {
            return Err(DataError::DimensionMismatch {
                path: path.to_string(),
                row: line,
                expected: arity + 1,
                got: fields.len(),
            });
        }
        let tuple = fields[..arity].iter().map(|f| parse_id(f, path, line)).collect::<Result<Vec<_>, _>>()?;
        entries.push((tuple, parse_float(&fields[arity], path, line)?));
    }
    KnownPredicateTable::new(predicate, arity, entries, default)
}

pub fn write_known_table(table: &KnownPredicateTable) -> String {
    write_tuple_values(&table.entries)
}

fn write_tuple_values(rows: &[(Vec<SampleId>, f64)]) -> String {
    let mut out = String::new();
    for (tuple, v) in rows {
        for id in tuple {
            let _ = write!(out, "{id},");
        }
        let _ = writeln!(out, "{v:?}");
    }
    out
}

pub fn read_id_list(text: &str, path: &str) -> Result<Vec<SampleId>, DataError> {
    let mut ids = Vec::new();
    for (line, fields) in csv_records(text, path)? {
        for f in fields.iter().filter(|f| !f.is_empty()) {
            ids.push(parse_id(f, path, line)?);
        }
    }
    Ok(ids)
}
