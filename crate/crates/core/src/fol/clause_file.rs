//! Clause files: one clause per line, `#` comments, optional attribute
//! prefix such as `[w=2.5, name=sub, guard=Near]`.

use thiserror::Error;

use super::ast::{ClauseAst, PredicateSignature};
use super::parser::parse_clause_str;
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub struct ClauseEntry {
    pub name: String,
    pub weight: f64,
    pub guard: Option<String>,
    /// 1-based source line.
    pub line: usize,
    pub ast: ClauseAst,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClauseFileError {
    #[error("line {line}, column {}: {error}", .error.position() + 1)]
    Parse { line: usize, error: ParseError },
    #[error("line {line}: bad clause attribute '{attr}': {reason}")]
    Attribute { line: usize, attr: String, reason: String },
    #[error("line {line}: duplicate clause name '{name}'")]
    DuplicateName { line: usize, name: String },
}

struct Attributes {
    name: Option<String>,
    weight: f64,
    guard: Option<String>,
}

fn parse_attributes(text: &str, line: usize) -> Result<Attributes, ClauseFileError> {
    let mut attrs = Attributes { name: None, weight: 1.0, guard: None };
    for item in text.split([',', ' ', '\t']).filter(|s| !s.is_empty()) {
        let bad =
            |reason: &str| ClauseFileError::Attribute { line, attr: item.to_string(), reason: reason.to_string() };
        let (key, value) = item.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        match key.trim() {
            "w" | "weight" => {
                let w: f64 = value.trim().parse().map_err(|_| bad("weight is not a number"))?;
                if !w.is_finite() || w < 0.0 {
                    return Err(bad("weight must be finite and non-negative"));
                }
                attrs.weight = w;
            }
            "name" => attrs.name = Some(value.trim().to_string()),
            "guard" => attrs.guard = Some(value.trim().to_string()),
            _ => return Err(bad("unknown key (expected w, name or guard)")),
        }
    }
    Ok(attrs)
}

/// Parses the contents of a clause file. Clauses without an explicit name
/// are called `c1`, `c2`, ... in file order.
pub fn parse_clause_file(text: &str, signatures: &[PredicateSignature]) -> Result<Vec<ClauseEntry>, ClauseFileError> {
    let mut entries: Vec<ClauseEntry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let mut offset = content.len() - content.trim_start().len();
        let mut clause = content.trim_start();
        let mut attrs = Attributes { name: None, weight: 1.0, guard: None };
        if let Some(rest) = clause.strip_prefix('[') {
            let close = rest.find(']').ok_or_else(|| ClauseFileError::Attribute {
                line,
                attr: clause.to_string(),
                reason: "missing ']'".into(),
            })?;
            attrs = parse_attributes(&rest[..close], line)?;
            offset += close + 2;
            clause = &rest[close + 1..];
        }
        let ast = parse_clause_str(clause, signatures)
            .map_err(|error| ClauseFileError::Parse { line, error: shift(error, offset) })?;
        let name = attrs.name.unwrap_or_else(|| format!("c{}", entries.len() + 1));
        if entries.iter().any(|e| e.name == name) {
            return Err(ClauseFileError::DuplicateName { line, name });
        }
        entries.push(ClauseEntry { name, weight: attrs.weight, guard: attrs.guard, line, ast });
    }
    Ok(entries)
}

fn shift(error: ParseError, offset: usize) -> ParseError {
    use ParseError::*;
    match error {
        UnknownCharacter { ch, pos } => UnknownCharacter { ch, pos: pos + offset },
        UnterminatedIdentifier { pos } => UnterminatedIdentifier { pos: pos + offset },
        UnboundVariable { name, pos } => UnboundVariable { name, pos: pos + offset },
        UnknownPredicate { name, pos } => UnknownPredicate { name, pos: pos + offset },
        ArityMismatch { predicate, expected, got, pos } => {
            ArityMismatch { predicate, expected, got, pos: pos + offset }
        }
        NestedQuantifier { pos } => NestedQuantifier { pos: pos + offset },
        DuplicateVariable { name, pos } => DuplicateVariable { name, pos: pos + offset },
        Syntax { pos, message } => Syntax { pos: pos + offset, message },
    }
}
