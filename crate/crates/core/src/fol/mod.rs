//! First-order clause frontend: tokenizer, prenex parser and clause files.

mod ast;
mod clause_file;
mod lexer;
mod parser;

pub use ast::{ClauseAst, Expr, PredicateKind, PredicateSignature, Quantifier};
pub use clause_file::{parse_clause_file, ClauseEntry, ClauseFileError};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse_clause, parse_clause_str};

use thiserror::Error;

/// Errors raised while reading clauses. Every variant carries the byte
/// offset within the clause text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unknown character '{ch}' at {pos}")]
    UnknownCharacter { ch: char, pos: usize },
    #[error("unterminated quoted identifier starting at {pos}")]
    UnterminatedIdentifier { pos: usize },
    #[error("unbound variable '{name}' at {pos}")]
    UnboundVariable { name: String, pos: usize },
    #[error("unknown predicate '{name}' at {pos}")]
    UnknownPredicate { name: String, pos: usize },
    #[error("predicate '{predicate}' expects {expected} argument(s), got {got} at {pos}")]
    ArityMismatch { predicate: String, expected: usize, got: usize, pos: usize },
    #[error("quantifiers must all appear in the prefix (found one at {pos})")]
    NestedQuantifier { pos: usize },
    #[error("variable '{name}' quantified twice at {pos}")]
    DuplicateVariable { name: String, pos: usize },
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::UnknownCharacter { pos, .. }
            | ParseError::UnterminatedIdentifier { pos }
            | ParseError::UnboundVariable { pos, .. }
            | ParseError::UnknownPredicate { pos, .. }
            | ParseError::ArityMismatch { pos, .. }
            | ParseError::NestedQuantifier { pos }
            | ParseError::DuplicateVariable { pos, .. }
            | ParseError::Syntax { pos, .. } => *pos,
        }
    }
}
