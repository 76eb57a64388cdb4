//! Tokenizer for clause source text.

use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Forall,
    Exists,
    Ident(String),
    LParen,
    RParen,
    Comma,
    Colon,
    And,
    Or,
    Not,
    Implies,
    Iff,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Forall => f.write_str("forall"),
            TokenKind::Exists => f.write_str("exists"),
            TokenKind::Ident(name) => write!(f, "{name}"),
            TokenKind::LParen => f.write_str("("),
            TokenKind::RParen => f.write_str(")"),
            TokenKind::Comma => f.write_str(","),
            TokenKind::Colon => f.write_str(":"),
            TokenKind::And => f.write_str("and"),
            TokenKind::Or => f.write_str("or"),
            TokenKind::Not => f.write_str("not"),
            TokenKind::Implies => f.write_str("->"),
            TokenKind::Iff => f.write_str("<->"),
        }
    }
}

/// A token with the byte offset at which it starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn keyword_or_ident(word: &str) -> TokenKind {
    match word {
        "forall" => TokenKind::Forall,
        "exists" => TokenKind::Exists,
        "and" => TokenKind::And,
        "or" => TokenKind::Or,
        "not" => TokenKind::Not,
        _ => TokenKind::Ident(word.to_string()),
    }
}

/// Splits a clause into tokens.
///
/// Identifiers are `[A-Za-z_][A-Za-z0-9_]*`, or any text between double
/// quotes for names that are not plain identifiers. Quoted names never
/// become keywords.
pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();

    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let single = match c {
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            ',' => Some(TokenKind::Comma),
            ':' => Some(TokenKind::Colon),
            _ => None,
        };
        if let Some(kind) = single {
            chars.next();
            tokens.push(Token { kind, pos });
            continue;
        }
        match c {
            '-' => {
                chars.next();
                match chars.next() {
                    Some((_, '>')) => tokens.push(Token { kind: TokenKind::Implies, pos }),
                    _ => return Err(ParseError::UnknownCharacter { ch: '-', pos }),
                }
            }
            '<' => {
                chars.next();
                let dash = chars.next();
                let gt = chars.next();
                match (dash, gt) {
                    (Some((_, '-')), Some((_, '>'))) => tokens.push(Token { kind: TokenKind::Iff, pos }),
                    _ => return Err(ParseError::UnknownCharacter { ch: '<', pos }),
                }
            }
            '"' => {
                chars.next();
                let mut name = String::new();
                let mut closed = false;
                for (_, ch) in chars.by_ref() {
                    if ch == '"' {
                        closed = true;
                        break;
                    }
                    name.push(ch);
                }
                if !closed {
                    return Err(ParseError::UnterminatedIdentifier { pos });
                }
                if name.is_empty() {
                    return Err(ParseError::Syntax { pos, message: "empty quoted identifier".into() });
                }
                tokens.push(Token { kind: TokenKind::Ident(name), pos });
            }
            c if is_ident_start(c) => {
                let mut end = pos;
                while let Some(&(i, ch)) = chars.peek() {
                    if !is_ident_continue(ch) {
                        break;
                    }
                    end = i + ch.len_utf8();
                    chars.next();
                }
                tokens.push(Token { kind: keyword_or_ident(&text[pos..end]), pos });
            }
            other => return Err(ParseError::UnknownCharacter { ch: other, pos }),
        }
    }
    Ok(tokens)
}
