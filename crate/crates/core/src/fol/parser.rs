//! Recursive descent parser for prenex clauses.
//!
//! ```text
//! clause  := prefix body
//! prefix  := (("forall" | "exists") ident ("," ident)*)+ ":"
//! body    := iff
//! iff     := implies ("<->" implies)*
//! implies := or ("->" implies)?
//! or      := and ("or" and)*
//! and     := unary ("and" unary)*
//! unary   := "not" unary | "(" body ")" | atom
//! atom    := ident "(" ident ("," ident)* ")"
//! ```

use std::collections::{HashMap, HashSet};

use super::ast::{ClauseAst, Expr, PredicateSignature, Quantifier};
use super::lexer::{tokenize, Token, TokenKind};
use super::ParseError;

/// Tokenizes and parses a single clause.
pub fn parse_clause_str(text: &str, signatures: &[PredicateSignature]) -> Result<ClauseAst, ParseError> {
    let tokens = tokenize(text)?;
    parse_clause(&tokens, text.len(), signatures)
}

/// Parses a token stream into a validated clause. `end` is the source
/// position reported for errors at end of input.
pub fn parse_clause(tokens: &[Token], end: usize, signatures: &[PredicateSignature]) -> Result<ClauseAst, ParseError> {
    let sigs: HashMap<&str, &PredicateSignature> = signatures.iter().map(|s| (s.name.as_str(), s)).collect();
    let mut parser = Parser { tokens, cursor: 0, end, sigs, bound: HashSet::new() };
    let prefix = parser.prefix()?;
    let body = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::Syntax {
            pos: tok.pos,
            message: format!("unexpected '{}' after end of clause", tok.kind),
        });
    }
    Ok(ClauseAst { prefix, body })
}

struct Parser<'a> {
    tokens: &'a [Token],
    cursor: usize,
    end: usize,
    sigs: HashMap<&'a str, &'a PredicateSignature>,
    bound: HashSet<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.cursor)
    }

    fn peek_kind(&self) -> Option<&'a TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn pos(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek_kind() == Some(kind) {
            self.cursor += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(tok) => {
                ParseError::Syntax { pos: tok.pos, message: format!("expected {expected}, found '{}'", tok.kind) }
            }
            None => ParseError::Syntax { pos: self.end, message: format!("expected {expected}, found end of input") },
        }
    }

    fn expect(&mut self, kind: &TokenKind, expected: &str) -> Result<(), ParseError> {
        if self.eat(kind) {
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, usize), ParseError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident(name), pos }) => {
                self.cursor += 1;
                Ok((name.clone(), *pos))
            }
            _ => Err(self.unexpected(expected)),
        }
    }

    fn prefix(&mut self) -> Result<Vec<(Quantifier, String)>, ParseError> {
        let mut prefix = Vec::new();
        loop {
            let quantifier = match self.peek_kind() {
                Some(TokenKind::Forall) => Quantifier::Forall,
                Some(TokenKind::Exists) => Quantifier::Exists,
                _ => break,
            };
            self.cursor += 1;
            loop {
                let (var, pos) = self.ident("a variable name")?;
                if self.sigs.contains_key(var.as_str()) {
                    return Err(ParseError::Syntax {
                        pos,
                        message: format!("variable '{var}' clashes with a predicate name"),
                    });
                }
                if !self.bound.insert(var.clone()) {
                    return Err(ParseError::DuplicateVariable { name: var, pos });
                }
                prefix.push((quantifier, var));
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        if !prefix.is_empty() {
            self.expect(&TokenKind::Colon, "':' after the quantifier prefix")?;
        }
        Ok(prefix)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.implies()?;
        while self.eat(&TokenKind::Iff) {
            let rhs = self.implies()?;
            lhs = Expr::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.or()?;
        if self.eat(&TokenKind::Implies) {
            let rhs = self.implies()?;
            return Ok(Expr::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and()?;
        while self.eat(&TokenKind::Or) {
            let rhs = self.and()?;
            lhs = Expr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&TokenKind::And) {
            let rhs = self.unary()?;
            lhs = Expr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_kind() {
            Some(TokenKind::Not) => {
                self.cursor += 1;
                Ok(Expr::not(self.unary()?))
            }
            Some(TokenKind::LParen) => {
                self.cursor += 1;
                let inner = self.expr()?;
                self.expect(&TokenKind::RParen, "')'")?;
                Ok(inner)
            }
            Some(TokenKind::Forall | TokenKind::Exists) => Err(ParseError::NestedQuantifier { pos: self.pos() }),
            Some(TokenKind::Ident(_)) => self.atom(),
            _ => Err(self.unexpected("an atom, 'not' or '('")),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (name, pos) = self.ident("a predicate name")?;
        let sig =
            *self.sigs.get(name.as_str()).ok_or_else(|| ParseError::UnknownPredicate { name: name.clone(), pos })?;
        self.expect(&TokenKind::LParen, "'(' after predicate name")?;
        let mut args = Vec::new();
        loop {
            let (var, var_pos) = self.ident("a variable name")?;
            if !self.bound.contains(&var) {
                return Err(ParseError::UnboundVariable { name: var, pos: var_pos });
            }
            args.push(var);
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        self.expect(&TokenKind::RParen, "')' closing the argument list")?;
        if args.len() != sig.arity {
            return Err(ParseError::ArityMismatch { predicate: name, expected: sig.arity, got: args.len(), pos });
        }
        Ok(Expr::Atom { predicate: name, args })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigs() -> Vec<PredicateSignature> {
        vec![
            PredicateSignature::learnable("A", 1),
            PredicateSignature::learnable("B", 1),
            PredicateSignature::learnable("C", 1),
            PredicateSignature::known("R", 2),
        ]
    }

    fn parse(text: &str) -> Result<ClauseAst, ParseError> {
        parse_clause_str(text, &sigs())
    }

    #[test]
    fn implication() {
        let ast = parse("forall x: A(x) -> B(x)").unwrap();
        assert_eq!(ast.prefix, vec![(Quantifier::Forall, "x".to_string())]);
        assert_eq!(ast.body, Expr::implies(Expr::atom("A", &["x"]), Expr::atom("B", &["x"])));
    }

    #[test]
    fn precedence_not_and_or() {
        let ast = parse("forall x: not A(x) or B(x) and C(x)").unwrap();
        assert_eq!(
            ast.body,
            Expr::or(Expr::not(Expr::atom("A", &["x"])), Expr::and(Expr::atom("B", &["x"]), Expr::atom("C", &["x"])))
        );
    }

    #[test]
    fn implies_is_right_associative_and_binds_tighter_than_iff() {
        let ast = parse("forall x: A(x) -> B(x) -> C(x) <-> A(x)").unwrap();
        let a = || Expr::atom("A", &["x"]);
        let b = Expr::atom("B", &["x"]);
        let c = Expr::atom("C", &["x"]);
        assert_eq!(ast.body, Expr::iff(Expr::implies(a(), Expr::implies(b, c)), a()));
    }

    #[test]
    fn parentheses_override() {
        let ast = parse("forall x: (A(x) or B(x)) and C(x)").unwrap();
        assert!(matches!(ast.body, Expr::And(..)));
    }

    #[test]
    fn comma_separated_and_mixed_prefix() {
        let ast = parse("forall x, y exists z: R(x, z) and R(z, y)").unwrap();
        assert_eq!(ast.prefix.len(), 3);
        assert_eq!(ast.prefix[2].0, Quantifier::Exists);
    }

    #[test]
    fn unbound_variable() {
        assert_eq!(parse("forall x: A(y)"), Err(ParseError::UnboundVariable { name: "y".into(), pos: 12 }));
    }

    #[test]
    fn unknown_predicate() {
        assert!(matches!(parse("forall x: Z(x)"), Err(ParseError::UnknownPredicate { pos: 10, .. })));
    }

    #[test]
    fn arity_mismatch() {
        assert_eq!(
            parse("forall x: R(x)"),
            Err(ParseError::ArityMismatch { predicate: "R".into(), expected: 2, got: 1, pos: 10 })
        );
    }

    #[test]
    fn nested_quantifier_rejected() {
        assert!(matches!(parse("forall x: A(x) -> exists y: R(x, y)"), Err(ParseError::NestedQuantifier { pos: 18 })));
    }

    #[test]
    fn duplicate_variable_rejected() {
        assert!(matches!(parse("forall x forall x: A(x)"), Err(ParseError::DuplicateVariable { .. })));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        for (text, pos) in [
            ("forall x A(x)", 9),
            ("forall x: A(x", 13),
            ("forall x: A(x) B(x)", 15),
            ("forall x: and", 10),
            ("forall x: ", 10),
        ] {
            match parse(text) {
                Err(ParseError::Syntax { pos: p, .. }) => assert_eq!(p, pos, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn display_round_trip() {
        for text in [
            "forall x: not A(x) or B(x) and C(x)",
            "forall x, y: R(x, y) -> (A(x) <-> not not B(y))",
            "exists x forall y: A(x) -> R(x, y) -> B(y)",
        ] {
            let ast = parse(text).unwrap();
            assert_eq!(parse(&ast.to_string()).unwrap(), ast);
        }
    }
}
