use std::fmt;

use serde::{Deserialize, Serialize};

/// Whether a predicate is learned from data or supplied as a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateKind {
    Learnable,
    Known,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredicateSignature {
    pub name: String,
    pub arity: usize,
    pub kind: PredicateKind,
}

impl PredicateSignature {
    pub fn new(name: impl Into<String>, arity: usize, kind: PredicateKind) -> Self {
        Self { name: name.into(), arity, kind }
    }

    pub fn learnable(name: impl Into<String>, arity: usize) -> Self {
        Self::new(name, arity, PredicateKind::Learnable)
    }

    pub fn known(name: impl Into<String>, arity: usize) -> Self {
        Self::new(name, arity, PredicateKind::Known)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Forall,
    Exists,
}

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantifier::Forall => f.write_str("forall"),
            Quantifier::Exists => f.write_str("exists"),
        }
    }
}

/// Quantifier-free clause body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Atom { predicate: String, args: Vec<String> },
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    Iff(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn atom(predicate: &str, args: &[&str]) -> Expr {
        Expr::Atom { predicate: predicate.to_string(), args: args.iter().map(|a| a.to_string()).collect() }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Expr, b: Expr) -> Expr {
        Expr::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Expr, b: Expr) -> Expr {
        Expr::Iff(Box::new(a), Box::new(b))
    }

    /// Visits every atom in left-to-right order.
    pub fn for_each_atom<'a>(&'a self, f: &mut impl FnMut(&'a str, &'a [String])) {
        match self {
            Expr::Atom { predicate, args } => f(predicate, args),
            Expr::Not(e) => e.for_each_atom(f),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Implies(a, b) | Expr::Iff(a, b) => {
                a.for_each_atom(f);
                b.for_each_atom(f);
            }
        }
    }

    /// Nesting depth of connectives; an atom has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Atom { .. } => 0,
            Expr::Not(e) => 1 + e.depth(),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Implies(a, b) | Expr::Iff(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Atom { .. } | Expr::Not(_) => write!(f, "{e}"),
        _ => write!(f, "({e})"),
    }
}

fn write_name(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    let plain = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(name, "forall" | "exists" | "and" | "or" | "not");
    if plain {
        f.write_str(name)
    } else {
        write!(f, "\"{name}\"")
    }
}

/// Prints with every binary operand parenthesized, so the output reparses
/// to the same tree regardless of precedence.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (op, a, b) = match self {
            Expr::Atom { predicate, args } => {
                write_name(f, predicate)?;
                f.write_str("(")?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write_name(f, arg)?;
                }
                return f.write_str(")");
            }
            Expr::Not(e) => {
                f.write_str("not ")?;
                return write_operand(f, e);
            }
            Expr::And(a, b) => ("and", a, b),
            Expr::Or(a, b) => ("or", a, b),
            Expr::Implies(a, b) => ("->", a, b),
            Expr::Iff(a, b) => ("<->", a, b),
        };
        write_operand(f, a)?;
        write!(f, " {op} ")?;
        write_operand(f, b)
    }
}

/// A prenex clause: quantifier prefix followed by a quantifier-free body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClauseAst {
    pub prefix: Vec<(Quantifier, String)>,
    pub body: Expr,
}

impl ClauseAst {
    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.prefix.iter().map(|(_, v)| v.as_str())
    }

    pub fn is_purely_universal(&self) -> bool {
        self.prefix.iter().all(|(q, _)| *q == Quantifier::Forall)
    }
}

impl fmt::Display for ClauseAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (q, v)) in self.prefix.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{q} ")?;
            write_name(f, v)?;
        }
        write!(f, ": {}", self.body)
    }
}
