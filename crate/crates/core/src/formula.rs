//! Symbolic model expressions: `+` adds terms, `:` forms interactions,
//! `A*B` abbreviates `A+B+A:B` and `A/B` abbreviates `A+A:B`.
//!
//! Precedence is `:` > `/` > `*` > `+`, all left-associative. The same
//! expression grammar is used for treatment structures in design files and
//! for the model formulas produced by [`crate::model`].

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{ModelError, ParseError};
use crate::lexer::{tokenize, Cursor, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    /// `+`
    Sum,
    /// `*`
    Cross,
    /// `/`
    Nest,
    /// `:`
    Interact,
}

impl Op {
    fn precedence(self) -> u8 {
        match self {
            Op::Sum => 1,
            Op::Cross => 2,
            Op::Nest => 3,
            Op::Interact => 4,
        }
    }

    fn symbol(self) -> char {
        match self {
            Op::Sum => '+',
            Op::Cross => '*',
            Op::Nest => '/',
            Op::Interact => ':',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Factor(String),
    /// The intercept `1`.
    One,
    Binary {
        op: Op,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `Error(...)` stratum term.
    Error(Box<Expr>),
    /// `(1|...)` random-intercept group.
    Random(Box<Expr>),
}

/// Expression over factor names used for treatment structures.
pub type StructureExpr = Expr;

impl Expr {
    pub fn factor(name: impl Into<String>) -> Self {
        Expr::Factor(name.into())
    }

    pub fn binary(op: Op, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            _ => 5,
        }
    }

    /// Factor names appearing as leaves, in order of first appearance.
    pub fn leaves(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Factor(n) => {
                    if !out.contains(n) {
                        out.push(n.clone());
                    }
                }
                Expr::One => {}
                Expr::Binary { lhs, rhs, .. } => {
                    walk(lhs, out);
                    walk(rhs, out);
                }
                Expr::Error(inner) | Expr::Random(inner) => walk(inner, out),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Expands the expression into its set of interaction terms.
    /// The intercept is dropped.
    pub fn expand(&self) -> Result<TermSet, ModelError> {
        let mut terms = eval(self)?;
        terms.retain(|t| !t.is_empty());
        Ok(terms.into_iter().collect())
    }

    /// Builds a `+`-joined sum of `items`; `None` when empty.
    pub fn sum_of(items: impl IntoIterator<Item = Expr>) -> Option<Expr> {
        items
            .into_iter()
            .reduce(|acc, e| Expr::binary(Op::Sum, acc, e))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Factor(n) => f.write_str(n),
            Expr::One => f.write_str("1"),
            Expr::Error(inner) => write!(f, "Error({inner})"),
            Expr::Random(inner) => write!(f, "(1|{inner})"),
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                if lhs.precedence() < p {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, "{}", op.symbol())?;
                if rhs.precedence() <= p {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

/// A single model term: a set of factor names joined by `:`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term(pub BTreeSet<String>);

impl Term {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Term(names.into_iter().map(Into::into).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn union(&self, other: &Term) -> Term {
        Term(self.0.union(&other.0).cloned().collect())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(name)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<&str> = self.0.iter().map(String::as_str).collect();
        f.write_str(&parts.join(":"))
    }
}

pub type TermSet = BTreeSet<Term>;

fn push_unique(out: &mut Vec<Term>, t: Term) {
    if !out.contains(&t) {
        out.push(t);
    }
}

fn eval(expr: &Expr) -> Result<Vec<Term>, ModelError> {
    Ok(match expr {
        Expr::Factor(n) => vec![Term::new([n.clone()])],
        Expr::One => vec![Term::default()],
        Expr::Error(_) | Expr::Random(_) => {
            return Err(ModelError::Structure(
                "Error() and (1|...) terms may only appear at the top level".into(),
            ))
        }
        Expr::Binary { op, lhs, rhs } => {
            let l = eval(lhs)?;
            let r = eval(rhs)?;
            let mut out = Vec::new();
            match op {
                Op::Sum => {
                    for t in l.into_iter().chain(r) {
                        push_unique(&mut out, t);
                    }
                }
                Op::Interact => {
                    for a in &l {
                        for b in &r {
                            push_unique(&mut out, a.union(b));
                        }
                    }
                }
                Op::Cross => {
                    for t in l.iter().chain(r.iter()) {
                        push_unique(&mut out, t.clone());
                    }
                    for a in &l {
                        for b in &r {
                            push_unique(&mut out, a.union(b));
                        }
                    }
                }
                Op::Nest => {
                    let outer = l.iter().fold(Term::default(), |acc, t| acc.union(t));
                    for t in &l {
                        push_unique(&mut out, t.clone());
                    }
                    for b in &r {
                        push_unique(&mut out, outer.union(b));
                    }
                }
            }
            out
        }
    })
}

/// Parses an expression at the cursor. `model_terms` admits `Error(...)`
/// and `(1|...)` items.
pub(crate) fn parse_expr(cur: &mut Cursor, model_terms: bool) -> Result<Expr, ParseError> {
    parse_level(cur, Op::Sum, model_terms)
}

fn op_of(tok: &Token) -> Option<Op> {
    match tok {
        Token::Plus => Some(Op::Sum),
        Token::Star => Some(Op::Cross),
        Token::Slash => Some(Op::Nest),
        Token::Colon => Some(Op::Interact),
        _ => None,
    }
}

fn next_level(op: Op) -> Option<Op> {
    match op {
        Op::Sum => Some(Op::Cross),
        Op::Cross => Some(Op::Nest),
        Op::Nest => Some(Op::Interact),
        Op::Interact => None,
    }
}

fn parse_level(cur: &mut Cursor, level: Op, model_terms: bool) -> Result<Expr, ParseError> {
    let sub = |cur: &mut Cursor| match next_level(level) {
        Some(n) => parse_level(cur, n, model_terms),
        None => parse_primary(cur, model_terms),
    };
    let mut lhs = sub(cur)?;
    while op_of(cur.peek()) == Some(level) {
        // `Name:` followed by a declaration keyword is not an interaction.
        if level == Op::Interact && !matches!(cur.peek_at(1), Token::Ident(_) | Token::LParen) {
            break;
        }
        cur.bump();
        let rhs = sub(cur)?;
        lhs = Expr::binary(level, lhs, rhs);
    }
    Ok(lhs)
}

fn parse_primary(cur: &mut Cursor, model_terms: bool) -> Result<Expr, ParseError> {
    match cur.peek().clone() {
        Token::Ident(name) => {
            if model_terms && name == "Error" && *cur.peek_at(1) == Token::LParen {
                cur.bump();
                cur.bump();
                let inner = parse_expr(cur, false)?;
                cur.expect(Token::RParen, "`)`")?;
                return Ok(Expr::Error(Box::new(inner)));
            }
            cur.bump();
            Ok(Expr::Factor(name))
        }
        Token::Int(1) => {
            cur.bump();
            Ok(Expr::One)
        }
        Token::LParen => {
            cur.bump();
            if model_terms && *cur.peek() == Token::Int(1) && *cur.peek_at(1) == Token::Pipe {
                cur.bump();
                cur.bump();
                let inner = parse_expr(cur, false)?;
                cur.expect(Token::RParen, "`)`")?;
                return Ok(Expr::Random(Box::new(inner)));
            }
            let inner = parse_expr(cur, model_terms)?;
            cur.expect(Token::RParen, "`)`")?;
            Ok(inner)
        }
        _ => Err(cur.error(&["a factor name", "`1`", "`(`"])),
    }
}

/// Parses a standalone expression such as `A*B` or `(A+B)/(A:B)`.
pub fn parse_structure(text: &str) -> Result<Expr, ParseError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let e = parse_expr(&mut cur, false)?;
    cur.expect(Token::Eof, "end of input")?;
    Ok(e)
}

/// Expands a symbolic formula into its canonical set of colon-joined terms.
///
/// ```
/// use hasse::formula::{expand_formula, Term};
/// let terms = expand_formula("A/B").unwrap();
/// assert!(terms.contains(&Term::new(["A"])));
/// assert!(terms.contains(&Term::new(["A", "B"])));
/// assert_eq!(terms.len(), 2);
/// ```
pub fn expand_formula(text: &str) -> Result<TermSet, ModelError> {
    parse_structure(text)?.expand()
}

/// A full model formula split into its fixed, `Error(...)` and `(1|...)` parts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FormulaParts {
    pub fixed: TermSet,
    pub error: Option<TermSet>,
    pub random: Vec<TermSet>,
}

impl FormulaParts {
    /// Union of all random-group terms.
    pub fn random_terms(&self) -> TermSet {
        self.random.iter().flatten().cloned().collect()
    }
}

/// Parses a model formula right-hand side such as
/// `Variety*Nitrogen+Error(Block/Plot)` or `A+(1|B)+(1|A:B)`.
pub fn parse_formula(text: &str) -> Result<FormulaParts, ModelError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let e = parse_expr(&mut cur, true)?;
    cur.expect(Token::Eof, "end of input")?;

    fn summands(e: Expr, out: &mut Vec<Expr>) {
        match e {
            Expr::Binary {
                op: Op::Sum,
                lhs,
                rhs,
            } => {
                summands(*lhs, out);
                summands(*rhs, out);
            }
            other => out.push(other),
        }
    }
    let mut items = Vec::new();
    summands(e, &mut items);

    let mut parts = FormulaParts::default();
    for item in items {
        match item {
            Expr::Error(inner) => {
                if parts.error.is_some() {
                    return Err(ModelError::Structure("more than one Error() term".into()));
                }
                parts.error = Some(inner.expand()?);
            }
            Expr::Random(inner) => parts.random.push(inner.expand()?),
            other => parts.fixed.extend(other.expand()?),
        }
    }
    Ok(parts)
}
