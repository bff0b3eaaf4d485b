//! Datalog-style surface syntax for queries and constraints.
//!
//! ```text
//! % comment
//! q(X) :- S(X), R(X, Y), S(Y).        rule (same head name = union)
//! :- P(X), Q(X, Y).                   denial constraint
//! Dep(X, Y) -> Course(_, Y, X).       inclusion dependency
//! ```
//!
//! Variables start with an uppercase letter; constants are lowercase
//! identifiers, numbers or double-quoted strings. `_` is an anonymous
//! variable, except on the right of `->` where it marks an existential
//! position.

use std::collections::HashMap;

use super::ast::{Atom, ConjunctiveQuery, Term, UnionQuery};
use crate::error::{Error, Result};
use crate::model::{ConstraintSet, DenialConstraint, InclusionDependency, RhsTerm};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Turnstile,
    Arrow,
    Underscore,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Number(n) => format!("number {n}"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Dot => "'.'".into(),
            Tok::Turnstile => "':-'".into(),
            Tok::Arrow => "'->'".into(),
            Tok::Underscore => "'_'".into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

fn err(pos: Pos, message: impl Into<String>) -> Error {
    Error::Parse {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<(Vec<(Tok, Pos)>, Pos)> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '%' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    bump!();
                }
            }
            '(' | ')' | ',' | '.' => {
                bump!();
                let t = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    _ => Tok::Dot,
                };
                out.push((t, pos));
            }
            ':' => {
                bump!();
                if bump!() != Some('-') {
                    return Err(err(pos, "expected ':-'"));
                }
                out.push((Tok::Turnstile, pos));
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    match bump!() {
                        None | Some('\n') => return Err(err(pos, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match bump!() {
                            Some(e) => s.push(e),
                            None => return Err(err(pos, "unterminated string")),
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                out.push((Tok::Str(s), pos));
            }
            '-' => {
                bump!();
                match chars.peek() {
                    Some('>') => {
                        bump!();
                        out.push((Tok::Arrow, pos));
                    }
                    Some(d) if d.is_ascii_digit() => {
                        let n = lex_number(&mut chars, &mut column);
                        out.push((Tok::Number(format!("-{n}")), pos));
                    }
                    _ => return Err(err(pos, "unexpected '-'")),
                }
            }
            c if c.is_ascii_digit() => {
                let n = lex_number(&mut chars, &mut column);
                out.push((Tok::Number(n), pos));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_alphanumeric() || ch == '_' {
                        s.push(ch);
                        bump!();
                    } else {
                        break;
                    }
                }
                out.push((if s == "_" { Tok::Underscore } else { Tok::Ident(s) }, pos));
            }
            other => return Err(err(pos, format!("unexpected character {other:?}"))),
        }
    }
    Ok((out, Pos { line, column }))
}

fn lex_number(chars: &mut std::iter::Peekable<std::str::Chars<'_>>, column: &mut usize) -> String {
    let mut s = String::new();
    while let Some(&ch) = chars.peek() {
        if ch.is_ascii_digit() {
            s.push(ch);
        } else if ch == '.' && !s.contains('.') {
            // only a decimal point when a digit follows; otherwise it ends the rule
            let mut ahead = chars.clone();
            ahead.next();
            if !ahead.peek().is_some_and(|d| d.is_ascii_digit()) {
                break;
            }
            s.push(ch);
        } else {
            break;
        }
        chars.next();
        *column += 1;
    }
    s
}

/// Parsed file: queries grouped by head name plus constraints.
#[derive(Debug, Clone, Default)]
pub struct Program {
    pub queries: Vec<UnionQuery>,
    pub constraints: ConstraintSet,
}

impl Program {
    pub fn query(&self, name: &str) -> Option<&UnionQuery> {
        self.queries.iter().find(|q| q.name() == name)
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
    fresh: usize,
    arities: HashMap<String, usize>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<(Tok, Pos)> {
        let t = self.toks.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        let pos = self.pos();
        match self.next() {
            Some((t, _)) if t == want => Ok(()),
            Some((t, _)) => Err(err(pos, format!("expected {}, found {}", want.describe(), t.describe()))),
            None => Err(err(pos, format!("expected {}, found end of input", want.describe()))),
        }
    }

    fn ident(&mut self) -> Result<(String, Pos)> {
        let pos = self.pos();
        match self.next() {
            Some((Tok::Ident(s), p)) => Ok((s, p)),
            Some((t, _)) => Err(err(pos, format!("expected identifier, found {}", t.describe()))),
            None => Err(err(pos, "expected identifier, found end of input")),
        }
    }

    /// `existential_wildcard` selects the meaning of `_`.
    fn term(&mut self, existential_wildcard: bool) -> Result<Option<Term>> {
        let pos = self.pos();
        match self.next() {
            Some((Tok::Ident(s), _)) => Ok(Some(if s.starts_with(|c: char| c.is_uppercase() || c == '_') {
                Term::Var(s)
            } else {
                Term::Const(s)
            })),
            Some((Tok::Str(s), _)) | Some((Tok::Number(s), _)) => Ok(Some(Term::Const(s))),
            Some((Tok::Underscore, _)) if existential_wildcard => Ok(None),
            Some((Tok::Underscore, _)) => {
                self.fresh += 1;
                Ok(Some(Term::Var(format!("_{}", self.fresh))))
            }
            Some((t, _)) => Err(err(pos, format!("expected term, found {}", t.describe()))),
            None => Err(err(pos, "expected term, found end of input")),
        }
    }

    fn args(&mut self, existential_wildcard: bool) -> Result<Vec<Option<Term>>> {
        self.expect(Tok::LParen)?;
        let mut terms = vec![self.term(existential_wildcard)?];
        while self.peek() == Some(&Tok::Comma) {
            self.next();
            terms.push(self.term(existential_wildcard)?);
        }
        self.expect(Tok::RParen)?;
        Ok(terms)
    }

    fn record_arity(&mut self, predicate: &str, arity: usize) -> Result<()> {
        match self.arities.get(predicate) {
            Some(&a) if a != arity => Err(Error::ArityMismatch {
                predicate: predicate.to_string(),
                expected: a,
                found: arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.arities.insert(predicate.to_string(), arity);
                Ok(())
            }
        }
    }

    fn atom_after_name(&mut self, predicate: String) -> Result<Atom> {
        let terms: Vec<Term> = self.args(false)?.into_iter().map(|t| t.expect("no wildcard")).collect();
        self.record_arity(&predicate, terms.len())?;
        Ok(Atom { predicate, terms })
    }

    fn atom(&mut self) -> Result<Atom> {
        let (name, _) = self.ident()?;
        self.atom_after_name(name)
    }

    fn body(&mut self) -> Result<Vec<Atom>> {
        let mut atoms = vec![self.atom()?];
        while self.peek() == Some(&Tok::Comma) {
            self.next();
            atoms.push(self.atom()?);
        }
        self.expect(Tok::Dot)?;
        Ok(atoms)
    }

    fn program(mut self) -> Result<Program> {
        let mut rules: Vec<ConjunctiveQuery> = Vec::new();
        let mut constraints = ConstraintSet::default();
        while let Some(tok) = self.peek().cloned() {
            let start = self.pos();
            match tok {
                Tok::Turnstile => {
                    self.next();
                    let atoms = self.body()?;
                    constraints.dcs.push(DenialConstraint::new(atoms)?);
                }
                Tok::Ident(_) => {
                    let (name, pos) = self.ident()?;
                    let args = if self.peek() == Some(&Tok::LParen) {
                        Some(self.args(false)?.into_iter().map(|t| t.expect("no wildcard")).collect::<Vec<_>>())
                    } else {
                        None
                    };
                    match self.next() {
                        Some((Tok::Turnstile, _)) => {
                            let mut head = Vec::new();
                            for t in args.unwrap_or_default() {
                                match t {
                                    Term::Var(v) => head.push(v),
                                    Term::Const(c) => {
                                        return Err(err(pos, format!("constant {c} in rule head")))
                                    }
                                }
                            }
                            let body = self.body()?;
                            let rule = ConjunctiveQuery::new(&name, head, body).map_err(|e| match e {
                                Error::Parse { message, .. } => err(start, message),
                                other => other,
                            })?;
                            rules.push(rule);
                        }
                        Some((Tok::Arrow, _)) => {
                            let Some(terms) = args else {
                                return Err(err(pos, "inclusion dependency needs an atom on the left"));
                            };
                            self.record_arity(&name, terms.len())?;
                            let lhs = Atom { predicate: name, terms };
                            let (rhs_name, _) = self.ident()?;
                            let rhs: Vec<RhsTerm> = self
                                .args(true)?
                                .into_iter()
                                .map(|t| match t {
                                    None => RhsTerm::Existential,
                                    Some(Term::Var(v)) => RhsTerm::Exported(v),
                                    Some(Term::Const(c)) => RhsTerm::Const(c),
                                })
                                .collect();
                            self.record_arity(&rhs_name, rhs.len())?;
                            self.expect(Tok::Dot)?;
                            constraints
                                .inds
                                .push(InclusionDependency::new(lhs, &rhs_name, rhs)?);
                        }
                        Some((t, p)) => {
                            return Err(err(p, format!("expected ':-' or '->', found {}", t.describe())))
                        }
                        None => return Err(err(self.end, "expected ':-' or '->', found end of input")),
                    }
                }
                other => return Err(err(start, format!("unexpected {}", other.describe()))),
            }
        }

        let mut order: Vec<String> = Vec::new();
        let mut grouped: HashMap<String, Vec<ConjunctiveQuery>> = HashMap::new();
        for r in rules {
            if !grouped.contains_key(&r.name) {
                order.push(r.name.clone());
            }
            grouped.entry(r.name.clone()).or_default().push(r);
        }
        let queries = order
            .into_iter()
            .map(|n| UnionQuery::new(grouped.remove(&n).expect("grouped")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Program {
            queries,
            constraints,
        })
    }
}

/// Parses a file of rules and constraints.
pub fn parse(text: &str) -> Result<Program> {
    let (toks, end) = lex(text)?;
    Parser {
        toks,
        at: 0,
        end,
        fresh: 0,
        arities: HashMap::new(),
    }
    .program()
}

/// Parses text that defines exactly one (possibly union) query.
pub fn parse_query(text: &str) -> Result<UnionQuery> {
    let mut program = parse(text)?;
    match program.queries.len() {
        1 => Ok(program.queries.remove(0)),
        0 => Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no query rule found".into(),
        }),
        n => Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("{n} query names found, expected one"),
        }),
    }
}

/// Parses text holding constraints only.
pub fn parse_constraints(text: &str) -> Result<ConstraintSet> {
    let program = parse(text)?;
    if let Some(q) = program.queries.first() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("unexpected query rule {} in constraint file", q.name()),
        });
    }
    Ok(program.constraints)
}
