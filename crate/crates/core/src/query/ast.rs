use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::Schema;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn constant(value: &str) -> Self {
        Term::Const(value.to_string())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write_constant(f, c),
        }
    }
}

/// Constants print bare when they would re-parse as constants, quoted otherwise.
pub(crate) fn write_constant(f: &mut fmt::Formatter<'_>, c: &str) -> fmt::Result {
    let bare = c
        .chars()
        .next()
        .is_some_and(|ch| ch.is_ascii_lowercase() || ch.is_ascii_digit())
        && c.chars()
            .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '.' || ch == '-');
    if bare {
        f.write_str(c)
    } else {
        write!(f, "\"{}\"", c.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, terms: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.to_string(),
            terms,
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(Term::as_var)
    }

    pub fn check(&self, schema: &Schema) -> Result<()> {
        schema.check_arity(&self.predicate, self.terms.len())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

/// `name(head) :- body.`, Boolean when the head is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjunctiveQuery {
    pub name: String,
    pub head: Vec<String>,
    pub body: Vec<Atom>,
}

impl ConjunctiveQuery {
    /// Builds a query, rejecting empty bodies, repeated or unsafe head variables.
    pub fn new(name: &str, head: Vec<String>, body: Vec<Atom>) -> Result<Self> {
        if body.is_empty() {
            return Err(Error::Parse {
                line: 0,
                column: 0,
                message: format!("query {name} has an empty body"),
            });
        }
        let body_vars: BTreeSet<&str> = body.iter().flat_map(Atom::variables).collect();
        let mut seen = BTreeSet::new();
        for v in &head {
            if !body_vars.contains(v.as_str()) {
                return Err(Error::HeadVariableNotInBody(v.clone()));
            }
            if !seen.insert(v) {
                return Err(Error::Parse {
                    line: 0,
                    column: 0,
                    message: format!("head variable {v} repeated"),
                });
            }
        }
        Ok(ConjunctiveQuery {
            name: name.to_string(),
            head,
            body,
        })
    }

    pub fn is_boolean(&self) -> bool {
        self.head.is_empty()
    }

    /// Body variables, sorted.
    pub fn variables(&self) -> BTreeSet<&str> {
        self.body.iter().flat_map(Atom::variables).collect()
    }

    /// Body variables that are not in the head.
    pub fn existential_variables(&self) -> BTreeSet<&str> {
        let head: BTreeSet<&str> = self.head.iter().map(String::as_str).collect();
        self.variables()
            .into_iter()
            .filter(|v| !head.contains(v))
            .collect()
    }

    /// Replaces head variables by the answer's constants, yielding a Boolean query.
    pub fn instantiate(&self, answer: &[String]) -> Result<ConjunctiveQuery> {
        if answer.len() != self.head.len() {
            return Err(Error::InvalidParams(format!(
                "answer has {} values, query {} has {} head variables",
                answer.len(),
                self.name,
                self.head.len()
            )));
        }
        let subst: BTreeMap<&str, &str> = self
            .head
            .iter()
            .map(String::as_str)
            .zip(answer.iter().map(String::as_str))
            .collect();
        let body = self
            .body
            .iter()
            .map(|a| Atom {
                predicate: a.predicate.clone(),
                terms: a
                    .terms
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => match subst.get(v.as_str()) {
                            Some(c) => Term::Const(c.to_string()),
                            None => t.clone(),
                        },
                        Term::Const(_) => t.clone(),
                    })
                    .collect(),
            })
            .collect();
        Ok(ConjunctiveQuery {
            name: self.name.clone(),
            head: Vec::new(),
            body,
        })
    }

    pub fn check(&self, schema: &Schema) -> Result<()> {
        self.body.iter().try_for_each(|a| a.check(schema))
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.head.is_empty() {
            write!(f, "({})", self.head.join(", "))?;
        }
        f.write_str(" :- ")?;
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(".")
    }
}

/// Union of conjunctive queries sharing a head arity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnionQuery {
    disjuncts: Vec<ConjunctiveQuery>,
}

impl UnionQuery {
    pub fn new(disjuncts: Vec<ConjunctiveQuery>) -> Result<Self> {
        let Some(first) = disjuncts.first() else {
            return Err(Error::InvalidParams("union query without disjuncts".into()));
        };
        let arity = first.head.len();
        if let Some(bad) = disjuncts.iter().find(|d| d.head.len() != arity) {
            return Err(Error::ArityMismatch {
                predicate: bad.name.clone(),
                expected: arity,
                found: bad.head.len(),
            });
        }
        Ok(UnionQuery { disjuncts })
    }

    pub fn disjuncts(&self) -> &[ConjunctiveQuery] {
        &self.disjuncts
    }

    pub fn name(&self) -> &str {
        &self.disjuncts[0].name
    }

    pub fn arity(&self) -> usize {
        self.disjuncts[0].head.len()
    }

    pub fn is_boolean(&self) -> bool {
        self.arity() == 0
    }

    pub fn require_boolean(&self) -> Result<()> {
        if self.is_boolean() {
            Ok(())
        } else {
            Err(Error::NonBooleanQuery)
        }
    }

    pub fn instantiate(&self, answer: &[String]) -> Result<UnionQuery> {
        let disjuncts = self
            .disjuncts
            .iter()
            .map(|d| d.instantiate(answer))
            .collect::<Result<Vec<_>>>()?;
        Ok(UnionQuery { disjuncts })
    }

    pub fn check(&self, schema: &Schema) -> Result<()> {
        self.disjuncts.iter().try_for_each(|d| d.check(schema))
    }
}

impl From<ConjunctiveQuery> for UnionQuery {
    fn from(q: ConjunctiveQuery) -> Self {
        UnionQuery { disjuncts: vec![q] }
    }
}

impl fmt::Display for UnionQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instantiate_replaces_head() {
        let q = ConjunctiveQuery::new(
            "q",
            vec!["X".into()],
            vec![Atom::new("Course", vec![Term::var("Z"), Term::var("X"), Term::var("Y")])],
        )
        .unwrap();
        let b = q.instantiate(&["John".into()]).unwrap();
        assert!(b.is_boolean());
        assert_eq!(b.to_string(), "q :- Course(Z, \"John\", Y).");
        assert_eq!(
            b.existential_variables().into_iter().collect::<Vec<_>>(),
            ["Y", "Z"]
        );
    }

    #[test]
    fn unsafe_head_rejected() {
        let err = ConjunctiveQuery::new("q", vec!["W".into()], vec![Atom::new("S", vec![Term::var("X")])])
            .unwrap_err();
        assert!(matches!(err, Error::HeadVariableNotInBody(v) if v == "W"));
    }
}
