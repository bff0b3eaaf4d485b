use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDecl {
    pub name: String,
    pub arity: usize,
    #[serde(default)]
    pub attrs: Vec<String>,
}

impl PredicateDecl {
    /// Declaration with positional attribute names `A1..An`.
    pub fn positional(name: impl Into<String>, arity: usize) -> Self {
        PredicateDecl {
            name: name.into(),
            arity,
            attrs: (1..=arity).map(|i| format!("A{i}")).collect(),
        }
    }
}

/// Relational schema: the predicates a database may use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    predicates: Vec<PredicateDecl>,
    index: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct SchemaDoc {
    predicates: Vec<PredicateDecl>,
}

impl Schema {
    pub fn new(predicates: Vec<PredicateDecl>) -> Result<Self> {
        let mut index = HashMap::new();
        let mut predicates = predicates;
        for (i, p) in predicates.iter_mut().enumerate() {
            if p.arity == 0 {
                return Err(Error::InvalidSchema(format!("{} has arity 0", p.name)));
            }
            if p.attrs.is_empty() {
                p.attrs = (1..=p.arity).map(|i| format!("A{i}")).collect();
            }
            if p.attrs.len() != p.arity {
                return Err(Error::InvalidSchema(format!(
                    "{} declares {} attributes for arity {}",
                    p.name,
                    p.attrs.len(),
                    p.arity
                )));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = p.attrs.iter().find(|a| !seen.insert(a.as_str())) {
                return Err(Error::InvalidSchema(format!(
                    "{} repeats attribute {dup}",
                    p.name
                )));
            }
            if index.insert(p.name.clone(), i).is_some() {
                return Err(Error::InvalidSchema(format!(
                    "predicate {} declared twice",
                    p.name
                )));
            }
        }
        Ok(Schema { predicates, index })
    }

    /// Parses `{"predicates": [{"name", "arity", "attrs"}]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SchemaDoc = serde_json::from_str(text)?;
        Schema::new(doc.predicates)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "predicates": self.predicates })
    }

    pub fn predicates(&self) -> &[PredicateDecl] {
        &self.predicates
    }

    pub fn get(&self, name: &str) -> Option<&PredicateDecl> {
        self.index.get(name).map(|&i| &self.predicates[i])
    }

    pub fn arity(&self, name: &str) -> Result<usize> {
        self.get(name)
            .map(|p| p.arity)
            .ok_or_else(|| Error::UnknownPredicate(name.to_string()))
    }

    /// Checks that `name` exists with exactly `found` positions.
    pub fn check_arity(&self, name: &str, found: usize) -> Result<()> {
        let expected = self.arity(name)?;
        if expected != found {
            return Err(Error::ArityMismatch {
                predicate: name.to_string(),
                expected,
                found,
            });
        }
        Ok(())
    }
}
