use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Schema, Tid};
use crate::error::{Error, Result};

/// A ground atom with its identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Tuple {
    pub tid: Tid,
    pub predicate: String,
    pub values: Vec<String>,
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.values.join(","))
    }
}

/// A row as read from input, before identifiers are settled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTuple {
    #[serde(default)]
    pub tid: Option<String>,
    pub predicate: String,
    pub values: Vec<String>,
}

impl RawTuple {
    pub fn new<I, S>(predicate: &str, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        RawTuple {
            tid: None,
            predicate: predicate.to_string(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn with_tid(mut self, tid: impl Into<String>) -> Self {
        self.tid = Some(tid.into());
        self
    }
}

/// Immutable database instance.
///
/// Tuples are addressed internally by their position (`usize`), which is the
/// input order; external interfaces use [`Tid`].
#[derive(Debug, Clone)]
pub struct Database {
    schema: Schema,
    tuples: Vec<Tuple>,
    by_tid: HashMap<Tid, usize>,
    by_predicate: HashMap<String, Vec<usize>>,
}

/// Builds a database from raw rows.
///
/// Rows without a tid get `t<n>`, where `n` is the 1-based position of the
/// tuple. Identical rows collapse onto the first occurrence.
pub fn validate_database(schema: &Schema, rows: Vec<RawTuple>) -> Result<Database> {
    let mut tuples: Vec<Tuple> = Vec::with_capacity(rows.len());
    let mut seen: HashSet<(String, Vec<String>)> = HashSet::new();
    for row in rows {
        schema.check_arity(&row.predicate, row.values.len())?;
        if !seen.insert((row.predicate.clone(), row.values.clone())) {
            continue;
        }
        let tid = match row.tid {
            Some(t) => Tid::new(t),
            None => Tid::new(format!("t{}", tuples.len() + 1)),
        };
        tuples.push(Tuple {
            tid,
            predicate: row.predicate,
            values: row.values,
        });
    }
    Database::from_tuples(schema.clone(), tuples)
}

impl Database {
    fn from_tuples(schema: Schema, tuples: Vec<Tuple>) -> Result<Self> {
        let mut by_tid = HashMap::with_capacity(tuples.len());
        let mut by_predicate: HashMap<String, Vec<usize>> = HashMap::new();
        for (ix, t) in tuples.iter().enumerate() {
            if by_tid.insert(t.tid.clone(), ix).is_some() {
                return Err(Error::DuplicateTid(t.tid.to_string()));
            }
            by_predicate.entry(t.predicate.clone()).or_default().push(ix);
        }
        Ok(Database {
            schema,
            tuples,
            by_tid,
            by_predicate,
        })
    }

    pub fn empty(schema: Schema) -> Self {
        Database {
            schema,
            tuples: Vec::new(),
            by_tid: HashMap::new(),
            by_predicate: HashMap::new(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Tuples in input order.
    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn tuple(&self, ix: usize) -> &Tuple {
        &self.tuples[ix]
    }

    pub fn index_of(&self, tid: &Tid) -> Option<usize> {
        self.by_tid.get(tid).copied()
    }

    pub fn require(&self, tid: &Tid) -> Result<usize> {
        self.index_of(tid)
            .ok_or_else(|| Error::UnknownTid(tid.to_string()))
    }

    pub fn get(&self, tid: &Tid) -> Option<&Tuple> {
        self.index_of(tid).map(|ix| &self.tuples[ix])
    }

    /// Positions of the facts of `predicate`, in input order.
    pub fn facts(&self, predicate: &str) -> &[usize] {
        self.by_predicate
            .get(predicate)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// All tids, sorted.
    pub fn tids(&self) -> BTreeSet<Tid> {
        self.tuples.iter().map(|t| t.tid.clone()).collect()
    }

    /// Subinstance with the given tuples removed; remaining tids are kept.
    pub fn without<'a, I>(&self, removed: I) -> Database
    where
        I: IntoIterator<Item = &'a Tid>,
    {
        let removed: HashSet<&Tid> = removed.into_iter().collect();
        let tuples = self
            .tuples
            .iter()
            .filter(|t| !removed.contains(&t.tid))
            .cloned()
            .collect();
        Database::from_tuples(self.schema.clone(), tuples)
            .expect("subinstance of a valid database is valid")
    }

    /// Subinstance made of the given tuples only.
    pub fn restrict_to<'a, I>(&self, kept: I) -> Database
    where
        I: IntoIterator<Item = &'a Tid>,
    {
        let kept: HashSet<&Tid> = kept.into_iter().collect();
        let tuples = self
            .tuples
            .iter()
            .filter(|t| kept.contains(&t.tid))
            .cloned()
            .collect();
        Database::from_tuples(self.schema.clone(), tuples)
            .expect("subinstance of a valid database is valid")
    }

    pub fn tids_of<I: IntoIterator<Item = usize>>(&self, ixs: I) -> BTreeSet<Tid> {
        ixs.into_iter().map(|ix| self.tuples[ix].tid.clone()).collect()
    }
}
