//! Loading relations from CSV files and JSON documents.

use std::fs;
use std::io::Read;
use std::path::Path;

use super::{validate_database, Database, PredicateDecl, RawTuple, Schema};
use crate::error::{Error, Result};

/// A relation as read from one input, in row order.
#[derive(Debug, Clone)]
pub struct Relation {
    pub predicate: String,
    /// Attribute names, when the input names them.
    pub attrs: Option<Vec<String>>,
    pub arity: usize,
    pub rows: Vec<RawTuple>,
}

/// Reads CSV with a header row. A leading column named `tid` carries identifiers.
pub fn read_csv<R: Read>(predicate: &str, reader: R) -> Result<Relation> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let has_tid = header.first().is_some_and(|h| h.eq_ignore_ascii_case("tid"));
    let attrs: Vec<String> = header.into_iter().skip(usize::from(has_tid)).collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let mut fields = record.iter().map(str::to_string);
        let tid = if has_tid { fields.next() } else { None };
        let values: Vec<String> = fields.collect();
        if values.len() != attrs.len() {
            return Err(Error::ArityMismatch {
                predicate: predicate.to_string(),
                expected: attrs.len(),
                found: values.len(),
            });
        }
        rows.push(RawTuple {
            tid: tid.filter(|t| !t.is_empty()),
            predicate: predicate.to_string(),
            values,
        });
    }
    Ok(Relation {
        predicate: predicate.to_string(),
        arity: attrs.len(),
        attrs: Some(attrs),
        rows,
    })
}

/// Reads `{"P": [[v, …], …], …}`, keeping document order.
pub fn read_json(text: &str) -> Result<Vec<Relation>> {
    let doc: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)?;
    let mut out = Vec::new();
    for (predicate, rows) in doc {
        let rows = rows.as_array().ok_or_else(|| {
            Error::InvalidSchema(format!("relation {predicate} must be an array of rows"))
        })?;
        let mut raw = Vec::with_capacity(rows.len());
        let mut arity = None;
        for row in rows {
            let values: Vec<String> = row
                .as_array()
                .ok_or_else(|| {
                    Error::InvalidSchema(format!("rows of {predicate} must be arrays"))
                })?
                .iter()
                .map(|v| match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            match arity {
                None => arity = Some(values.len()),
                Some(a) if a != values.len() => {
                    return Err(Error::ArityMismatch {
                        predicate: predicate.clone(),
                        expected: a,
                        found: values.len(),
                    })
                }
                Some(_) => {}
            }
            raw.push(RawTuple {
                tid: None,
                predicate: predicate.clone(),
                values,
            });
        }
        out.push(Relation {
            predicate,
            attrs: None,
            arity: arity.unwrap_or(0),
            rows: raw,
        });
    }
    Ok(out)
}

/// Reads one data file; `.json` holds several relations, anything else is a
/// CSV file named after its predicate.
pub fn read_relations(path: &Path) -> Result<Vec<Relation>> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        read_json(&fs::read_to_string(path)?)
    } else {
        let predicate = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::InvalidSchema(format!("bad file name {}", path.display())))?;
        Ok(vec![read_csv(predicate, fs::File::open(path)?)?])
    }
}

/// Schema implied by the relations themselves.
pub fn infer_schema(relations: &[Relation]) -> Result<Schema> {
    let mut decls: Vec<PredicateDecl> = Vec::new();
    for r in relations {
        if let Some(existing) = decls.iter().find(|d| d.name == r.predicate) {
            if existing.arity != r.arity {
                return Err(Error::ArityMismatch {
                    predicate: r.predicate.clone(),
                    expected: existing.arity,
                    found: r.arity,
                });
            }
            continue;
        }
        decls.push(match &r.attrs {
            Some(attrs) => PredicateDecl {
                name: r.predicate.clone(),
                arity: r.arity,
                attrs: attrs.clone(),
            },
            None => PredicateDecl::positional(&r.predicate, r.arity),
        });
    }
    Schema::new(decls)
}

/// Loads a database from data files, inferring the schema when none is given.
/// Tids are assigned across files in the order given.
pub fn load_database<P: AsRef<Path>>(schema: Option<&Schema>, paths: &[P]) -> Result<Database> {
    let mut relations = Vec::new();
    for p in paths {
        relations.extend(read_relations(p.as_ref())?);
    }
    let schema = match schema {
        Some(s) => s.clone(),
        None => infer_schema(&relations)?,
    };
    let rows = relations.into_iter().flat_map(|r| r.rows).collect();
    validate_database(&schema, rows)
}

pub fn load_schema(path: &Path) -> Result<Schema> {
    Schema::from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_and_without_tids() {
        let r = read_csv("Dep", "tid,DName,TStaff\nt1,Computing,John\nt2,Philosophy,Patrick\n".as_bytes())
            .unwrap();
        assert_eq!(r.arity, 2);
        assert_eq!(r.rows[1].tid.as_deref(), Some("t2"));
        assert_eq!(r.attrs.as_deref().unwrap(), ["DName", "TStaff"]);

        let r = read_csv("S", "C\na\nb\n".as_bytes()).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows[0].tid.is_none());
    }

    #[test]
    fn json_keeps_document_order() {
        let rels = read_json(r#"{"S": [["a"]], "R": [["a", "b"], ["c", 4]]}"#).unwrap();
        assert_eq!(rels[0].predicate, "S");
        assert_eq!(rels[1].rows[1].values, ["c", "4"]);
        let schema = infer_schema(&rels).unwrap();
        let db = validate_database(&schema, rels.into_iter().flat_map(|r| r.rows).collect()).unwrap();
        assert_eq!(db.get(&"t1".into()).unwrap().to_string(), "S(a)");
    }

    #[test]
    fn load_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = dir.path().join("R.csv");
        let s = dir.path().join("S.csv");
        fs::write(&r, "A,B\na,b\nc,d\n").unwrap();
        fs::write(&s, "C\na\n").unwrap();
        let db = load_database::<_>(None, &[r, s]).unwrap();
        assert_eq!(db.len(), 3);
        assert_eq!(db.get(&"t3".into()).unwrap().to_string(), "S(a)");
    }
}
