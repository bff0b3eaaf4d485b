use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Global tuple identifier.
///
/// Ordering is "natural": a shared alphabetic prefix is compared first and a
/// trailing number numerically, so `t2 < t10`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tid(String);

impl Tid {
    pub fn new(id: impl Into<String>) -> Self {
        Tid(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn split(&self) -> (&str, &str) {
        let digits = self
            .0
            .bytes()
            .rev()
            .take_while(|b| b.is_ascii_digit())
            .count();
        self.0.split_at(self.0.len() - digits)
    }
}

impl Ord for Tid {
    fn cmp(&self, other: &Self) -> Ordering {
        let (pa, na) = self.split();
        let (pb, nb) = other.split();
        pa.cmp(pb)
            .then_with(|| {
                let na = na.trim_start_matches('0');
                let nb = nb.trim_start_matches('0');
                na.len().cmp(&nb.len()).then_with(|| na.cmp(nb))
            })
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Tid {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Tid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Tid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for Tid {
    fn from(s: &str) -> Self {
        Tid::new(s)
    }
}

impl From<String> for Tid {
    fn from(s: String) -> Self {
        Tid(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_order() {
        let mut tids: Vec<Tid> = ["t10", "t2", "t1", "s3", "t02"]
            .iter()
            .map(|s| Tid::from(*s))
            .collect();
        tids.sort();
        let names: Vec<&str> = tids.iter().map(Tid::as_str).collect();
        assert_eq!(names, ["s3", "t1", "t02", "t2", "t10"]);
    }
}
