// SPDX-License-Identifier: Apache-2.0

//! Flat `key=value` files with `#` comments.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parsed entries with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct KvMap {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvMap {
    /// Reads every entry and rejects keys outside `allowed` and duplicates.
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: idx + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            let k = k.trim();
            if !allowed.contains(&k) {
                return Err(err(format!("unknown key `{k}`")));
            }
            if entries.insert(k.to_string(), (idx + 1, v.trim().to_string())).is_some() {
                return Err(err(format!("duplicate key `{k}`")));
            }
        }
        Ok(KvMap { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, s)) => s.parse().map(Some).map_err(|_| Error::Parse {
                line: *line,
                msg: format!("bad value for `{key}`: `{s}`"),
            }),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("missing key `{key}`"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_values_and_reports_lines() {
        let m = KvMap::parse("# c\na = 1.5\n\nb=x # tail\n", &["a", "b"]).unwrap();
        assert_eq!(m.get::<f64>("a").unwrap(), Some(1.5));
        assert_eq!(m.require::<String>("b").unwrap(), "x");
        assert!(matches!(m.get::<f64>("b"), Err(Error::Parse { line: 4, .. })));
        assert!(matches!(KvMap::parse("a=1\nz=2", &["a"]), Err(Error::Parse { line: 2, .. })));
        assert!(KvMap::parse("a=1\na=2", &["a"]).is_err());
    }
}
