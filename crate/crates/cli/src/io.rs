// SPDX-License-Identifier: Apache-2.0

//! File access with paths in error messages, and a column-checked CSV reader.

use std::fs;
use std::io;
use std::path::Path;

use dispel_core::{Error, Result};

fn with_path(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| with_path(path, e))
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| with_path(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| with_path(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| with_path(path, e))
}

/// A CSV table with `#` comment lines skipped.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    /// (file line, fields).
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        if columns.is_empty() || columns.iter().all(String::is_empty) {
            return Err(Error::Parse { line: 1, msg: "missing header".into() });
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                msg: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Table { columns, rows })
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("missing column `{name}`") })
    }

    pub fn f64_at(&self, row: usize, col: usize) -> Result<f64> {
        let (line, fields) = &self.rows[row];
        fields[col].parse().map_err(|_| Error::Parse {
            line: *line,
            msg: format!("column `{}`: `{}` is not a number", self.columns[col], fields[col]),
        })
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.index(name)?;
        (0..self.rows.len()).map(|r| self.f64_at(r, c)).collect()
    }

    pub fn column_str(&self, name: &str) -> Result<Vec<String>> {
        let c = self.index(name)?;
        Ok(self.rows.iter().map(|(_, f)| f[c].clone()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_bad_cells() {
        let t = Table::parse("# manifest abc\na,b\n1,2\n3,x\n").unwrap();
        assert_eq!(t.column_f64("a").unwrap(), vec![1.0, 3.0]);
        let e = t.column_f64("b").unwrap_err().to_string();
        assert!(e.contains("line 4") && e.contains("`b`"), "{e}");
        assert!(t.index("c").is_err());
    }
}
