//! Sectioned key–value text format.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//!
//! [matrix K]
//! 1.0 0.5
//! 0.0 2.0
//! ```
//!
//! Matrix sections hold one row per line of whitespace-separated decimals.
//! Every parse error carries the file, line and field it refers to.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSection {
    pub name: String,
    pub line: usize,
    pub value: Matrix,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigDoc {
    /// Source name used in diagnostics.
    pub path: String,
    pub sections: Vec<Section>,
    pub matrices: Vec<MatrixSection>,
}

fn strip_comment(line: &str) -> &str {
    line.find('#').map_or(line, |i| &line[..i]).trim()
}

impl ConfigDoc {
    pub fn new(path: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            ..Self::default()
        }
    }

    pub fn error(&self, line: usize, field: &str, message: impl Into<String>) -> Error {
        Error::Config {
            path: self.path.clone(),
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn parse(text: &str, path: impl Into<String>) -> Result<Self> {
        let mut doc = Self::new(path);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        // Matrix section being read: name and header line.
        let mut open: Option<(String, usize)> = None;
        let mut section: Option<usize> = None;

        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            if let Some(head) = line.strip_prefix('[') {
                let Some(head) = head.strip_suffix(']') else {
                    return Err(doc.error(ln, "section", "missing closing ']'"));
                };
                if let Some((name, start)) = open.take() {
                    doc.close_matrix(name, start, std::mem::take(&mut rows))?;
                }
                let head = head.trim();
                let mut words = head.split_whitespace();
                match (words.next(), words.next(), words.next()) {
                    (Some("matrix"), Some(name), None) => {
                        if doc.matrices.iter().any(|m| m.name == name) {
                            return Err(doc.error(ln, name, "duplicate matrix"));
                        }
                        open = Some((name.to_string(), ln));
                        section = None;
                    }
                    (Some(name), None, _) if valid_name(name) => {
                        if doc.sections.iter().any(|s| s.name == name) {
                            return Err(doc.error(ln, name, "duplicate section"));
                        }
                        doc.sections.push(Section {
                            name: name.to_string(),
                            line: ln,
                            entries: Vec::new(),
                        });
                        section = Some(doc.sections.len() - 1);
                    }
                    _ => return Err(doc.error(ln, head, "malformed section header")),
                }
                continue;
            }
            if let Some((name, _)) = &open {
                let row = line
                    .split_whitespace()
                    .map(|w| w.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| doc.error(ln, name, format!("not a row of finite numbers: '{line}'")))?;
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(doc.error(ln, name, format!("row has {} entries, expected {}", row.len(), first.len())));
                    }
                }
                rows.push(row);
                continue;
            }
            let Some(si) = section else {
                return Err(doc.error(ln, line, "entry outside of a section"));
            };
            let Some((key, value)) = line.split_once('=') else {
                return Err(doc.error(ln, line, "expected 'key = value'"));
            };
            let key = key.trim();
            if !valid_name(key) {
                return Err(doc.error(ln, key, "invalid key"));
            }
            let s = &mut doc.sections[si];
            if s.entries.iter().any(|e| e.key == key) {
                let field = format!("{}.{key}", s.name);
                return Err(doc.error(ln, &field, "duplicate key"));
            }
            s.entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: ln,
            });
        }
        if let Some((name, start)) = open {
            doc.close_matrix(name, start, rows)?;
        }
        Ok(doc)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.display().to_string())
    }

    fn close_matrix(&mut self, name: String, line: usize, rows: Vec<Vec<f64>>) -> Result<()> {
        if rows.is_empty() {
            return Err(self.error(line, &name, "matrix has no rows"));
        }
        let (r, c) = (rows.len(), rows[0].len());
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        self.matrices.push(MatrixSection {
            name,
            line,
            value: Matrix::from_row_slice(r, c, &flat),
        });
        Ok(())
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.section(section)?.entries.iter().find(|e| e.key == key)
    }

    pub fn matrix(&self, name: &str) -> Option<&Matrix> {
        self.matrices.iter().find(|m| m.name == name).map(|m| &m.value)
    }

    /// Typed value of `section.key`, or `None` when absent.
    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        e.value
            .parse::<T>()
            .map(Some)
            .map_err(|_| self.error(e.line, &format!("{section}.{key}"), format!("cannot parse '{}'", e.value)))
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    /// Finite real value of `section.key`.
    pub fn real(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.get_or(section, key, default)?;
        if !v.is_finite() {
            let line = self.entry(section, key).map_or(0, |e| e.line);
            return Err(self.error(line, &format!("{section}.{key}"), "must be finite"));
        }
        Ok(v)
    }

    /// Line number of `section.key` (or of the section header, or 0).
    pub fn line_of(&self, section: &str, key: &str) -> usize {
        self.entry(section, key)
            .map(|e| e.line)
            .or_else(|| self.section(section).map(|s| s.line))
            .unwrap_or(0)
    }

    /// Rejects sections and keys outside `schema` (section name, allowed
    /// keys), which catches misspelled settings.
    pub fn check_schema(&self, schema: &[(&str, &[&str])]) -> Result<()> {
        for s in &self.sections {
            let Some((_, keys)) = schema.iter().find(|(n, _)| *n == s.name) else {
                return Err(self.error(s.line, &s.name, "unknown section"));
            };
            for e in &s.entries {
                if !keys.contains(&e.key.as_str()) {
                    return Err(self.error(e.line, &format!("{}.{}", s.name, e.key), "unknown key"));
                }
            }
        }
        Ok(())
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
}

/// Writer for the same format.
#[derive(Debug, Default, Clone)]
pub struct ConfigWriter {
    out: String,
}

impl ConfigWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        if !self.out.is_empty() {
            self.out.push('\n');
        }
        let _ = writeln!(self.out, "[{name}]");
        self
    }

    pub fn entry(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {value}");
        self
    }

    /// Writes a matrix with round-trip (shortest exact) formatting.
    pub fn matrix(&mut self, name: &str, m: &Matrix) -> &mut Self {
        if !self.out.is_empty() {
            self.out.push('\n');
        }
        let _ = writeln!(self.out, "[matrix {name}]");
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
            let _ = writeln!(self.out, "{}", row.join(" "));
        }
        self
    }

    pub fn finish(self) -> String {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# robot study
[simulation]
step = 0.001   # seconds
horizon = 100

[matrix K]
1.0 2.5
-3 4e-2
";

    #[test]
    fn parses_sections_and_matrices() {
        let d = ConfigDoc::parse(SAMPLE, "s.cfg").unwrap();
        assert_eq!(d.get::<f64>("simulation", "step").unwrap(), Some(1e-3));
        assert_eq!(d.get::<f64>("simulation", "missing").unwrap(), None);
        let k = d.matrix("K").unwrap();
        assert_eq!(k.shape(), (2, 2));
        assert_eq!(k[(1, 1)], 4e-2);
        assert_eq!(d.line_of("simulation", "horizon"), 4);
    }

    #[test]
    fn errors_name_line_and_field() {
        let e = ConfigDoc::parse("[a]\nx = 1\n[matrix M]\n1 2\n3\n", "f.cfg").unwrap_err();
        match e {
            Error::Config { path, line, field, .. } => {
                assert_eq!((path.as_str(), line, field.as_str()), ("f.cfg", 5, "M"));
            }
            other => panic!("{other}"),
        }
        let d = ConfigDoc::parse("[a]\nx = abc\n", "f.cfg").unwrap();
        let e = d.get::<f64>("a", "x").unwrap_err();
        assert_eq!(e.to_string(), "f.cfg:2: a.x: cannot parse 'abc'");
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["x = 1\n", "[a\n", "[a]\nnovalue\n", "[a]\nx = 1\nx = 2\n", "[a]\n[a]\n", "[matrix M]\n"] {
            assert!(matches!(ConfigDoc::parse(bad, "b"), Err(Error::Config { .. })), "{bad:?}");
        }
    }

    #[test]
    fn schema_catches_unknown_keys() {
        let d = ConfigDoc::parse("[a]\nx = 1\ny = 2\n", "s").unwrap();
        assert!(d.check_schema(&[("a", &["x", "y"])]).is_ok());
        let e = d.check_schema(&[("a", &["x"])]).unwrap_err();
        assert!(e.to_string().contains("a.y"));
        assert!(d.check_schema(&[("b", &["x"])]).is_err());
    }

    #[test]
    fn writer_round_trips() {
        let m = Matrix::from_row_slice(2, 3, &[0.1, -2.0, 1.0 / 3.0, 5e-300, 7.0, 0.0]);
        let mut w = ConfigWriter::new();
        w.section("design").entry("alpha", 4.0).matrix("K", &m);
        let d = ConfigDoc::parse(&w.finish(), "w").unwrap();
        assert_eq!(d.matrix("K").unwrap(), &m);
        assert_eq!(d.get::<f64>("design", "alpha").unwrap(), Some(4.0));
    }
}
