//! Shared helpers for the line-oriented text formats.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Scientific notation with 17 significant digits; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `key=value` fields of a format header line.
pub struct HeaderFields {
    line: usize,
    fields: HashMap<String, String>,
}

impl HeaderFields {
    fn raw(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Parse { line: self.line, msg: format!("missing header field `{key}`") })
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| Error::Parse { line: self.line, msg: format!("bad integer `{raw}` for `{key}`") })
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| Error::Parse { line: self.line, msg: format!("bad number `{raw}` for `{key}`") })
    }
}

/// Parses `<magic> v1 k1=v1 k2=v2 ...`, requiring exactly the keys in `keys`.
pub fn parse_header(line: usize, text: &str, magic: &str, keys: &[&str]) -> Result<HeaderFields> {
    let mut parts = text.split_whitespace();
    if parts.next() != Some(magic) || parts.next() != Some("v1") {
        return Err(Error::Parse { line, msg: format!("expected `{magic} v1` header") });
    }
    let mut fields = HashMap::new();
    for part in parts {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, msg: format!("malformed header field `{part}`") })?;
        if !keys.contains(&k) {
            return Err(Error::Parse { line, msg: format!("unknown header field `{k}`") });
        }
        fields.insert(k.to_string(), v.to_string());
    }
    Ok(HeaderFields { line, fields })
}

/// Iterates over non-blank lines, tracking one-based line numbers.
pub struct LineReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineReader<'a> {
    pub fn new(text: &'a str) -> Self {
        LineReader { lines: text.lines().enumerate() }
    }

    pub fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (idx, line) in self.lines.by_ref() {
            if !line.trim().is_empty() {
                return Ok((idx + 1, line));
            }
        }
        Err(Error::Parse { line: 0, msg: "unexpected end of input".into() })
    }

    /// Reads one line holding exactly `n` whitespace-separated floats.
    pub fn next_floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let (ln, line) = self.next_line()?;
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
        if vals.len() != n {
            return Err(Error::Parse { line: ln, msg: format!("expected {n} values, found {}", vals.len()) });
        }
        Ok(vals)
    }

    pub fn expect_end(&mut self) -> Result<()> {
        match self.lines.by_ref().find(|(_, l)| !l.trim().is_empty()) {
            Some((idx, _)) => Err(Error::Parse { line: idx + 1, msg: "trailing content".into() }),
            None => Ok(()),
        }
    }
}
