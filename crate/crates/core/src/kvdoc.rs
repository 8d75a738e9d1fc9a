//! Flat, sectioned key-value text documents.
//!
//! ```text
//! # comment
//! top = 1
//! [grid]
//! points = 64        -> key "grid.points"
//! [solver.madelung]
//! low_pass = false   -> key "solver.madelung.low_pass"
//! ```
//!
//! Keys are unique. Blank lines and lines starting with `#` are ignored.
//! Everything after the first `=` (trimmed) is the value.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvDocument {
    entries: Vec<(String, String)>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('.')
        && !s.ends_with('.')
        && !s.contains("..")
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl KvDocument {
    pub fn new() -> Self {
        KvDocument::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDocument::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let at = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Format(format!("line {at}: unterminated section header")))?
                    .trim();
                if !valid_name(name) {
                    return Err(Error::Format(format!("line {at}: invalid section name {name:?}")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {at}: expected key = value")))?;
            let k = k.trim();
            if !valid_name(k) {
                return Err(Error::Format(format!("line {at}: invalid key {k:?}")));
            }
            let key = if section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            if doc.get(&key).is_some() {
                return Err(Error::Format(format!("line {at}: duplicate key {key}")));
            }
            doc.entries.push((key, v.trim().to_string()));
        }
        Ok(doc)
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Inserts or replaces `key`. Panics on names the parser would reject.
    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        assert!(valid_name(key), "invalid key {key:?}");
        let value = value.to_string();
        assert!(!value.contains('\n'), "multi-line value for {key}");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value.trim().to_string(),
            None => self.entries.push((key.to_string(), value.trim().to_string())),
        }
    }

    /// Like [`KvDocument::set`] but reports bad keys instead of panicking.
    pub fn try_set(&mut self, key: &str, value: &str) -> Result<()> {
        if !valid_name(key) {
            return Err(Error::Format(format!("invalid key {key:?}")));
        }
        if value.contains('\n') {
            return Err(Error::Format(format!("multi-line value for {key}")));
        }
        self.set(key, value);
        Ok(())
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        let pos = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(pos).1)
    }

    /// Parses the value of `key`; `Ok(None)` when absent.
    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Format(format!("{key}: cannot parse {v:?}"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse_value(key)?
            .ok_or_else(|| Error::Format(format!("missing key {key}")))
    }

    /// Merges `other` into `self`, later values winning.
    pub fn merge(&mut self, other: &KvDocument) {
        for (k, v) in &other.entries {
            self.set(k, v);
        }
    }
}

fn section_of(key: &str) -> &str {
    key.rsplit_once('.').map(|(s, _)| s).unwrap_or("")
}

impl fmt::Display for KvDocument {
    /// Top-level keys first, then sections in order of first appearance.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut sections: Vec<&str> = vec![""];
        for (k, _) in &self.entries {
            let s = section_of(k);
            if !sections.contains(&s) {
                sections.push(s);
            }
        }
        for (i, section) in sections.iter().enumerate() {
            if !section.is_empty() {
                if i > 1 || self.entries.iter().any(|(k, _)| section_of(k).is_empty()) {
                    writeln!(f)?;
                }
                writeln!(f, "[{section}]")?;
            }
            for (key, value) in self.entries.iter().filter(|(k, _)| section_of(k) == *section) {
                let name = key.rsplit_once('.').map(|(_, n)| n).unwrap_or(key);
                writeln!(f, "{name} = {value}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_prefix_keys() {
        let d = KvDocument::parse("a = 1\n# c\n[grid]\npoints = 64\n[x.y]\nz = a = b\n").unwrap();
        assert_eq!(d.get("a"), Some("1"));
        assert_eq!(d.get("grid.points"), Some("64"));
        assert_eq!(d.get("x.y.z"), Some("a = b"));
        assert_eq!(d.require::<usize>("grid.points").unwrap(), 64);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(KvDocument::parse("[grid\n").is_err());
        assert!(KvDocument::parse("novalue\n").is_err());
        assert!(KvDocument::parse("a b = 1\n").is_err());
        assert!(KvDocument::parse("a = 1\na = 2\n").is_err());
        assert!(KvDocument::parse("[.x]\n").is_err());
    }

    #[test]
    fn display_round_trips_including_late_top_level_keys() {
        let mut d = KvDocument::new();
        d.set("grid.points", 64);
        d.set("top", "x");
        d.set("grid.length", 8.5);
        d.set("a.b.c", true);
        let back = KvDocument::parse(&d.to_string()).unwrap();
        for (k, v) in d.entries() {
            assert_eq!(back.get(k), Some(v.as_str()));
        }
        assert_eq!(back.entries().len(), d.entries().len());
    }
}
