//! Line-based `key = value` text files with `#` comments.
//!
//! Used for configs, checkpoint manifests and dataset manifests. Keys keep
//! their file order; duplicate keys are rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// 1-based source line, 0 for entries built in memory.
    pub line: usize,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::config_at(line, format!("expected `key = value`, got `{content}`")));
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::config_at(line, format!("invalid key `{key}`")));
            }
            if m.get(key).is_some() {
                return Err(Error::config_at(line, format!("duplicate key `{key}`")));
            }
            m.entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line: 0,
        });
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    pub fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Format(format!("manifest is missing `{key}`")))
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{} = {}", e.key, e.value);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let m = Manifest::parse("# header\n\nseed = 7   # trailing\nname=desk\n").unwrap();
        assert_eq!(m.get("seed"), Some("7"));
        assert_eq!(m.get("name"), Some("desk"));
        assert_eq!(m.entry("seed").unwrap().line, 3);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = Manifest::parse("seed = 1\nthis line is broken\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(2), .. }), "{err}");
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn duplicate_keys_rejected() {
        assert!(Manifest::parse("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn render_parse_roundtrip() {
        let mut m = Manifest::new();
        m.push("stage", "stage1");
        m.push("dims", "4 2 2 16");
        let back = Manifest::parse(&m.render()).unwrap();
        assert_eq!(back.get("dims"), Some("4 2 2 16"));
        assert_eq!(back.render(), m.render());
    }
}
