//! Plain-text `key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Keys are flat strings, optionally namespaced with dots (`expert.window`).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::ConfigError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = Self::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    text: raw.to_string(),
                });
            }
            if out.entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::DuplicateKey(k.to_string()));
            }
        }
        Ok(out)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Overlay `other` on top of `self`.
    pub fn merge(&mut self, other: &KvConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// Parse `key` into `slot` if present.
    pub fn read<V: FromStr>(&self, key: &str, slot: &mut V) -> Result<(), ConfigError> {
        if let Some(raw) = self.get(key) {
            *slot = raw.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: raw.to_string(),
            })?;
        }
        Ok(())
    }

    /// Canonical text: sorted `key = value` lines.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    /// SHA-256 of the canonical text; independent of key order in the source.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = KvConfig::parse("# header\n speed_min = 0.1 # inline\n\nexpert.window=8\n").unwrap();
        assert_eq!(kv.get("speed_min"), Some("0.1"));
        assert_eq!(kv.get("expert.window"), Some("8"));
        assert_eq!(kv.len(), 2);
    }

    #[test]
    fn digest_ignores_ordering() {
        let a = KvConfig::parse("a = 1\nb = 2\n").unwrap();
        let b = KvConfig::parse("b = 2\n\n# x\na = 1\n").unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = KvConfig::parse("a = 1\nb = 3\n").unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(
            KvConfig::parse("novalue\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            KvConfig::parse("a=1\na=2\n"),
            Err(ConfigError::DuplicateKey(_))
        ));
    }

    #[test]
    fn typed_read() {
        let kv = KvConfig::parse("n = 3\nx = abc\n").unwrap();
        let mut n = 0usize;
        kv.read("n", &mut n).unwrap();
        assert_eq!(n, 3);
        let mut x = 0.0f64;
        assert!(kv.read("x", &mut x).is_err());
        kv.read("missing", &mut x).unwrap();
        assert_eq!(x, 0.0);
    }
}
