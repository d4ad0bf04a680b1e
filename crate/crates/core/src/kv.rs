//! Flat `key = value` text with dotted section prefixes (`train.lr = 1e-4`).
//! `#` starts a comment; blank lines are ignored; keys may not repeat.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KvError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("key `{key}`: cannot parse `{value}`")]
    Value { key: String, value: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvMap(BTreeMap<String, String>);

impl KvMap {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(KvError::Syntax { line: i + 1, msg: format!("expected `key = value`, got `{line}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(KvError::Syntax { line: i + 1, msg: format!("bad key `{k}`") });
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(KvError::Syntax { line: i + 1, msg: format!("duplicate key `{k}`") });
            }
        }
        Ok(KvMap(map))
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        self.0.insert(key.into(), value.to_string());
    }

    pub fn set_list<T: Display>(&mut self, key: impl Into<String>, values: &[T]) {
        let joined = values.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
        self.0.insert(key.into(), joined);
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, KvError> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| KvError::Value { key: key.to_string(), value: v.to_string() })
            })
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, KvError> {
        self.get(key)?.ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, KvError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|_| KvError::Value { key: key.to_string(), value: v.to_string() })
                    })
                    .collect()
            })
            .transpose()
    }

    /// Entries under `prefix.` with the prefix stripped.
    pub fn section(&self, prefix: &str) -> KvMap {
        let p = format!("{prefix}.");
        KvMap(
            self.0
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&p).map(|s| (s.to_string(), v.clone())))
                .collect(),
        )
    }

    /// Copies every entry of `other`, overwriting existing keys.
    pub fn merge(&mut self, other: &KvMap) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    pub fn with_prefix(&self, prefix: &str) -> KvMap {
        KvMap(self.0.iter().map(|(k, v)| (format!("{prefix}.{k}"), v.clone())).collect())
    }

    /// Fails on the first key outside `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), KvError> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(KvError::Unknown(k.clone())),
            None => Ok(()),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_sections_and_comments() {
        let m = KvMap::parse("# run\ntrain.lr = 1e-4\n\nmodel.dilations = 1, 2, 4 # tcn\n").unwrap();
        assert_eq!(m.get::<f64>("train.lr").unwrap(), Some(1e-4));
        assert_eq!(m.section("model").get_list::<usize>("dilations").unwrap(), Some(vec![1, 2, 4]));
        assert_eq!(KvMap::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn errors() {
        assert!(matches!(KvMap::parse("a = 1\na = 2"), Err(KvError::Syntax { line: 2, .. })));
        assert!(matches!(KvMap::parse("just text"), Err(KvError::Syntax { line: 1, .. })));
        let m = KvMap::parse("x = abc").unwrap();
        assert!(m.get::<f64>("x").is_err());
        assert_eq!(m.reject_unknown(&["y"]), Err(KvError::Unknown("x".into())));
        assert_eq!(m.require::<String>("z"), Err(KvError::Missing("z".into())));
    }
}
