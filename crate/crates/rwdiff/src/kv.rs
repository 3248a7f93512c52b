//! Flat `key=value` text files, as used for model files and ensemble
//! configs. Blank lines and lines starting with `#` are ignored; keys may
//! carry dotted section prefixes such as `model.family`.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KvError {
    #[error("line {line}: expected `key=value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("key `{key}`: cannot parse `{value}` as {expected}")]
    Value {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
}

/// Parsed key-value document (keys sorted for deterministic iteration).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: BTreeMap<String, String>,
}

impl KvDoc {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| KvError::Syntax {
                line: i + 1,
                text: line.to_string(),
            })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(KvError::Syntax {
                    line: i + 1,
                    text: line.to_string(),
                });
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(KvError::Duplicate { line: i + 1, key });
            }
        }
        Ok(KvDoc { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Rejects keys outside `allowed` (entries ending in `.*` match a prefix).
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), KvError> {
        for k in self.keys() {
            let ok = allowed.iter().any(|a| match a.strip_suffix('*') {
                Some(prefix) => k.starts_with(prefix),
                None => *a == k,
            });
            if !ok {
                return Err(KvError::Unknown(k.to_string()));
            }
        }
        Ok(())
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, KvError> {
        self.get(key).map_or(Ok(default), |v| parse_real(key, v))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, KvError> {
        self.get(key).map(|v| parse_real(key, v)).transpose()
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, KvError> {
        self.get(key).map_or(Ok(default), |v| {
            v.parse().map_err(|_| value_err(key, v, "a nonnegative integer"))
        })
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, KvError> {
        self.get(key).map_or(Ok(default), |v| {
            v.parse().map_err(|_| value_err(key, v, "an unsigned 64-bit integer"))
        })
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, KvError> {
        self.get(key).map_or(Ok(default), |v| match v {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(value_err(key, v, "a boolean")),
        })
    }

    pub fn list_f64(&self, key: &str) -> Result<Vec<f64>, KvError> {
        self.get(key).map_or(Ok(Vec::new()), |v| parse_list(key, v))
    }
}

fn value_err(key: &str, value: &str, expected: &'static str) -> KvError {
    KvError::Value {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    }
}

/// Parses a real number; accepts `inf`/`+inf` and simple fractions `p/q`.
pub fn parse_real(key: &str, text: &str) -> Result<f64, KvError> {
    let s = text.trim();
    let err = || value_err(key, text, "a real number");
    match s {
        "inf" | "+inf" | "infinity" => return Ok(f64::INFINITY),
        _ => {}
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().map_err(|_| err())?;
        let q: f64 = q.trim().parse().map_err(|_| err())?;
        if q == 0.0 {
            return Err(err());
        }
        return Ok(p / q);
    }
    s.parse().map_err(|_| err())
}

/// Comma-separated list of reals; the empty string is the empty list.
pub fn parse_list(key: &str, text: &str) -> Result<Vec<f64>, KvError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(|p| parse_real(key, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_fractions() {
        let doc = KvDoc::parse("# comment\nmodel.family = power\nmodel.params=2/3\n\nsigma=1.5\n").unwrap();
        assert_eq!(doc.get("model.family"), Some("power"));
        assert!((doc.list_f64("model.params").unwrap()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(doc.f64_or("sigma", 0.0).unwrap(), 1.5);
        assert_eq!(doc.f64_or("absent", 4.0).unwrap(), 4.0);
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(matches!(KvDoc::parse("a=1\na=2"), Err(KvError::Duplicate { .. })));
        assert!(matches!(KvDoc::parse("just text"), Err(KvError::Syntax { .. })));
        let doc = KvDoc::parse("x=1\ny.z=2").unwrap();
        assert!(doc.reject_unknown(&["x", "y.*"]).is_ok());
        assert!(doc.reject_unknown(&["x"]).is_err());
    }
}
