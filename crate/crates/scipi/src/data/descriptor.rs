//! Tiny `name:key=value,...` descriptor strings.
//!
//! The CLI identifies built-in problem instances with strings like
//! `eig:d=50,seed=3` or `nmf:rows=40,cols=30,rank=5`. This keeps flag
//! parsing out of the library while still catching typos early.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Descriptor {
    pub name: String,
    params: BTreeMap<String, String>,
}

impl Descriptor {
    /// Parse `name` or `name:k=v,k2=v2`. Keys and values are trimmed;
    /// duplicate keys and empty pieces are rejected.
    pub fn parse(text: &str) -> Result<Descriptor> {
        let text = text.trim();
        let (name, rest) = match text.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (text, None),
        };
        if name.is_empty() {
            return Err(Error::Parse(format!("descriptor {:?} has no name", text)));
        }
        let mut params = BTreeMap::new();
        if let Some(rest) = rest {
            for piece in rest.split(',') {
                let piece = piece.trim();
                if piece.is_empty() {
                    return Err(Error::Parse(format!(
                        "descriptor {:?} has an empty parameter",
                        text
                    )));
                }
                let (k, v) = piece.split_once('=').ok_or_else(|| {
                    Error::Parse(format!("parameter {:?} is not of the form key=value", piece))
                })?;
                let (k, v) = (k.trim(), v.trim());
                if k.is_empty() || v.is_empty() {
                    return Err(Error::Parse(format!(
                        "parameter {:?} is missing a key or value",
                        piece
                    )));
                }
                if params.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(Error::Parse(format!("parameter {:?} appears twice", k)));
                }
            }
        }
        Ok(Descriptor { name: name.to_string(), params })
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(|s| s.as_str())
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.typed(key, "a nonnegative integer", |v| v.parse::<usize>().ok())
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.typed(key, "a nonnegative integer", |v| v.parse::<u64>().ok())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.typed(key, "a number", |v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
    }

    fn typed<T>(&self, key: &str, wanted: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(v) => parse(v).map(Some).ok_or_else(|| {
                Error::Parse(format!("parameter {}={:?} is not {}", key, v, wanted))
            }),
        }
    }

    /// Reject any parameter outside `allowed`, so `sep=3` instead of
    /// `separation=3` fails loudly instead of being silently ignored.
    pub fn require_known(&self, allowed: &[&str]) -> Result<()> {
        for key in self.params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Input(format!(
                    "unknown parameter {:?} for {:?} (expected one of: {})",
                    key,
                    self.name,
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_name_and_params() {
        let d = Descriptor::parse("eig:d=50,seed=3,gap=0.9").unwrap();
        assert_eq!(d.name, "eig");
        assert_eq!(d.get_usize("d").unwrap(), Some(50));
        assert_eq!(d.get_u64("seed").unwrap(), Some(3));
        assert_eq!(d.get_f64("gap").unwrap(), Some(0.9));
        assert_eq!(d.get_usize("missing").unwrap(), None);
        d.require_known(&["d", "seed", "gap"]).unwrap();
    }

    #[test]
    fn bare_name_is_fine() {
        let d = Descriptor::parse("mixture").unwrap();
        assert_eq!(d.name, "mixture");
        d.require_known(&[]).unwrap();
    }

    #[test]
    fn whitespace_is_trimmed() {
        let d = Descriptor::parse(" nmf : rows = 4 , cols = 3 ").unwrap();
        assert_eq!(d.name, "nmf");
        assert_eq!(d.get_usize("rows").unwrap(), Some(4));
        assert_eq!(d.get_usize("cols").unwrap(), Some(3));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(Descriptor::parse("").is_err());
        assert!(Descriptor::parse(":d=3").is_err());
        assert!(Descriptor::parse("eig:d").is_err());
        assert!(Descriptor::parse("eig:=3").is_err());
        assert!(Descriptor::parse("eig:d=").is_err());
        assert!(Descriptor::parse("eig:d=3,d=4").is_err());
        assert!(Descriptor::parse("eig:d=3,,seed=1").is_err());
    }

    #[test]
    fn rejects_bad_numbers_and_unknown_keys() {
        let d = Descriptor::parse("eig:d=abc").unwrap();
        assert!(d.get_usize("d").is_err());
        let d = Descriptor::parse("eig:gap=inf").unwrap();
        assert!(d.get_f64("gap").is_err());
        let d = Descriptor::parse("gmm:sep=3").unwrap();
        let err = d.require_known(&["separation", "seed"]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sep"), "{msg}");
        assert!(msg.contains("separation"), "{msg}");
    }
}
