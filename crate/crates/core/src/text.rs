//! Parser for `family{key=value,...}` spec strings.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpecText {
    pub family: String,
    pub fields: Vec<(String, String)>,
}

impl SpecText {
    pub fn parse(input: &str) -> Result<Self> {
        let s = input.trim();
        let open = s
            .find('{')
            .ok_or_else(|| Error::parse(input, "expected `family{key=value,...}`"))?;
        if !s.ends_with('}') {
            return Err(Error::parse(input, "missing closing `}`"));
        }
        let family = s[..open].trim().to_ascii_lowercase();
        if family.is_empty() {
            return Err(Error::parse(input, "missing family name"));
        }
        let body = &s[open + 1..s.len() - 1];
        let mut fields = Vec::new();
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::parse(input, format!("field `{part}` is not key=value")))?;
            let k = k.trim().to_ascii_lowercase();
            if fields.iter().any(|(existing, _)| *existing == k) {
                return Err(Error::parse(input, format!("duplicate field `{k}`")));
            }
            fields.push((k, v.trim().to_string()));
        }
        Ok(Self { family, fields })
    }

    fn raw(&self, key: &str, input: &str) -> Result<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::parse(input, format!("missing field `{key}`")))
    }

    pub fn real(&self, key: &str, input: &str) -> Result<f64> {
        let v = self.raw(key, input)?;
        v.parse::<f64>()
            .map_err(|_| Error::parse(input, format!("field `{key}`: `{v}` is not a number")))
    }

    pub fn count(&self, key: &str, input: &str) -> Result<usize> {
        let v = self.raw(key, input)?;
        v.parse::<usize>().map_err(|_| {
            Error::parse(
                input,
                format!("field `{key}`: `{v}` is not a nonnegative integer"),
            )
        })
    }

    /// Rejects fields outside `allowed`.
    pub fn only(&self, allowed: &[&str], input: &str) -> Result<()> {
        match self
            .fields
            .iter()
            .find(|(k, _)| !allowed.contains(&k.as_str()))
        {
            Some((k, _)) => Err(Error::parse(
                input,
                format!(
                    "unknown field `{k}` for `{}` (expected {allowed:?})",
                    self.family
                ),
            )),
            None => Ok(()),
        }
    }
}
