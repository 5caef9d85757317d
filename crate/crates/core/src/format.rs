//! Header line shared by every line-oriented artifact.
//!
//! The first line of each file is `#affectline-v1`, optionally followed by
//! space-separated `key=value` attributes describing the payload.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};

pub const MAGIC: &str = "#affectline-v1";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Header {
    pub attrs: BTreeMap<String, String>,
}

impl Header {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.attrs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.attrs.get(key).map(String::as_str)
    }

    /// Fetches and parses a required attribute.
    pub fn require<T: std::str::FromStr>(&self, what: &'static str, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::format(what, 1, format!("header lacks `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::format(what, 1, format!("bad header value {key}={raw}")))
    }

    pub fn expect_kind(&self, what: &'static str, kind: &str) -> Result<()> {
        match self.get("kind") {
            Some(k) if k == kind => Ok(()),
            other => Err(Error::format(
                what,
                1,
                format!("expected kind={kind}, found {other:?}"),
            )),
        }
    }

    pub fn parse(what: &'static str, line: &str) -> Result<Self> {
        let line = line.trim_end_matches(['\r', '\n']);
        let mut parts = line.split(' ');
        if parts.next() != Some(MAGIC) {
            return Err(Error::format(
                what,
                1,
                format!("missing or unsupported version header (want `{MAGIC}`)"),
            ));
        }
        let mut attrs = BTreeMap::new();
        for part in parts.filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::format(what, 1, format!("bad header attribute `{part}`")))?;
            attrs.insert(k.to_string(), v.to_string());
        }
        Ok(Self { attrs })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "{MAGIC}")?;
        for (k, v) in &self.attrs {
            write!(w, " {k}={v}")?;
        }
        writeln!(w)
    }
}

/// Splits an artifact into its header and the remaining numbered lines,
/// skipping blank lines.
pub fn split_header<'a>(
    what: &'static str,
    text: &'a str,
) -> Result<(Header, impl Iterator<Item = (usize, &'a str)>)> {
    let mut lines = text.lines().enumerate();
    let first = lines
        .next()
        .map(|(_, l)| l)
        .ok_or_else(|| Error::format(what, 1, "empty file"))?;
    let header = Header::parse(what, first)?;
    let body = lines
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    Ok((header, body))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let h = Header::new().with("kind", "mlp").with("scalar", "f64");
        let mut buf = Vec::new();
        h.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "#affectline-v1 kind=mlp scalar=f64\n");
        assert_eq!(Header::parse("t", text.trim()).unwrap(), h);
    }

    #[test]
    fn rejects_other_versions() {
        assert!(Header::parse("t", "#affectline-v2").is_err());
        assert!(Header::parse("t", "{\"id\":1}").is_err());
    }
}
