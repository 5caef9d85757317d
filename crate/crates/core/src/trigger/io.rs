//! Trigger annotation files and per-token dense feature sidecars.

use std::collections::BTreeMap;
use std::io::Write;

use crate::emoclass::EmotionLabel;
use crate::error::{Error, Result};
use crate::format::{split_header, Header};
use crate::scalar::{format_list, parse_list, Scalar};

/// One annotated trigger: `post_id<TAB>emotion<TAB>start<TAB>end`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TriggerAnnotation {
    pub post_id: String,
    pub emotion: EmotionLabel,
    pub start: usize,
    pub end: usize,
}

pub fn write_annotations<W: Write>(anns: &[TriggerAnnotation], w: &mut W) -> std::io::Result<()> {
    Header::new().with("kind", "trigger-annotations").write_to(w)?;
    for a in anns {
        writeln!(w, "{}\t{}\t{}\t{}", a.post_id, a.emotion.id(), a.start, a.end)?;
    }
    Ok(())
}

pub fn parse_annotations(text: &str) -> Result<Vec<TriggerAnnotation>> {
    const WHAT: &str = "trigger annotations";
    let (header, body) = split_header(WHAT, text)?;
    header.expect_kind(WHAT, "trigger-annotations")?;
    body.map(|(n, line)| {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = |m: &str| Error::format(WHAT, n, m.to_string());
        if f.len() != 4 {
            return Err(bad("expected 4 tab-separated fields"));
        }
        let start: usize = f[2].parse().map_err(|_| bad("bad start"))?;
        let end: usize = f[3].parse().map_err(|_| bad("bad end"))?;
        if start >= end {
            return Err(bad("empty span"));
        }
        Ok(TriggerAnnotation {
            post_id: f[0].to_string(),
            emotion: EmotionLabel::from_id(f[1]).ok_or_else(|| bad("unknown emotion"))?,
            start,
            end,
        })
    })
    .collect()
}

/// Dense vectors keyed by (post id, token index).
#[derive(Debug, Clone, PartialEq)]
pub struct SidecarFeatures<T> {
    pub width: usize,
    rows: BTreeMap<String, BTreeMap<usize, Vec<T>>>,
}

impl<T: Scalar> SidecarFeatures<T> {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, post_id: &str, token: usize, v: Vec<T>) -> Result<()> {
        if v.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                got: v.len(),
            });
        }
        self.rows.entry(post_id.to_string()).or_default().insert(token, v);
        Ok(())
    }

    /// Rows for a post of `len` tokens; tokens without a row get zeros.
    /// `None` when the post has no rows at all.
    pub fn rows_for(&self, post_id: &str, len: usize) -> Option<Vec<Vec<T>>> {
        let m = self.rows.get(post_id)?;
        Some(
            (0..len)
                .map(|t| m.get(&t).cloned().unwrap_or_else(|| vec![T::zero(); self.width]))
                .collect(),
        )
    }

    /// Header `dim=N`, then `post_id<TAB>token<TAB>v1 ... vN`.
    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "feature sidecar";
        let (header, body) = split_header(WHAT, text)?;
        let mut out = Self::new(header.require(WHAT, "dim")?);
        for (n, line) in body {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = |m: &str| Error::format(WHAT, n, m.to_string());
            if f.len() != 3 {
                return Err(bad("expected 3 tab-separated fields"));
            }
            let tok: usize = f[1].parse().map_err(|_| bad("bad token index"))?;
            let v = parse_list::<T>(f[2]).ok_or_else(|| bad("bad number"))?;
            out.insert(f[0], tok, v).map_err(|_| bad("wrong vector width"))?;
        }
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        Header::new().with("dim", self.width).write_to(w)?;
        for (post, toks) in &self.rows {
            for (t, v) in toks {
                writeln!(w, "{post}\t{t}\t{}", format_list(v))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotation_round_trip() {
        let anns = vec![TriggerAnnotation {
            post_id: "p1".into(),
            emotion: EmotionLabel::Fear,
            start: 3,
            end: 6,
        }];
        let mut buf = Vec::new();
        write_annotations(&anns, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("p1\tfear\t3\t6\n"));
        assert_eq!(parse_annotations(&text).unwrap(), anns);
        assert!(parse_annotations("#affectline-v1 kind=trigger-annotations\np\trage\t0\t1\n").is_err());
    }

    #[test]
    fn sidecar_fills_missing_tokens() {
        let text = "#affectline-v1 dim=2\np1\t1\t0.5 -1\n";
        let s = SidecarFeatures::<f64>::parse(text).unwrap();
        assert_eq!(s.rows_for("p1", 3).unwrap(), vec![vec![0.0, 0.0], vec![0.5, -1.0], vec![0.0, 0.0]]);
        assert!(s.rows_for("p2", 3).is_none());
        assert!(SidecarFeatures::<f64>::parse("#affectline-v1 dim=2\np\t0\t1 2 3\n").is_err());
    }
}
