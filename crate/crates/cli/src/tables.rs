//! Prediction tables exchanged between stages.
//!
//! `related.tsv`: `post_id  related  score`, score `-` for posts the final
//! keywords do not harvest. `emotions.tsv`: `post_id` then one probability
//! per emotion and the thresholded label set (`-` when empty), related
//! posts only.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use affectline_core::corpus::{read_label_log, LabelState};
use affectline_core::emoclass::{EmotionLabel, NUM_EMOTIONS};
use affectline_core::rundir::read_text;
use anyhow::anyhow;

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq)]
pub struct RelatedRow {
    pub post_id: String,
    pub related: bool,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionRow {
    pub post_id: String,
    pub probabilities: [f64; NUM_EMOTIONS],
    pub labels: BTreeSet<EmotionLabel>,
}

pub fn write_related<W: Write>(rows: &[RelatedRow], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "post_id\trelated\tscore")?;
    for r in rows {
        let score = r.score.map_or_else(|| "-".to_string(), |s| s.to_string());
        writeln!(w, "{}\t{}\t{score}", r.post_id, u8::from(r.related))?;
    }
    Ok(())
}

pub fn write_emotions<W: Write>(rows: &[EmotionRow], w: &mut W) -> std::io::Result<()> {
    let names: Vec<&str> = EmotionLabel::ALL.iter().map(|e| e.id()).collect();
    writeln!(w, "post_id\t{}\tlabels", names.join("\t"))?;
    for r in rows {
        let probs: Vec<String> = r.probabilities.iter().map(f64::to_string).collect();
        let labels: Vec<&str> = r.labels.iter().map(|e| e.id()).collect();
        let labels = if labels.is_empty() { "-".to_string() } else { labels.join(",") };
        writeln!(w, "{}\t{}\t{labels}", r.post_id, probs.join("\t"))?;
    }
    Ok(())
}

fn body<'a>(path: &Path, text: &'a str, header: &str) -> CliResult<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => Ok(lines.filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l))),
        _ => Err(anyhow!("{}: expected header `{}`", path.display(), header.replace('\t', " ")).into()),
    }
}

pub fn read_related(path: &Path) -> CliResult<Vec<RelatedRow>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (n, line) in body(path, &text, "post_id\trelated\tscore")? {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || anyhow!("{}, line {n}: malformed row", path.display());
        if f.len() != 3 {
            return Err(bad().into());
        }
        let related = match f[1] {
            "0" => false,
            "1" => true,
            _ => return Err(bad().into()),
        };
        let score = match f[2] {
            "-" => None,
            s => Some(s.parse().map_err(|_| bad())?),
        };
        out.push(RelatedRow { post_id: f[0].to_string(), related, score });
    }
    Ok(out)
}

pub fn read_emotions(path: &Path) -> CliResult<Vec<EmotionRow>> {
    let text = read_text(path)?;
    let names: Vec<&str> = EmotionLabel::ALL.iter().map(|e| e.id()).collect();
    let header = format!("post_id\t{}\tlabels", names.join("\t"));
    let mut out = Vec::new();
    for (n, line) in body(path, &text, &header)? {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || anyhow!("{}, line {n}: malformed row", path.display());
        if f.len() != NUM_EMOTIONS + 2 {
            return Err(bad().into());
        }
        let mut probabilities = [0.0; NUM_EMOTIONS];
        for (p, s) in probabilities.iter_mut().zip(&f[1..=NUM_EMOTIONS]) {
            *p = s.parse().map_err(|_| bad())?;
        }
        let mut labels = BTreeSet::new();
        if f[NUM_EMOTIONS + 1] != "-" {
            for id in f[NUM_EMOTIONS + 1].split(',') {
                labels.insert(EmotionLabel::from_id(id).ok_or_else(bad)?);
            }
        }
        out.push(EmotionRow { post_id: f[0].to_string(), probabilities, labels });
    }
    Ok(out)
}

pub fn related_map(rows: &[RelatedRow]) -> HashMap<String, bool> {
    rows.iter().map(|r| (r.post_id.clone(), r.related)).collect()
}

pub fn probability_map(rows: &[EmotionRow]) -> HashMap<String, [f64; NUM_EMOTIONS]> {
    rows.iter().map(|r| (r.post_id.clone(), r.probabilities)).collect()
}

/// Active label state from the log; an absent log means no labels yet.
pub fn load_labels(path: &Path, required: bool) -> CliResult<LabelState> {
    if !path.exists() && !required {
        return Ok(LabelState::default());
    }
    let records = read_label_log(path)?;
    Ok(LabelState::from_records(&records))
}

/// Parses `TOKEN=ANNOTATOR`.
pub fn parse_token(s: &str) -> CliResult<(String, String)> {
    match s.split_once('=') {
        Some((t, a)) if !t.is_empty() && !a.is_empty() => Ok((t.to_string(), a.to_string())),
        _ => Err(crate::error::config_err(format!("--token expects TOKEN=ANNOTATOR, got `{s}`"))),
    }
}

pub fn ensure(cond: bool, msg: impl Into<String>) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(anyhow!(msg.into()).into())
    }
}
