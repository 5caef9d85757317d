use std::io::Write;

use chrono::NaiveDate;

use crate::emoclass::EmotionLabel;
use crate::error::{Error, Result};
use crate::format::{split_header, Header};
use crate::textfeat::{is_stopword, TokenSequence};
use crate::trigger::TriggerSpan;

/// An extracted trigger, normalized for clustering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerMention {
    pub id: String,
    pub post_id: String,
    pub emotion: EmotionLabel,
    pub date: NaiveDate,
    /// Lowercased span tokens without stopwords or punctuation; never empty.
    pub tokens: Vec<String>,
}

/// Lowercased content tokens of a span.
pub fn normalize_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    tokens
        .into_iter()
        .map(str::to_lowercase)
        .filter(|t| t.chars().any(char::is_alphanumeric) && !is_stopword(t) && t != "<url>")
        .collect()
}

/// Builds mentions from decoded spans. Spans whose tokens normalize to
/// nothing are dropped; the count of dropped spans is returned.
pub fn mentions_from_spans<'a>(
    spans: impl IntoIterator<Item = (&'a TriggerSpan, NaiveDate)>,
) -> (Vec<TriggerMention>, usize) {
    let mut out = Vec::new();
    let mut dropped = 0;
    for (span, date) in spans {
        let tokens = normalize_tokens(span.surface.split(' '));
        if tokens.is_empty() {
            dropped += 1;
            continue;
        }
        out.push(TriggerMention {
            id: format!("{}:{}:{}-{}", span.post_id, span.emotion.id(), span.start, span.end),
            post_id: span.post_id.clone(),
            emotion: span.emotion,
            date,
            tokens,
        });
    }
    (out, dropped)
}

/// Mention from raw tokens, `None` when nothing survives normalization.
pub fn mention_from_tokens(
    id: &str,
    post_id: &str,
    emotion: EmotionLabel,
    date: NaiveDate,
    tokens: &TokenSequence,
) -> Option<TriggerMention> {
    let tokens = normalize_tokens(tokens.surfaces());
    (!tokens.is_empty()).then(|| TriggerMention {
        id: id.to_string(),
        post_id: post_id.to_string(),
        emotion,
        date,
        tokens,
    })
}

/// `id<TAB>post_id<TAB>emotion<TAB>date<TAB>tokens` per mention.
pub fn write_mentions<W: Write>(mentions: &[TriggerMention], w: &mut W) -> std::io::Result<()> {
    Header::new().with("kind", "mentions").write_to(w)?;
    for m in mentions {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            m.id,
            m.post_id,
            m.emotion.id(),
            m.date.format("%Y-%m-%d"),
            m.tokens.join(" ")
        )?;
    }
    Ok(())
}

pub fn parse_mentions(text: &str) -> Result<Vec<TriggerMention>> {
    const WHAT: &str = "mention file";
    let (header, body) = split_header(WHAT, text)?;
    header.expect_kind(WHAT, "mentions")?;
    body.map(|(n, line)| {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = |m: &str| Error::format(WHAT, n, m.to_string());
        if f.len() != 5 {
            return Err(bad("expected 5 tab-separated fields"));
        }
        let tokens: Vec<String> = f[4].split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(bad("mention without tokens"));
        }
        Ok(TriggerMention {
            id: f[0].to_string(),
            post_id: f[1].to_string(),
            emotion: EmotionLabel::from_id(f[2]).ok_or_else(|| bad("unknown emotion"))?,
            date: NaiveDate::parse_from_str(f[3], "%Y-%m-%d").map_err(|_| bad("bad date"))?,
            tokens,
        })
    })
    .collect()
}
