use std::collections::BTreeSet;

use crate::emoclass::EmotionLabel;
use crate::error::{Error, Result};
use crate::scalar::{metric_count, MetricValue};
use crate::textfeat::TokenSequence;
use crate::trigger::lattice::Tag;

/// An extracted or annotated trigger: tokens `[start, end)` of a post.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriggerSpan {
    pub post_id: String,
    pub emotion: EmotionLabel,
    pub start: usize,
    pub end: usize,
    /// Token surfaces joined by single spaces.
    pub surface: String,
}

impl TriggerSpan {
    pub fn new(post_id: &str, emotion: EmotionLabel, tokens: &TokenSequence, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > tokens.len() {
            return Err(Error::InvalidLabel(format!(
                "span ({start}, {end}) invalid for {} tokens",
                tokens.len()
            )));
        }
        Ok(Self {
            post_id: post_id.to_string(),
            emotion,
            start,
            end,
            surface: tokens.tokens[start..end]
                .iter()
                .map(|t| t.surface.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        })
    }

    fn key(&self) -> (&str, EmotionLabel, usize, usize) {
        (&self.post_id, self.emotion, self.start, self.end)
    }
}

/// Maximal `B I*` runs as half-open ranges. An `I` with no open span is
/// ignored.
pub fn spans_from_tags(tags: &[Tag]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (t, &tag) in tags.iter().enumerate() {
        match tag {
            Tag::B => {
                if let Some(s) = open.take() {
                    out.push((s, t));
                }
                open = Some(t);
            }
            Tag::I => {}
            Tag::O => {
                if let Some(s) = open.take() {
                    out.push((s, t));
                }
            }
        }
    }
    if let Some(s) = open {
        out.push((s, tags.len()));
    }
    out
}

/// BIO tags for non-overlapping half-open spans over `len` tokens.
pub fn tags_from_spans(len: usize, spans: &[(usize, usize)]) -> Result<Vec<Tag>> {
    let mut tags = vec![Tag::O; len];
    for &(s, e) in spans {
        if s >= e || e > len {
            return Err(Error::InvalidLabel(format!("span ({s}, {e}) invalid for {len} tokens")));
        }
        if tags[s..e].iter().any(|t| *t != Tag::O) {
            return Err(Error::InvalidLabel("overlapping spans".into()));
        }
        tags[s] = Tag::B;
        for t in &mut tags[s + 1..e] {
            *t = Tag::I;
        }
    }
    Ok(tags)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfScores<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

/// Exact-match span scoring over (post, emotion, start, end).
///
/// Precision is 0 when nothing was predicted but gold spans exist, recall
/// is 0 in the mirrored case, and two empty sets score (1, 1, 1).
pub fn span_prf<T: MetricValue>(predicted: &[TriggerSpan], gold: &[TriggerSpan]) -> PrfScores<T> {
    let p: BTreeSet<_> = predicted.iter().map(TriggerSpan::key).collect();
    let g: BTreeSet<_> = gold.iter().map(TriggerSpan::key).collect();
    if p.is_empty() && g.is_empty() {
        return PrfScores {
            precision: T::one(),
            recall: T::one(),
            f1: T::one(),
        };
    }
    let hit = p.intersection(&g).count();
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            T::zero()
        } else {
            metric_count::<T>(num) / metric_count::<T>(den)
        }
    };
    let precision = ratio(hit, p.len());
    let recall = ratio(hit, g.len());
    let two = T::one() + T::one();
    let f1 = if precision + recall == T::zero() {
        T::zero()
    } else {
        two * precision * recall / (precision + recall)
    };
    PrfScores { precision, recall, f1 }
}
