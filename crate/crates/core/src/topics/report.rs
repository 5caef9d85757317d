use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::format::{split_header, Header};
use crate::scalar::Scalar;
use crate::topics::lda::DateLdaState;

pub const DEFAULT_TOP_M: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TopicStatus {
    #[default]
    Kept,
    Discarded,
}

impl TopicStatus {
    pub fn id(self) -> &'static str {
        match self {
            TopicStatus::Kept => "kept",
            TopicStatus::Discarded => "discarded",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        match s {
            "kept" => Some(TopicStatus::Kept),
            "discarded" => Some(TopicStatus::Discarded),
            _ => None,
        }
    }
}

impl fmt::Display for TopicStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Human keep/discard decisions. Topics without an entry are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Curation {
    pub status: BTreeMap<usize, TopicStatus>,
}

impl Curation {
    pub fn status(&self, k: usize) -> TopicStatus {
        self.status.get(&k).copied().unwrap_or_default()
    }

    pub fn set(&mut self, k: usize, status: TopicStatus) {
        self.status.insert(k, status);
    }

    pub fn is_kept(&self, k: usize) -> bool {
        self.status(k) == TopicStatus::Kept
    }

    pub fn kept_topics(&self, topics: usize) -> Vec<usize> {
        (0..topics).filter(|&k| self.is_kept(k)).collect()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        Header::new().with("kind", "curation").write_to(w)?;
        for (k, s) in &self.status {
            writeln!(w, "{k}\t{s}")?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "curation file";
        let (header, body) = split_header(WHAT, text)?;
        header.expect_kind(WHAT, "curation")?;
        let mut out = Self::default();
        for (n, line) in body {
            let (k, s) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(WHAT, n, "expected `topic<TAB>status`"))?;
            let k: usize = k.parse().map_err(|_| Error::format(WHAT, n, "bad topic id"))?;
            let s = TopicStatus::from_id(s).ok_or_else(|| Error::format(WHAT, n, "status must be kept or discarded"))?;
            out.set(k, s);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicSummary<T> {
    pub topic: usize,
    pub top_words: Vec<(String, T)>,
    pub top_dates: Vec<(NaiveDate, T)>,
    /// Mentions whose most probable topic is this one.
    pub mentions: usize,
    pub status: TopicStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicReport<T> {
    pub topics: Vec<TopicSummary<T>>,
}

fn top_by<K: Ord + Clone, T: Scalar>(items: impl Iterator<Item = (K, T)>, m: usize) -> Vec<(K, T)> {
    let mut v: Vec<(K, T)> = items.collect();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    v.truncate(m);
    v
}

fn argmax<T: Scalar>(p: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = k;
        }
    }
    best
}

/// Per-topic top words and dates, ties broken lexicographically and
/// chronologically.
pub fn topic_report<T: Scalar>(state: &DateLdaState<T>, top_m: usize, curation: &Curation) -> TopicReport<T> {
    let mut counts = vec![0usize; state.topics()];
    for m in 0..state.num_mentions() {
        counts[argmax(&state.posterior_at(m))] += 1;
    }
    let topics = (0..state.topics())
        .map(|k| TopicSummary {
            topic: k,
            top_words: top_by(
                state.vocab().iter().enumerate().map(|(w, s)| (s.clone(), state.word_probability(k, w))),
                top_m,
            ),
            top_dates: top_by(
                state.dates().iter().enumerate().map(|(d, &date)| (date, state.date_probability(k, d))),
                top_m,
            ),
            mentions: counts[k],
            status: curation.status(k),
        })
        .collect();
    TopicReport { topics }
}

impl<T: Scalar> TopicReport<T> {
    /// Tab-separated listing: one `topic` line per topic followed by its
    /// `word` and `date` lines.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        Header::new().with("kind", "topic-report").write_to(w)?;
        for t in &self.topics {
            writeln!(w, "topic\t{}\t{}\t{}", t.topic, t.status, t.mentions)?;
            for (word, p) in &t.top_words {
                writeln!(w, "word\t{}\t{word}\t{p:.6}", t.topic)?;
            }
            for (date, p) in &t.top_dates {
                writeln!(w, "date\t{}\t{}\t{p:.6}", t.topic, date.format("%Y-%m-%d"))?;
            }
        }
        Ok(())
    }
}
