//! Post ingestion, day partitioning and deterministic sampling.

mod labels;

pub use labels::{
    read_label_log, LabelLog, LabelPayload, LabelRecord, LabelState, SpanAnnotation, Task,
};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{DateTime, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{Header, MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Twitter,
    Weibo,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Post {
    pub id: String,
    /// UTC epoch seconds.
    pub timestamp: i64,
    /// Calendar day of `timestamp` in UTC.
    pub date: NaiveDate,
    pub text: String,
    pub platform: Platform,
    pub lang: String,
}

/// On-disk shape of a post line. Every field is optional so that missing
/// fields surface as rejections instead of parse failures.
#[derive(Debug, Serialize, Deserialize)]
struct PostRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    timestamp: Option<i64>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    platform: Option<String>,
    #[serde(default)]
    lang: Option<String>,
}

#[derive(Serialize)]
struct PostOut<'a> {
    id: &'a str,
    timestamp: i64,
    text: &'a str,
    platform: Platform,
    lang: &'a str,
}

pub fn utc_date(timestamp: i64) -> Option<NaiveDate> {
    DateTime::from_timestamp(timestamp, 0).map(|dt| dt.date_naive())
}

impl Post {
    pub fn new(
        id: impl Into<String>,
        timestamp: i64,
        text: impl Into<String>,
        platform: Platform,
        lang: impl Into<String>,
    ) -> Option<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return None;
        }
        Some(Self {
            id: id.into(),
            timestamp,
            date: utc_date(timestamp)?,
            text,
            platform,
            lang: lang.into(),
        })
    }

    fn to_line(&self) -> String {
        serde_json::to_string(&PostOut {
            id: &self.id,
            timestamp: self.timestamp,
            text: &self.text,
            platform: self.platform,
            lang: &self.lang,
        })
        .expect("post serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    EmptyText,
    DuplicateId,
    MissingId,
    InvalidTimestamp,
    UnknownPlatform,
    Malformed,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::EmptyText => "empty text",
            RejectReason::DuplicateId => "duplicate id",
            RejectReason::MissingId => "missing id",
            RejectReason::InvalidTimestamp => "invalid timestamp",
            RejectReason::UnknownPlatform => "unknown platform",
            RejectReason::Malformed => "malformed record",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// 1-based line number in the source.
    pub line: usize,
    pub id: Option<String>,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RejectionReport {
    pub rejections: Vec<Rejection>,
}

impl RejectionReport {
    pub fn len(&self) -> usize {
        self.rejections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejections.is_empty()
    }

    pub fn count(&self, reason: RejectReason) -> usize {
        self.rejections.iter().filter(|r| r.reason == reason).count()
    }

    /// `line<TAB>id<TAB>reason` per rejection.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "line\tid\treason")?;
        for r in &self.rejections {
            writeln!(w, "{}\t{}\t{}", r.line, r.id.as_deref().unwrap_or("-"), r.reason)?;
        }
        Ok(())
    }
}

/// Posts in ingestion order with an id index.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    posts: Vec<Post>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a post unless its id is already present (first occurrence wins).
    pub fn insert(&mut self, post: Post) -> bool {
        if self.index.contains_key(&post.id) {
            return false;
        }
        self.index.insert(post.id.clone(), self.posts.len());
        self.posts.push(post);
        true
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn get(&self, id: &str) -> Option<&Post> {
        self.index.get(id).map(|&i| &self.posts[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Sub-corpus holding the given ids, in this corpus' order.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Corpus {
        let mut keep: Vec<usize> = ids.into_iter().filter_map(|id| self.index.get(id).copied()).collect();
        keep.sort_unstable();
        keep.dedup();
        let mut out = Corpus::new();
        for i in keep {
            out.insert(self.posts[i].clone());
        }
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{MAGIC}")?;
        for p in &self.posts {
            writeln!(w, "{}", p.to_line())?;
        }
        Ok(())
    }
}

/// Reads a post file. Per-record problems become rejections; only an
/// unreadable source or a missing version header is fatal.
pub fn ingest<R: BufRead>(reader: R) -> Result<(Corpus, RejectionReport)> {
    let mut corpus = Corpus::new();
    let mut report = RejectionReport::default();
    let mut saw_header = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if !saw_header {
            Header::parse("post file", &line)?;
            saw_header = true;
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let reject = |report: &mut RejectionReport, id: Option<String>, reason| {
            report.rejections.push(Rejection {
                line: lineno,
                id,
                reason,
            })
        };
        let rec: PostRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(_) => {
                reject(&mut report, None, RejectReason::Malformed);
                continue;
            }
        };
        let id = match rec.id.filter(|s| !s.trim().is_empty()) {
            Some(id) => id,
            None => {
                reject(&mut report, None, RejectReason::MissingId);
                continue;
            }
        };
        let text = match rec.text.filter(|t| !t.trim().is_empty()) {
            Some(t) => t,
            None => {
                reject(&mut report, Some(id), RejectReason::EmptyText);
                continue;
            }
        };
        let (timestamp, date) = match rec.timestamp.and_then(|ts| utc_date(ts).map(|d| (ts, d))) {
            Some(v) => v,
            None => {
                reject(&mut report, Some(id), RejectReason::InvalidTimestamp);
                continue;
            }
        };
        let platform = match rec.platform.as_deref() {
            None | Some("other") => Platform::Other,
            Some("twitter") => Platform::Twitter,
            Some("weibo") => Platform::Weibo,
            Some(_) => {
                reject(&mut report, Some(id), RejectReason::UnknownPlatform);
                continue;
            }
        };
        if corpus.contains(&id) {
            reject(&mut report, Some(id), RejectReason::DuplicateId);
            continue;
        }
        corpus.insert(Post {
            id,
            timestamp,
            date,
            text,
            platform,
            lang: rec.lang.unwrap_or_else(|| "und".to_string()),
        });
    }
    if !saw_header {
        return Err(Error::format("post file", 1, "empty file"));
    }
    Ok((corpus, report))
}

/// The posts published on one calendar day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailyPartition {
    pub date: NaiveDate,
    /// Sorted lexicographically.
    pub post_ids: Vec<String>,
}

impl DailyPartition {
    pub fn len(&self) -> usize {
        self.post_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.post_ids.is_empty()
    }
}

/// Groups posts by UTC day. Days without posts are not emitted.
pub fn partition_by_day(corpus: &Corpus) -> Vec<DailyPartition> {
    let mut days: BTreeMap<NaiveDate, Vec<String>> = BTreeMap::new();
    for p in corpus.posts() {
        days.entry(p.date).or_default().push(p.id.clone());
    }
    days.into_iter()
        .map(|(date, mut post_ids)| {
            post_ids.sort();
            DailyPartition { date, post_ids }
        })
        .collect()
}

/// `date<TAB>count<TAB>id,id,...` per partition.
pub fn write_partition_listing<W: Write>(parts: &[DailyPartition], w: &mut W) -> std::io::Result<()> {
    for p in parts {
        writeln!(w, "{}\t{}\t{}", p.date, p.len(), p.post_ids.join(","))?;
    }
    Ok(())
}

/// Independent seed for a named stochastic stage, so stages stay
/// reproducible regardless of the order they run in.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    crate::textfeat::fnv1a64(format!("{seed}/{stage}").as_bytes())
}

/// Draws `min(n, |items|)` distinct items uniformly without replacement.
///
/// The input is treated as a set: it is sorted and deduplicated first, so
/// the result depends only on the set contents, `n` and `seed`.
pub fn sample_uniform<T: Ord + Clone>(items: &[T], n: usize, seed: u64) -> Vec<T> {
    let mut pool: Vec<T> = items.to_vec();
    pool.sort();
    pool.dedup();
    let take = n.min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // partial Fisher-Yates
    for i in 0..take {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(take);
    pool
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, ts: i64, text: &str) -> String {
        format!(r#"{{"id":"{id}","timestamp":{ts},"text":"{text}","platform":"twitter","lang":"en"}}"#)
    }

    fn file(lines: &[String]) -> String {
        let mut s = String::from("#affectline-v1\n");
        for l in lines {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    const MAR1: i64 = 1_583_020_800; // 2020-03-01T00:00:00Z

    #[test]
    fn ingest_clean_input() {
        let f = file(&[line("a", MAR1, "x"), line("b", MAR1, "y"), line("c", MAR1, "z")]);
        let (c, rep) = ingest(f.as_bytes()).unwrap();
        assert_eq!(c.len(), 3);
        assert!(rep.is_empty());
    }

    #[test]
    fn ingest_rejects_missing_text() {
        let f = file(&[
            line("a", MAR1, "x"),
            r#"{"id":"b","timestamp":1583020800,"platform":"twitter","lang":"en"}"#.to_string(),
            line("c", MAR1, "z"),
        ]);
        let (c, rep) = ingest(f.as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(rep.len(), 1);
        assert_eq!(rep.rejections[0].reason.to_string(), "empty text");
        assert_eq!(rep.rejections[0].line, 3);
    }

    #[test]
    fn ingest_duplicate_keeps_first() {
        let f = file(&[line("a1", MAR1, "first"), line("a1", MAR1 + 5, "second")]);
        let (c, rep) = ingest(f.as_bytes()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.get("a1").unwrap().text, "first");
        assert_eq!(rep.count(RejectReason::DuplicateId), 1);
        assert_eq!(rep.rejections[0].reason.to_string(), "duplicate id");
    }

    #[test]
    fn ingest_skips_garbage_lines() {
        let f = file(&[
            "not json".into(),
            line("a", MAR1, "   "),
            r#"{"id":"q","timestamp":1583020800,"text":"t","platform":"myspace"}"#.into(),
            line("ok", MAR1, "fine"),
        ]);
        let (c, rep) = ingest(f.as_bytes()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(rep.count(RejectReason::Malformed), 1);
        assert_eq!(rep.count(RejectReason::EmptyText), 1);
        assert_eq!(rep.count(RejectReason::UnknownPlatform), 1);
    }

    #[test]
    fn ingest_requires_header() {
        let body = line("a", MAR1, "x");
        assert!(ingest(body.as_bytes()).is_err());
        assert!(ingest("".as_bytes()).is_err());
    }

    #[test]
    fn dates_are_utc() {
        // 2020-03-01T23:30:00-05:00 is already March 2 in UTC.
        let p = Post::new("x", MAR1 + 24 * 3600 + 4 * 3600 + 1800, "t", Platform::Other, "en").unwrap();
        assert_eq!(p.date, NaiveDate::from_ymd_opt(2020, 3, 2).unwrap());
    }

    #[test]
    fn partition_groups_and_skips_empty_days() {
        let day = 86_400;
        let f = file(&[
            line("p2", MAR1 + 10, "a"),
            line("p1", MAR1 + 20, "b"),
            line("p3", MAR1 + 2 * day, "c"),
        ]);
        let (c, _) = ingest(f.as_bytes()).unwrap();
        let parts = partition_by_day(&c);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].date, NaiveDate::from_ymd_opt(2020, 3, 1).unwrap());
        assert_eq!(parts[0].post_ids, vec!["p1", "p2"]);
        assert_eq!(parts[1].date, NaiveDate::from_ymd_opt(2020, 3, 3).unwrap());
        assert_eq!(parts[1].len(), 1);
        assert!(partition_by_day(&Corpus::new()).is_empty());
    }

    #[test]
    fn one_day_one_partition() {
        let lines: Vec<String> = (0..10).map(|i| line(&format!("id{i}"), MAR1 + i, "t")).collect();
        let (c, _) = ingest(file(&lines).as_bytes()).unwrap();
        let parts = partition_by_day(&c);
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].len(), 10);
    }

    #[test]
    fn sampling_edge_cases() {
        let ids: Vec<String> = (0..10).map(|i| format!("p{i}")).collect();
        assert!(sample_uniform(&ids, 0, 1).is_empty());
        let three = &ids[..3];
        let mut all = sample_uniform(three, 5, 1);
        all.sort();
        assert_eq!(all, three.to_vec());
        let a = sample_uniform(&ids, 2, 7);
        let b = sample_uniform(&ids, 2, 7);
        assert_eq!(a.len(), 2);
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        let mut rev = ids.clone();
        rev.reverse();
        assert_eq!(sample_uniform(&rev, 2, 7), a);
    }

    #[test]
    fn write_then_reingest_is_identical() {
        let f = file(&[line("b", MAR1, "héllo \\\"q\\\""), line("a", MAR1 + 86_400, "x")]);
        let (c, _) = ingest(f.as_bytes()).unwrap();
        let mut out = Vec::new();
        c.write_to(&mut out).unwrap();
        let (c2, rep) = ingest(out.as_slice()).unwrap();
        assert!(rep.is_empty());
        assert_eq!(c.posts(), c2.posts());
    }
}
