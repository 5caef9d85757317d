//! Append-only log of human annotations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::emoclass::EmotionLabel;
use crate::error::{Error, Result};
use crate::format::{Header, MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Relevance,
    Emotion,
    Trigger,
}

impl Task {
    pub fn id(self) -> &'static str {
        match self {
            Task::Relevance => "relevance",
            Task::Emotion => "emotion",
            Task::Trigger => "trigger",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        match s {
            "relevance" => Some(Task::Relevance),
            "emotion" => Some(Task::Emotion),
            "trigger" => Some(Task::Trigger),
            _ => None,
        }
    }
}

/// A trigger span over server-side token indices, half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub emotion: EmotionLabel,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", content = "payload", rename_all = "lowercase")]
pub enum LabelPayload {
    Relevance(bool),
    /// Empty set means neutral.
    Emotion(BTreeSet<EmotionLabel>),
    Trigger(Vec<SpanAnnotation>),
}

impl LabelPayload {
    pub fn task(&self) -> Task {
        match self {
            LabelPayload::Relevance(_) => Task::Relevance,
            LabelPayload::Emotion(_) => Task::Emotion,
            LabelPayload::Trigger(_) => Task::Trigger,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub post_id: String,
    #[serde(flatten)]
    pub payload: LabelPayload,
    pub annotator_id: String,
    pub round: u32,
    pub created_at: i64,
}

impl LabelRecord {
    pub fn task(&self) -> Task {
        self.payload.task()
    }

    /// Checks the payload invariants. `token_count` bounds trigger spans
    /// when the post's tokenization is known.
    pub fn validate(&self, token_count: Option<usize>) -> Result<()> {
        if self.post_id.is_empty() {
            return Err(Error::InvalidLabel("empty post id".into()));
        }
        if self.annotator_id.is_empty() {
            return Err(Error::InvalidLabel("empty annotator id".into()));
        }
        if let LabelPayload::Trigger(spans) = &self.payload {
            let mut sorted = spans.clone();
            sorted.sort_by_key(|s| (s.start, s.end));
            let mut seen = BTreeSet::new();
            for (i, s) in sorted.iter().enumerate() {
                if s.start >= s.end {
                    return Err(Error::InvalidLabel(format!("empty span ({}, {})", s.start, s.end)));
                }
                if let Some(n) = token_count {
                    if s.end > n {
                        return Err(Error::InvalidLabel(format!(
                            "span ({}, {}) exceeds {n} tokens",
                            s.start, s.end
                        )));
                    }
                }
                if i > 0 && sorted[i - 1].end > s.start {
                    return Err(Error::InvalidLabel("overlapping spans".into()));
                }
                if !seen.insert(s.emotion) {
                    return Err(Error::InvalidLabel(format!(
                        "more than one trigger for {}",
                        s.emotion
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Active label state: the latest record per (post, task, annotator).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelState {
    active: BTreeMap<(String, Task, String), (u64, LabelRecord)>,
    appended: u64,
}

impl LabelState {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a LabelRecord>) -> Self {
        let mut s = Self::default();
        for r in records {
            s.apply(r.clone());
        }
        s
    }

    pub fn apply(&mut self, record: LabelRecord) {
        let key = (record.post_id.clone(), record.task(), record.annotator_id.clone());
        let seq = self.appended;
        self.appended += 1;
        self.active.insert(key, (seq, record));
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &LabelRecord> {
        self.active.values().map(|(_, r)| r)
    }

    pub fn get(&self, post_id: &str, task: Task, annotator: &str) -> Option<&LabelRecord> {
        self.active
            .get(&(post_id.to_string(), task, annotator.to_string()))
            .map(|(_, r)| r)
    }

    /// The most recently appended active record for a post and task across
    /// annotators, optionally restricted to one bootstrap round.
    pub fn latest(&self, post_id: &str, task: Task, round: Option<u32>) -> Option<&LabelRecord> {
        self.active
            .range((post_id.to_string(), task, String::new())..)
            .take_while(|((p, t, _), _)| p == post_id && *t == task)
            .filter(|(_, (_, r))| round.is_none_or(|rd| r.round == rd))
            .max_by_key(|(_, (seq, _))| *seq)
            .map(|(_, (_, r))| r)
    }

    /// Latest record per post for one task, keyed by post id.
    pub fn resolved(&self, task: Task, round: Option<u32>) -> BTreeMap<String, &LabelRecord> {
        let mut best: BTreeMap<String, (u64, &LabelRecord)> = BTreeMap::new();
        for ((post, t, _), (seq, r)) in &self.active {
            if *t != task || round.is_some_and(|rd| r.round != rd) {
                continue;
            }
            match best.get(post) {
                Some((s, _)) if *s > *seq => {}
                _ => {
                    best.insert(post.clone(), (*seq, r));
                }
            }
        }
        best.into_iter().map(|(k, (_, r))| (k, r)).collect()
    }
}

fn parse_records(text: &str) -> Result<Vec<LabelRecord>> {
    let mut lines = text.split_inclusive('\n').enumerate().peekable();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, first)) => {
            Header::parse("label log", first)?;
        }
    }
    let mut out = Vec::new();
    while let Some((i, raw)) = lines.next() {
        let complete = raw.ends_with('\n');
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LabelRecord>(line) {
            Ok(r) => out.push(r),
            // A torn final line is a write interrupted before its ack.
            Err(_) if !complete && lines.peek().is_none() => break,
            Err(e) => return Err(Error::format("label log", i + 1, e.to_string())),
        }
    }
    Ok(out)
}

/// Reads all complete records of a label log.
pub fn read_label_log(path: &Path) -> Result<Vec<LabelRecord>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    parse_records(&text)
}

/// Single-writer handle on a label log file.
#[derive(Debug)]
pub struct LabelLog {
    path: PathBuf,
    file: File,
    state: LabelState,
}

impl LabelLog {
    /// Opens or creates the log, replaying existing records. A torn final
    /// line left by a crash is truncated away.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(&path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        let records = if text.is_empty() {
            writeln!(file, "{MAGIC}")?;
            file.sync_data()?;
            Vec::new()
        } else {
            let records = parse_records(&text)?;
            let good = text.rfind('\n').map_or(0, |i| i + 1);
            if good < text.len() {
                file.set_len(good as u64)?;
            }
            records
        };
        file.seek(SeekFrom::End(0))?;
        Ok(Self {
            path,
            file,
            state: LabelState::from_records(&records),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn state(&self) -> &LabelState {
        &self.state
    }

    /// Durably appends one record, then folds it into the in-memory state.
    pub fn append(&mut self, record: LabelRecord) -> Result<()> {
        let mut line = serde_json::to_string(&record).expect("label record serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.state.apply(record);
        Ok(())
    }
}
