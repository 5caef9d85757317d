use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use affectline_core::corpus::{Corpus, LabelLog, LabelPayload, LabelRecord, LabelState, SpanAnnotation, Task};
use affectline_core::emoclass::EmotionLabel;
use affectline_core::retrieval::{BootstrapConfig, BootstrapRound, RoundPhase, DEFAULT_ROUNDS};
use affectline_core::rundir::{advance_bootstrap, post_tokens, read_text, write_atomic, Advance, RunDir};
use affectline_core::topics::{topic_report, Curation, DateLdaState, TopicStatus, DEFAULT_TOP_M};
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::clock::Clock;
use crate::leases::{LeaseTable, Lookup};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_LEASE_SECS: i64 = 15 * 60;
pub const MAX_BATCH: usize = 500;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bootstrap: BootstrapConfig,
    pub max_rounds: u32,
    pub lease_secs: i64,
    /// Static bearer token to annotator id.
    pub tokens: BTreeMap<String, String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bootstrap: BootstrapConfig::default(),
            max_rounds: DEFAULT_ROUNDS as u32,
            lease_secs: DEFAULT_LEASE_SECS,
            tokens: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("missing or unknown annotator token")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Gone(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Internal(#[from] affectline_core::Error),
}

impl ApiError {
    pub fn status(&self) -> u16 {
        match self {
            ApiError::Unauthorized => 401,
            ApiError::Forbidden(_) => 403,
            ApiError::NotFound(_) => 404,
            ApiError::Conflict(_) => 409,
            ApiError::Gone(_) => 410,
            ApiError::Invalid(_) => 422,
            ApiError::Internal(_) => 500,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Unauthorized => "unauthorized",
            ApiError::Forbidden(_) => "forbidden",
            ApiError::NotFound(_) => "not-found",
            ApiError::Conflict(_) => "conflict",
            ApiError::Gone(_) => "lease-stale",
            ApiError::Invalid(_) => "invalid-payload",
            ApiError::Internal(_) => "internal",
        }
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, Deserialize)]
struct Submission {
    labels: Vec<SubmittedLabel>,
}

#[derive(Debug, Deserialize)]
struct SubmittedLabel {
    post_id: String,
    payload: Value,
}

#[derive(Debug, Deserialize)]
struct SubmittedSpan {
    emotion: String,
    start: usize,
    end: usize,
}

/// Shared state behind the HTTP routes. Lock order is rounds, then the
/// label log, then the lease table.
pub struct Service {
    dir: RunDir,
    cfg: ServiceConfig,
    clock: Arc<dyn Clock>,
    corpus: Corpus,
    rounds: RwLock<Vec<BootstrapRound>>,
    log: Mutex<LabelLog>,
    leases: Mutex<LeaseTable>,
    advancing: Mutex<()>,
    curating: Mutex<()>,
    boot: String,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn relevance(labels: &LabelState, id: &str) -> Option<bool> {
    match labels.latest(id, Task::Relevance, None).map(|r| &r.payload) {
        Some(LabelPayload::Relevance(b)) => Some(*b),
        _ => None,
    }
}

fn emotions(labels: &LabelState, id: &str) -> Option<BTreeSet<EmotionLabel>> {
    match labels.latest(id, Task::Emotion, None).map(|r| &r.payload) {
        Some(LabelPayload::Emotion(s)) => Some(s.clone()),
        _ => None,
    }
}

fn needs_label(labels: &LabelState, task: Task, id: &str) -> bool {
    match task {
        Task::Relevance => relevance(labels, id).is_none(),
        Task::Emotion => relevance(labels, id) == Some(true) && labels.latest(id, Task::Emotion, None).is_none(),
        Task::Trigger => {
            emotions(labels, id).is_some_and(|s| !s.is_empty()) && labels.latest(id, Task::Trigger, None).is_none()
        }
    }
}

pub fn default_batch_size(task: Task) -> usize {
    match task {
        Task::Relevance | Task::Emotion => 50,
        Task::Trigger => 20,
    }
}

fn parse_emotion(id: &str) -> ApiResult<EmotionLabel> {
    EmotionLabel::from_id(id).ok_or_else(|| ApiError::Invalid(format!("unknown emotion id {id:?}")))
}

impl Service {
    pub fn open(dir: RunDir, cfg: ServiceConfig, clock: Arc<dyn Clock>) -> affectline_core::Result<Self> {
        let corpus = dir.load_corpus()?;
        let log = LabelLog::open(dir.labels())?;
        let rounds = dir.load_rounds()?;
        let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
        let boot = format!("b{:x}{:x}", nanos, std::process::id());
        tracing::info!(posts = corpus.len(), labels = log.state().len(), rounds = rounds.len(), "service opened");
        Ok(Self {
            dir,
            cfg,
            clock,
            corpus,
            rounds: RwLock::new(rounds),
            log: Mutex::new(log),
            leases: Mutex::new(LeaseTable::default()),
            advancing: Mutex::new(()),
            curating: Mutex::new(()),
            boot,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn annotator(&self, token: Option<&str>) -> ApiResult<String> {
        token
            .and_then(|t| self.cfg.tokens.get(t))
            .cloned()
            .ok_or(ApiError::Unauthorized)
    }

    pub fn labels(&self) -> LabelState {
        lock(&self.log).state().clone()
    }

    pub fn rounds(&self) -> Value {
        let rounds = self.rounds.read().unwrap_or_else(|e| e.into_inner());
        let log = lock(&self.log);
        let labels = log.state();
        let list: Vec<Value> = rounds
            .iter()
            .map(|r| {
                let pending = r.pending(labels).len();
                json!({
                    "round": r.round,
                    "phase": r.phase.to_string(),
                    "keywords": r.keywords.terms().collect::<Vec<_>>(),
                    "harvested": r.harvested,
                    "sample": r.sample.len(),
                    "labeled": r.sample.len() - pending,
                    "pending": pending,
                    "test_f1": r.test_f1,
                    "model": r.model_id,
                })
            })
            .collect();
        let open = rounds.iter().find(|r| r.phase == RoundPhase::AwaitingLabels).map(|r| r.round);
        json!({ "max_rounds": self.cfg.max_rounds, "open_round": open, "rounds": list })
    }

    /// Closes the open round if fully labeled and opens the next one.
    pub fn advance(&self) -> ApiResult<Value> {
        let _guard = lock(&self.advancing);
        let labels = self.labels();
        let mut events = Vec::new();
        loop {
            let step = advance_bootstrap(&self.dir, &self.corpus, &labels, &self.cfg.bootstrap, self.cfg.max_rounds)?;
            let reloaded = self.dir.load_rounds()?;
            *self.rounds.write().unwrap_or_else(|e| e.into_inner()) = reloaded;
            match step {
                Advance::Awaiting { round, pending } if events.is_empty() => {
                    return Err(ApiError::Conflict(format!("round {round} is awaiting {pending} labels")));
                }
                Advance::Closed { round, test_f1 } => {
                    tracing::info!(round, test_f1, "round closed");
                    events.push(json!({ "event": "closed", "round": round, "test_f1": test_f1 }));
                }
                Advance::Opened { round, harvested, sample } => {
                    tracing::info!(round, harvested, sample, "round opened");
                    events.push(json!({ "event": "opened", "round": round, "harvested": harvested, "sample": sample }));
                    break;
                }
                Advance::Complete { rounds } => {
                    events.push(json!({ "event": "complete", "rounds": rounds }));
                    break;
                }
                Advance::Awaiting { .. } => break,
            }
        }
        let mut out = self.rounds();
        out["events"] = Value::Array(events);
        Ok(out)
    }

    pub fn next_batch(&self, annotator: &str, task: Task, size: usize) -> ApiResult<Value> {
        if size == 0 || size > MAX_BATCH {
            return Err(ApiError::Invalid(format!("batch size must be in 1..={MAX_BATCH}")));
        }
        let rounds = self.rounds.read().unwrap_or_else(|e| e.into_inner());
        let (round, pool): (u32, Vec<&String>) = match task {
            Task::Relevance => {
                let open = rounds
                    .iter()
                    .find(|r| r.phase == RoundPhase::AwaitingLabels)
                    .ok_or_else(|| ApiError::Conflict("no open round".into()))?;
                (open.round, open.sample.iter().collect())
            }
            Task::Emotion | Task::Trigger => {
                let last = rounds.last().ok_or_else(|| ApiError::Conflict("no bootstrap round yet".into()))?;
                (last.round, rounds.iter().flat_map(|r| &r.sample).collect())
            }
        };
        let log = lock(&self.log);
        let labels = log.state();
        let now = self.clock.now();
        let mut leases = lock(&self.leases);
        leases.purge_expired(now);
        let taken = leases.leased(task);
        let chosen: Vec<String> = pool
            .into_iter()
            .filter(|id| !taken.contains(id.as_str()) && needs_label(labels, task, id))
            .take(size)
            .cloned()
            .collect();
        drop(taken);
        if chosen.is_empty() {
            return Ok(json!({ "batch_id": null, "task": task.id(), "round": round, "posts": [] }));
        }
        let batch = leases.issue(&self.boot, task, round, chosen, annotator, now + self.cfg.lease_secs);
        tracing::debug!(batch = %batch.id, annotator, size = batch.post_ids.len(), "lease issued");
        let posts: Vec<Value> = batch
            .post_ids
            .iter()
            .map(|id| {
                let post = self.corpus.get(id);
                json!({
                    "id": id,
                    "date": post.map(|p| p.date.to_string()),
                    "text": post.map(|p| p.text.as_str()),
                    "tokens": post_tokens(&self.corpus, id).unwrap_or_default(),
                    "emotions": emotions(labels, id).map(|s| s.iter().map(|e| e.id()).collect::<Vec<_>>()),
                })
            })
            .collect();
        Ok(json!({
            "batch_id": batch.id,
            "task": task.id(),
            "round": round,
            "annotator": annotator,
            "lease_expires_at": batch.expires_at,
            "posts": posts,
        }))
    }

    fn payload(&self, task: Task, value: Value) -> ApiResult<LabelPayload> {
        let bad = |e: serde_json::Error| ApiError::Invalid(format!("malformed {} payload: {e}", task.id()));
        Ok(match task {
            Task::Relevance => LabelPayload::Relevance(serde_json::from_value(value).map_err(bad)?),
            Task::Emotion => {
                let ids: Vec<String> = serde_json::from_value(value).map_err(bad)?;
                LabelPayload::Emotion(ids.iter().map(|s| parse_emotion(s)).collect::<ApiResult<_>>()?)
            }
            Task::Trigger => {
                let spans: Vec<SubmittedSpan> = serde_json::from_value(value).map_err(bad)?;
                LabelPayload::Trigger(
                    spans
                        .into_iter()
                        .map(|s| {
                            Ok(SpanAnnotation {
                                emotion: parse_emotion(&s.emotion)?,
                                start: s.start,
                                end: s.end,
                            })
                        })
                        .collect::<ApiResult<_>>()?,
                )
            }
        })
    }

    /// Validates the whole submission, appends every record to the label
    /// log and only then acknowledges. Nothing is written when any record
    /// is invalid.
    pub fn submit(&self, annotator: &str, batch_id: &str, body: &[u8]) -> ApiResult<Value> {
        let mut log = lock(&self.log);
        let now = self.clock.now();
        let mut leases = lock(&self.leases);
        let batch = match leases.lookup(batch_id, now) {
            Lookup::Live(b) => b.clone(),
            Lookup::Stale => return Err(ApiError::Gone(format!("lease on batch {batch_id} is no longer valid"))),
            Lookup::Unknown if self.issued_by_earlier_process(batch_id) => {
                return Err(ApiError::Gone(format!("batch {batch_id} predates a service restart")))
            }
            Lookup::Unknown => return Err(ApiError::NotFound(format!("unknown batch {batch_id}"))),
        };
        if batch.owner != annotator {
            return Err(ApiError::Forbidden(format!("batch {batch_id} is leased to another annotator")));
        }
        let sub: Submission =
            serde_json::from_slice(body).map_err(|e| ApiError::Invalid(format!("malformed submission: {e}")))?;
        let members: HashSet<&str> = batch.post_ids.iter().map(String::as_str).collect();
        let mut seen = HashSet::new();
        let mut records = Vec::with_capacity(sub.labels.len());
        for l in sub.labels {
            if !members.contains(l.post_id.as_str()) {
                return Err(ApiError::Invalid(format!("post {} is not in batch {batch_id}", l.post_id)));
            }
            if !seen.insert(l.post_id.clone()) {
                return Err(ApiError::Invalid(format!("post {} labeled twice", l.post_id)));
            }
            let record = LabelRecord {
                payload: self.payload(batch.task, l.payload)?,
                post_id: l.post_id,
                annotator_id: annotator.to_string(),
                round: batch.round,
                created_at: now,
            };
            let len = post_tokens(&self.corpus, &record.post_id).map(|t| t.len());
            record.validate(len).map_err(|e| ApiError::Invalid(e.to_string()))?;
            records.push(record);
        }
        let accepted = records.len();
        for r in records {
            log.append(r)?;
        }
        leases.complete(batch_id);
        tracing::info!(batch = batch_id, annotator, accepted, "labels appended");
        Ok(json!({ "batch_id": batch_id, "task": batch.task.id(), "accepted": accepted, "total_records": log.state().len() }))
    }

    fn issued_by_earlier_process(&self, batch_id: &str) -> bool {
        batch_id
            .split_once('-')
            .is_some_and(|(p, n)| p != self.boot && p.starts_with('b') && n.parse::<u64>().is_ok())
    }

    fn topic_state(&self, emotion: &str) -> ApiResult<(EmotionLabel, DateLdaState<f64>)> {
        let e = EmotionLabel::from_id(emotion).ok_or_else(|| ApiError::NotFound(format!("unknown emotion {emotion:?}")))?;
        let path = self.dir.topic_state(e);
        if !path.exists() {
            return Err(ApiError::NotFound(format!("no fitted topics for {emotion}")));
        }
        Ok((e, DateLdaState::parse_checkpoint(&read_text(&path)?)?))
    }

    fn curation(&self, e: EmotionLabel) -> ApiResult<Curation> {
        let path = self.dir.curation(e);
        if !path.exists() {
            return Ok(Curation::default());
        }
        Ok(Curation::parse(&read_text(&path)?)?)
    }

    pub fn list_topics(&self, emotion: &str) -> ApiResult<Value> {
        let (e, state) = self.topic_state(emotion)?;
        let report = topic_report(&state, DEFAULT_TOP_M, &self.curation(e)?);
        let topics: Vec<Value> = report
            .topics
            .iter()
            .map(|t| {
                json!({
                    "topic": t.topic,
                    "status": t.status.to_string(),
                    "mentions": t.mentions,
                    "top_words": t.top_words.iter().map(|(w, p)| json!([w, p])).collect::<Vec<_>>(),
                    "top_dates": t.top_dates.iter().map(|(d, p)| json!([d.to_string(), p])).collect::<Vec<_>>(),
                })
            })
            .collect();
        Ok(json!({ "emotion": e.id(), "k": state.topics(), "topics": topics }))
    }

    pub fn set_topic_status(&self, emotion: &str, k: &str, body: &[u8]) -> ApiResult<Value> {
        #[derive(Deserialize)]
        struct Body {
            status: String,
        }
        let (e, state) = self.topic_state(emotion)?;
        let k: usize = k
            .parse()
            .ok()
            .filter(|&k| k < state.topics())
            .ok_or_else(|| ApiError::NotFound(format!("unknown topic {k} for {emotion}")))?;
        let b: Body = serde_json::from_slice(body).map_err(|err| ApiError::Invalid(format!("malformed body: {err}")))?;
        let status = TopicStatus::from_id(&b.status)
            .ok_or_else(|| ApiError::Invalid(format!("status must be kept or discarded, got {:?}", b.status)))?;
        let _guard = lock(&self.curating);
        let mut curation = self.curation(e)?;
        curation.set(k, status);
        let mut buf = Vec::new();
        curation.write_to(&mut buf).map_err(affectline_core::Error::from)?;
        write_atomic(&self.dir.curation(e), &buf)?;
        tracing::info!(emotion = e.id(), topic = k, %status, "topic curated");
        Ok(json!({ "emotion": e.id(), "topic": k, "status": status.to_string() }))
    }
}
