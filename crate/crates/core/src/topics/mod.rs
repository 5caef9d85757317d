//! Trigger mentions clustered into per-emotion subcategories.

pub mod lda;
pub mod mention;
pub mod report;
pub mod series;

pub use lda::{gibbs_fit, gibbs_fit_with, gibbs_resume, CountTables, DateLdaState, GibbsConfig, DEFAULT_ITERATIONS, DEFAULT_TOPICS};
pub use mention::{mention_from_tokens, mentions_from_spans, normalize_tokens, parse_mentions, write_mentions, TriggerMention};
pub use report::{topic_report, Curation, TopicReport, TopicStatus, TopicSummary, DEFAULT_TOP_M};
pub use series::{subcategory_intensity, CuratedTopics};
