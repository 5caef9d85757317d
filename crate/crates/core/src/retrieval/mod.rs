//! Keyword bootstrapping: harvest, label, train, expand, repeat.

pub mod keywords;
pub mod round;
pub mod saliency;
pub mod split;

pub use keywords::{frequent_terms, harvest, post_matches, KeywordList};
pub use round::{run_round, BootstrapConfig, BootstrapRound, RoundOutcome, RoundPhase, DEFAULT_ROUNDS, DEFAULT_SAMPLE_SIZE};
pub use saliency::{expand_keywords, token_saliency, ExpansionConfig, STOPWORD_DF_RANK};
pub use split::{make_split, Split, SplitPart, MIN_SPLIT};
