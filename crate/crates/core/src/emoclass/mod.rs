//! One-vs-rest emotion classification with a two-layer sigmoid head, the
//! binary relevance model used by retrieval, and the evaluation metrics.

mod label;
mod metrics;
mod mlp;
mod multilabel;

pub use label::{EmotionLabel, NUM_EMOTIONS};
pub use metrics::{binary_f1, evaluate, f1_from_counts, AccuracyKind, MultiLabelScores};
pub use mlp::{Example, MlpBinaryClassifier, MlpHyperParams};
pub use multilabel::{labels_from_probabilities, MultiLabelEmotionModel, MultiLabelExample, DEFAULT_THRESHOLD};
