//! Emotion-trigger span extraction with a linear-chain CRF over BIO tags.

mod crf;
mod features;
mod io;
pub mod lattice;
mod spans;

pub use crf::{CrfHyperParams, CrfModel, CrfTrainingReport, TrainingSequence};
pub use features::{CrfFeatureConfig, TaggingInput};
pub use io::{parse_annotations, write_annotations, SidecarFeatures, TriggerAnnotation};
pub use lattice::Tag;
pub use spans::{span_prf, spans_from_tags, tags_from_spans, PrfScores, TriggerSpan};

use crate::emoclass::EmotionLabel;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::textfeat::TokenSequence;

/// Training sequence for one (post, emotion) annotation.
pub fn training_sequence<T: Scalar>(
    features: &CrfFeatureConfig,
    tokens: &TokenSequence,
    emotion: EmotionLabel,
    spans: &[(usize, usize)],
    dense: Option<&[Vec<T>]>,
) -> Result<TrainingSequence<T>> {
    Ok(TrainingSequence {
        input: features.extract(tokens, Some(emotion), dense)?,
        tags: tags_from_spans(tokens.len(), spans)?,
    })
}

/// Decodes the trigger spans of one post for one emotion.
pub fn tag_post<T: Scalar>(
    model: &CrfModel<T>,
    post_id: &str,
    tokens: &TokenSequence,
    emotion: EmotionLabel,
    dense: Option<&[Vec<T>]>,
) -> Result<Vec<TriggerSpan>> {
    let input = model.features().extract(tokens, Some(emotion), dense)?;
    let tags = model.decode(&input)?;
    spans_from_tags(&tags)
        .into_iter()
        .map(|(s, e)| TriggerSpan::new(post_id, emotion, tokens, s, e))
        .collect()
}
