//! Emotion analytics over dated social-media posts: keyword bootstrapping,
//! multi-label emotion classification, trigger-span tagging, date-aware
//! topic clustering of triggers and daily intensity series.
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases.

pub mod corpus;
pub mod emoclass;
pub mod error;
pub mod format;
pub mod retrieval;
pub mod rundir;
pub mod scalar;
pub mod synth;
pub mod textfeat;
pub mod topics;
pub mod trends;
pub mod trigger;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mlp = emoclass::MlpBinaryClassifier<f64>;
pub type EmotionModel = emoclass::MultiLabelEmotionModel<f64>;
pub type Crf = trigger::CrfModel<f64>;
pub type DateLda = topics::DateLdaState<f64>;
pub type Series = trends::IntensitySeries<f64>;
pub type Features = textfeat::FeatureVector<f64>;

pub type MlpF32 = emoclass::MlpBinaryClassifier<f32>;
pub type EmotionModelF32 = emoclass::MultiLabelEmotionModel<f32>;
pub type CrfF32 = trigger::CrfModel<f32>;
pub type DateLdaF32 = topics::DateLdaState<f32>;
pub type SeriesF32 = trends::IntensitySeries<f32>;
