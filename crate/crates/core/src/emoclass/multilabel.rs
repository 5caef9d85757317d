use std::collections::BTreeSet;
use std::io::Write;

use crate::emoclass::label::{EmotionLabel, NUM_EMOTIONS};
use crate::emoclass::mlp::{check_scalar, Example, MlpBinaryClassifier, MlpHyperParams};
use crate::error::{Error, Result};
use crate::format::{split_header, Header};
use crate::scalar::Scalar;
use crate::textfeat::{FeatureConfig, FeatureVector};

/// Default decision threshold (inclusive).
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Training example for the six heads: features plus the gold label set
/// (empty = neutral).
pub type MultiLabelExample<T> = (FeatureVector<T>, BTreeSet<EmotionLabel>);

/// Six independent one-vs-rest heads over a shared featurization.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelEmotionModel<T> {
    features: FeatureConfig,
    threshold: T,
    heads: Vec<MlpBinaryClassifier<T>>,
}

/// `{y : p(y) ≥ threshold}`; the empty set means neutral.
pub fn labels_from_probabilities<T: Scalar>(probs: &[T; NUM_EMOTIONS], threshold: T) -> BTreeSet<EmotionLabel> {
    EmotionLabel::ALL
        .iter()
        .filter(|e| probs[e.index()] >= threshold)
        .copied()
        .collect()
}

impl<T: Scalar> MultiLabelEmotionModel<T> {
    pub fn new(features: FeatureConfig, threshold: T, heads: Vec<MlpBinaryClassifier<T>>) -> Result<Self> {
        if heads.len() != NUM_EMOTIONS {
            return Err(Error::Config(format!("expected {NUM_EMOTIONS} heads, got {}", heads.len())));
        }
        if let Some(h) = heads.iter().find(|h| h.dim() != features.dim) {
            return Err(Error::DimensionMismatch {
                expected: features.dim,
                got: h.dim(),
            });
        }
        Ok(Self {
            features,
            threshold,
            heads,
        })
    }

    /// All heads zero: every probability is 0.5, so every label fires at
    /// the default threshold. Useful only as a degenerate reference.
    pub fn zeros(features: FeatureConfig, hidden: usize) -> Result<Self> {
        let heads = (0..NUM_EMOTIONS)
            .map(|_| MlpBinaryClassifier::zeros(features.dim, hidden))
            .collect::<Result<Vec<_>>>()?;
        Self::new(features, T::from_f64_lossy(DEFAULT_THRESHOLD), heads)
    }

    /// Trains the six heads concurrently. Head `k` uses seed `hyper.seed + k`.
    pub fn train(
        features: FeatureConfig,
        train: &[MultiLabelExample<T>],
        dev: &[MultiLabelExample<T>],
        hyper: &MlpHyperParams,
    ) -> Result<Self> {
        let split = |data: &[MultiLabelExample<T>], e: EmotionLabel| -> Vec<Example<T>> {
            data.iter().map(|(h, ys)| (h.clone(), ys.contains(&e))).collect()
        };
        let results: Vec<Result<MlpBinaryClassifier<T>>> = std::thread::scope(|s| {
            let handles: Vec<_> = EmotionLabel::ALL
                .iter()
                .map(|&e| {
                    let tr = split(train, e);
                    let dv = split(dev, e);
                    let hp = MlpHyperParams {
                        seed: hyper.seed.wrapping_add(e.index() as u64),
                        ..hyper.clone()
                    };
                    s.spawn(move || {
                        MlpBinaryClassifier::train(&tr, &dv, &hp).map_err(|err| match err {
                            Error::DegenerateLabels => Error::DegenerateHead(e),
                            other => other,
                        })
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("head training panicked")).collect()
        });
        let heads = results.into_iter().collect::<Result<Vec<_>>>()?;
        Self::new(features, T::from_f64_lossy(DEFAULT_THRESHOLD), heads)
    }

    pub fn features(&self) -> &FeatureConfig {
        &self.features
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: T) {
        self.threshold = threshold;
    }

    pub fn head(&self, e: EmotionLabel) -> &MlpBinaryClassifier<T> {
        &self.heads[e.index()]
    }

    pub fn probabilities(&self, h: &FeatureVector<T>) -> Result<[T; NUM_EMOTIONS]> {
        let mut out = [T::zero(); NUM_EMOTIONS];
        for (o, head) in out.iter_mut().zip(&self.heads) {
            *o = head.predict_proba(h)?;
        }
        Ok(out)
    }

    pub fn probabilities_for_text(&self, text: &str) -> [T; NUM_EMOTIONS] {
        self.probabilities(&self.features.featurize_text(text))
            .expect("featurization matches the model dimension")
    }

    pub fn predict_labels(&self, h: &FeatureVector<T>) -> Result<BTreeSet<EmotionLabel>> {
        Ok(labels_from_probabilities(&self.probabilities(h)?, self.threshold))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        Header::new()
            .with("kind", "emotion-model")
            .with("scalar", T::NAME)
            .with("max_n", self.features.max_n)
            .with("dim", self.features.dim)
            .with("threshold", self.threshold)
            .write_to(w)?;
        for (e, head) in EmotionLabel::ALL.iter().zip(&self.heads) {
            writeln!(w, "head {}", e.id())?;
            head.write_body(w)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "emotion model";
        let (header, body) = split_header(WHAT, text)?;
        header.expect_kind(WHAT, "emotion-model")?;
        check_scalar::<T>(&header)?;
        let features = FeatureConfig {
            max_n: header.require(WHAT, "max_n")?,
            dim: header.require(WHAT, "dim")?,
        };
        let threshold: T = header.require(WHAT, "threshold")?;
        let mut sections: Vec<(EmotionLabel, Vec<(usize, &str)>)> = Vec::new();
        for (n, line) in body {
            if let Some(id) = line.strip_prefix("head ") {
                let e = EmotionLabel::from_id(id)
                    .ok_or_else(|| Error::format(WHAT, n, format!("unknown head `{id}`")))?;
                sections.push((e, Vec::new()));
            } else {
                sections
                    .last_mut()
                    .ok_or_else(|| Error::format(WHAT, n, "content before first head"))?
                    .1
                    .push((n, line));
            }
        }
        let order: Vec<EmotionLabel> = sections.iter().map(|(e, _)| *e).collect();
        if order != EmotionLabel::ALL {
            return Err(Error::format(WHAT, 0, "heads missing or out of order"));
        }
        let heads = sections
            .into_iter()
            .map(|(_, lines)| MlpBinaryClassifier::parse_body(lines))
            .collect::<Result<Vec<_>>>()?;
        Self::new(features, threshold, heads)
    }
}
