use std::collections::{BTreeMap, BTreeSet};

use crate::emoclass::MlpBinaryClassifier;
use crate::error::{Error, Result};
use crate::retrieval::keywords::KeywordList;
use crate::scalar::Scalar;
use crate::textfeat::{hash_ngram, sort_keywords, FeatureConfig, KeywordScore, TokenSequence};

pub const STOPWORD_DF_RANK: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionConfig {
    pub top_k: usize,
    /// Replace the previous list instead of merging into it.
    pub replace: bool,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            top_k: crate::textfeat::DEFAULT_TOP_K,
            replace: false,
        }
    }
}

/// Mean `|∂p/∂h_w|` over the positive posts containing each candidate token
/// `w`, evaluated at each post's own feature vector. Excluded terms and
/// non-word tokens are not candidates.
pub fn token_saliency<T: Scalar>(
    model: &MlpBinaryClassifier<T>,
    features: &FeatureConfig,
    positives: &[TokenSequence],
    excluded: &BTreeSet<String>,
) -> Result<BTreeMap<String, f64>> {
    if !model.is_trained() {
        return Err(Error::Untrained);
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for post in positives {
        let h = features.featurize::<T>(post);
        let terms: BTreeSet<&str> = post
            .tokens
            .iter()
            .filter(|t| t.is_wordlike() && !excluded.contains(&t.surface))
            .map(|t| t.surface.as_str())
            .collect();
        let terms: Vec<&str> = terms.into_iter().collect();
        let idx: Vec<u32> = terms.iter().map(|t| hash_ngram(t, features.dim)).collect();
        let grads = model.input_gradient(&h, &idx)?;
        for (t, g) in terms.into_iter().zip(grads) {
            let e = sums.entry(t.to_string()).or_default();
            e.0 += g.abs().as_f64();
            e.1 += 1;
        }
    }
    Ok(sums.into_iter().map(|(t, (s, n))| (t, s / n as f64)).collect())
}

/// Next round's keyword list: the `top_k` most salient tokens, merged into
/// `previous` unless `cfg.replace` is set.
pub fn expand_keywords<T: Scalar>(
    model: &MlpBinaryClassifier<T>,
    features: &FeatureConfig,
    positives: &[TokenSequence],
    excluded: &BTreeSet<String>,
    previous: &KeywordList,
    cfg: &ExpansionConfig,
) -> Result<KeywordList> {
    let saliency = token_saliency(model, features, positives, excluded)?;
    let mut ranked: Vec<KeywordScore> = saliency
        .into_iter()
        .map(|(term, score)| KeywordScore { term, score })
        .collect();
    sort_keywords(&mut ranked);
    ranked.truncate(cfg.top_k);
    let fresh = KeywordList { round: previous.round + 1, entries: ranked };
    Ok(if cfg.replace { fresh } else { previous.merged(&fresh, previous.round + 1) })
}
