use crate::emoclass::EmotionLabel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::textfeat::{hash_ngram, TokenSequence, DEFAULT_DIM, URL_TOKEN};

/// Which per-token features the tagger sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrfFeatureConfig {
    /// Size of the hashed lexical feature space.
    pub dim: usize,
    /// Width of externally supplied dense per-token vectors; 0 disables them.
    pub dense_width: usize,
    /// Add the emotion being tagged as a categorical feature and in
    /// conjunction with the token.
    pub emotion_features: bool,
}

impl Default for CrfFeatureConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            dense_width: 0,
            emotion_features: true,
        }
    }
}

/// Feature view of one token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggingInput<T> {
    /// Active hashed feature indices per token, sorted and unique.
    pub sparse: Vec<Vec<u32>>,
    /// Dense vectors per token; empty when `dense_width == 0`.
    pub dense: Vec<Vec<T>>,
}

impl<T> TaggingInput<T> {
    pub fn len(&self) -> usize {
        self.sparse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sparse.is_empty()
    }
}

fn token_kind(s: &str) -> &'static str {
    if s == URL_TOKEN {
        "url"
    } else if s.starts_with('#') && s.len() > 1 {
        "hashtag"
    } else if s.starts_with('@') && s.len() > 1 {
        "mention"
    } else if s.chars().any(char::is_alphanumeric) {
        "word"
    } else {
        "punct"
    }
}

fn prefix(s: &str, n: usize) -> &str {
    s.char_indices().nth(n).map_or(s, |(i, _)| &s[..i])
}

fn suffix(s: &str, n: usize) -> &str {
    let count = s.chars().count();
    if count <= n {
        s
    } else {
        let (i, _) = s.char_indices().nth(count - n).expect("in range");
        &s[i..]
    }
}

impl CrfFeatureConfig {
    /// Builds the feature view. Missing dense vectors degrade to zeros.
    pub fn extract<T: Scalar>(
        &self,
        tokens: &TokenSequence,
        emotion: Option<EmotionLabel>,
        dense: Option<&[Vec<T>]>,
    ) -> Result<TaggingInput<T>> {
        let surf = tokens.surface_vec();
        let n = surf.len();
        let emo = emotion.filter(|_| self.emotion_features).map(EmotionLabel::id);
        let sparse = (0..n)
            .map(|t| {
                let s = surf[t];
                let prev = if t == 0 { "<s>" } else { surf[t - 1] };
                let next = if t + 1 == n { "</s>" } else { surf[t + 1] };
                let mut names = vec![
                    "bias".to_string(),
                    format!("w={s}"),
                    format!("p3={}", prefix(s, 3)),
                    format!("s3={}", suffix(s, 3)),
                    format!("prev={prev}"),
                    format!("next={next}"),
                    format!("kind={}", token_kind(s)),
                ];
                if let Some(e) = emo {
                    names.push(format!("e={e}"));
                    names.push(format!("e={e}|w={s}"));
                    names.push(format!("e={e}|prev={prev}"));
                }
                let mut idx: Vec<u32> = names.iter().map(|f| hash_ngram(f, self.dim)).collect();
                idx.sort_unstable();
                idx.dedup();
                idx
            })
            .collect();
        let dense = if self.dense_width == 0 {
            Vec::new()
        } else {
            match dense {
                None => vec![vec![T::zero(); self.dense_width]; n],
                Some(rows) => {
                    if rows.len() != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            got: rows.len(),
                        });
                    }
                    if let Some(r) = rows.iter().find(|r| r.len() != self.dense_width) {
                        return Err(Error::DimensionMismatch {
                            expected: self.dense_width,
                            got: r.len(),
                        });
                    }
                    rows.to_vec()
                }
            }
        };
        Ok(TaggingInput { sparse, dense })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixes_respect_chars() {
        assert_eq!(prefix("ünïcode", 3), "ünï");
        assert_eq!(suffix("ünïcode", 3), "ode");
        assert_eq!(suffix("ab", 3), "ab");
    }

    #[test]
    fn extraction_shapes() {
        let cfg = CrfFeatureConfig { dim: 1 << 12, dense_width: 2, emotion_features: true };
        let toks = TokenSequence::from_surfaces(&["angry", "at", "#lockdown"]);
        let x: TaggingInput<f64> = cfg.extract(&toks, Some(EmotionLabel::Anger), None).unwrap();
        assert_eq!(x.len(), 3);
        assert_eq!(x.dense, vec![vec![0.0; 2]; 3]);
        assert!(x.sparse.iter().all(|f| f.windows(2).all(|w| w[0] < w[1])));
        let without: TaggingInput<f64> = cfg.extract(&toks, None, None).unwrap();
        assert!(without.sparse[0].len() < x.sparse[0].len());
        let bad = vec![vec![1.0]; 3];
        assert!(cfg.extract(&toks, None, Some(&bad)).is_err());
    }
}
