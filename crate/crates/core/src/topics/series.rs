use std::collections::HashMap;

use crate::corpus::DailyPartition;
use crate::emoclass::EmotionLabel;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::topics::lda::DateLdaState;
use crate::topics::mention::TriggerMention;
use crate::topics::report::Curation;
use crate::trends::{IntensitySeries, Subject};

/// One emotion's fitted topics together with their curation.
pub struct CuratedTopics<'a, T> {
    pub emotion: EmotionLabel,
    pub state: &'a DateLdaState<T>,
    pub curation: &'a Curation,
}

/// Daily subcategory scores
/// `S(t, y, k) = (1/|X_t|) Σ_{x ∈ X_t} p(k|x) · I(y_x = y)`,
/// where `|X_t|` is the number of posts in day `t`'s partition and the sum
/// runs over mentions extracted from those posts. Discarded topics produce
/// no series.
pub fn subcategory_intensity<T: Scalar>(
    partitions: &[DailyPartition],
    mentions: &[TriggerMention],
    fitted: &[CuratedTopics<'_, T>],
) -> Result<Vec<IntensitySeries<T>>> {
    let mut by_post: HashMap<&str, Vec<&TriggerMention>> = HashMap::new();
    for m in mentions {
        by_post.entry(m.post_id.as_str()).or_default().push(m);
    }
    let mut out = Vec::new();
    for f in fitted {
        let kept = f.curation.kept_topics(f.state.topics());
        let mut series: Vec<IntensitySeries<T>> = kept
            .iter()
            .map(|&k| IntensitySeries::new(Subject::Subcategory(f.emotion, k)))
            .collect();
        for part in partitions.iter().filter(|p| !p.is_empty()) {
            let mut sums = vec![T::zero(); f.state.topics()];
            for id in &part.post_ids {
                for m in by_post.get(id.as_str()).into_iter().flatten() {
                    if m.emotion != f.emotion {
                        continue;
                    }
                    let p = f.state.mention_posterior(&m.id)?;
                    for (s, v) in sums.iter_mut().zip(p) {
                        *s += v;
                    }
                }
            }
            let n = T::from_count(part.len());
            for (s, &k) in series.iter_mut().zip(&kept) {
                s.points.insert(part.date, sums[k] / n);
            }
        }
        out.extend(series);
    }
    Ok(out)
}
