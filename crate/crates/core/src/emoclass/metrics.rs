//! Multi-label evaluation: example-based accuracy plus micro and macro F1.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scalar::{metric_count, MetricValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccuracyKind {
    /// Mean per-example `|P ∩ G| / |P ∪ G|`, 1 when both sets are empty.
    #[default]
    Jaccard,
    /// Fraction of examples whose predicted set equals the gold set.
    Subset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiLabelScores<T> {
    pub accuracy: T,
    pub micro_f1: T,
    pub macro_f1: T,
}

/// `2tp / (2tp + fp + fn)`, 0 when nothing was predicted or expected.
pub fn f1_from_counts<T: MetricValue>(tp: usize, fp: usize, fneg: usize) -> T {
    let denom = 2 * tp + fp + fneg;
    if denom == 0 {
        T::zero()
    } else {
        metric_count::<T>(2 * tp) / metric_count::<T>(denom)
    }
}

/// Scores aligned predicted and gold label sets over the label universe
/// `labels`. Labels outside the universe are ignored.
pub fn evaluate<L: Ord, T: MetricValue>(
    predicted: &[BTreeSet<L>],
    gold: &[BTreeSet<L>],
    labels: &[L],
    accuracy: AccuracyKind,
) -> Result<MultiLabelScores<T>> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    let universe: BTreeSet<&L> = labels.iter().collect();
    let mut per_label = vec![(0usize, 0usize, 0usize); labels.len()];
    let mut acc = T::zero();
    for (p, g) in predicted.iter().zip(gold) {
        let p: BTreeSet<&L> = p.iter().filter(|l| universe.contains(l)).collect();
        let g: BTreeSet<&L> = g.iter().filter(|l| universe.contains(l)).collect();
        acc = acc
            + match accuracy {
                AccuracyKind::Jaccard => {
                    let union = p.union(&g).count();
                    if union == 0 {
                        T::one()
                    } else {
                        metric_count::<T>(p.intersection(&g).count()) / metric_count::<T>(union)
                    }
                }
                AccuracyKind::Subset => {
                    if p == g {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
            };
        for (k, l) in labels.iter().enumerate() {
            match (p.contains(l), g.contains(l)) {
                (true, true) => per_label[k].0 += 1,
                (true, false) => per_label[k].1 += 1,
                (false, true) => per_label[k].2 += 1,
                (false, false) => {}
            }
        }
    }
    let n = predicted.len();
    let accuracy = if n == 0 { T::zero() } else { acc / metric_count::<T>(n) };
    let (tp, fp, fneg) = per_label
        .iter()
        .fold((0, 0, 0), |(a, b, c), &(x, y, z)| (a + x, b + y, c + z));
    let macro_sum = per_label
        .iter()
        .fold(T::zero(), |s, &(x, y, z)| s + f1_from_counts::<T>(x, y, z));
    let macro_f1 = if labels.is_empty() {
        T::zero()
    } else {
        macro_sum / metric_count::<T>(labels.len())
    };
    Ok(MultiLabelScores {
        accuracy,
        micro_f1: f1_from_counts(tp, fp, fneg),
        macro_f1,
    })
}

/// F1 of the positive class for aligned binary decisions.
pub fn binary_f1<T: MetricValue>(predicted: &[bool], gold: &[bool]) -> Result<T> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for (&p, &g) in predicted.iter().zip(gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    Ok(f1_from_counts(tp, fp, fneg))
}
