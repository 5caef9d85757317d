//! Daily intensity series: the share of related posts per day, and the
//! per-emotion mean probability over all of a day's posts.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use chrono::{Duration, NaiveDate};

use crate::corpus::DailyPartition;
use crate::emoclass::{EmotionLabel, NUM_EMOTIONS};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subject {
    Topic,
    Emotion(EmotionLabel),
    Subcategory(EmotionLabel, usize),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Topic => f.write_str("topic"),
            Subject::Emotion(e) => f.write_str(e.id()),
            Subject::Subcategory(e, k) => write!(f, "{}/{k}", e.id()),
        }
    }
}

impl Subject {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "topic" {
            return Some(Subject::Topic);
        }
        match s.split_once('/') {
            Some((e, k)) => Some(Subject::Subcategory(EmotionLabel::from_id(e)?, k.parse().ok()?)),
            None => EmotionLabel::from_id(s).map(Subject::Emotion),
        }
    }
}

/// Scores per day. Days absent from the map are missing (no posts), which
/// is distinct from a score of zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySeries<T> {
    pub subject: Subject,
    /// Trailing moving-average window when the series is smoothed.
    pub smoothing: Option<usize>,
    pub points: BTreeMap<NaiveDate, T>,
}

impl<T: Scalar> IntensitySeries<T> {
    pub fn new(subject: Subject) -> Self {
        Self {
            subject,
            smoothing: None,
            points: BTreeMap::new(),
        }
    }

    pub fn get(&self, date: NaiveDate) -> Option<T> {
        self.points.get(&date).copied()
    }

    /// Label written in the `subject` column.
    pub fn label(&self) -> String {
        match self.smoothing {
            None => self.subject.to_string(),
            Some(w) => format!("{}~ma{w}", self.subject),
        }
    }
}

/// Fraction of each day's posts judged related.
pub fn topic_intensity<T: Scalar>(
    partitions: &[DailyPartition],
    related: &HashMap<String, bool>,
) -> Result<IntensitySeries<T>> {
    let mut series = IntensitySeries::new(Subject::Topic);
    for part in partitions.iter().filter(|p| !p.is_empty()) {
        let mut hits = 0usize;
        for id in &part.post_ids {
            match related.get(id) {
                Some(true) => hits += 1,
                Some(false) => {}
                None => return Err(Error::MissingPrediction(id.clone())),
            }
        }
        series
            .points
            .insert(part.date, T::from_count(hits) / T::from_count(part.len()));
    }
    Ok(series)
}

/// Mean emotion probability over all of a day's posts, where unrelated
/// posts contribute zero. Returns one series per emotion in canonical order.
pub fn emotion_intensity<T: Scalar>(
    partitions: &[DailyPartition],
    related: &HashMap<String, bool>,
    probabilities: &HashMap<String, [T; NUM_EMOTIONS]>,
) -> Result<Vec<IntensitySeries<T>>> {
    let mut out: Vec<IntensitySeries<T>> = EmotionLabel::ALL
        .iter()
        .map(|&e| IntensitySeries::new(Subject::Emotion(e)))
        .collect();
    for part in partitions.iter().filter(|p| !p.is_empty()) {
        let mut sums = [T::zero(); NUM_EMOTIONS];
        for id in &part.post_ids {
            match related.get(id) {
                Some(true) => {
                    let p = probabilities
                        .get(id)
                        .ok_or_else(|| Error::MissingPrediction(id.clone()))?;
                    for (s, v) in sums.iter_mut().zip(p) {
                        *s += *v;
                    }
                }
                Some(false) => {}
                None => return Err(Error::MissingPrediction(id.clone())),
            }
        }
        let n = T::from_count(part.len());
        for (series, s) in out.iter_mut().zip(sums) {
            series.points.insert(part.date, s / n);
        }
    }
    Ok(out)
}

/// Trailing mean over the calendar window `[t - window + 1, t]`, using the
/// days present in that window. Emitted only on days the input has.
pub fn moving_average<T: Scalar>(series: &IntensitySeries<T>, window: usize) -> IntensitySeries<T> {
    let window = window.max(1);
    let mut out = IntensitySeries {
        subject: series.subject,
        smoothing: Some(window),
        points: BTreeMap::new(),
    };
    for &date in series.points.keys() {
        let from = date - Duration::days(window as i64 - 1);
        let vals: Vec<T> = series.points.range(from..=date).map(|(_, v)| *v).collect();
        let mean = vals.iter().copied().sum::<T>() / T::from_count(vals.len());
        out.points.insert(date, mean);
    }
    out
}

/// Writes `date,subject,score` rows with 10-decimal fixed-point scores.
pub fn write_csv<T: Scalar, W: Write>(series: &[IntensitySeries<T>], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "date,subject,score")?;
    for s in series {
        let label = s.label();
        for (date, v) in &s.points {
            writeln!(w, "{},{label},{v:.10}", date.format("%Y-%m-%d"))?;
        }
    }
    Ok(())
}

/// Reads a series CSV, grouping rows by subject in first-seen order.
pub fn read_csv<T: Scalar>(text: &str) -> Result<Vec<IntensitySeries<T>>> {
    const WHAT: &str = "series csv";
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "date,subject,score")) => {}
        _ => return Err(Error::format(WHAT, 1, "expected header `date,subject,score`")),
    }
    let mut out: Vec<IntensitySeries<T>> = Vec::new();
    let mut by_label: HashMap<String, usize> = HashMap::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::format(WHAT, i + 1, m.to_string());
        let mut parts = line.split(',');
        let (Some(d), Some(label), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected three columns"));
        };
        let date = NaiveDate::parse_from_str(d, "%Y-%m-%d").map_err(|_| bad("bad date"))?;
        let value: T = v.parse().map_err(|_| bad("bad score"))?;
        let idx = match by_label.get(label) {
            Some(&k) => k,
            None => {
                let (subj, smoothing) = match label.split_once("~ma") {
                    Some((s, w)) => (s, Some(w.parse().map_err(|_| bad("bad smoothing window"))?)),
                    None => (label, None),
                };
                let subject = Subject::parse(subj).ok_or_else(|| bad("unknown subject"))?;
                out.push(IntensitySeries {
                    subject,
                    smoothing,
                    points: BTreeMap::new(),
                });
                by_label.insert(label.to_string(), out.len() - 1);
                out.len() - 1
            }
        };
        out[idx].points.insert(date, value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 3, d).unwrap()
    }

    fn part(d: u32, ids: &[&str]) -> DailyPartition {
        DailyPartition {
            date: day(d),
            post_ids: ids.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn topic_ratios() {
        let names = ids("p", 10);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let parts = vec![part(1, &refs)];
        let mut rel: HashMap<String, bool> = names.iter().map(|n| (n.clone(), false)).collect();
        let s: IntensitySeries<f64> = topic_intensity(&parts, &rel).unwrap();
        assert_eq!(s.get(day(1)), Some(0.0));
        for n in &names[..3] {
            rel.insert(n.clone(), true);
        }
        let s: IntensitySeries<f64> = topic_intensity(&parts, &rel).unwrap();
        assert!((s.get(day(1)).unwrap() - 0.3).abs() < 1e-15);
        rel.remove("p9");
        assert!(matches!(
            topic_intensity::<f64>(&parts, &rel),
            Err(Error::MissingPrediction(id)) if id == "p9"
        ));
    }

    #[test]
    fn emotion_zero_rule() {
        let parts = vec![part(1, &["a", "b"])];
        let rel: HashMap<String, bool> = [("a".into(), true), ("b".into(), false)].into();
        let mut probs = HashMap::new();
        probs.insert("a".to_string(), [0.8f64, 0.0, 0.0, 0.0, 0.0, 0.0]);
        // b has no probabilities at all; unrelated posts never need them
        let s = emotion_intensity(&parts, &rel, &probs).unwrap();
        assert_eq!(s.len(), 6);
        assert!((s[0].get(day(1)).unwrap() - 0.4).abs() < 1e-15);

        let none: HashMap<String, bool> = [("a".into(), false), ("b".into(), false)].into();
        let z = emotion_intensity(&parts, &none, &probs).unwrap();
        assert!(z.iter().all(|s| s.get(day(1)) == Some(0.0)));

        probs.clear();
        assert!(emotion_intensity(&parts, &rel, &probs).is_err());
    }

    #[test]
    fn single_certain_post() {
        let parts = vec![part(2, &["a", "b", "c", "d"])];
        let rel: HashMap<String, bool> = ["a", "b", "c", "d"].iter().map(|s| (s.to_string(), *s == "a")).collect();
        let probs: HashMap<String, [f64; 6]> = [("a".to_string(), [1.0; 6])].into();
        let s = emotion_intensity(&parts, &rel, &probs).unwrap();
        assert_eq!(s[3].get(day(2)), Some(0.25));
    }

    #[test]
    fn missing_days_have_no_rows() {
        let parts = vec![part(1, &["a"]), part(3, &["b"])];
        let rel: HashMap<String, bool> = [("a".into(), true), ("b".into(), false)].into();
        let s: IntensitySeries<f64> = topic_intensity(&parts, &rel).unwrap();
        assert_eq!(s.points.len(), 2);
        assert_eq!(s.get(day(2)), None);
        let mut buf = Vec::new();
        write_csv(&[s], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "date,subject,score\n2020-03-01,topic,1.0000000000\n2020-03-03,topic,0.0000000000\n"
        );
    }

    #[test]
    fn moving_average_uses_calendar_window() {
        let mut s = IntensitySeries::<f64>::new(Subject::Emotion(EmotionLabel::Fear));
        s.points.insert(day(1), 0.0);
        s.points.insert(day(2), 1.0);
        s.points.insert(day(9), 0.5);
        let m = moving_average(&s, 7);
        assert_eq!(m.get(day(2)), Some(0.5));
        assert_eq!(m.get(day(9)), Some(0.5));
        assert_eq!(m.label(), "fear~ma7");
    }

    #[test]
    fn csv_round_trip() {
        let mut a = IntensitySeries::<f64>::new(Subject::Subcategory(EmotionLabel::Anger, 3));
        a.points.insert(day(1), 0.123456789012);
        let b = moving_average(&a, 7);
        let mut buf = Vec::new();
        write_csv(&[a.clone(), b.clone()], &mut buf).unwrap();
        let back: Vec<IntensitySeries<f64>> = read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].subject, a.subject);
        assert_eq!(back[1].smoothing, Some(7));
        assert!((back[0].get(day(1)).unwrap() - 0.123456789012).abs() < 1e-10);
    }
}
