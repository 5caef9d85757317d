//! Synthetic corpus with known relevance, emotions and trigger spans, for
//! end-to-end checks of the pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{derive_seed, Corpus, LabelPayload, LabelRecord, Platform, Post, SpanAnnotation};
use crate::emoclass::{EmotionLabel, NUM_EMOTIONS};
use crate::error::{Error, Result};
use crate::format::{split_header, Header};

/// Planted topic vocabulary. Every related post contains at least one.
pub const TOPIC_KEYWORDS: &[&str] = &[
    "coronavirus",
    "covid",
    "pandemic",
    "quarantine",
    "virus",
    "mask",
    "outbreak",
    "epidemic",
    "cdc",
    "flattenthecurve",
];

/// Topic keywords that also occur in unrelated posts.
const AMBIGUOUS: &[(&str, &[&str])] = &[
    ("virus", &["computer", "laptop", "antivirus", "malware", "email"]),
    ("mask", &["halloween", "costume", "skincare", "facial", "party"]),
];

const CUES: [&[&str]; NUM_EMOTIONS] = [
    &["furious", "angry", "outraged", "livid"],
    &["disgusted", "grossed", "revolted", "sickened"],
    &["scared", "worried", "terrified", "anxious"],
    &["grateful", "happy", "thankful", "delighted"],
    &["heartbroken", "sad", "devastated", "miserable"],
    &["shocked", "stunned", "amazed", "astonished"],
];

const LINKS: [&str; NUM_EMOTIONS] = ["at", "by", "about", "for", "over", "seeing"];

/// Per emotion, trigger subcategories of interchangeable phrases.
const TRIGGERS: [&[&[&str]]; NUM_EMOTIONS] = [
    &[
        &["governor", "mayor", "senators"],
        &["hoarders", "panic buyers", "price gougers"],
        &["spring breakers", "beachgoers", "protesters"],
    ],
    &[
        &["unwashed hands", "sneezing strangers", "spitting"],
        &["fake cures", "snake oil", "misinformation"],
        &["grimy counters", "filthy carts", "trash piles"],
    ],
    &[
        &["unemployment", "layoffs", "rent"],
        &["ventilator shortage", "icu beds", "hospitals"],
        &["grandparents", "elderly parents", "nursing homes"],
    ],
    &[
        &["nurses", "doctors", "healthcare workers"],
        &["zoom calls", "video chats", "potluck dinners"],
        &["sunshine walks", "gardening", "baking bread"],
    ],
    &[
        &["cancelled graduation", "missed weddings", "funerals"],
        &["closed schools", "remote classes", "lost semester"],
        &["lonely evenings", "isolation", "missing classmates"],
    ],
    &[
        &["empty streets", "quiet highways", "clear skies"],
        &["toilet paper", "stockpiles", "bare shelves"],
        &["stimulus checks", "relief package", "tax delay"],
    ],
];

const FUNCTION_WORDS: &[&str] = &[
    "i", "the", "and", "to", "is", "this", "so", "just", "really", "today", "my", "we", "it", "of", "in", "that",
    "a", "you", "all", "now", "what", "be", "are", "not", "with", "on", "me", "they", "have", "was",
];

const FILLER: &[&str] = &[
    "morning", "week", "people", "home", "time", "work", "still", "going", "think", "again", "right", "everyone",
    "life", "thing", "world", "friends", "family", "tonight", "weekend", "city", "honestly", "literally", "maybe",
    "news", "day", "back", "new", "good", "long", "little", "night", "year", "another", "every", "never", "always",
    "around", "sure", "pretty", "feel", "know", "see", "want", "need", "say", "look", "made", "watch", "read",
    "story", "post", "thread", "update", "times", "place", "local", "phone", "morning", "kids",
];

const OFF_TOPIC: &[&str] = &[
    "football", "coffee", "movie", "playlist", "recipe", "concert", "album", "game", "season", "pizza", "tacos",
    "puppy", "kitten", "garden", "beach", "gym", "workout", "marathon", "podcast", "novel", "series", "episode",
    "fashion", "sneakers", "guitar", "painting", "camera", "sunset", "hiking", "vacation", "flight", "hotel",
    "birthday", "wedding", "anniversary", "brunch", "burger", "smoothie", "traffic", "weather",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub days: usize,
    pub posts_per_day: usize,
    pub start: NaiveDate,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            days: 30,
            posts_per_day: 1000,
            start: NaiveDate::from_ymd_opt(2020, 3, 1).expect("valid date"),
            seed: 0,
        }
    }
}

/// Ground truth for one generated post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPost {
    pub id: String,
    pub related: bool,
    pub emotions: BTreeSet<EmotionLabel>,
    /// One trigger per emotion, over token indices.
    pub triggers: Vec<SpanAnnotation>,
    /// Planted subcategory of each trigger, parallel to `triggers`.
    pub subcategories: Vec<usize>,
}

/// Generating rates for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayTruth {
    pub date: NaiveDate,
    pub relevance_rate: f64,
    pub emotion_rates: [f64; NUM_EMOTIONS],
}

#[derive(Debug, Clone)]
pub struct SynthTruth {
    pub posts: BTreeMap<String, SynthPost>,
    pub days: Vec<DayTruth>,
}

pub fn trigger_subcategories(e: EmotionLabel) -> &'static [&'static [&'static str]] {
    TRIGGERS[e.index()]
}

fn relevance_rate(t: usize, days: usize) -> f64 {
    let x = t as f64 / (days.max(2) - 1) as f64;
    0.35 + 0.25 * x + 0.05 * (x * 9.0).sin()
}

fn emotion_rate(e: EmotionLabel, t: usize, days: usize) -> f64 {
    const BASE: [f64; NUM_EMOTIONS] = [0.30, 0.12, 0.40, 0.18, 0.25, 0.12];
    const AMP: [f64; NUM_EMOTIONS] = [0.15, 0.06, 0.20, 0.10, 0.10, 0.08];
    const PHASE: [f64; NUM_EMOTIONS] = [0.0, 1.3, 2.1, 3.7, 4.4, 5.2];
    let i = e.index();
    let x = t as f64 / days.max(1) as f64 * std::f64::consts::TAU;
    (BASE[i] + AMP[i] * (x + PHASE[i]).sin()).clamp(0.02, 0.95)
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

fn filler(rng: &mut ChaCha8Rng, n: usize, off_topic: bool) -> Vec<String> {
    (0..n)
        .map(|_| {
            let r = rng.gen::<f64>();
            let w = if r < 0.5 {
                pick(rng, FUNCTION_WORDS)
            } else if off_topic && r < 0.75 {
                pick(rng, OFF_TOPIC)
            } else {
                pick(rng, FILLER)
            };
            w.to_string()
        })
        .collect()
}

/// Subcategory `k` of a trigger family is favored during the `k`-th slice
/// of the date range.
fn pick_subcategory(rng: &mut ChaCha8Rng, groups: usize, t: usize, days: usize) -> usize {
    let favored = (t * groups / days.max(1)).min(groups - 1);
    let weights: Vec<f64> = (0..groups).map(|k| if k == favored { 6.0 } else { 1.0 }).collect();
    let mut u = rng.gen::<f64>() * weights.iter().sum::<f64>();
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    groups - 1
}

struct Draft {
    /// Units kept contiguous; a unit may carry a trigger span at an offset.
    units: Vec<(Vec<String>, Option<(EmotionLabel, usize, usize, usize)>)>,
}

fn assemble(rng: &mut ChaCha8Rng, mut draft: Draft) -> (Vec<String>, Vec<SpanAnnotation>, Vec<usize>) {
    draft.units.shuffle(rng);
    let mut words = Vec::new();
    let mut spans = Vec::new();
    let mut subcats = Vec::new();
    for (unit, trig) in draft.units {
        let base = words.len();
        if let Some((emotion, start, end, sub)) = trig {
            spans.push(SpanAnnotation { emotion, start: base + start, end: base + end });
            subcats.push(sub);
        }
        words.extend(unit);
    }
    (words, spans, subcats)
}

fn related_post(rng: &mut ChaCha8Rng, t: usize, cfg: &SynthConfig) -> (Vec<String>, SynthPost) {
    let mut units = Vec::new();
    let mut keywords: Vec<&str> = vec![pick(rng, TOPIC_KEYWORDS)];
    if rng.gen_bool(0.5) {
        keywords.push(pick(rng, TOPIC_KEYWORDS));
    }
    for k in keywords {
        let n = rng.gen_range(0..3);
        let mut u = filler(rng, n, false);
        u.push(k.to_string());
        units.push((u, None));
    }
    let mut emotions = BTreeSet::new();
    for e in EmotionLabel::ALL {
        if rng.gen_bool(emotion_rate(e, t, cfg.days)) {
            emotions.insert(e);
            let groups = TRIGGERS[e.index()];
            let sub = pick_subcategory(rng, groups.len(), t, cfg.days);
            let phrase = pick(rng, groups[sub]);
            let mut u = vec![pick(rng, CUES[e.index()]).to_string(), LINKS[e.index()].to_string()];
            let start = u.len();
            u.extend(phrase.split(' ').map(str::to_string));
            let end = u.len();
            units.push((u, Some((e, start, end, sub))));
        }
    }
    let n = rng.gen_range(2..6);
    units.push((filler(rng, n, false), None));
    let (words, triggers, subcategories) = assemble(rng, Draft { units });
    let post = SynthPost { id: String::new(), related: true, emotions, triggers, subcategories };
    (words, post)
}

fn unrelated_post(rng: &mut ChaCha8Rng) -> (Vec<String>, SynthPost) {
    let n = rng.gen_range(5..12);
    let mut units = vec![(filler(rng, n, true), None)];
    if rng.gen_bool(0.12) {
        let (kw, context) = AMBIGUOUS[rng.gen_range(0..AMBIGUOUS.len())];
        units.push((vec![pick(rng, context).to_string(), kw.to_string()], None));
    }
    let (words, _, _) = assemble(rng, Draft { units });
    let post = SynthPost {
        id: String::new(),
        related: false,
        emotions: BTreeSet::new(),
        triggers: Vec::new(),
        subcategories: Vec::new(),
    };
    (words, post)
}

/// Generates the corpus and its ground truth. Post text is plain
/// lowercase words separated by single spaces, so token indices of the
/// planted spans agree with the standard tokenizer.
pub fn generate(cfg: &SynthConfig) -> Result<(Corpus, SynthTruth)> {
    if cfg.days == 0 || cfg.posts_per_day == 0 {
        return Err(Error::Config("synthetic corpus needs at least one day and one post".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "synth"));
    let mut corpus = Corpus::new();
    let mut posts = BTreeMap::new();
    let mut days = Vec::new();
    for t in 0..cfg.days {
        let date = cfg
            .start
            .checked_add_days(Days::new(t as u64))
            .ok_or_else(|| Error::Config("date overflow".into()))?;
        let midnight = date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp();
        let r = relevance_rate(t, cfg.days);
        for i in 0..cfg.posts_per_day {
            let (mut words, mut post) = if rng.gen_bool(r) {
                related_post(&mut rng, t, cfg)
            } else {
                unrelated_post(&mut rng)
            };
            if rng.gen_bool(0.08) {
                words.push(format!("https://t.co/{:06x}", rng.gen::<u32>() & 0xff_ffff));
            }
            post.id = format!("d{t:02}-{i:04}");
            let ts = midnight + rng.gen_range(0..86_400);
            let p = Post::new(post.id.clone(), ts, words.join(" "), Platform::Twitter, "en").expect("non-empty text");
            corpus.insert(p);
            posts.insert(post.id.clone(), post);
        }
        let mut rates = [0.0; NUM_EMOTIONS];
        for e in EmotionLabel::ALL {
            rates[e.index()] = emotion_rate(e, t, cfg.days);
        }
        days.push(DayTruth { date, relevance_rate: r, emotion_rates: rates });
    }
    Ok((corpus, SynthTruth { posts, days }))
}

impl SynthTruth {
    pub fn related_ids(&self) -> BTreeSet<String> {
        self.posts.values().filter(|p| p.related).map(|p| p.id.clone()).collect()
    }

    /// Per day, the realized fraction of related posts.
    pub fn realized_relevance(&self) -> BTreeMap<NaiveDate, f64> {
        let mut totals: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for p in self.posts.values() {
            let e = totals.entry(&p.id[..3]).or_default();
            e.0 += 1;
            e.1 += usize::from(p.related);
        }
        self.days
            .iter()
            .enumerate()
            .map(|(t, d)| {
                let (n, rel) = totals.get(format!("d{t:02}").as_str()).copied().unwrap_or((1, 0));
                (d.date, rel as f64 / n as f64)
            })
            .collect()
    }

    /// Per day, the emotion intensity implied by the generating rates:
    /// the day's realized related fraction times each emotion's rate.
    pub fn expected_emotion_intensity(&self) -> BTreeMap<NaiveDate, [f64; NUM_EMOTIONS]> {
        let frac = self.realized_relevance();
        self.days
            .iter()
            .map(|d| {
                let mut out = d.emotion_rates;
                out.iter_mut().for_each(|x| *x *= frac[&d.date]);
                (d.date, out)
            })
            .collect()
    }

    /// The label an oracle annotator would give for `task`.
    pub fn oracle_label(
        &self,
        post_id: &str,
        task: crate::corpus::Task,
        annotator: &str,
        round: u32,
        created_at: i64,
    ) -> Option<LabelRecord> {
        use crate::corpus::Task;
        let p = self.posts.get(post_id)?;
        let payload = match task {
            Task::Relevance => LabelPayload::Relevance(p.related),
            Task::Emotion => LabelPayload::Emotion(p.emotions.clone()),
            Task::Trigger => LabelPayload::Trigger(p.triggers.clone()),
        };
        Some(LabelRecord {
            post_id: post_id.to_string(),
            payload,
            annotator_id: annotator.to_string(),
            round,
            created_at,
        })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        Header::new().with("kind", "synth-truth").write_to(w)?;
        for d in &self.days {
            let rates: Vec<String> = d.emotion_rates.iter().map(f64::to_string).collect();
            writeln!(w, "day\t{}\t{}\t{}", d.date.format("%Y-%m-%d"), d.relevance_rate, rates.join(" "))?;
        }
        for p in self.posts.values() {
            let emotions: Vec<&str> = p.emotions.iter().map(|e| e.id()).collect();
            let spans: Vec<String> = p
                .triggers
                .iter()
                .zip(&p.subcategories)
                .map(|(s, k)| format!("{}:{}-{}:{k}", s.emotion.id(), s.start, s.end))
                .collect();
            writeln!(w, "post\t{}\t{}\t{}\t{}", p.id, u8::from(p.related), emotions.join(","), spans.join(","))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "synthetic truth";
        let (header, body) = split_header(WHAT, text)?;
        header.expect_kind(WHAT, "synth-truth")?;
        let mut posts = BTreeMap::new();
        let mut days = Vec::new();
        for (n, line) in body {
            let bad = || Error::format(WHAT, n, "malformed line");
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                ["day", date, r, rates] => {
                    let v: Vec<f64> = rates.split(' ').map(|x| x.parse().map_err(|_| bad())).collect::<Result<_>>()?;
                    days.push(DayTruth {
                        date: NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|_| bad())?,
                        relevance_rate: r.parse().map_err(|_| bad())?,
                        emotion_rates: v.try_into().map_err(|_| bad())?,
                    });
                }
                ["post", id, rel, emotions, spans] => {
                    let mut p = SynthPost {
                        id: id.to_string(),
                        related: *rel == "1",
                        emotions: BTreeSet::new(),
                        triggers: Vec::new(),
                        subcategories: Vec::new(),
                    };
                    for e in emotions.split(',').filter(|s| !s.is_empty()) {
                        p.emotions.insert(EmotionLabel::from_id(e).ok_or_else(bad)?);
                    }
                    for s in spans.split(',').filter(|s| !s.is_empty()) {
                        let mut parts = s.split(':');
                        let (e, range, k) = (parts.next(), parts.next(), parts.next());
                        let (a, b) = range.and_then(|r| r.split_once('-')).ok_or_else(bad)?;
                        p.triggers.push(SpanAnnotation {
                            emotion: e.and_then(EmotionLabel::from_id).ok_or_else(bad)?,
                            start: a.parse().map_err(|_| bad())?,
                            end: b.parse().map_err(|_| bad())?,
                        });
                        p.subcategories.push(k.and_then(|k| k.parse().ok()).ok_or_else(bad)?);
                    }
                    posts.insert(p.id.clone(), p);
                }
                _ => return Err(bad()),
            }
        }
        Ok(Self { posts, days })
    }
}
