use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use crate::corpus::{Corpus, Post};
use crate::error::{Error, Result};
use crate::format::{Header, MAGIC};
use crate::textfeat::{parse_keywords, sort_keywords, tokenize, write_keywords, KeywordScore, TokenSequence};

/// A ranked, duplicate-free keyword list tagged with its bootstrap round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeywordList {
    pub round: u32,
    pub entries: Vec<KeywordScore>,
}

impl KeywordList {
    pub fn new(round: u32, mut entries: Vec<KeywordScore>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &mut entries {
            e.term = e.term.trim().to_lowercase();
            if e.term.is_empty() {
                return Err(Error::Config("empty keyword".into()));
            }
            if !seen.insert(e.term.clone()) {
                return Err(Error::Config(format!("duplicate keyword {}", e.term)));
            }
        }
        Ok(Self { round, entries })
    }

    pub fn from_terms<S: AsRef<str>>(round: u32, terms: &[S]) -> Result<Self> {
        Self::new(
            round,
            terms
                .iter()
                .map(|t| KeywordScore { term: t.as_ref().to_string(), score: 0.0 })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.term.as_str())
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms().any(|t| t == term)
    }

    /// Union with another list. Scores of shared terms take the maximum.
    pub fn merged(&self, other: &KeywordList, round: u32) -> KeywordList {
        let mut by_term: HashMap<&str, f64> = HashMap::new();
        for e in self.entries.iter().chain(&other.entries) {
            let s = by_term.entry(&e.term).or_insert(e.score);
            *s = s.max(e.score);
        }
        let mut entries: Vec<KeywordScore> = by_term
            .into_iter()
            .map(|(t, score)| KeywordScore { term: t.to_string(), score })
            .collect();
        sort_keywords(&mut entries);
        KeywordList { round, entries }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        Header::new().with("kind", "keywords").with("round", self.round).write_to(w)?;
        write_keywords(&self.entries, w)
    }

    /// Accepts either a written list or a hand-edited file without a
    /// header, which is read as round 0.
    pub fn parse(text: &str) -> Result<Self> {
        let round = match text.lines().next() {
            Some(first) if first.starts_with(MAGIC) => {
                let h = Header::parse("keyword list", first)?;
                h.expect_kind("keyword list", "keywords")?;
                h.require("keyword list", "round")?
            }
            _ => 0,
        };
        Self::new(round, parse_keywords(text)?)
    }
}

fn keyword_tokens(list: &KeywordList) -> Vec<Vec<String>> {
    list.terms()
        .map(|t| tokenize(t).surfaces().map(str::to_string).collect::<Vec<_>>())
        .filter(|t| !t.is_empty())
        .collect()
}

fn matches_any(tokens: &TokenSequence, patterns: &[Vec<String>]) -> bool {
    let surf = tokens.surface_vec();
    patterns
        .iter()
        .any(|p| surf.windows(p.len()).any(|w| w.iter().zip(p).all(|(a, b)| *a == b)))
}

/// Whether a post mentions any keyword as a token or contiguous token run.
pub fn post_matches(post: &Post, list: &KeywordList) -> bool {
    matches_any(&tokenize(&post.text), &keyword_tokens(list))
}

/// Ids of posts mentioning any keyword. Matching is case-insensitive on
/// tokens; a multi-word keyword must appear as a contiguous run.
pub fn harvest(corpus: &Corpus, list: &KeywordList) -> BTreeSet<String> {
    let patterns = keyword_tokens(list);
    if patterns.is_empty() {
        return BTreeSet::new();
    }
    let posts = corpus.posts();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = posts.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = posts
            .chunks(chunk)
            .map(|part| {
                let patterns = &patterns;
                s.spawn(move || {
                    part.iter()
                        .filter(|p| matches_any(&tokenize(&p.text), patterns))
                        .map(|p| p.id.clone())
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("harvest worker panicked"))
            .collect()
    })
}

/// The `n` word tokens with the highest document frequency, ties broken
/// lexicographically.
pub fn frequent_terms(docs: &[TokenSequence], n: usize) -> BTreeSet<String> {
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in docs {
        let uniq: BTreeSet<&str> = d.tokens.iter().filter(|t| t.is_wordlike()).map(|t| t.surface.as_str()).collect();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut v: Vec<(&str, usize)> = df.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().take(n).map(|(t, _)| t.to_string()).collect()
}
