//! Tokenization, hashed n-gram features and tf-idf keyword ranking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::format::split_header;
use crate::scalar::Scalar;

/// Default size of the hashed feature space.
pub const DEFAULT_DIM: usize = 1 << 18;

/// Default keyword list length for seeding and expansion.
pub const DEFAULT_TOP_K: usize = 100;

pub const URL_TOKEN: &str = "<url>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased source slice, or `<url>` for links.
    pub surface: String,
    /// Byte offsets into the source text.
    pub start: usize,
    pub end: usize,
}

impl Token {
    /// Whether the token carries lexical content (not punctuation or a URL).
    pub fn is_wordlike(&self) -> bool {
        self.surface != URL_TOKEN && self.surface.chars().any(char::is_alphanumeric)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
}

impl TokenSequence {
    pub fn from_surfaces<S: AsRef<str>>(surfaces: &[S]) -> Self {
        // Offsets are synthetic: surfaces joined by single spaces.
        let mut pos = 0;
        let tokens = surfaces
            .iter()
            .map(|s| {
                let s = s.as_ref();
                let t = Token {
                    surface: s.to_string(),
                    start: pos,
                    end: pos + s.len(),
                };
                pos += s.len() + 1;
                t
            })
            .collect();
        Self { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    pub fn surface_vec(&self) -> Vec<&str> {
        self.surfaces().collect()
    }
}

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?x)
            (?P<url>https?://\S+|www\.\S+)
            | (?P<tag>[\#@][\p{L}\p{N}_]+)
            | (?P<word>[\p{L}\p{N}_]+(?:['’][\p{L}\p{N}_]+)*)
            | (?P<punct>\S)",
        )
        .expect("token regex compiles")
    })
}

/// Splits text into lowercased tokens. Hashtags and @-mentions stay whole,
/// links become `<url>`, every other non-space symbol is its own token.
pub fn tokenize(text: &str) -> TokenSequence {
    let tokens = token_regex()
        .captures_iter(text)
        .map(|c| {
            let m = c.get(0).expect("whole match");
            let surface = if c.name("url").is_some() {
                URL_TOKEN.to_string()
            } else {
                m.as_str().to_lowercase()
            };
            Token {
                surface,
                start: m.start(),
                end: m.end(),
            }
        })
        .collect();
    TokenSequence { tokens }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Feature index of an n-gram: FNV-1a over its tokens joined by a single
/// space, reduced modulo `dim`.
pub fn hash_ngram(ngram: &str, dim: usize) -> u32 {
    (fnv1a64(ngram.as_bytes()) % dim as u64) as u32
}

/// Sparse vector over `[0, dim)`, sorted by index, zeros never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    dim: usize,
    entries: Vec<(u32, T)>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn from_map(dim: usize, map: BTreeMap<u32, T>) -> Result<Self> {
        let mut entries = Vec::with_capacity(map.len());
        for (i, v) in map {
            if i as usize >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: i as usize + 1,
                });
            }
            if v != T::zero() {
                entries.push((i, v));
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn from_dense(values: &[T]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != T::zero())
            .map(|(i, v)| (i as u32, *v))
            .collect();
        Self {
            dim: values.len(),
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, T)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> T {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .map_or(T::zero(), |p| self.entries[p].1)
    }

    pub fn total(&self) -> T {
        self.entries.iter().map(|(_, v)| *v).sum()
    }
}

/// Hashing configuration shared by every model that consumes a
/// [`FeatureVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    pub max_n: usize,
    pub dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            max_n: 2,
            dim: DEFAULT_DIM,
        }
    }
}

impl FeatureConfig {
    pub fn featurize<T: Scalar>(&self, tokens: &TokenSequence) -> FeatureVector<T> {
        featurize(tokens, self.max_n, self.dim)
    }

    pub fn featurize_text<T: Scalar>(&self, text: &str) -> FeatureVector<T> {
        self.featurize(&tokenize(text))
    }
}

/// Visits every 1..=max_n-gram of the sequence as a space-joined string.
pub fn for_each_ngram(tokens: &TokenSequence, max_n: usize, mut f: impl FnMut(&str)) {
    let surf = tokens.surface_vec();
    let mut buf = String::new();
    for n in 1..=max_n {
        if n > surf.len() {
            break;
        }
        for w in surf.windows(n) {
            buf.clear();
            for (k, s) in w.iter().enumerate() {
                if k > 0 {
                    buf.push(' ');
                }
                buf.push_str(s);
            }
            f(&buf);
        }
    }
}

/// Hashed 1..=max_n-gram counts.
pub fn featurize<T: Scalar>(tokens: &TokenSequence, max_n: usize, dim: usize) -> FeatureVector<T> {
    assert!(max_n >= 1, "max_n must be at least 1");
    assert!(dim >= 1, "feature dimension must be positive");
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for_each_ngram(tokens, max_n, |g| *counts.entry(hash_ngram(g, dim)).or_default() += 1);
    FeatureVector {
        dim,
        entries: counts.into_iter().map(|(i, c)| (i, T::from_count(c))).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordScore {
    pub term: String,
    pub score: f64,
}

/// Descending score, ties broken by term.
pub fn sort_keywords(list: &mut [KeywordScore]) {
    list.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
}

/// Ranks target-document terms by `tf × ln(N / df)`, with tf the raw count
/// over all targets and df counted over the `N` background documents.
///
/// Terms absent from every background document have no defined idf and are
/// left out, as are punctuation and link tokens.
pub fn tfidf_rank(
    targets: &[TokenSequence],
    background: &[TokenSequence],
    top_k: usize,
) -> Result<Vec<KeywordScore>> {
    if background.is_empty() {
        return Err(Error::Config("tf-idf needs at least one background document".into()));
    }
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in targets.iter().flat_map(|d| d.tokens.iter()).filter(|t| t.is_wordlike()) {
        *tf.entry(t.surface.as_str()).or_default() += 1;
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in background {
        let uniq: BTreeSet<&str> = doc.surfaces().collect();
        for term in uniq {
            if tf.contains_key(term) {
                *df.entry(term).or_default() += 1;
            }
        }
    }
    let n = background.len() as f64;
    let mut scored: Vec<KeywordScore> = tf
        .into_iter()
        .filter_map(|(term, count)| {
            let d = *df.get(term)?;
            Some(KeywordScore {
                term: term.to_string(),
                score: count as f64 * (n / d as f64).ln(),
            })
        })
        .collect();
    sort_keywords(&mut scored);
    scored.truncate(top_k);
    Ok(scored)
}

/// `term<TAB>score` per line, descending.
pub fn write_keywords<W: Write>(list: &[KeywordScore], w: &mut W) -> std::io::Result<()> {
    for k in list {
        writeln!(w, "{}\t{}", k.term, k.score)?;
    }
    Ok(())
}

/// Parses a keyword file. A bare term without a score is accepted (score 0)
/// so hand-curated lists stay easy to write; `#` lines are comments.
pub fn parse_keywords(text: &str) -> Result<Vec<KeywordScore>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (term, score) = match line.split_once('\t') {
            Some((t, s)) => (
                t,
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| Error::format("keyword list", i + 1, format!("bad score `{s}`")))?,
            ),
            None => (line, 0.0),
        };
        let term = term.trim().to_lowercase();
        if term.is_empty() {
            return Err(Error::format("keyword list", i + 1, "empty term"));
        }
        if seen.insert(term.clone()) {
            out.push(KeywordScore { term, score });
        }
    }
    Ok(out)
}

/// Reads externally computed dense vectors: a header declaring `dim=N`,
/// then `post_id<TAB>v1 v2 ... vN` per line.
pub fn parse_dense_vectors<T: Scalar>(text: &str) -> Result<BTreeMap<String, FeatureVector<T>>> {
    let (header, body) = split_header("dense vectors", text)?;
    let dim: usize = header.require("dense vectors", "dim")?;
    let mut out = BTreeMap::new();
    for (lineno, line) in body {
        let (id, vals) = line
            .split_once('\t')
            .ok_or_else(|| Error::format("dense vectors", lineno, "expected id<TAB>values"))?;
        let v: Vec<T> = crate::scalar::parse_list(vals)
            .ok_or_else(|| Error::format("dense vectors", lineno, "bad number"))?;
        if v.len() != dim {
            return Err(Error::format(
                "dense vectors",
                lineno,
                format!("expected {dim} values, got {}", v.len()),
            ));
        }
        out.insert(id.to_string(), FeatureVector::from_dense(&v));
    }
    Ok(out)
}

/// Common English function words, excluded from trigger mention tokens.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "all", "am", "an", "and", "are", "as", "at", "be", "been", "but", "by", "can",
    "could", "did", "do", "does", "for", "from", "had", "has", "have", "he", "her", "him", "his",
    "how", "i", "if", "in", "into", "is", "it", "its", "just", "me", "my", "no", "not", "now", "of",
    "on", "or", "our", "out", "over", "she", "so", "some", "than", "that", "the", "their", "them",
    "then", "there", "these", "they", "this", "those", "to", "too", "up", "us", "very", "was", "we",
    "were", "what", "when", "which", "who", "why", "will", "with", "would", "you", "your",
];

pub fn is_stopword(w: &str) -> bool {
    STOPWORDS.binary_search(&w).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surf(text: &str) -> Vec<String> {
        tokenize(text).surfaces().map(str::to_string).collect()
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(surf("Angry at #lockdown!"), ["angry", "at", "#lockdown", "!"]);
        assert!(tokenize("").is_empty());
        assert_eq!(surf("see https://x.co now"), ["see", "<url>", "now"]);
        assert_eq!(surf("@WHO says don't panic"), ["@who", "says", "don't", "panic"]);
        assert_eq!(surf("Covid-19..."), ["covid", "-", "19", ".", ".", "."]);
    }

    #[test]
    fn token_offsets_reconstruct_surface() {
        let text = "Ünïcode TEXT, #Tag http://a.b/c ok";
        let seq = tokenize(text);
        let mut last_end = 0;
        for t in &seq.tokens {
            assert!(t.start >= last_end && t.start < t.end);
            last_end = t.end;
            if t.surface != URL_TOKEN {
                assert_eq!(text[t.start..t.end].to_lowercase(), t.surface);
            }
        }
    }

    #[test]
    fn stopwords_sorted() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
        assert!(is_stopword("the"));
        assert!(!is_stopword("lockdown"));
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn featurize_bigrams() {
        let seq = TokenSequence::from_surfaces(&["a", "b"]);
        let fv: FeatureVector<f64> = featurize(&seq, 2, DEFAULT_DIM);
        assert_eq!(fv.nnz(), 3);
        for g in ["a", "b", "a b"] {
            assert_eq!(fv.get(hash_ngram(g, DEFAULT_DIM)), 1.0);
        }
        let empty: FeatureVector<f64> = featurize(&TokenSequence::default(), 2, DEFAULT_DIM);
        assert!(empty.is_empty());
    }

    #[test]
    fn featurize_is_deterministic() {
        let cfg = FeatureConfig::default();
        let a: FeatureVector<f64> = cfg.featurize_text("Stay home, stay safe #covid");
        let b: FeatureVector<f64> = cfg.featurize_text("Stay home, stay safe #covid");
        assert_eq!(a, b);
        // "stay" twice
        assert_eq!(a.get(hash_ngram("stay", DEFAULT_DIM)), 2.0);
    }

    #[test]
    fn tfidf_hand_oracle() {
        let targets = vec![TokenSequence::from_surfaces(&["covid", "covid", "mask"])];
        let bg: Vec<_> = [
            vec!["covid", "mask", "the"],
            vec!["mask", "the"],
            vec!["the", "cat"],
            vec!["the", "dog"],
        ]
        .iter()
        .map(|d| TokenSequence::from_surfaces(d))
        .collect();
        let ranked = tfidf_rank(&targets, &bg, 100).unwrap();
        assert_eq!(ranked[0].term, "covid");
        assert!((ranked[0].score - 2.0 * 4f64.ln()).abs() < 1e-12);
        assert_eq!(ranked[1].term, "mask");
        assert!((ranked[1].score - 2f64.ln()).abs() < 1e-12);

        let t2 = vec![TokenSequence::from_surfaces(&["the", "covid"])];
        let r2 = tfidf_rank(&t2, &bg, 100).unwrap();
        assert_eq!(r2.last().unwrap().term, "the");
        assert_eq!(r2.last().unwrap().score, 0.0);
    }

    #[test]
    fn tfidf_edge_cases() {
        let bg = vec![TokenSequence::from_surfaces(&["x"])];
        assert!(tfidf_rank(&[], &bg, 10).unwrap().is_empty());
        assert!(tfidf_rank(&bg, &[], 10).is_err());
    }

    #[test]
    fn keyword_file_round_trip() {
        let list = vec![
            KeywordScore { term: "covid".into(), score: 2.772588722239781 },
            KeywordScore { term: "social distancing".into(), score: 0.5 },
        ];
        let mut buf = Vec::new();
        write_keywords(&list, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(parse_keywords(&text).unwrap(), list);
        assert_eq!(parse_keywords("# curated\nMask\nmask\n").unwrap().len(), 1);
        assert!(parse_keywords("x\tnan\n").is_err());
    }

    #[test]
    fn dense_vectors() {
        let text = "#affectline-v1 dim=3\np1\t0 1.5 0\np2\t1 2 3\n";
        let m: BTreeMap<String, FeatureVector<f64>> = parse_dense_vectors(text).unwrap();
        assert_eq!(m["p1"].nnz(), 1);
        assert_eq!(m["p1"].get(1), 1.5);
        assert_eq!(m["p2"].dim(), 3);
        assert!(parse_dense_vectors::<f64>("#affectline-v1 dim=2\np\t1\n").is_err());
    }
}
