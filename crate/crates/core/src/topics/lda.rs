//! LDA over trigger mentions where each topic also carries a distribution
//! over calendar dates, fit by collapsed Gibbs sampling.
//!
//! Every token of a mention emits both its word (from the topic's word
//! distribution) and its mention's date (from the topic's date
//! distribution), so same-day mentions are pulled toward shared topics.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::emoclass::EmotionLabel;
use crate::error::{Error, Result};
use crate::format::{split_header, Header};
use crate::scalar::Scalar;
use crate::topics::mention::TriggerMention;

pub const DEFAULT_TOPICS: usize = 20;
pub const DEFAULT_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    pub topics: usize,
    pub iterations: usize,
    /// Mention–topic prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub seed: u64,
    /// Average the mention–topic counts over this many final sweeps
    /// instead of keeping only the last sample. 0 keeps the last sample.
    pub average_last: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            topics: DEFAULT_TOPICS,
            iterations: DEFAULT_ITERATIONS,
            alpha: None,
            beta: 0.01,
            gamma: 0.01,
            seed: 0,
            average_last: 0,
        }
    }
}

impl GibbsConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DateLdaState<T> {
    emotion: Option<EmotionLabel>,
    k: usize,
    alpha: T,
    beta: T,
    gamma: T,
    seed: u64,
    iteration: usize,
    average_last: usize,
    vocab: Vec<String>,
    dates: Vec<NaiveDate>,
    mention_ids: Vec<String>,
    mention_index: HashMap<String, usize>,
    words: Vec<Vec<u32>>,
    mention_date: Vec<u32>,
    z: Vec<Vec<u32>>,
    n_mk: Vec<u32>,
    n_kw: Vec<u32>,
    n_kd: Vec<u32>,
    n_k: Vec<u32>,
    /// Summed `n_mk` over averaged sweeps, with the sweep count.
    accum: Option<(Vec<u64>, u64)>,
}

fn sweep_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64 + 1);
    rng
}

/// Exact count tables implied by a set of assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTables {
    pub n_mk: Vec<u32>,
    pub n_kw: Vec<u32>,
    pub n_kd: Vec<u32>,
    pub n_k: Vec<u32>,
}

impl<T: Scalar> DateLdaState<T> {
    /// Builds vocabularies and draws initial assignments uniformly.
    pub fn init(mentions: &[TriggerMention], cfg: &GibbsConfig) -> Result<Self> {
        if mentions.is_empty() {
            return Err(Error::EmptyMentions);
        }
        if cfg.topics == 0 {
            return Err(Error::Config("topic count must be at least 1".into()));
        }
        if !(cfg.beta > 0.0 && cfg.gamma > 0.0 && cfg.alpha() > 0.0) {
            return Err(Error::Config("Dirichlet priors must be positive".into()));
        }
        if mentions.len() < cfg.topics {
            tracing::warn!(mentions = mentions.len(), topics = cfg.topics, "fewer mentions than topics");
        }
        let first = mentions[0].emotion;
        let emotion = mentions.iter().all(|m| m.emotion == first).then_some(first);

        let mut vocab: Vec<String> = mentions.iter().flat_map(|m| m.tokens.iter().cloned()).collect();
        vocab.sort();
        vocab.dedup();
        let word_id: HashMap<&str, u32> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
        let mut dates: Vec<NaiveDate> = mentions.iter().map(|m| m.date).collect();
        dates.sort();
        dates.dedup();
        let date_id: HashMap<NaiveDate, u32> = dates.iter().enumerate().map(|(i, d)| (*d, i as u32)).collect();

        let mut mention_index = HashMap::new();
        for (i, m) in mentions.iter().enumerate() {
            if m.tokens.is_empty() {
                return Err(Error::Config(format!("mention {} has no tokens", m.id)));
            }
            if mention_index.insert(m.id.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate mention id {}", m.id)));
            }
        }
        let words: Vec<Vec<u32>> = mentions
            .iter()
            .map(|m| m.tokens.iter().map(|t| word_id[t.as_str()]).collect())
            .collect();
        let k = cfg.topics;
        let mut rng = sweep_rng(cfg.seed, 0);
        let z: Vec<Vec<u32>> = words
            .iter()
            .map(|ws| ws.iter().map(|_| rng.gen_range(0..k as u32)).collect())
            .collect();
        let mut state = Self {
            emotion,
            k,
            alpha: T::from_f64_lossy(cfg.alpha()),
            beta: T::from_f64_lossy(cfg.beta),
            gamma: T::from_f64_lossy(cfg.gamma),
            seed: cfg.seed,
            iteration: 0,
            average_last: cfg.average_last,
            vocab,
            dates,
            mention_ids: mentions.iter().map(|m| m.id.clone()).collect(),
            mention_index,
            words,
            mention_date: mentions.iter().map(|m| date_id[&m.date]).collect(),
            z,
            n_mk: Vec::new(),
            n_kw: Vec::new(),
            n_kd: Vec::new(),
            n_k: Vec::new(),
            accum: None,
        };
        let t = state.recount();
        state.n_mk = t.n_mk;
        state.n_kw = t.n_kw;
        state.n_kd = t.n_kd;
        state.n_k = t.n_k;
        Ok(state)
    }

    pub fn topics(&self) -> usize {
        self.k
    }

    pub fn emotion(&self) -> Option<EmotionLabel> {
        self.emotion
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn num_mentions(&self) -> usize {
        self.mention_ids.len()
    }

    pub fn mention_ids(&self) -> &[String] {
        &self.mention_ids
    }

    pub fn assignments(&self, m: usize) -> &[u32] {
        &self.z[m]
    }

    pub fn mention_words(&self, m: usize) -> &[u32] {
        &self.words[m]
    }

    pub fn mention_date_index(&self, m: usize) -> usize {
        self.mention_date[m] as usize
    }

    pub fn priors(&self) -> (T, T, T) {
        (self.alpha, self.beta, self.gamma)
    }

    pub fn counts(&self) -> CountTables {
        CountTables {
            n_mk: self.n_mk.clone(),
            n_kw: self.n_kw.clone(),
            n_kd: self.n_kd.clone(),
            n_k: self.n_k.clone(),
        }
    }

    pub fn topic_word_count(&self, k: usize, w: usize) -> u32 {
        self.n_kw[k * self.vocab.len() + w]
    }

    pub fn topic_date_count(&self, k: usize, d: usize) -> u32 {
        self.n_kd[k * self.dates.len() + d]
    }

    pub fn topic_count(&self, k: usize) -> u32 {
        self.n_k[k]
    }

    /// Count tables rebuilt from the assignments alone.
    pub fn recount(&self) -> CountTables {
        let (k, v, nd) = (self.k, self.vocab.len(), self.dates.len());
        let mut t = CountTables {
            n_mk: vec![0; self.words.len() * k],
            n_kw: vec![0; k * v],
            n_kd: vec![0; k * nd],
            n_k: vec![0; k],
        };
        for (m, (ws, zs)) in self.words.iter().zip(&self.z).enumerate() {
            let d = self.mention_date[m] as usize;
            for (&w, &topic) in ws.iter().zip(zs) {
                let topic = topic as usize;
                t.n_mk[m * k + topic] += 1;
                t.n_kw[topic * v + w as usize] += 1;
                t.n_kd[topic * nd + d] += 1;
                t.n_k[topic] += 1;
            }
        }
        t
    }

    /// Checks that the stored count tables agree with the assignments.
    pub fn audit(&self) -> Result<()> {
        if self.recount() != self.counts() {
            return Err(Error::Config("count tables inconsistent with assignments".into()));
        }
        Ok(())
    }

    fn weights(&self, m: usize, w: usize, d: usize, out: &mut [T]) {
        let v = T::from_count(self.vocab.len());
        let nd = T::from_count(self.dates.len());
        let (nv, ndates) = (self.vocab.len(), self.dates.len());
        for (k, o) in out.iter_mut().enumerate() {
            let nk = T::from_count(self.n_k[k] as usize);
            let doc = T::from_count(self.n_mk[m * self.k + k] as usize) + self.alpha;
            let word = (T::from_count(self.n_kw[k * nv + w] as usize) + self.beta) / (nk + v * self.beta);
            let date = (T::from_count(self.n_kd[k * ndates + d] as usize) + self.gamma) / (nk + nd * self.gamma);
            *o = doc * word * date;
        }
    }

    fn adjust(&mut self, m: usize, w: usize, d: usize, k: usize, inc: bool) {
        let (nv, nd) = (self.vocab.len(), self.dates.len());
        let cells = [
            &mut self.n_mk[m * self.k + k],
            &mut self.n_kw[k * nv + w],
            &mut self.n_kd[k * nd + d],
            &mut self.n_k[k],
        ];
        for c in cells {
            if inc {
                *c += 1;
            } else {
                *c -= 1;
            }
        }
    }

    /// Normalized full conditional of token `i` of mention `m`, computed
    /// with that token's own assignment removed from the counts.
    pub fn conditional(&self, m: usize, i: usize) -> Vec<T> {
        let mut scratch = self.clone();
        let w = self.words[m][i] as usize;
        let d = self.mention_date[m] as usize;
        scratch.adjust(m, w, d, self.z[m][i] as usize, false);
        let mut p = vec![T::zero(); self.k];
        scratch.weights(m, w, d, &mut p);
        let total: T = p.iter().copied().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    /// One pass over every token in mention order.
    pub fn sweep(&mut self) {
        self.iteration += 1;
        let mut rng = sweep_rng(self.seed, self.iteration);
        let mut p = vec![T::zero(); self.k];
        for m in 0..self.words.len() {
            let d = self.mention_date[m] as usize;
            for i in 0..self.words[m].len() {
                let w = self.words[m][i] as usize;
                let old = self.z[m][i] as usize;
                self.adjust(m, w, d, old, false);
                self.weights(m, w, d, &mut p);
                let total: T = p.iter().copied().sum();
                let mut u = T::from_f64_lossy(rng.gen::<f64>()) * total;
                let mut new = self.k - 1;
                for (k, &pk) in p.iter().enumerate() {
                    if u < pk {
                        new = k;
                        break;
                    }
                    u -= pk;
                }
                self.z[m][i] = new as u32;
                self.adjust(m, w, d, new, true);
            }
        }
    }

    fn accumulate(&mut self) {
        let n = self.n_mk.len();
        let (acc, count) = self.accum.get_or_insert_with(|| (vec![0; n], 0));
        for (a, &c) in acc.iter_mut().zip(&self.n_mk) {
            *a += u64::from(c);
        }
        *count += 1;
    }

    /// `p(k | m) = (n_mk + α) / (len(m) + Kα)`, using averaged counts when
    /// averaging was enabled.
    pub fn mention_posterior(&self, mention_id: &str) -> Result<Vec<T>> {
        let m = *self
            .mention_index
            .get(mention_id)
            .ok_or_else(|| Error::UnknownMention(mention_id.to_string()))?;
        Ok(self.posterior_at(m))
    }

    pub fn posterior_at(&self, m: usize) -> Vec<T> {
        let len = T::from_count(self.words[m].len());
        let denom = len + T::from_count(self.k) * self.alpha;
        match &self.accum {
            Some((acc, sweeps)) if *sweeps > 0 => {
                let s = T::from_count(*sweeps as usize);
                (0..self.k)
                    .map(|k| (T::from_count(acc[m * self.k + k] as usize) / s + self.alpha) / denom)
                    .collect()
            }
            _ => (0..self.k)
                .map(|k| (T::from_count(self.n_mk[m * self.k + k] as usize) + self.alpha) / denom)
                .collect(),
        }
    }

    /// `(n_kw + β) / (n_k + Vβ)`.
    pub fn word_probability(&self, k: usize, w: usize) -> T {
        let v = T::from_count(self.vocab.len());
        (T::from_count(self.topic_word_count(k, w) as usize) + self.beta)
            / (T::from_count(self.n_k[k] as usize) + v * self.beta)
    }

    /// `(n_kd + γ) / (n_k + Dγ)`.
    pub fn date_probability(&self, k: usize, d: usize) -> T {
        let nd = T::from_count(self.dates.len());
        (T::from_count(self.topic_date_count(k, d) as usize) + self.gamma)
            / (T::from_count(self.n_k[k] as usize) + nd * self.gamma)
    }

    pub fn write_checkpoint<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut h = Header::new()
            .with("kind", "date-lda")
            .with("scalar", T::NAME)
            .with("k", self.k)
            .with("alpha", self.alpha)
            .with("beta", self.beta)
            .with("gamma", self.gamma)
            .with("seed", self.seed)
            .with("iteration", self.iteration)
            .with("average_last", self.average_last);
        if let Some(e) = self.emotion {
            h = h.with("emotion", e.id());
        }
        h.write_to(w)?;
        writeln!(w, "vocab\t{}", self.vocab.join("\t"))?;
        let dates: Vec<String> = self.dates.iter().map(|d| d.format("%Y-%m-%d").to_string()).collect();
        writeln!(w, "dates\t{}", dates.join("\t"))?;
        for m in 0..self.words.len() {
            let pairs: Vec<String> = self.words[m]
                .iter()
                .zip(&self.z[m])
                .map(|(w, z)| format!("{w}:{z}"))
                .collect();
            writeln!(w, "m\t{}\t{}\t{}", self.mention_ids[m], self.mention_date[m], pairs.join(" "))?;
        }
        let join = |xs: &[u32]| xs.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        writeln!(w, "nk\t{}", join(&self.n_k))?;
        for k in 0..self.k {
            let v = self.vocab.len();
            writeln!(w, "nkw\t{k}\t{}", join(&self.n_kw[k * v..(k + 1) * v]))?;
        }
        for k in 0..self.k {
            let nd = self.dates.len();
            writeln!(w, "nkd\t{k}\t{}", join(&self.n_kd[k * nd..(k + 1) * nd]))?;
        }
        if let Some((acc, sweeps)) = &self.accum {
            let s: Vec<String> = acc.iter().map(u64::to_string).collect();
            writeln!(w, "accum\t{sweeps}\t{}", s.join(" "))?;
        }
        Ok(())
    }

    /// Reloads a checkpoint and verifies its counts against the stored
    /// assignments.
    pub fn parse_checkpoint(text: &str) -> Result<Self> {
        const WHAT: &str = "topic checkpoint";
        let (header, body) = split_header(WHAT, text)?;
        header.expect_kind(WHAT, "date-lda")?;
        if header.get("scalar") != Some(T::NAME) {
            return Err(Error::format(WHAT, 1, "scalar type mismatch"));
        }
        let k: usize = header.require(WHAT, "k")?;
        let emotion = match header.get("emotion") {
            Some(e) => Some(EmotionLabel::from_id(e).ok_or_else(|| Error::format(WHAT, 1, "bad emotion"))?),
            None => None,
        };
        let mut vocab = Vec::new();
        let mut dates = Vec::new();
        let mut mention_ids = Vec::new();
        let mut mention_date = Vec::new();
        let mut words = Vec::new();
        let mut z = Vec::new();
        let mut n_k = Vec::new();
        let mut kw: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        let mut kd: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
        let mut accum = None;
        let nums = |s: &str| -> Option<Vec<u32>> {
            s.split(' ').filter(|x| !x.is_empty()).map(|x| x.parse().ok()).collect()
        };
        for (n, line) in body {
            let bad = |m: &str| Error::format(WHAT, n, m.to_string());
            let f: Vec<&str> = line.split('\t').collect();
            match f[0] {
                "vocab" => vocab = f[1..].iter().map(|s| s.to_string()).collect(),
                "dates" => {
                    dates = f[1..]
                        .iter()
                        .map(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d"))
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("bad date"))?
                }
                "m" if f.len() == 4 => {
                    mention_ids.push(f[1].to_string());
                    mention_date.push(f[2].parse::<u32>().map_err(|_| bad("bad date index"))?);
                    let mut ws = Vec::new();
                    let mut zs = Vec::new();
                    for pair in f[3].split(' ') {
                        let (w, t) = pair.split_once(':').ok_or_else(|| bad("bad word:topic pair"))?;
                        ws.push(w.parse::<u32>().map_err(|_| bad("bad word id"))?);
                        zs.push(t.parse::<u32>().map_err(|_| bad("bad topic"))?);
                    }
                    words.push(ws);
                    z.push(zs);
                }
                "nk" if f.len() == 2 => n_k = nums(f[1]).ok_or_else(|| bad("bad counts"))?,
                "nkw" | "nkd" if f.len() == 3 => {
                    let topic: usize = f[1].parse().map_err(|_| bad("bad topic"))?;
                    let row = nums(f[2]).ok_or_else(|| bad("bad counts"))?;
                    if f[0] == "nkw" { &mut kw } else { &mut kd }.insert(topic, row);
                }
                "accum" if f.len() == 3 => {
                    let sweeps: u64 = f[1].parse().map_err(|_| bad("bad sweep count"))?;
                    let acc: Vec<u64> = f[2]
                        .split(' ')
                        .map(|x| x.parse().ok())
                        .collect::<Option<_>>()
                        .ok_or_else(|| bad("bad counts"))?;
                    accum = Some((acc, sweeps));
                }
                _ => return Err(bad("unknown or malformed line")),
            }
        }
        let in_range = words.iter().flatten().all(|&w| (w as usize) < vocab.len())
            && z.iter().flatten().all(|&t| (t as usize) < k)
            && mention_date.iter().all(|&d| (d as usize) < dates.len());
        if !in_range || words.is_empty() {
            return Err(Error::format(WHAT, 0, "assignments out of range"));
        }
        let flatten = |m: BTreeMap<usize, Vec<u32>>| -> Vec<u32> { m.into_values().flatten().collect() };
        let mention_index = mention_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let state = Self {
            emotion,
            k,
            alpha: header.require(WHAT, "alpha")?,
            beta: header.require(WHAT, "beta")?,
            gamma: header.require(WHAT, "gamma")?,
            seed: header.require(WHAT, "seed")?,
            iteration: header.require(WHAT, "iteration")?,
            average_last: header.require(WHAT, "average_last")?,
            vocab,
            dates,
            mention_ids,
            mention_index,
            words,
            mention_date,
            z,
            n_mk: Vec::new(),
            n_kw: flatten(kw),
            n_kd: flatten(kd),
            n_k,
            accum,
        };
        let t = state.recount();
        if t.n_kw != state.n_kw || t.n_kd != state.n_kd || t.n_k != state.n_k {
            return Err(Error::format(WHAT, 0, "stored counts disagree with assignments"));
        }
        Ok(Self { n_mk: t.n_mk, ..state })
    }
}

/// Runs `cfg.iterations` sweeps from a seeded random start; the final
/// sweep's assignments are kept.
pub fn gibbs_fit<T: Scalar>(mentions: &[TriggerMention], cfg: &GibbsConfig) -> Result<DateLdaState<T>> {
    gibbs_fit_with(mentions, cfg, |_| {})
}

/// Like [`gibbs_fit`], calling `observe` after every sweep.
pub fn gibbs_fit_with<T: Scalar>(
    mentions: &[TriggerMention],
    cfg: &GibbsConfig,
    observe: impl FnMut(&DateLdaState<T>),
) -> Result<DateLdaState<T>> {
    Ok(gibbs_resume(DateLdaState::init(mentions, cfg)?, cfg, observe))
}

/// Continues a chain, fresh or restored from a checkpoint, until it has
/// run `cfg.iterations` sweeps in total. Only the sweep budget and the
/// averaging window are read from `cfg`.
pub fn gibbs_resume<T: Scalar>(
    mut state: DateLdaState<T>,
    cfg: &GibbsConfig,
    mut observe: impl FnMut(&DateLdaState<T>),
) -> DateLdaState<T> {
    let avg_from = cfg.iterations.saturating_sub(cfg.average_last);
    while state.iteration() < cfg.iterations {
        let it = state.iteration();
        state.sweep();
        if cfg.average_last > 0 && it >= avg_from {
            state.accumulate();
        }
        observe(&state);
    }
    state
}
