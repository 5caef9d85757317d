use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use crate::corpus::{derive_seed, sample_uniform, Corpus, LabelPayload, LabelState, Task};
use crate::emoclass::{binary_f1, Example, MlpBinaryClassifier, MlpHyperParams};
use crate::error::{Error, Result};
use crate::format::{split_header, Header};
use crate::retrieval::keywords::{frequent_terms, harvest, KeywordList};
use crate::retrieval::saliency::{expand_keywords, ExpansionConfig, STOPWORD_DF_RANK};
use crate::retrieval::split::{make_split, Split, SplitPart};
use crate::scalar::Scalar;
use crate::textfeat::{tokenize, FeatureConfig, KeywordScore, TokenSequence};

pub const DEFAULT_SAMPLE_SIZE: usize = 1000;
pub const DEFAULT_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub sample_size: usize,
    pub seed: u64,
    pub features: FeatureConfig,
    pub mlp: MlpHyperParams,
    pub expansion: ExpansionConfig,
    /// How many of the corpus's highest-df tokens are barred from expansion.
    pub stopword_rank: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            sample_size: DEFAULT_SAMPLE_SIZE,
            seed: 0,
            features: FeatureConfig::default(),
            mlp: MlpHyperParams::default(),
            expansion: ExpansionConfig::default(),
            stopword_rank: STOPWORD_DF_RANK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundPhase {
    AwaitingLabels,
    Closed,
}

impl fmt::Display for RoundPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoundPhase::AwaitingLabels => "awaiting-labels",
            RoundPhase::Closed => "closed",
        })
    }
}

/// One pass of harvest, label, train, expand.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapRound {
    pub round: u32,
    pub phase: RoundPhase,
    pub keywords: KeywordList,
    pub harvested: usize,
    /// Posts sent for relevance labeling, in sampling order.
    pub sample: Vec<String>,
    pub split: Option<Split>,
    pub model_id: Option<String>,
    pub test_f1: Option<f64>,
    pub next_keywords: Option<KeywordList>,
}

pub enum RoundOutcome<T> {
    Awaiting { pending: Vec<String> },
    Closed(Box<MlpBinaryClassifier<T>>),
}

fn relevance(labels: &LabelState, id: &str) -> Option<bool> {
    match labels.latest(id, Task::Relevance, None).map(|r| &r.payload) {
        Some(LabelPayload::Relevance(b)) => Some(*b),
        _ => None,
    }
}

impl BootstrapRound {
    /// Harvests with `keywords` and samples posts not sampled by any
    /// earlier round.
    pub fn open(corpus: &Corpus, keywords: KeywordList, history: &[BootstrapRound], cfg: &BootstrapConfig) -> Self {
        let round = history.len() as u32;
        let hits = harvest(corpus, &keywords);
        let seen: BTreeSet<&str> = history.iter().flat_map(|r| r.sample.iter().map(String::as_str)).collect();
        let fresh: Vec<String> = hits.iter().filter(|id| !seen.contains(id.as_str())).cloned().collect();
        let sample = sample_uniform(&fresh, cfg.sample_size, derive_seed(cfg.seed, &format!("sample/{round}")));
        Self {
            round,
            phase: RoundPhase::AwaitingLabels,
            keywords: KeywordList { round, ..keywords },
            harvested: hits.len(),
            sample,
            split: None,
            model_id: None,
            test_f1: None,
            next_keywords: None,
        }
    }

    /// Sampled posts that still lack a relevance label.
    pub fn pending(&self, labels: &LabelState) -> Vec<String> {
        self.sample.iter().filter(|id| relevance(labels, id).is_none()).cloned().collect()
    }

    /// Splits the labeled sample, trains a relevance model on the training
    /// parts of this and every earlier round, scores it on this round's test
    /// part and proposes the next keyword list.
    pub fn close<T: Scalar>(
        &mut self,
        corpus: &Corpus,
        labels: &LabelState,
        history: &[BootstrapRound],
        cfg: &BootstrapConfig,
    ) -> Result<MlpBinaryClassifier<T>> {
        if self.phase == RoundPhase::Closed {
            return Err(Error::Config(format!("round {} is already closed", self.round)));
        }
        let pending = self.pending(labels);
        if !pending.is_empty() {
            return Err(Error::AwaitingLabels { round: self.round, pending: pending.len() });
        }
        let split = make_split(&self.sample, derive_seed(cfg.seed, &format!("split/{}", self.round)))?;
        let tokens = |id: &str| -> Result<TokenSequence> {
            corpus
                .get(id)
                .map(|p| tokenize(&p.text))
                .ok_or_else(|| Error::MissingPrediction(id.to_string()))
        };
        let examples = |part: SplitPart| -> Result<Vec<Example<T>>> {
            history
                .iter()
                .filter_map(|r| r.split.as_ref())
                .chain(std::iter::once(&split))
                .flat_map(|s| s.part(part).iter())
                .map(|id| {
                    let y = relevance(labels, id).ok_or_else(|| Error::MissingPrediction(id.clone()))?;
                    Ok((cfg.features.featurize(&tokens(id)?), y))
                })
                .collect()
        };
        let train = examples(SplitPart::Train)?;
        let dev = examples(SplitPart::Dev)?;
        let hyper = MlpHyperParams { seed: derive_seed(cfg.seed, &format!("relevance/{}", self.round)), ..cfg.mlp.clone() };
        let model = MlpBinaryClassifier::train(&train, &dev, &hyper)?;

        let half = T::from_f64_lossy(0.5);
        let mut predicted = Vec::new();
        let mut gold = Vec::new();
        for id in &split.test {
            predicted.push(model.predict_proba(&cfg.features.featurize(&tokens(id)?))? >= half);
            gold.push(relevance(labels, id).unwrap_or(false));
        }
        let f1: f64 = binary_f1(&predicted, &gold)?;

        let positives: Vec<TokenSequence> = split
            .train
            .iter()
            .filter(|id| relevance(labels, id) == Some(true))
            .map(|id| tokens(id))
            .collect::<Result<_>>()?;
        let docs: Vec<TokenSequence> = corpus.posts().iter().map(|p| tokenize(&p.text)).collect();
        let excluded = frequent_terms(&docs, cfg.stopword_rank);
        let next = expand_keywords(&model, &cfg.features, &positives, &excluded, &self.keywords, &cfg.expansion)?;

        self.split = Some(split);
        self.test_f1 = Some(f1);
        self.next_keywords = Some(next);
        self.phase = RoundPhase::Closed;
        Ok(model)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        Header::new()
            .with("kind", "bootstrap-round")
            .with("round", self.round)
            .with("phase", self.phase)
            .write_to(w)?;
        writeln!(w, "harvested\t{}", self.harvested)?;
        for k in &self.keywords.entries {
            writeln!(w, "keyword\t{}\t{}", k.term, k.score)?;
        }
        for id in &self.sample {
            writeln!(w, "sample\t{id}")?;
        }
        if let Some(split) = &self.split {
            for (id, part) in split.assignments() {
                writeln!(w, "split\t{id}\t{part}")?;
            }
        }
        if let Some(m) = &self.model_id {
            writeln!(w, "model\t{m}")?;
        }
        if let Some(f1) = self.test_f1 {
            writeln!(w, "test_f1\t{f1}")?;
        }
        if let Some(next) = &self.next_keywords {
            for k in &next.entries {
                writeln!(w, "next\t{}\t{}", k.term, k.score)?;
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "round state";
        let (header, body) = split_header(WHAT, text)?;
        header.expect_kind(WHAT, "bootstrap-round")?;
        let round: u32 = header.require(WHAT, "round")?;
        let phase = match header.get("phase") {
            Some("awaiting-labels") => RoundPhase::AwaitingLabels,
            Some("closed") => RoundPhase::Closed,
            _ => return Err(Error::format(WHAT, 1, "bad phase")),
        };
        let mut out = Self {
            round,
            phase,
            keywords: KeywordList { round, entries: Vec::new() },
            harvested: 0,
            sample: Vec::new(),
            split: None,
            model_id: None,
            test_f1: None,
            next_keywords: None,
        };
        let mut next = Vec::new();
        for (n, line) in body {
            let bad = || Error::format(WHAT, n, "malformed line");
            let f: Vec<&str> = line.split('\t').collect();
            let score = |s: &str| s.parse::<f64>().map_err(|_| bad());
            match f.as_slice() {
                ["harvested", c] => out.harvested = c.parse().map_err(|_| bad())?,
                ["keyword", t, s] => out.keywords.entries.push(KeywordScore { term: t.to_string(), score: score(s)? }),
                ["sample", id] => out.sample.push(id.to_string()),
                ["split", id, p] => {
                    let part = SplitPart::from_id(p).ok_or_else(bad)?;
                    out.split.get_or_insert_with(Split::default).part_mut(part).push(id.to_string());
                }
                ["model", m] => out.model_id = Some(m.to_string()),
                ["test_f1", v] => out.test_f1 = Some(score(v)?),
                ["next", t, s] => next.push(KeywordScore { term: t.to_string(), score: score(s)? }),
                _ => return Err(bad()),
            }
        }
        if !next.is_empty() {
            out.next_keywords = Some(KeywordList::new(round + 1, next)?);
        }
        Ok(out)
    }
}

/// Closes `round` when its labels are complete; otherwise reports what is
/// still pending and leaves the round open.
pub fn run_round<T: Scalar>(
    round: &mut BootstrapRound,
    corpus: &Corpus,
    labels: &LabelState,
    history: &[BootstrapRound],
    cfg: &BootstrapConfig,
) -> Result<RoundOutcome<T>> {
    let pending = round.pending(labels);
    if !pending.is_empty() {
        return Ok(RoundOutcome::Awaiting { pending });
    }
    Ok(RoundOutcome::Closed(Box::new(round.close(corpus, labels, history, cfg)?)))
}
