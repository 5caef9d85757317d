//! On-disk layout of a run directory and the bootstrap round driver that
//! the command line and the annotation service share.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::corpus::{ingest, Corpus, LabelState};
use crate::emoclass::EmotionLabel;
use crate::error::{Error, Result};
use crate::retrieval::{BootstrapConfig, BootstrapRound, KeywordList, RoundPhase};
use crate::textfeat::tokenize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn join(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn corpus(&self) -> PathBuf {
        self.join("corpus.jsonl")
    }

    pub fn rejections(&self) -> PathBuf {
        self.join("rejections.tsv")
    }

    pub fn partitions(&self) -> PathBuf {
        self.join("partitions.tsv")
    }

    pub fn labels(&self) -> PathBuf {
        self.join("labels.log")
    }

    /// tf-idf candidates offered to the curator.
    pub fn keyword_candidates(&self) -> PathBuf {
        self.join("keywords/candidates.txt")
    }

    /// Curated round-0 keywords.
    pub fn seed_keywords(&self) -> PathBuf {
        self.join("keywords/seed.txt")
    }

    /// Keywords in force after bootstrapping.
    pub fn final_keywords(&self) -> PathBuf {
        self.join("keywords/final.txt")
    }

    pub fn harvest(&self) -> PathBuf {
        self.join("keywords/harvest.txt")
    }

    pub fn round(&self, r: u32) -> PathBuf {
        self.join(&format!("rounds/round-{r}.txt"))
    }

    pub fn round_model_rel(r: u32) -> String {
        format!("models/relevance-{r}.txt")
    }

    pub fn round_model(&self, r: u32) -> PathBuf {
        self.join(&Self::round_model_rel(r))
    }

    pub fn emotion_model(&self) -> PathBuf {
        self.join("models/emotion.txt")
    }

    pub fn trigger_model(&self) -> PathBuf {
        self.join("models/trigger.txt")
    }

    pub fn related(&self) -> PathBuf {
        self.join("predictions/related.tsv")
    }

    pub fn emotions(&self) -> PathBuf {
        self.join("predictions/emotions.tsv")
    }

    pub fn spans(&self) -> PathBuf {
        self.join("triggers/spans.tsv")
    }

    pub fn mentions(&self) -> PathBuf {
        self.join("triggers/mentions.tsv")
    }

    pub fn topic_state(&self, e: EmotionLabel) -> PathBuf {
        self.join(&format!("topics/{}.ckpt", e.id()))
    }

    pub fn curation(&self, e: EmotionLabel) -> PathBuf {
        self.join(&format!("topics/{}.curation", e.id()))
    }

    pub fn topic_report(&self, e: EmotionLabel) -> PathBuf {
        self.join(&format!("topics/{}.report", e.id()))
    }

    pub fn topic_trends(&self) -> PathBuf {
        self.join("trends/topic.csv")
    }

    pub fn emotion_trends(&self, e: EmotionLabel) -> PathBuf {
        self.join(&format!("trends/{}.csv", e.id()))
    }

    pub fn subcat_trends(&self) -> PathBuf {
        self.join("trends/subcat.csv")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.join("eval")
    }

    pub fn synth_truth(&self) -> PathBuf {
        self.join("synth/truth.txt")
    }

    pub fn manifest(&self) -> PathBuf {
        self.join("manifest.json")
    }

    pub fn lock(&self) -> PathBuf {
        self.join(".lock")
    }

    pub fn load_corpus(&self) -> Result<Corpus> {
        let path = self.corpus();
        let f = fs::File::open(&path).map_err(|source| Error::Unreadable { path, source })?;
        Ok(ingest(std::io::BufReader::new(f))?.0)
    }

    /// Rounds 0, 1, ... up to the first missing file.
    pub fn load_rounds(&self) -> Result<Vec<BootstrapRound>> {
        let mut out = Vec::new();
        loop {
            let path = self.round(out.len() as u32);
            if !path.exists() {
                return Ok(out);
            }
            out.push(BootstrapRound::parse(&read_text(&path)?)?);
        }
    }

    pub fn save_round(&self, round: &BootstrapRound) -> Result<()> {
        let mut buf = Vec::new();
        round.write_to(&mut buf)?;
        write_atomic(&self.round(round.round), &buf)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a sibling temporary file and renames it into place, so
/// readers never observe a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_data()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// One state transition of the bootstrap loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Advance {
    Opened { round: u32, harvested: usize, sample: usize },
    Closed { round: u32, test_f1: f64 },
    Awaiting { round: u32, pending: usize },
    Complete { rounds: u32 },
}

/// Moves the bootstrap loop one step: opens round 0 from the seed list,
/// closes the open round once its sample is fully labeled, or opens the
/// next round from the previous round's expanded keywords. Stops after
/// `max_rounds` closed rounds and writes the final keyword list then.
pub fn advance_bootstrap(
    dir: &RunDir,
    corpus: &Corpus,
    labels: &LabelState,
    cfg: &BootstrapConfig,
    max_rounds: u32,
) -> Result<Advance> {
    let mut rounds = dir.load_rounds()?;
    let Some(last) = rounds.last() else {
        let seed = KeywordList::parse(&read_text(&dir.seed_keywords())?)?;
        return open_round(dir, corpus, seed, &rounds, cfg);
    };
    match last.phase {
        RoundPhase::AwaitingLabels => {
            let mut current = rounds.pop().expect("nonempty");
            let pending = current.pending(labels).len();
            if pending > 0 {
                return Ok(Advance::Awaiting { round: current.round, pending });
            }
            let model = current.close::<f64>(corpus, labels, &rounds, cfg)?;
            let mut buf = Vec::new();
            model.write_to(&mut buf)?;
            write_atomic(&dir.round_model(current.round), &buf)?;
            current.model_id = Some(RunDir::round_model_rel(current.round));
            dir.save_round(&current)?;
            if current.round + 1 >= max_rounds {
                write_final_keywords(dir, &current)?;
            }
            Ok(Advance::Closed {
                round: current.round,
                test_f1: current.test_f1.unwrap_or(0.0),
            })
        }
        RoundPhase::Closed if (rounds.len() as u32) < max_rounds => {
            let next = last
                .next_keywords
                .clone()
                .ok_or_else(|| Error::Config(format!("round {} has no expanded keywords", last.round)))?;
            open_round(dir, corpus, next, &rounds, cfg)
        }
        RoundPhase::Closed => {
            write_final_keywords(dir, last)?;
            Ok(Advance::Complete { rounds: rounds.len() as u32 })
        }
    }
}

fn open_round(
    dir: &RunDir,
    corpus: &Corpus,
    keywords: KeywordList,
    history: &[BootstrapRound],
    cfg: &BootstrapConfig,
) -> Result<Advance> {
    let round = BootstrapRound::open(corpus, keywords, history, cfg);
    dir.save_round(&round)?;
    Ok(Advance::Opened {
        round: round.round,
        harvested: round.harvested,
        sample: round.sample.len(),
    })
}

/// The final list is the last round's harvesting keywords; its expansion
/// is never used to harvest.
fn write_final_keywords(dir: &RunDir, last: &BootstrapRound) -> Result<()> {
    let mut buf = Vec::new();
    last.keywords.write_to(&mut buf)?;
    write_atomic(&dir.final_keywords(), &buf)
}

/// Server-side token surfaces of a post, the indices annotators see.
pub fn post_tokens(corpus: &Corpus, id: &str) -> Option<Vec<String>> {
    corpus.get(id).map(|p| tokenize(&p.text).surfaces().map(str::to_string).collect())
}
