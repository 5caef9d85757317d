use affectline_core::corpus::{derive_seed, partition_by_day};
use affectline_core::emoclass::EmotionLabel;
use affectline_core::rundir::{read_text, write_atomic, RunDir};
use affectline_core::topics::{
    gibbs_resume, parse_mentions, subcategory_intensity, topic_report, Curation, CuratedTopics, DateLdaState,
    GibbsConfig, TopicStatus, TriggerMention,
};
use affectline_core::trends::{moving_average, write_csv};
use affectline_core::DateLda;

use super::{parse_emotion, write_with};
use crate::error::{config_err, CliError, CliResult};
use crate::{Ctx, StageIo};

fn checkpoint_bytes(state: &DateLda) -> Vec<u8> {
    let mut buf = Vec::new();
    state.write_checkpoint(&mut buf).expect("writing to memory");
    buf
}

/// A checkpoint continues only the chain it was started for.
fn resumable(state: &DateLda, cfg: &GibbsConfig, mentions: &[TriggerMention]) -> bool {
    let fresh = match DateLdaState::<f64>::init(mentions, &GibbsConfig { iterations: 0, ..cfg.clone() }) {
        Ok(s) => s,
        Err(_) => return false,
    };
    state.topics() == cfg.topics
        && state.seed() == cfg.seed
        && state.priors() == fresh.priors()
        && state.mention_ids() == fresh.mention_ids()
        && state.vocab() == fresh.vocab()
        && state.dates() == fresh.dates()
        && state.iteration() <= cfg.iterations
}

fn fit_one(dir: &RunDir, e: EmotionLabel, mentions: &[TriggerMention], cfg: &GibbsConfig, every: usize) -> CliResult<usize> {
    let path = dir.topic_state(e);
    let restored = std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| DateLdaState::<f64>::parse_checkpoint(&t).ok())
        .filter(|s| resumable(s, cfg, mentions));
    let start = match restored {
        Some(s) => {
            tracing::info!(emotion = e.id(), from = s.iteration(), "resuming topic chain");
            s
        }
        None => DateLdaState::init(mentions, cfg)?,
    };
    let from = start.iteration();
    let mut failed = None;
    let state = gibbs_resume(start, cfg, |s| {
        if s.iteration() % every == 0 && failed.is_none() {
            failed = write_atomic(&path, &checkpoint_bytes(s)).err();
        }
    });
    if let Some(err) = failed {
        return Err(err.into());
    }
    write_atomic(&path, &checkpoint_bytes(&state))?;
    Ok(state.iteration() - from)
}

pub fn fit(ctx: &Ctx, only: Option<String>) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let only = only.as_deref().map(parse_emotion).transpose()?;
    let mentions = parse_mentions(&read_text(&dir.mentions())?)?;
    let emotions: Vec<EmotionLabel> = EmotionLabel::ALL.into_iter().filter(|e| only.is_none_or(|o| o == *e)).collect();
    let groups: Vec<(EmotionLabel, Vec<TriggerMention>)> = emotions
        .iter()
        .map(|&e| (e, mentions.iter().filter(|m| m.emotion == e).cloned().collect::<Vec<_>>()))
        .filter(|(e, ms)| {
            if ms.is_empty() {
                tracing::warn!(emotion = e.id(), "no mentions; skipped");
            }
            !ms.is_empty()
        })
        .collect();
    let every = ctx.cfg.topics.checkpoint_every;
    let results: Vec<(EmotionLabel, usize, CliResult<usize>)> = std::thread::scope(|s| {
        let handles: Vec<_> = groups
            .iter()
            .map(|(e, ms)| {
                let cfg = ctx.cfg.gibbs(derive_seed(ctx.cfg.seed, &format!("topics/{}", e.id())));
                s.spawn(move || (*e, ms.len(), fit_one(dir, *e, ms, &cfg, every)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("topic fit panicked")).collect()
    });
    let mut io = StageIo::default();
    for (e, n, r) in results {
        let sweeps = r?;
        println!("{}: {n} mentions, {sweeps} sweeps run, {} topics", e.id(), ctx.cfg.topics.k);
        io.outputs.push(dir.topic_state(e));
    }
    io.arg("k", ctx.cfg.topics.k);
    io.arg("iters", ctx.cfg.topics.iters);
    if let Some(e) = only {
        io.arg("emotion", e.id());
    }
    io.inputs = vec![dir.mentions()];
    Ok(io)
}

fn load_state(dir: &RunDir, e: EmotionLabel) -> CliResult<Option<DateLda>> {
    let path = dir.topic_state(e);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(DateLdaState::parse_checkpoint(&read_text(&path)?)?))
}

fn load_curation(dir: &RunDir, e: EmotionLabel) -> CliResult<Curation> {
    let path = dir.curation(e);
    if !path.exists() {
        return Ok(Curation::default());
    }
    Ok(Curation::parse(&read_text(&path)?)?)
}

pub fn report(ctx: &Ctx) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let mut io = StageIo::default();
    for e in EmotionLabel::ALL {
        let Some(state) = load_state(dir, e)? else { continue };
        let curation = load_curation(dir, e)?;
        let report = topic_report(&state, ctx.cfg.topics.top_m, &curation);
        write_with(&dir.topic_report(e), |w| report.write_to(w))?;
        io.inputs.push(dir.topic_state(e));
        io.inputs.push(dir.curation(e));
        io.outputs.push(dir.topic_report(e));
    }
    if io.outputs.is_empty() {
        return Err(CliError::Missing(dir.topic_state(EmotionLabel::ALL[0])));
    }
    println!("{} topic reports written", io.outputs.len());
    io.arg("top_m", ctx.cfg.topics.top_m);
    Ok(io)
}

pub fn curate(ctx: &Ctx, emotion: &str, discard: &[usize], keep: &[usize]) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let e = parse_emotion(emotion)?;
    let state = load_state(dir, e)?.ok_or_else(|| CliError::Missing(dir.topic_state(e)))?;
    let mut curation = load_curation(dir, e)?;
    for (list, status) in [(discard, TopicStatus::Discarded), (keep, TopicStatus::Kept)] {
        for &k in list {
            if k >= state.topics() {
                return Err(config_err(format!("{} has topics 0..{}, got {k}", e.id(), state.topics())));
            }
            curation.set(k, status);
        }
    }
    write_with(&dir.curation(e), |w| curation.write_to(w))?;
    let kept = curation.kept_topics(state.topics());
    println!("{}: {} of {} topics kept", e.id(), kept.len(), state.topics());
    let mut io = StageIo::default();
    io.arg("emotion", e.id());
    io.inputs = vec![dir.topic_state(e)];
    io.outputs = vec![dir.curation(e)];
    Ok(io)
}

pub fn subcat_trends(ctx: &Ctx) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let corpus = dir.load_corpus()?;
    let parts = partition_by_day(&corpus);
    let mentions = parse_mentions(&read_text(&dir.mentions())?)?;
    let mut io = StageIo::default();
    let mut fitted = Vec::new();
    for e in EmotionLabel::ALL {
        if let Some(state) = load_state(dir, e)? {
            fitted.push((e, state, load_curation(dir, e)?));
            io.inputs.push(dir.topic_state(e));
            io.inputs.push(dir.curation(e));
        }
    }
    if fitted.is_empty() {
        return Err(CliError::Missing(dir.topic_state(EmotionLabel::ALL[0])));
    }
    let views: Vec<CuratedTopics<'_, f64>> = fitted
        .iter()
        .map(|(e, state, curation)| CuratedTopics { emotion: *e, state, curation })
        .collect();
    let mut series = subcategory_intensity(&parts, &mentions, &views)?;
    if let Some(w) = ctx.cfg.trends.smooth {
        let smoothed: Vec<_> = series.iter().map(|s| moving_average(s, w)).collect();
        series.extend(smoothed);
        io.arg("smooth", w);
    }
    write_with(&dir.subcat_trends(), |w| write_csv(&series, w))?;
    println!("{} subcategory series", series.len());
    io.inputs.extend([dir.corpus(), dir.mentions()]);
    io.outputs = vec![dir.subcat_trends()];
    Ok(io)
}
