mod emotion;
mod eval;
mod prepare;
mod topics;
mod trigger;

use std::io::Write;
use std::path::Path;

use affectline_core::emoclass::EmotionLabel;
use affectline_core::rundir::write_atomic;

use crate::error::{config_err, CliResult};
use crate::{Command, Ctx, StageIo};

pub fn dispatch(ctx: &Ctx, cmd: Command) -> CliResult<StageIo> {
    match cmd {
        Command::Synth { days, posts_per_day } => prepare::synth(ctx, days, posts_per_day),
        Command::Ingest { input } => prepare::ingest(ctx, input),
        Command::SeedKeywords { targets, background, select, from_file, .. } => {
            prepare::seed_keywords(ctx, targets, background, select, from_file)
        }
        Command::Harvest { keywords } => prepare::harvest_posts(ctx, keywords),
        Command::Bootstrap { .. } => prepare::bootstrap(ctx),
        Command::TrainEmotion => emotion::train(ctx),
        Command::Classify => emotion::classify(ctx),
        Command::Trends { .. } => emotion::trends(ctx),
        Command::TrainTrigger { dense } => trigger::train(ctx, dense),
        Command::TagTriggers { dense } => trigger::tag(ctx, dense),
        Command::FitTopics { emotion, .. } => topics::fit(ctx, emotion),
        Command::TopicReport { .. } => topics::report(ctx),
        Command::CurateTopics { emotion, discard, keep } => topics::curate(ctx, &emotion, &discard, &keep),
        Command::SubcatTrends { .. } => topics::subcat_trends(ctx),
        Command::Eval => eval::summarize(ctx),
        Command::Serve { token, .. } => prepare::serve(ctx, token),
    }
}

/// Renders an artifact in memory and writes it atomically.
pub(crate) fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> CliResult<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(path, &buf)?;
    Ok(())
}

pub(crate) fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

pub(crate) fn parse_emotion(s: &str) -> CliResult<EmotionLabel> {
    EmotionLabel::from_id(s).ok_or_else(|| config_err(format!("unknown emotion `{s}`")))
}
