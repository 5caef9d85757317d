use std::collections::BTreeSet;

use affectline_core::emoclass::EmotionLabel;
use affectline_core::retrieval::harvest;
use affectline_core::rundir::read_text;
use affectline_core::synth::SynthTruth;
use affectline_core::trends::read_csv;
use affectline_core::Series;
use serde_json::{json, Map, Value};

use super::write_json;
use crate::error::CliResult;
use crate::{Ctx, StageIo};

fn read_json(path: &std::path::Path) -> CliResult<Option<Value>> {
    if !path.exists() {
        return Ok(None);
    }
    let v = serde_json::from_str(&read_text(path)?).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(Some(v))
}

fn raw_series(path: &std::path::Path) -> CliResult<Option<Series>> {
    if !path.exists() {
        return Ok(None);
    }
    Ok(read_csv::<f64>(&read_text(path)?)?.into_iter().find(|s| s.smoothing.is_none()))
}

pub fn summarize(ctx: &Ctx) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let mut io = StageIo::default();
    let rounds = dir.load_rounds()?;
    let truth = if dir.synth_truth().exists() {
        io.inputs.push(dir.synth_truth());
        Some(SynthTruth::parse(&read_text(&dir.synth_truth())?)?)
    } else {
        None
    };
    let relevant: Option<BTreeSet<String>> = truth.as_ref().map(SynthTruth::related_ids);
    let corpus = if relevant.is_some() && !rounds.is_empty() { Some(dir.load_corpus()?) } else { None };

    let mut round_rows = Vec::new();
    for r in &rounds {
        let mut row = json!({
            "round": r.round,
            "phase": r.phase.to_string(),
            "keywords": r.keywords.len(),
            "harvested": r.harvested,
            "sample": r.sample.len(),
            "test_f1": r.test_f1,
        });
        if let (Some(rel), Some(corpus)) = (&relevant, &corpus) {
            let hits = harvest(corpus, &r.keywords);
            let found = rel.iter().filter(|id| hits.contains(*id)).count();
            row["recall"] = json!(found as f64 / rel.len().max(1) as f64);
        }
        round_rows.push(row);
        io.inputs.push(dir.round(r.round));
    }

    let mut summary = Map::new();
    summary.insert("rounds".into(), Value::Array(round_rows));
    for (key, path) in [
        ("emotion", dir.eval_dir().join("emotion.json")),
        ("trigger", dir.eval_dir().join("trigger.json")),
    ] {
        if let Some(v) = read_json(&path)? {
            summary.insert(key.into(), v);
            io.inputs.push(path);
        }
    }

    if let Some(truth) = &truth {
        let expected = truth.expected_emotion_intensity();
        let mut mae = Map::new();
        let mut worst: Option<f64> = None;
        for e in EmotionLabel::ALL {
            let path = dir.emotion_trends(e);
            let Some(series) = raw_series(&path)? else { continue };
            io.inputs.push(path);
            let errs: Vec<f64> = expected
                .iter()
                .map(|(d, want)| (series.get(*d).unwrap_or(0.0) - want[e.index()]).abs())
                .collect();
            let m = errs.iter().sum::<f64>() / errs.len().max(1) as f64;
            worst = Some(worst.map_or(m, |w: f64| w.max(m)));
            mae.insert(e.id().into(), json!(m));
        }
        let mut synth = Map::new();
        if !mae.is_empty() {
            synth.insert("emotion_mae".into(), Value::Object(mae));
            synth.insert("emotion_mae_max".into(), json!(worst));
        }
        if let Some(topic) = raw_series(&dir.topic_trends())? {
            io.inputs.push(dir.topic_trends());
            let errs: Vec<f64> = truth
                .realized_relevance()
                .iter()
                .map(|(d, want)| (topic.get(*d).unwrap_or(0.0) - want).abs())
                .collect();
            synth.insert("topic_mae".into(), json!(errs.iter().sum::<f64>() / errs.len().max(1) as f64));
        }
        summary.insert("synthetic".into(), Value::Object(synth));
    }

    let out = dir.eval_dir().join("summary.json");
    let value = Value::Object(summary);
    write_json(&out, &value)?;
    println!("{}", serde_json::to_string_pretty(&value).map_err(anyhow::Error::from)?);
    io.outputs = vec![out];
    Ok(io)
}
