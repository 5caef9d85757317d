use std::collections::BTreeSet;
use std::path::PathBuf;

use affectline_core::corpus::{derive_seed, LabelPayload, Task};
use affectline_core::emoclass::EmotionLabel;
use affectline_core::retrieval::{make_split, SplitPart};
use affectline_core::rundir::read_text;
use affectline_core::textfeat::{tokenize, TokenSequence};
use affectline_core::topics::{mentions_from_spans, write_mentions};
use affectline_core::trigger::{
    span_prf, tag_post, training_sequence, write_annotations, PrfScores, SidecarFeatures, TriggerAnnotation,
    TriggerSpan,
};
use affectline_core::Crf;
use serde_json::json;

use super::{write_json, write_with};
use crate::error::{config_err, CliResult};
use crate::tables::{load_labels, read_emotions};
use crate::{Ctx, StageIo};

fn load_sidecar(path: Option<&PathBuf>) -> CliResult<Option<SidecarFeatures<f64>>> {
    path.map(|p| Ok(SidecarFeatures::parse(&read_text(p)?)?)).transpose()
}

fn dense_rows(sidecar: Option<&SidecarFeatures<f64>>, post_id: &str, len: usize) -> Option<Vec<Vec<f64>>> {
    sidecar.map(|s| s.rows_for(post_id, len).unwrap_or_else(|| vec![vec![0.0; s.width]; len]))
}

/// One (post, emotion) pair with its gold spans.
struct Item {
    post_id: String,
    emotion: EmotionLabel,
    tokens: TokenSequence,
    spans: Vec<(usize, usize)>,
}

fn score(model: &Crf, items: &[&Item], sidecar: Option<&SidecarFeatures<f64>>) -> CliResult<PrfScores<f64>> {
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    for it in items {
        let dense = dense_rows(sidecar, &it.post_id, it.tokens.len());
        predicted.extend(tag_post(model, &it.post_id, &it.tokens, it.emotion, dense.as_deref())?);
        for &(s, e) in &it.spans {
            gold.push(TriggerSpan::new(&it.post_id, it.emotion, &it.tokens, s, e)?);
        }
    }
    Ok(span_prf(&predicted, &gold))
}

fn prf_json(s: &PrfScores<f64>) -> serde_json::Value {
    json!({ "precision": s.precision, "recall": s.recall, "f1": s.f1 })
}

pub fn train(ctx: &Ctx, dense: Option<PathBuf>) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let corpus = dir.load_corpus()?;
    let labels = load_labels(&dir.labels(), true)?;
    let triggers = labels.resolved(Task::Trigger, None);
    let emotions = labels.resolved(Task::Emotion, None);
    let sidecar = load_sidecar(dense.as_ref())?;

    let mut items = Vec::new();
    let mut ids = Vec::new();
    for (id, rec) in &triggers {
        let (LabelPayload::Trigger(spans), Some(post)) = (&rec.payload, corpus.get(id)) else {
            continue;
        };
        ids.push(id.clone());
        let mut set: BTreeSet<EmotionLabel> = match emotions.get(id).map(|r| &r.payload) {
            Some(LabelPayload::Emotion(s)) => s.clone(),
            _ => BTreeSet::new(),
        };
        set.extend(spans.iter().map(|s| s.emotion));
        let tokens = tokenize(&post.text);
        for e in set {
            items.push(Item {
                post_id: id.clone(),
                emotion: e,
                tokens: tokens.clone(),
                spans: spans.iter().filter(|s| s.emotion == e).map(|s| (s.start, s.end)).collect(),
            });
        }
    }
    let split = make_split(&ids, derive_seed(ctx.cfg.seed, "trigger-split"))?;
    let in_part = |p: SplitPart| -> Vec<&Item> {
        let members: BTreeSet<&str> = split.part(p).iter().map(String::as_str).collect();
        items.iter().filter(|it| members.contains(it.post_id.as_str())).collect()
    };
    let (features, hyper) = ctx.cfg.crf(sidecar.as_ref().map_or(0, |s| s.width));
    let train_seqs = in_part(SplitPart::Train)
        .into_iter()
        .map(|it| {
            let rows = dense_rows(sidecar.as_ref(), &it.post_id, it.tokens.len());
            training_sequence(&features, &it.tokens, it.emotion, &it.spans, rows.as_deref())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (model, report) = Crf::train(features, hyper, &train_seqs)?;
    let dev = score(&model, &in_part(SplitPart::Dev), sidecar.as_ref())?;
    let test = score(&model, &in_part(SplitPart::Test), sidecar.as_ref())?;

    write_with(&dir.trigger_model(), |w| model.write_to(w))?;
    let eval_path = dir.eval_dir().join("trigger.json");
    write_json(
        &eval_path,
        &json!({
            "posts": ids.len(),
            "train_sequences": train_seqs.len(),
            "epochs": report.objective_history.len() - 1,
            "objective": report.objective_history.last(),
            "dev": prf_json(&dev),
            "test": prf_json(&test),
        }),
    )?;
    println!(
        "trigger model: test span P {:.4} R {:.4} F1 {:.4}",
        test.precision, test.recall, test.f1
    );
    let mut io = StageIo::new(vec![dir.corpus(), dir.labels()], vec![dir.trigger_model(), eval_path]);
    io.inputs.extend(dense);
    Ok(io)
}

pub fn tag(ctx: &Ctx, dense: Option<PathBuf>) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let corpus = dir.load_corpus()?;
    let model = Crf::parse(&read_text(&dir.trigger_model())?)?;
    let sidecar = load_sidecar(dense.as_ref())?;
    let width = model.features().dense_width;
    if width != sidecar.as_ref().map_or(0, |s| s.width) {
        return Err(config_err(format!("trigger model expects dense width {width}; pass a matching --dense sidecar")));
    }
    let rows = read_emotions(&dir.emotions())?;
    let mut spans = Vec::new();
    let mut dated = Vec::new();
    for row in &rows {
        let Some(post) = corpus.get(&row.post_id) else { continue };
        let tokens = tokenize(&post.text);
        let rows = dense_rows(sidecar.as_ref(), &post.id, tokens.len());
        for &e in &row.labels {
            for s in tag_post(&model, &post.id, &tokens, e, rows.as_deref())? {
                dated.push(post.date);
                spans.push(s);
            }
        }
    }
    let (mentions, dropped) = mentions_from_spans(spans.iter().zip(dated));
    let anns: Vec<TriggerAnnotation> = spans
        .iter()
        .map(|s| TriggerAnnotation { post_id: s.post_id.clone(), emotion: s.emotion, start: s.start, end: s.end })
        .collect();
    write_with(&dir.spans(), |w| write_annotations(&anns, w))?;
    write_with(&dir.mentions(), |w| write_mentions(&mentions, w))?;
    println!("{} trigger spans, {} mentions ({dropped} empty after normalization)", spans.len(), mentions.len());
    let mut io = StageIo::new(vec![dir.corpus(), dir.trigger_model(), dir.emotions()], vec![dir.spans(), dir.mentions()]);
    io.inputs.extend(dense);
    Ok(io)
}
