use std::collections::BTreeSet;

use affectline_core::corpus::{derive_seed, partition_by_day, Corpus, LabelPayload, Task};
use affectline_core::emoclass::{evaluate, labels_from_probabilities, AccuracyKind, EmotionLabel, MultiLabelExample};
use affectline_core::retrieval::{harvest, make_split, KeywordList, RoundPhase, SplitPart};
use affectline_core::rundir::{read_text, RunDir};
use affectline_core::textfeat::{tokenize, FeatureConfig};
use affectline_core::trends::{emotion_intensity, moving_average, topic_intensity, write_csv};
use affectline_core::{EmotionModel, Mlp, Series};
use serde_json::json;

use super::{write_json, write_with};
use crate::error::{CliError, CliResult};
use crate::tables::{
    load_labels, probability_map, read_emotions, read_related, related_map, write_emotions, write_related, EmotionRow,
    RelatedRow,
};
use crate::{Ctx, StageIo};

fn examples(corpus: &Corpus, features: &FeatureConfig, ids: &[String], gold: &dyn Fn(&str) -> BTreeSet<EmotionLabel>) -> Vec<MultiLabelExample<f64>> {
    ids.iter()
        .filter_map(|id| corpus.get(id))
        .map(|p| (features.featurize(&tokenize(&p.text)), gold(&p.id)))
        .collect()
}

pub fn train(ctx: &Ctx) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let corpus = dir.load_corpus()?;
    let labels = load_labels(&dir.labels(), true)?;
    let resolved = labels.resolved(Task::Emotion, None);
    let gold = |id: &str| match resolved.get(id).map(|r| &r.payload) {
        Some(LabelPayload::Emotion(set)) => set.clone(),
        _ => BTreeSet::new(),
    };
    let ids: Vec<String> = resolved.keys().filter(|id| corpus.contains(id)).cloned().collect();
    let split = make_split(&ids, derive_seed(ctx.cfg.seed, "emotion-split"))?;
    let features = ctx.cfg.features();
    let part = |p: SplitPart| examples(&corpus, &features, split.part(p), &gold);
    let (train, dev, test) = (part(SplitPart::Train), part(SplitPart::Dev), part(SplitPart::Test));
    let hyper = ctx.cfg.emotion.as_mlp().hyper(derive_seed(ctx.cfg.seed, "emotion"));
    let mut model = EmotionModel::train(features, &train, &dev, &hyper)?;
    model.set_threshold(ctx.cfg.emotion.threshold);

    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for (h, ys) in &test {
        predicted.push(model.predict_labels(h)?);
        truth.push(ys.clone());
    }
    let scores = evaluate::<EmotionLabel, f64>(&predicted, &truth, &EmotionLabel::ALL, AccuracyKind::Jaccard)?;
    write_with(&dir.emotion_model(), |w| model.write_to(w))?;
    let eval_path = dir.eval_dir().join("emotion.json");
    write_json(
        &eval_path,
        &json!({
            "train": train.len(),
            "dev": dev.len(),
            "test": test.len(),
            "threshold": ctx.cfg.emotion.threshold,
            "accuracy": scores.accuracy,
            "micro_f1": scores.micro_f1,
            "macro_f1": scores.macro_f1,
        }),
    )?;
    println!(
        "emotion model: accuracy {:.4}, micro F1 {:.4}, macro F1 {:.4} on {} test posts",
        scores.accuracy,
        scores.micro_f1,
        scores.macro_f1,
        test.len()
    );
    Ok(StageIo::new(vec![dir.corpus(), dir.labels()], vec![dir.emotion_model(), eval_path]))
}

/// The relevance model of the last closed round.
fn relevance_model(dir: &RunDir) -> CliResult<(Mlp, std::path::PathBuf)> {
    let rounds = dir.load_rounds()?;
    let last = rounds
        .iter()
        .rev()
        .find(|r| r.phase == RoundPhase::Closed && r.model_id.is_some())
        .ok_or_else(|| CliError::Missing(dir.round_model(0)))?;
    let path = dir.root().join(last.model_id.as_deref().expect("checked"));
    Ok((Mlp::parse(&read_text(&path)?)?, path))
}

pub fn classify(ctx: &Ctx) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let corpus = dir.load_corpus()?;
    let keywords = KeywordList::parse(&read_text(&dir.final_keywords())?)?;
    let (relevance, model_path) = relevance_model(dir)?;
    let emotions = EmotionModel::parse(&read_text(&dir.emotion_model())?)?;
    let features = ctx.cfg.features();
    let hits = harvest(&corpus, &keywords);

    let mut posts: Vec<_> = corpus.posts().iter().collect();
    posts.sort_by(|a, b| a.id.cmp(&b.id));
    let mut related_rows = Vec::with_capacity(posts.len());
    let mut emotion_rows = Vec::new();
    for p in posts {
        if !hits.contains(&p.id) {
            related_rows.push(RelatedRow { post_id: p.id.clone(), related: false, score: None });
            continue;
        }
        let tokens = tokenize(&p.text);
        let score = relevance.predict_proba(&features.featurize(&tokens))?;
        let related = score >= 0.5;
        related_rows.push(RelatedRow { post_id: p.id.clone(), related, score: Some(score) });
        if related {
            let probabilities = emotions.probabilities(&emotions.features().featurize(&tokens))?;
            let labels = labels_from_probabilities(&probabilities, emotions.threshold());
            emotion_rows.push(EmotionRow { post_id: p.id.clone(), probabilities, labels });
        }
    }
    write_with(&dir.related(), |w| write_related(&related_rows, w))?;
    write_with(&dir.emotions(), |w| write_emotions(&emotion_rows, w))?;
    println!(
        "{} of {} posts related ({} harvested)",
        emotion_rows.len(),
        related_rows.len(),
        hits.len()
    );
    Ok(StageIo::new(vec![dir.corpus(), dir.final_keywords(), model_path, dir.emotion_model()], vec![dir.related(), dir.emotions()]))
}

fn with_smoothing(series: Series, smooth: Option<usize>) -> Vec<Series> {
    match smooth {
        Some(w) => {
            let s = moving_average(&series, w);
            vec![series, s]
        }
        None => vec![series],
    }
}

pub fn trends(ctx: &Ctx) -> CliResult<StageIo> {
    let dir = &ctx.dir;
    let corpus = dir.load_corpus()?;
    let parts = partition_by_day(&corpus);
    let related = related_map(&read_related(&dir.related())?);
    let probs = probability_map(&read_emotions(&dir.emotions())?);
    let smooth = ctx.cfg.trends.smooth;
    let mut io = StageIo::default();
    let topic = topic_intensity::<f64>(&parts, &related)?;
    write_with(&dir.topic_trends(), |w| write_csv(&with_smoothing(topic, smooth), w))?;
    io.outputs.push(dir.topic_trends());
    for series in emotion_intensity::<f64>(&parts, &related, &probs)? {
        let affectline_core::trends::Subject::Emotion(e) = series.subject else {
            unreachable!("emotion_intensity yields emotion series")
        };
        let path = dir.emotion_trends(e);
        write_with(&path, |w| write_csv(&with_smoothing(series, smooth), w))?;
        io.outputs.push(path);
    }
    println!("{} daily series over {} days", io.outputs.len(), parts.len());
    if let Some(w) = smooth {
        io.arg("smooth", w);
    }
    io.inputs = vec![dir.corpus(), dir.related(), dir.emotions()];
    Ok(io)
}
