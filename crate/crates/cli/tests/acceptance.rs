//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use affectline_annosvc::{router, ManualClock, Service, ServiceConfig};
use affectline_cli::tables::{probability_map, read_emotions, read_related, related_map};
use affectline_core::corpus::{partition_by_day, LabelPayload, Task};
use affectline_core::emoclass::{evaluate, AccuracyKind, EmotionLabel, Example, MlpBinaryClassifier, MultiLabelScores};
use affectline_core::retrieval::BootstrapConfig;
use affectline_core::rundir::{read_text, RunDir};
use affectline_core::scalar::sigmoid;
use affectline_core::synth::SynthTruth;
use affectline_core::textfeat::{tokenize, FeatureVector};
use affectline_core::topics::{
    gibbs_fit, gibbs_fit_with, parse_mentions, subcategory_intensity, Curation, CuratedTopics, DateLdaState,
    GibbsConfig, TriggerMention,
};
use affectline_core::trends::{emotion_intensity, topic_intensity, Subject};
use affectline_core::trigger::lattice::{marginals, path_score, transition_allowed, viterbi, NUM_TAGS};
use affectline_core::trigger::{span_prf, training_sequence, CrfFeatureConfig, CrfHyperParams, CrfModel, Tag, TriggerSpan};
use axum::body::Body;
use axum::http::Request;
use axum::Router;
use chrono::NaiveDate;
use http_body_util::BodyExt;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

const FD_TOL: f64 = 1e-4;
const FD_FLOOR: f64 = 1e-3;
const FD_SEEDS: u64 = 20;
const METRIC_TOL: f64 = 1e-12;
const IDENTITY_TOL: f64 = 1e-12;
const MAE_LIMIT: f64 = 0.05;
const SEED: u64 = 7;
const TOKEN: &str = "oracle-token";

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- gradients ----

fn hand_forward() -> Result<f64, String> {
    let m = MlpBinaryClassifier::<f64>::from_dense(
        &[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]],
        vec![0.0, -1.0],
        vec![1.0, 1.0],
        0.0,
    )
    .map_err(|e| e.to_string())?;
    let p = m.predict_proba(&FeatureVector::from_dense(&[1.0, 0.0, 1.0])).map_err(|e| e.to_string())?;
    let err = (p - sigmoid(2.0f64)).abs().max((p - 1.0 / (1.0 + (-2.0f64).exp())).abs());
    ensure(err < 1e-9 && (p - 0.8808).abs() < 1e-4, || format!("forward pass gave {p}"))?;
    Ok(err)
}

fn relative(fd: f64, g: f64) -> f64 {
    (fd - g).abs() / fd.abs().max(g.abs()).max(FD_FLOOR)
}

fn mlp_fd_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dim, hidden) = (6, 4);
    let w1: Vec<Vec<f64>> = (0..hidden).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let b1 = (0..hidden).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let w2 = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut m = MlpBinaryClassifier::from_dense(&w1, b1, w2, rng.gen_range(-0.5..0.5)).unwrap();
    m.set_l2(0.05);
    let data: Vec<Example<f64>> = (0..5)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| if rng.gen_bool(0.6) { rng.gen_range(0.0..2.0) } else { 0.0 }).collect();
            (FeatureVector::from_dense(&x), rng.gen_bool(0.5))
        })
        .collect();
    let g = m.objective_gradient(&data).unwrap();
    let theta = m.to_flat();
    let eps = 1e-6;
    (0..theta.len())
        .map(|i| {
            let mut t = theta.clone();
            t[i] += eps;
            let mut plus = m.clone();
            plus.set_flat(&t).unwrap();
            t[i] -= 2.0 * eps;
            let mut minus = m.clone();
            minus.set_flat(&t).unwrap();
            let fd = (plus.objective(&data).unwrap() - minus.objective(&data).unwrap()) / (2.0 * eps);
            relative(fd, g[i])
        })
        .fold(0.0, f64::max)
}

fn crf_fd_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = CrfFeatureConfig { dim: 32, dense_width: 2, emotion_features: true };
    let mut model = CrfModel::zeros(cfg, CrfHyperParams { l2: 0.1, ..Default::default() });
    let theta: Vec<f64> = (0..model.num_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    model.set_flat(&theta).unwrap();
    let data: Vec<_> = [("furious at the governor today", (3, 4)), ("scared of layoffs and rent hikes", (3, 4))]
        .iter()
        .map(|(text, span)| {
            let toks = tokenize(text);
            let dense: Vec<Vec<f64>> =
                (0..toks.len()).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            training_sequence(&cfg, &toks, EmotionLabel::Anger, &[*span], Some(&dense)).unwrap()
        })
        .collect();
    let g = model.objective_gradient(&data);
    let eps = 1e-6;
    (0..theta.len())
        .map(|i| {
            let mut t = theta.clone();
            t[i] += eps;
            let mut plus = model.clone();
            plus.set_flat(&t).unwrap();
            t[i] -= 2.0 * eps;
            let mut minus = model.clone();
            minus.set_flat(&t).unwrap();
            relative((plus.objective(&data) - minus.objective(&data)) / (2.0 * eps), g[i])
        })
        .fold(0.0, f64::max)
}

fn gradients() -> Check {
    let fwd = hand_forward()?;
    let mlp = (0..FD_SEEDS).map(mlp_fd_error).fold(0.0, f64::max);
    let crf = (0..FD_SEEDS).map(crf_fd_error).fold(0.0, f64::max);
    let detail = format!("forward err {fwd:.1e} (tol 1e-9); max rel FD error mlp {mlp:.2e}, crf {crf:.2e} over {FD_SEEDS} seeds (tol {FD_TOL:e})");
    ensure(mlp < FD_TOL && crf < FD_TOL, || detail.clone())?;
    Ok(detail)
}

// ---- decoding ----

fn all_valid_paths(len: usize) -> Vec<Vec<Tag>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p: Vec<Tag>| {
                let last = p.last().copied();
                Tag::ALL.into_iter().filter(move |&t| transition_allowed(last, t)).map(move |t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

fn decoding() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut instances = 0;
    let mut worst_norm = 0.0f64;
    for len in 1..=8 {
        let paths = all_valid_paths(len);
        for _ in 0..100 {
            let em: Vec<[f64; NUM_TAGS]> = (0..len)
                .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
                .collect();
            let mut tr = [[0.0; NUM_TAGS]; NUM_TAGS];
            tr.iter_mut().flatten().for_each(|v| *v = rng.gen_range(-3.0..3.0));
            let best = paths
                .iter()
                .max_by(|a, b| path_score(&em, &tr, a).total_cmp(&path_score(&em, &tr, b)))
                .expect("at least one path");
            let got = viterbi(&em, &tr);
            ensure(&got == best, || format!("length {len}: viterbi {got:?} vs enumeration {best:?}"))?;
            let m = marginals(&em, &tr);
            for row in &m.node {
                worst_norm = worst_norm.max((row.iter().sum::<f64>() - 1.0).abs());
            }
            for e in &m.edge {
                worst_norm = worst_norm.max((e.iter().flatten().sum::<f64>() - 1.0).abs());
            }
            instances += 1;
        }
    }
    let detail = format!("{instances} instances agree with enumeration; marginal normalization error {worst_norm:.1e} (tol 1e-9)");
    ensure(worst_norm <= 1e-9, || detail.clone())?;
    Ok(detail)
}

// ---- topic sampler ----

fn day(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 4, 1).unwrap() + chrono::Days::new(u64::from(d))
}

fn planted(n: usize, seed: u64) -> (Vec<TriggerMention>, Vec<usize>) {
    let vocab = [
        ["governor", "mayor", "senators", "congress", "officials"],
        ["hoarders", "gougers", "buyers", "scalpers", "stockpilers"],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ms = Vec::new();
    let mut truth = Vec::new();
    for i in 0..n {
        let plant = i % 2;
        let len = rng.gen_range(1..4);
        let tokens = (0..len).map(|_| vocab[plant][rng.gen_range(0..5)].to_string()).collect();
        let d = if plant == 0 { rng.gen_range(0..10) } else { rng.gen_range(15..25) };
        ms.push(TriggerMention {
            id: format!("m{i:03}"),
            post_id: format!("p{i:03}"),
            emotion: EmotionLabel::Anger,
            date: day(d),
            tokens,
        });
        truth.push(plant);
    }
    (ms, truth)
}

fn argmax(p: &[f64]) -> usize {
    (0..p.len()).fold(0, |b, k| if p[k] > p[b] { k } else { b })
}

fn date_free_conditional(s: &DateLdaState<f64>, m: usize, i: usize) -> Vec<f64> {
    let c = s.counts();
    let (alpha, beta, _) = s.priors();
    let k = s.topics();
    let v = s.vocab().len();
    let w = s.mention_words(m)[i] as usize;
    let own = s.assignments(m)[i] as usize;
    let mut p: Vec<f64> = (0..k)
        .map(|t| {
            let minus = u32::from(t == own);
            let n_mk = f64::from(c.n_mk[m * k + t] - minus);
            let n_kw = f64::from(c.n_kw[t * v + w] - minus);
            let n_k = f64::from(c.n_k[t] - minus);
            (n_mk + alpha) * (n_kw + beta) / (n_k + v as f64 * beta)
        })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

fn sampler() -> Check {
    let (ms, truth) = planted(200, 1);
    let mut audits = 0;
    let mut audit_err = None;
    let cfg = GibbsConfig { topics: 2, iterations: 200, seed: 3, ..Default::default() };
    let state = gibbs_fit_with::<f64>(&ms, &cfg, |s| {
        audits += 1;
        if let Err(e) = s.audit() {
            audit_err.get_or_insert(format!("sweep {}: {e}", s.iteration()));
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(e) = audit_err {
        return Err(e);
    }
    let assigned: Vec<usize> = ms.iter().map(|m| argmax(&state.mention_posterior(&m.id).unwrap())).collect();
    let direct = assigned.iter().zip(&truth).filter(|(a, t)| a == t).count();
    let purity = direct.max(ms.len() - direct) as f64 / ms.len() as f64;
    ensure(purity >= 0.9, || format!("planted purity {purity:.3} < 0.9"))?;

    let single = gibbs_fit::<f64>(&ms, &GibbsConfig { topics: 1, iterations: 10, ..Default::default() })
        .map_err(|e| e.to_string())?;
    for m in &ms {
        let p = single.mention_posterior(&m.id).unwrap();
        ensure(p == vec![1.0], || format!("K=1 posterior of {} is {p:?}", m.id))?;
    }

    let (mut flat, _) = planted(200, 4);
    flat.iter_mut().for_each(|m| m.date = day(0));
    let s = gibbs_fit::<f64>(&flat, &GibbsConfig { topics: 4, iterations: 5, seed: 8, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for m in 0..s.num_mentions() {
        for i in 0..s.mention_words(m).len() {
            for (a, b) in s.conditional(m, i).iter().zip(date_free_conditional(&s, m, i)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let detail = format!(
        "{audits} audited sweeps on 200 mentions; K=1 exact; purity {purity:.3} (min 0.9); single-date deviation {worst:.1e} (tol 1e-12)"
    );
    ensure(worst < 1e-12, || detail.clone())?;
    Ok(detail)
}

// ---- metrics ----

fn metrics() -> Check {
    let gold = vec![BTreeSet::from(["A"]), BTreeSet::from(["A", "B"])];
    let pred = vec![BTreeSet::from(["A", "B"]), BTreeSet::from(["A"])];
    let f: MultiLabelScores<f64> = evaluate(&pred, &gold, &["A", "B"], AccuracyKind::Jaccard).map_err(|e| e.to_string())?;
    let want = (2.0 / 3.0, 0.5, 0.5);
    let dev = (f.micro_f1 - want.0).abs().max((f.macro_f1 - want.1).abs()).max((f.accuracy - want.2).abs());
    ensure(dev < METRIC_TOL, || format!("micro {} macro {} jaccard {}", f.micro_f1, f.macro_f1, f.accuracy))?;

    let toks = tokenize("one two three four five six");
    let span = |post: &str, s, e| TriggerSpan::new(post, EmotionLabel::Fear, &toks, s, e).unwrap();
    let predicted = vec![span("p", 0, 2), span("p", 3, 4)];
    let gold_spans = vec![span("p", 0, 2), span("p", 2, 4), span("q", 0, 1)];
    let s = span_prf::<Ratio<i64>>(&predicted, &gold_spans);
    let exact = (s.precision, s.recall, s.f1) == (Ratio::new(1, 2), Ratio::new(1, 3), Ratio::new(2, 5));
    ensure(exact, || format!("span P/R/F1 {} {} {}", s.precision, s.recall, s.f1))?;
    Ok(format!(
        "micro {:.4} macro {:.4} jaccard {:.4} (deviation {dev:.1e}, tol {METRIC_TOL:e}); span P/R/F1 1/2, 1/3, 2/5 exact",
        f.micro_f1, f.macro_f1, f.accuracy
    ))
}

// ---- end to end ----

fn cli(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_affectline"))
        .arg("--run-dir")
        .arg(dir)
        .args(["--seed", &SEED.to_string()])
        .args(args)
        .output()
        .map_err(|e| format!("spawning affectline: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "`affectline {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

struct Labeler {
    app: Router,
    truth: Arc<SynthTruth>,
}

impl Labeler {
    fn open(dir: &Path, truth: Arc<SynthTruth>) -> Result<Self, String> {
        let cfg = ServiceConfig {
            bootstrap: BootstrapConfig::default(),
            tokens: [(TOKEN.to_string(), "oracle".to_string())].into_iter().collect(),
            ..Default::default()
        };
        let svc = Service::open(RunDir::new(dir), cfg, Arc::new(ManualClock::new(1_585_000_000)))
            .map_err(|e| e.to_string())?;
        Ok(Self { app: router(Arc::new(svc)), truth })
    }

    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> Result<Value, String> {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("authorization", format!("Bearer {TOKEN}"))
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
            .map_err(|e| e.to_string())?;
        let resp = self.app.clone().oneshot(req).await.map_err(|e| e.to_string())?;
        let status = resp.status();
        let bytes = resp.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes();
        let v: Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
        ensure(status.is_success(), || format!("{method} {uri}: {status} {v}"))?;
        Ok(v)
    }

    fn payload(&self, id: &str, task: Task) -> Value {
        match self.truth.oracle_label(id, task, "oracle", 0, 0).map(|r| r.payload) {
            Some(LabelPayload::Relevance(b)) => json!(b),
            Some(LabelPayload::Emotion(set)) => json!(set.iter().map(|e| e.id()).collect::<Vec<_>>()),
            Some(LabelPayload::Trigger(spans)) => json!(spans
                .iter()
                .map(|s| json!({ "emotion": s.emotion.id(), "start": s.start, "end": s.end }))
                .collect::<Vec<_>>()),
            None => Value::Null,
        }
    }

    /// Drains every batch the service offers for `task`.
    async fn drain(&self, task: Task) -> Result<usize, String> {
        let mut labeled = 0;
        loop {
            let batch = self.call("GET", &format!("/batches/next?task={}&size=500", task.id()), None).await?;
            let Some(id) = batch["batch_id"].as_str() else { return Ok(labeled) };
            let labels: Vec<Value> = batch["posts"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(|p| p["id"].as_str())
                .map(|pid| json!({ "post_id": pid, "payload": self.payload(pid, task) }))
                .collect();
            labeled += labels.len();
            self.call("POST", &format!("/batches/{id}/labels"), Some(json!({ "labels": labels }))).await?;
        }
    }
}

fn label(dir: &Path, truth: &Arc<SynthTruth>, tasks: &[Task]) -> Result<usize, String> {
    let labeler = Labeler::open(dir, truth.clone())?;
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let mut n = 0;
        for &t in tasks {
            n += labeler.drain(t).await?;
        }
        Ok(n)
    })
}

struct Run {
    dir: PathBuf,
    elapsed: Duration,
    summary: Value,
}

fn pipeline(dir: &Path) -> Result<Run, String> {
    let start = Instant::now();
    let cli = |args: &[&str]| cli(dir, args);
    cli(&["synth", "--days", "30", "--posts-per-day", "1000"])?;
    let posts = dir.join("synth/posts.jsonl");
    cli(&["ingest", "--input", posts.to_str().expect("utf-8 path")])?;
    cli(&["seed-keywords", "--select", "covid,virus,mask"])?;
    let truth = Arc::new(
        SynthTruth::parse(&read_text(&RunDir::new(dir).synth_truth()).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?,
    );
    let mut rounds = 0;
    loop {
        let out = cli(&["bootstrap"])?;
        if out.contains("bootstrap complete") {
            break;
        }
        rounds += 1;
        ensure(rounds <= 10, || "bootstrap never completed".into())?;
        label(dir, &truth, &[Task::Relevance])?;
    }
    label(dir, &truth, &[Task::Emotion, Task::Trigger])?;
    for step in [
        &["train-emotion"][..],
        &["classify"],
        &["trends"],
        &["train-trigger"],
        &["tag-triggers"],
        &["fit-topics"],
        &["topic-report"],
        &["subcat-trends"],
    ] {
        cli(step)?;
    }
    cli(&["eval"])?;
    let summary = serde_json::from_str(&read_text(&dir.join("eval/summary.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    Ok(Run { dir: dir.to_path_buf(), elapsed: start.elapsed(), summary })
}

fn end_to_end(run: &Run) -> Check {
    let mae = run.summary["synthetic"]["emotion_mae_max"].as_f64().ok_or("no emotion MAE in summary")?;
    let recall: Vec<f64> = run.summary["rounds"]
        .as_array()
        .ok_or("no rounds in summary")?
        .iter()
        .filter_map(|r| r["recall"].as_f64())
        .collect();
    ensure(recall.len() >= 3, || format!("{} rounds recorded", recall.len()))?;
    let detail = format!(
        "max per-emotion MAE {mae:.4} (limit {MAE_LIMIT}); recall round 0 {:.4} -> round 2 {:.4}; pipeline {:.1}s",
        recall[0],
        recall[2],
        run.elapsed.as_secs_f64()
    );
    ensure(mae < MAE_LIMIT && recall[2] > recall[0], || detail.clone())?;
    Ok(detail)
}

// ---- intensity identities ----

fn identities(run: &Run) -> Check {
    let dir = RunDir::new(&run.dir);
    let corpus = dir.load_corpus().map_err(|e| e.to_string())?;
    let parts = partition_by_day(&corpus);
    let related = related_map(&read_related(&dir.related()).map_err(|e| e.to_string())?);
    let probs = probability_map(&read_emotions(&dir.emotions()).map_err(|e| e.to_string())?);
    let topic = topic_intensity::<f64>(&parts, &related).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for s in emotion_intensity::<f64>(&parts, &related, &probs).map_err(|e| e.to_string())? {
        for (d, v) in &s.points {
            let t = topic.get(*d).unwrap_or(0.0);
            ensure(*v <= t, || format!("{} on {d}: {v} exceeds topic intensity {t}", s.subject))?;
            checked += 1;
        }
    }

    let mentions = parse_mentions(&read_text(&dir.mentions()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mut states = Vec::new();
    for e in EmotionLabel::ALL {
        if let Ok(text) = read_text(&dir.topic_state(e)) {
            states.push((e, DateLdaState::<f64>::parse_checkpoint(&text).map_err(|e| e.to_string())?));
        }
    }
    ensure(!states.is_empty(), || "no topic checkpoints".into())?;
    let all_kept = Curation::default();
    let views: Vec<CuratedTopics<'_, f64>> =
        states.iter().map(|(e, state)| CuratedTopics { emotion: *e, state, curation: &all_kept }).collect();
    let mut sums: BTreeMap<(EmotionLabel, NaiveDate), f64> = BTreeMap::new();
    for s in subcategory_intensity(&parts, &mentions, &views).map_err(|e| e.to_string())? {
        let Subject::Subcategory(e, _) = s.subject else { continue };
        for (d, v) in &s.points {
            *sums.entry((e, *d)).or_default() += v;
        }
    }
    let sizes: HashMap<NaiveDate, usize> = parts.iter().map(|p| (p.date, p.post_ids.len())).collect();
    let mut counts: BTreeMap<(EmotionLabel, NaiveDate), usize> = BTreeMap::new();
    for m in &mentions {
        *counts.entry((m.emotion, m.date)).or_default() += 1;
    }
    let mut worst = 0.0f64;
    for (e, _) in &states {
        for p in &parts {
            let want = counts.get(&(*e, p.date)).copied().unwrap_or(0) as f64 / sizes[&p.date] as f64;
            let got = sums.get(&(*e, p.date)).copied().unwrap_or(0.0);
            worst = worst.max((got - want).abs());
        }
    }
    let detail = format!(
        "{checked} emotion-day points within topic intensity; subcategory sums deviate {worst:.1e} from mention rates (tol {IDENTITY_TOL:e}) over {} mentions",
        mentions.len()
    );
    ensure(worst < IDENTITY_TOL, || detail.clone())?;
    Ok(detail)
}

// ---- determinism ----

fn compared_files(root: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) {
        let Ok(entries) = std::fs::read_dir(dir) else { return };
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                walk(&path, root, out);
                continue;
            }
            let rel = path.strip_prefix(root).expect("under root").to_path_buf();
            let ext = rel.extension().and_then(|e| e.to_str()).unwrap_or("");
            let models = rel.components().any(|c| c.as_os_str() == "models");
            if ext == "csv" || ext == "ckpt" || models {
                out.push(rel);
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

fn determinism(a: &Run, b: &Run) -> Check {
    let files = compared_files(&a.dir);
    ensure(files == compared_files(&b.dir), || "the two runs wrote different file sets".into())?;
    let count = |ext: &str| files.iter().filter(|f| f.extension().is_some_and(|e| e == ext)).count();
    ensure(count("csv") > 0 && count("ckpt") > 0, || "nothing to compare".into())?;
    for f in &files {
        let (x, y) = (std::fs::read(a.dir.join(f)), std::fs::read(b.dir.join(f)));
        ensure(matches!((&x, &y), (Ok(x), Ok(y)) if x == y), || format!("{} differs", f.display()))?;
    }
    Ok(format!(
        "{} files byte-identical ({} csv, {} checkpoints, {} models)",
        files.len(),
        count("csv"),
        count("ckpt"),
        files.len() - count("csv") - count("ckpt")
    ))
}

// ---- driver ----

fn timed(name: &str, budget: Option<Duration>, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let result = match (result, budget) {
        (Ok(_), Some(b)) if elapsed > b => Err(format!("took {:.1}s, budget {}s", elapsed.as_secs_f64(), b.as_secs())),
        (r, _) => r,
    };
    let budget_note = budget.map_or(String::new(), |b| format!(" [{:.1}s of {}s]", elapsed.as_secs_f64(), b.as_secs()));
    match &result {
        Ok(d) => println!("PASS {name}: {d}{budget_note}"),
        Err(d) => println!("FAIL {name}: {d}{budget_note}"),
    }
    result.is_ok()
}

fn main() {
    let secs = Duration::from_secs;
    let mut ok = vec![
        timed("forward pass and gradient checks", Some(secs(10)), gradients),
        timed("viterbi and marginals", Some(secs(30)), decoding),
        timed("collapsed gibbs sampler", Some(secs(60)), sampler),
        timed("metric oracles", None, metrics),
    ];

    let tmp = tempfile::TempDir::new().expect("temp dir");
    let first = pipeline(&tmp.path().join("a"));
    let second = pipeline(&tmp.path().join("b"));
    ok.push(timed("intensity identities", None, || identities(first.as_ref().map_err(Clone::clone)?)));
    ok.push(timed("synthetic end to end", None, || {
        let run = first.as_ref().map_err(Clone::clone)?;
        let res = end_to_end(run)?;
        ensure(run.elapsed <= secs(300), || format!("pipeline took {:.1}s, budget 300s", run.elapsed.as_secs_f64()))?;
        Ok(res)
    }));
    ok.push(timed("determinism", None, || {
        determinism(first.as_ref().map_err(Clone::clone)?, second.as_ref().map_err(Clone::clone)?)
    }));

    let failed = ok.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", ok.len() - failed, ok.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
