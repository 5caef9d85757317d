use std::collections::{BTreeSet, HashMap};

use affectline_core::corpus::{partition_by_day, Corpus, DailyPartition, Platform, Post};
use affectline_core::emoclass::{evaluate, AccuracyKind, EmotionLabel, MlpBinaryClassifier, MultiLabelScores, NUM_EMOTIONS};
use affectline_core::retrieval::{expand_keywords, harvest, make_split, ExpansionConfig, KeywordList};
use affectline_core::synth::{generate, SynthConfig};
use affectline_core::textfeat::{featurize, for_each_ngram, hash_ngram, tfidf_rank, tokenize, FeatureConfig, TokenSequence};
use affectline_core::topics::{gibbs_fit, subcategory_intensity, Curation, CuratedTopics, GibbsConfig, TopicStatus, TriggerMention};
use affectline_core::trends::{emotion_intensity, topic_intensity, Subject};
use affectline_core::trigger::{span_prf, TriggerSpan};
use chrono::NaiveDate;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn day(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 1).unwrap() + chrono::Days::new(u64::from(d))
}

fn partitions(days: usize, per_day: usize) -> Vec<DailyPartition> {
    (0..days)
        .map(|d| DailyPartition {
            date: day(d as u32),
            post_ids: (0..per_day).map(|i| format!("d{d}-{i:03}")).collect(),
        })
        .collect()
}

#[test]
fn two_example_metric_fixture() {
    let gold = vec![set(["A"]), set(["A", "B"])];
    let pred = vec![set(["A", "B"]), set(["A"])];
    let s: MultiLabelScores<Ratio<i64>> = evaluate(&pred, &gold, &["A", "B"], AccuracyKind::Jaccard).unwrap();
    assert_eq!((s.micro_f1, s.macro_f1, s.accuracy), (Ratio::new(2, 3), Ratio::new(1, 2), Ratio::new(1, 2)));
    let f: MultiLabelScores<f64> = evaluate(&pred, &gold, &["A", "B"], AccuracyKind::Jaccard).unwrap();
    assert!((f.micro_f1 - 0.6667).abs() < 1e-4);
    assert!((f.macro_f1 - 0.5).abs() < 1e-12 && (f.accuracy - 0.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn emotion_never_exceeds_topic_intensity(seed in any::<u64>(), days in 1usize..5, per_day in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts = partitions(days, per_day);
        let mut related = HashMap::new();
        let mut probs = HashMap::new();
        for id in parts.iter().flat_map(|p| &p.post_ids) {
            related.insert(id.clone(), rng.gen_bool(0.5));
            let p: [f64; NUM_EMOTIONS] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
            probs.insert(id.clone(), p);
        }
        let topic = topic_intensity::<f64>(&parts, &related).unwrap();
        let emotions = emotion_intensity::<f64>(&parts, &related, &probs).unwrap();
        prop_assert_eq!(emotions.len(), NUM_EMOTIONS);
        for s in &emotions {
            for (d, v) in &s.points {
                prop_assert!(*v >= 0.0 && *v <= topic.get(*d).unwrap() + 1e-15);
            }
        }
    }

    #[test]
    fn subcategories_sum_to_the_mention_rate(seed in any::<u64>(), k in 1usize..5, n in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts = partitions(3, 8);
        let words = ["rent", "layoffs", "governor", "masks", "vaccine", "schools"];
        let mentions: Vec<TriggerMention> = (0..n)
            .map(|i| {
                let d = rng.gen_range(0..3usize);
                let post = parts[d].post_ids[rng.gen_range(0..8)].clone();
                let len = rng.gen_range(1..4);
                TriggerMention {
                    id: format!("m{i:03}"),
                    post_id: post,
                    emotion: if rng.gen_bool(0.7) { EmotionLabel::Fear } else { EmotionLabel::Anger },
                    date: parts[d].date,
                    tokens: (0..len).map(|_| words[rng.gen_range(0..words.len())].to_string()).collect(),
                }
            })
            .collect();
        let fear: Vec<TriggerMention> = mentions.iter().filter(|m| m.emotion == EmotionLabel::Fear).cloned().collect();
        prop_assume!(!fear.is_empty());
        let state = gibbs_fit::<f64>(&fear, &GibbsConfig { topics: k, iterations: 5, seed, ..Default::default() }).unwrap();
        let curation = Curation::default();
        let fitted = [CuratedTopics { emotion: EmotionLabel::Fear, state: &state, curation: &curation }];
        let series = subcategory_intensity(&parts, &mentions, &fitted).unwrap();
        prop_assert_eq!(series.len(), k);
        for part in &parts {
            let count = fear.iter().filter(|m| part.post_ids.contains(&m.post_id)).count();
            let total: f64 = series.iter().map(|s| s.get(part.date).unwrap()).sum();
            prop_assert!((total - count as f64 / part.len() as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn subcategory_hand_example() {
    let parts = vec![DailyPartition { date: day(0), post_ids: (0..4).map(|i| format!("p{i}")).collect() }];
    let mentions = vec![
        TriggerMention { id: "a".into(), post_id: "p0".into(), emotion: EmotionLabel::Sadness, date: day(0), tokens: vec!["funerals".into()] },
        TriggerMention { id: "b".into(), post_id: "p1".into(), emotion: EmotionLabel::Sadness, date: day(0), tokens: vec!["graduation".into()] },
    ];
    // with alpha = 2 a lone token gives its mention (1+2)/(1+4) = 0.6 on its
    // own topic and 0.4 elsewhere
    let state = (0..64)
        .map(|seed| {
            gibbs_fit::<f64>(&mentions, &GibbsConfig { topics: 2, iterations: 1, alpha: Some(2.0), seed, ..Default::default() }).unwrap()
        })
        .find(|s| s.assignments(0)[0] != s.assignments(1)[0])
        .unwrap();
    let mut sorted: Vec<f64> = state.mention_posterior("a").unwrap();
    sorted.sort_by(f64::total_cmp);
    assert!((sorted[0] - 0.4).abs() < 1e-12 && (sorted[1] - 0.6).abs() < 1e-12);

    let mut curation = Curation::default();
    let fitted = [CuratedTopics { emotion: EmotionLabel::Sadness, state: &state, curation: &curation }];
    let series = subcategory_intensity(&parts, &mentions, &fitted).unwrap();
    for s in &series {
        assert!((s.get(day(0)).unwrap() - 0.25).abs() < 1e-12);
    }

    curation.set(1, TopicStatus::Discarded);
    let fitted = [CuratedTopics { emotion: EmotionLabel::Sadness, state: &state, curation: &curation }];
    let series = subcategory_intensity(&parts, &mentions, &fitted).unwrap();
    assert_eq!(series.len(), 1);
    assert_eq!(series[0].subject, Subject::Subcategory(EmotionLabel::Sadness, 0));
}

#[test]
fn day_without_mentions_scores_zero_and_empty_days_are_missing() {
    let mut parts = partitions(2, 3);
    parts.push(DailyPartition { date: day(5), post_ids: vec![] });
    let mentions = vec![TriggerMention {
        id: "m".into(),
        post_id: parts[0].post_ids[0].clone(),
        emotion: EmotionLabel::Happiness,
        date: day(0),
        tokens: vec!["reunion".into()],
    }];
    let state = gibbs_fit::<f64>(&mentions, &GibbsConfig { topics: 1, iterations: 1, ..Default::default() }).unwrap();
    let curation = Curation::default();
    let fitted = [CuratedTopics { emotion: EmotionLabel::Happiness, state: &state, curation: &curation }];
    let s = &subcategory_intensity(&parts, &mentions, &fitted).unwrap()[0];
    assert!((s.get(day(0)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(s.get(day(1)), Some(0.0));
    assert_eq!(s.get(day(5)), None);
}

fn set<const N: usize>(labels: [&'static str; N]) -> BTreeSet<&'static str> {
    labels.into_iter().collect()
}

#[test]
fn metric_fixture_is_exact_in_rationals() {
    let pred = vec![set(["a", "b"]), set(["a"]), set([])];
    let gold = vec![set(["a"]), set(["a", "c"]), set(["b"])];
    let labels = ["a", "b", "c"];
    let s: MultiLabelScores<Ratio<i64>> = evaluate(&pred, &gold, &labels, AccuracyKind::Jaccard).unwrap();
    // jaccard (1/2 + 1/2 + 0) / 3; micro tp=2 fp=1 fn=2
    assert_eq!(s.accuracy, Ratio::new(1, 3));
    assert_eq!(s.micro_f1, Ratio::new(4, 7));
    // per-label f1: a = 1, b = 0, c = 0
    assert_eq!(s.macro_f1, Ratio::new(1, 3));
    let subset: MultiLabelScores<Ratio<i64>> = evaluate(&pred, &gold, &labels, AccuracyKind::Subset).unwrap();
    assert_eq!(subset.accuracy, Ratio::new(0, 1));
    let f: MultiLabelScores<f64> = evaluate(&pred, &gold, &labels, AccuracyKind::Jaccard).unwrap();
    assert!((f.micro_f1 - 4.0 / 7.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn evaluation_ignores_example_order_and_label_names(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| -> BTreeSet<u8> { (0..4u8).filter(|_| rng.gen_bool(0.4)).collect() };
        let pred: Vec<BTreeSet<u8>> = (0..n).map(|_| draw(&mut rng)).collect();
        let gold: Vec<BTreeSet<u8>> = (0..n).map(|_| draw(&mut rng)).collect();
        let labels = [0u8, 1, 2, 3];
        let base: MultiLabelScores<Ratio<i64>> = evaluate(&pred, &gold, &labels, AccuracyKind::Jaccard).unwrap();

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let p2: Vec<_> = order.iter().map(|&i| pred[i].clone()).collect();
        let g2: Vec<_> = order.iter().map(|&i| gold[i].clone()).collect();
        prop_assert_eq!(evaluate::<u8, Ratio<i64>>(&p2, &g2, &labels, AccuracyKind::Jaccard).unwrap(), base);

        let rename = |s: &BTreeSet<u8>| -> BTreeSet<u8> { s.iter().map(|l| 3 - l).collect() };
        let p3: Vec<_> = pred.iter().map(rename).collect();
        let g3: Vec<_> = gold.iter().map(rename).collect();
        prop_assert_eq!(evaluate::<u8, Ratio<i64>>(&p3, &g3, &labels, AccuracyKind::Jaccard).unwrap(), base);
    }
}

fn span(post: &str, s: usize, e: usize) -> TriggerSpan {
    let toks = tokenize("one two three four five six");
    TriggerSpan::new(post, EmotionLabel::Fear, &toks, s, e).unwrap()
}

#[test]
fn span_scores_and_their_mirror() {
    let pred = vec![span("p", 0, 2), span("p", 3, 4)];
    let gold = vec![span("p", 0, 2), span("p", 2, 4), span("q", 0, 1)];
    let s = span_prf::<Ratio<i64>>(&pred, &gold);
    assert_eq!((s.precision, s.recall, s.f1), (Ratio::new(1, 2), Ratio::new(1, 3), Ratio::new(2, 5)));
    let m = span_prf::<Ratio<i64>>(&gold, &pred);
    assert_eq!((m.precision, m.recall, m.f1), (s.recall, s.precision, s.f1));
    let f = span_prf::<f64>(&pred, &gold);
    assert!((f.f1 - 0.4).abs() < 1e-15);
}

fn post(id: &str, text: &str) -> Post {
    Post::new(id, 1_584_000_000, text, Platform::Twitter, "en").unwrap()
}

fn toy_corpus() -> Corpus {
    let texts = [
        "stuck in quarantine again",
        "wear a mask please",
        "covid numbers rising",
        "the stay at home order starts today",
        "lovely weather outside",
        "new virus scanner for my laptop",
        "flatten the curve everyone",
        "halloween mask shopping",
    ];
    let mut c = Corpus::new();
    for (i, t) in texts.iter().enumerate() {
        c.insert(post(&format!("p{i}"), t));
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn harvest_is_monotone_in_the_keyword_list(mask in any::<u16>()) {
        let pool = ["quarantine", "mask", "covid", "stay at home", "virus", "flatten the curve", "curve", "weather", "vaccine"];
        let pick = |m: u16| -> Vec<&str> { pool.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, t)| *t).collect() };
        let small = pick(mask & (mask >> 3 | 0b101));
        let big = pick(mask);
        let corpus = toy_corpus();
        let a = harvest(&corpus, &KeywordList::from_terms(0, &small).unwrap());
        let b = harvest(&corpus, &KeywordList::from_terms(0, &big).unwrap());
        prop_assert!(a.is_subset(&b));
    }
}

#[test]
fn phrases_match_only_as_contiguous_runs() {
    let corpus = toy_corpus();
    let got = harvest(&corpus, &KeywordList::from_terms(0, &["stay at home", "flatten the curve"]).unwrap());
    assert_eq!(got, ["p3", "p6"].into_iter().map(String::from).collect());
    let none = harvest(&corpus, &KeywordList::from_terms(0, &["home stay"]).unwrap());
    assert!(none.is_empty());
}

#[test]
fn split_ratios_are_eight_one_one() {
    for n in [10usize, 11, 19, 20, 99, 1000, 1234] {
        let ids: Vec<String> = (0..n).map(|i| format!("x{i:05}")).collect();
        let s = make_split(&ids, 42).unwrap();
        assert_eq!(s.test.len(), n / 10);
        assert_eq!(s.dev.len(), n / 10);
        assert_eq!(s.train.len(), n - 2 * (n / 10));
        let all: BTreeSet<&String> = s.train.iter().chain(&s.dev).chain(&s.test).collect();
        assert_eq!(all.len(), n);
    }
    let few: Vec<String> = (0..9).map(|i| i.to_string()).collect();
    assert!(make_split(&few, 1).is_err());
}

fn small_features() -> FeatureConfig {
    FeatureConfig { max_n: 1, dim: 1 << 12 }
}

fn positives() -> Vec<TokenSequence> {
    ["vaccine trial results today", "waiting for the vaccine", "today the trial starts"]
        .iter()
        .map(|t| tokenize(t))
        .collect()
}

#[test]
fn zero_model_saliency_ties_break_lexicographically() {
    let cfg = small_features();
    let model = MlpBinaryClassifier::<f64>::zeros(cfg.dim, 2).unwrap();
    let prev = KeywordList::from_terms(0, &["covid"]).unwrap();
    let out = expand_keywords(&model, &cfg, &positives(), &BTreeSet::new(), &prev, &ExpansionConfig { top_k: 4, replace: true }).unwrap();
    let terms: Vec<&str> = out.terms().collect();
    assert_eq!(terms, ["for", "results", "starts", "the"]);
    assert_eq!(out.round, 1);
}

#[test]
fn constructed_model_ranks_its_feature_first() {
    let cfg = small_features();
    let mut w1 = vec![0.0; cfg.dim];
    w1[hash_ngram("vaccine", cfg.dim) as usize] = 3.0;
    w1[hash_ngram("trial", cfg.dim) as usize] = 0.2;
    let model = MlpBinaryClassifier::from_dense(&[w1], vec![0.5], vec![1.0], 0.0).unwrap();
    let prev = KeywordList::from_terms(0, &["covid"]).unwrap();
    let excluded: BTreeSet<String> = ["the".to_string()].into();
    let out = expand_keywords(&model, &cfg, &positives(), &excluded, &prev, &ExpansionConfig { top_k: 2, replace: false }).unwrap();
    let terms: Vec<&str> = out.terms().collect();
    assert_eq!(terms[0], "vaccine");
    assert!(out.contains("trial") && out.contains("covid"));
    assert!(!out.contains("the"));
    assert_eq!(out.len(), 3);
}

#[test]
fn feature_count_equals_ngram_count() {
    let toks = tokenize("stay home stay safe wash hands");
    let mut n = 0;
    for_each_ngram(&toks, 2, |_| n += 1);
    assert_eq!(n, 6 + 5);
    let fv = featurize::<f64>(&toks, 2, 1 << 18);
    assert_eq!(fv.total(), 11.0);
    assert_eq!(fv.get(hash_ngram("stay", 1 << 18)), 2.0);
    assert_eq!(fv.get(hash_ngram("stay home", 1 << 18)), 1.0);
}

#[test]
fn ngram_hash_golden_values() {
    let h = affectline_core::textfeat::fnv1a64(b"covid");
    assert_eq!(hash_ngram("covid", 1 << 18), (h % (1 << 18)) as u32);
    assert_eq!(hash_ngram("stay home", 1000), (affectline_core::textfeat::fnv1a64(b"stay home") % 1000) as u32);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn tfidf_ignores_document_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = ["covid", "mask", "the", "lockdown", "cats", "rain", "virus", "news"];
        let doc = |rng: &mut ChaCha8Rng| {
            let words: Vec<&str> = (0..rng.gen_range(1..7)).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect();
            tokenize(&words.join(" "))
        };
        let mut targets: Vec<TokenSequence> = (0..5).map(|_| doc(&mut rng)).collect();
        let mut background: Vec<TokenSequence> = (0..12).map(|_| doc(&mut rng)).collect();
        let a = tfidf_rank(&targets, &background, 100).unwrap();
        targets.shuffle(&mut rng);
        background.shuffle(&mut rng);
        let b = tfidf_rank(&targets, &background, 100).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn oracle_predictions_reproduce_the_synthetic_rates() {
    let cfg = SynthConfig { days: 6, posts_per_day: 400, seed: 5, ..Default::default() };
    let (corpus, truth) = generate(&cfg).unwrap();
    let parts = partition_by_day(&corpus);
    let mut related = HashMap::new();
    let mut probs = HashMap::new();
    for (id, p) in &truth.posts {
        related.insert(id.clone(), p.related);
        probs.insert(id.clone(), std::array::from_fn(|i| f64::from(u8::from(p.emotions.contains(&EmotionLabel::ALL[i])))));
    }
    let series = emotion_intensity::<f64>(&parts, &related, &probs).unwrap();
    let expected = truth.expected_emotion_intensity();
    let mut err = 0.0;
    let mut n = 0;
    for s in &series {
        let Subject::Emotion(e) = s.subject else { unreachable!() };
        for (d, v) in &s.points {
            err += (v - expected[d][e.index()]).abs();
            n += 1;
        }
    }
    let mae = err / n as f64;
    assert!(mae < 0.03, "{mae}");
}
