use affectline_core::emoclass::EmotionLabel;
use affectline_core::textfeat::{tokenize, TokenSequence};
use affectline_core::trigger::lattice::{log_partition, marginals, path_score, transition_allowed, viterbi, NUM_TAGS};
use affectline_core::trigger::{
    span_prf, spans_from_tags, tag_post, training_sequence, CrfFeatureConfig, CrfHyperParams, CrfModel, Tag,
    TrainingSequence, TriggerSpan,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Below this magnitude the relative error is taken against the floor;
/// central differences carry about 1e-9 of cancellation noise here.
const FD_FLOOR: f64 = 1e-3;

type Lattice = (Vec<[f64; NUM_TAGS]>, [[f64; NUM_TAGS]; NUM_TAGS]);

fn random_lattice(rng: &mut ChaCha8Rng, len: usize) -> Lattice {
    let em = (0..len)
        .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
        .collect();
    let mut tr = [[0.0; NUM_TAGS]; NUM_TAGS];
    for row in &mut tr {
        for v in row.iter_mut() {
            *v = rng.gen_range(-3.0..3.0);
        }
    }
    (em, tr)
}

fn all_paths(len: usize) -> Vec<Vec<Tag>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                Tag::ALL.into_iter().map(move |t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

fn valid(path: &[Tag]) -> bool {
    let mut prev = None;
    path.iter().all(|&t| {
        let ok = transition_allowed(prev, t);
        prev = Some(t);
        ok
    })
}

#[test]
fn viterbi_equals_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for len in 1..=8 {
        let paths = all_paths(len);
        for _ in 0..100 {
            let (em, tr) = random_lattice(&mut rng, len);
            let best = paths
                .iter()
                .filter(|p| valid(p))
                .max_by(|a, b| path_score(&em, &tr, a).total_cmp(&path_score(&em, &tr, b)))
                .unwrap();
            assert_eq!(&viterbi(&em, &tr), best);
        }
    }
}

#[test]
fn partition_and_marginals_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for len in 1..=6 {
        let paths: Vec<Vec<Tag>> = all_paths(len).into_iter().filter(|p| valid(p)).collect();
        for _ in 0..20 {
            let (em, tr) = random_lattice(&mut rng, len);
            let scores: Vec<f64> = paths.iter().map(|p| path_score(&em, &tr, p)).collect();
            let z: f64 = scores.iter().map(|s| s.exp()).sum();
            assert!((log_partition(&em, &tr) - z.ln()).abs() < 1e-10);
            let m = marginals(&em, &tr);
            for t in 0..len {
                for y in Tag::ALL {
                    let brute: f64 = paths
                        .iter()
                        .zip(&scores)
                        .filter(|(p, _)| p[t] == y)
                        .map(|(_, s)| s.exp() / z)
                        .sum();
                    assert!((m.node[t][y.index()] - brute).abs() < 1e-10);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn marginals_normalize(seed in any::<u64>(), len in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (em, tr) = random_lattice(&mut rng, len);
        let m = marginals(&em, &tr);
        for row in &m.node {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for e in &m.edge {
            let s: f64 = e.iter().flatten().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!(e[Tag::O.index()][Tag::I.index()] == 0.0);
        }
    }

    #[test]
    fn decoded_paths_never_enter_i_from_o(seed in any::<u64>(), len in 1usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (em, mut tr) = random_lattice(&mut rng, len);
        tr[Tag::O.index()][Tag::I.index()] = 1e6;
        prop_assert!(valid(&viterbi(&em, &tr)));
    }
}

#[test]
fn zero_model_decodes_to_all_b() {
    let cfg = CrfFeatureConfig { dim: 64, dense_width: 0, emotion_features: true };
    let model = CrfModel::<f64>::zeros(cfg, CrfHyperParams::default());
    let toks = tokenize("so angry at the lockdown");
    let input = cfg.extract::<f64>(&toks, Some(EmotionLabel::Anger), None).unwrap();
    assert_eq!(model.decode(&input).unwrap(), vec![Tag::B; 5]);
}

fn random_crf(seed: u64) -> (CrfModel<f64>, Vec<TrainingSequence<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = CrfFeatureConfig { dim: 32, dense_width: 2, emotion_features: true };
    let mut model = CrfModel::zeros(cfg, CrfHyperParams { l2: 0.1, ..Default::default() });
    let theta: Vec<f64> = (0..model.num_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    model.set_flat(&theta).unwrap();
    let data = [("furious at the governor today", (3, 4)), ("scared of layoffs and rent hikes", (3, 4))]
        .iter()
        .map(|(text, span)| {
            let toks = tokenize(text);
            let dense: Vec<Vec<f64>> = (0..toks.len()).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            training_sequence(&cfg, &toks, EmotionLabel::Anger, &[*span], Some(&dense)).unwrap()
        })
        .collect();
    (model, data)
}

#[test]
fn crf_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let (model, data) = random_crf(seed);
        let g = model.objective_gradient(&data);
        let theta = model.to_flat();
        let eps = 1e-6;
        let mut worst = 0.0f64;
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += eps;
            let mut plus = model.clone();
            plus.set_flat(&t).unwrap();
            t[i] -= 2.0 * eps;
            let mut minus = model.clone();
            minus.set_flat(&t).unwrap();
            let fd = (plus.objective(&data) - minus.objective(&data)) / (2.0 * eps);
            worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(FD_FLOOR));
        }
        assert!(worst < 1e-4, "seed {seed}: {worst}");
    }
}

fn lockdown_toy() -> Vec<(String, TokenSequence, Vec<(usize, usize)>)> {
    let texts = [
        "so tired of this lockdown",
        "lockdown is ruining everything",
        "day twelve of lockdown and counting",
        "the lockdown rules make no sense",
        "cannot believe the lockdown got extended",
        "walked the dog today",
        "my lockdown garden is thriving",
        "coffee then more work",
    ];
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let toks = tokenize(t);
            let spans = toks
                .surfaces()
                .enumerate()
                .filter(|(_, w)| *w == "lockdown")
                .map(|(k, _)| (k, k + 1))
                .collect();
            (format!("p{i}"), toks, spans)
        })
        .collect()
}

#[test]
fn lockdown_toy_is_learned_exactly() {
    let cfg = CrfFeatureConfig { dim: 1 << 12, dense_width: 0, emotion_features: true };
    let toy = lockdown_toy();
    let data: Vec<TrainingSequence<f64>> = toy
        .iter()
        .map(|(_, toks, spans)| training_sequence(&cfg, toks, EmotionLabel::Anger, spans, None).unwrap())
        .collect();
    let (model, report) = CrfModel::train(cfg, CrfHyperParams::default(), &data).unwrap();
    for w in report.objective_history.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "objective decreased: {} -> {}", w[0], w[1]);
    }
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for (id, toks, spans) in &toy {
        pred.extend(tag_post(&model, id, toks, EmotionLabel::Anger, None).unwrap());
        for &(s, e) in spans {
            gold.push(TriggerSpan::new(id, EmotionLabel::Anger, toks, s, e).unwrap());
        }
    }
    let prf = span_prf::<f64>(&pred, &gold);
    assert_eq!(prf.f1, 1.0);
}

#[test]
fn training_without_spans_is_rejected() {
    let cfg = CrfFeatureConfig { dim: 64, dense_width: 0, emotion_features: false };
    let toks = tokenize("nothing here");
    let seq = training_sequence::<f64>(&cfg, &toks, EmotionLabel::Fear, &[], None).unwrap();
    assert!(CrfModel::train(cfg, CrfHyperParams::default(), &[seq]).is_err());
}

#[test]
fn model_reload_is_bit_exact() {
    let (model, data) = random_crf(3);
    let mut buf = Vec::new();
    model.write_to(&mut buf).unwrap();
    let back = CrfModel::<f64>::parse(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back.to_flat(), model.to_flat());
    for seq in &data {
        assert_eq!(back.decode(&seq.input).unwrap(), model.decode(&seq.input).unwrap());
    }
}

#[test]
fn bio_span_conventions() {
    use Tag::*;
    assert_eq!(spans_from_tags(&[O, B, I, O]), vec![(1, 3)]);
    assert_eq!(spans_from_tags(&[B, B]), vec![(0, 1), (1, 2)]);
    assert!(spans_from_tags(&[O, O, O]).is_empty());
}
