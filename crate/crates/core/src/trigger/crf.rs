use std::io::Write;

use crate::error::{Error, Result};
use crate::format::{split_header, Header};
use crate::scalar::{format_list, parse_list, Scalar};
use crate::trigger::features::{CrfFeatureConfig, TaggingInput};
use crate::trigger::lattice::{self, transition_allowed, Tag, NUM_TAGS};

#[derive(Debug, Clone, PartialEq)]
pub struct CrfHyperParams {
    pub l2: f64,
    /// Initial step of each line search.
    pub learning_rate: f64,
    pub epochs: usize,
    /// Recorded for provenance; full-batch training uses no randomness.
    pub seed: u64,
}

impl Default for CrfHyperParams {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            learning_rate: 1.0,
            epochs: 100,
            seed: 0,
        }
    }
}

/// A tagged training sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSequence<T> {
    pub input: TaggingInput<T>,
    pub tags: Vec<Tag>,
}

/// Linear-chain CRF over B/I/O.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel<T> {
    features: CrfFeatureConfig,
    hyper: CrfHyperParams,
    /// `dim × 3`, row-major by feature.
    emission: Vec<T>,
    /// `dense_width × 3`.
    dense: Vec<T>,
    transitions: [[T; NUM_TAGS]; NUM_TAGS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfTrainingReport<T> {
    /// Training objective before the first and after every accepted epoch.
    pub objective_history: Vec<T>,
}

impl<T: Scalar> CrfModel<T> {
    /// All weights zero.
    pub fn zeros(features: CrfFeatureConfig, hyper: CrfHyperParams) -> Self {
        Self {
            emission: vec![T::zero(); features.dim * NUM_TAGS],
            dense: vec![T::zero(); features.dense_width * NUM_TAGS],
            transitions: [[T::zero(); NUM_TAGS]; NUM_TAGS],
            features,
            hyper,
        }
    }

    pub fn features(&self) -> &CrfFeatureConfig {
        &self.features
    }

    pub fn hyper(&self) -> &CrfHyperParams {
        &self.hyper
    }

    pub fn transitions(&self) -> &[[T; NUM_TAGS]; NUM_TAGS] {
        &self.transitions
    }

    pub fn num_params(&self) -> usize {
        self.emission.len() + self.dense.len() + NUM_TAGS * NUM_TAGS
    }

    /// `[emission, dense, transitions (row-major)]`.
    pub fn to_flat(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend(&self.emission);
        v.extend(&self.dense);
        for row in &self.transitions {
            v.extend(row);
        }
        v
    }

    /// Inverse of [`Self::to_flat`]. The `O → I` slot is forced to zero
    /// since that transition is never scored.
    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let (e, rest) = flat.split_at(self.emission.len());
        let (d, t) = rest.split_at(self.dense.len());
        self.emission.copy_from_slice(e);
        self.dense.copy_from_slice(d);
        for (k, v) in t.iter().enumerate() {
            self.transitions[k / NUM_TAGS][k % NUM_TAGS] = *v;
        }
        self.transitions[Tag::O.index()][Tag::I.index()] = T::zero();
        Ok(())
    }

    fn check_input(&self, input: &TaggingInput<T>) -> Result<()> {
        if self.features.dense_width > 0 && input.dense.len() != input.sparse.len() {
            return Err(Error::DimensionMismatch {
                expected: input.sparse.len(),
                got: input.dense.len(),
            });
        }
        for row in &input.dense {
            if row.len() != self.features.dense_width {
                return Err(Error::DimensionMismatch {
                    expected: self.features.dense_width,
                    got: row.len(),
                });
            }
        }
        if let Some(&f) = input.sparse.iter().flatten().find(|&&f| f as usize >= self.features.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.features.dim,
                got: f as usize + 1,
            });
        }
        Ok(())
    }

    /// Per-position emission scores.
    pub fn emissions(&self, input: &TaggingInput<T>) -> Vec<[T; NUM_TAGS]> {
        (0..input.len())
            .map(|t| {
                let mut row = [T::zero(); NUM_TAGS];
                for &f in &input.sparse[t] {
                    let base = f as usize * NUM_TAGS;
                    for (y, r) in row.iter_mut().enumerate() {
                        *r += self.emission[base + y];
                    }
                }
                if let Some(x) = input.dense.get(t) {
                    for (e, &xv) in x.iter().enumerate() {
                        for (y, r) in row.iter_mut().enumerate() {
                            *r += xv * self.dense[e * NUM_TAGS + y];
                        }
                    }
                }
                row
            })
            .collect()
    }

    /// Most probable tag path; an empty input yields an empty path.
    pub fn decode(&self, input: &TaggingInput<T>) -> Result<Vec<Tag>> {
        self.check_input(input)?;
        Ok(lattice::viterbi(&self.emissions(input), &self.transitions))
    }

    pub fn marginals(&self, input: &TaggingInput<T>) -> Result<lattice::Marginals<T>> {
        self.check_input(input)?;
        Ok(lattice::marginals(&self.emissions(input), &self.transitions))
    }

    fn l2_penalty(&self) -> T {
        let sq: T = self.to_flat().iter().map(|&w| w * w).sum();
        T::from_f64_lossy(self.hyper.l2) * sq / T::from_f64_lossy(2.0)
    }

    /// Mean conditional log-likelihood minus `λ/2 ‖θ‖²`.
    pub fn objective(&self, data: &[TrainingSequence<T>]) -> T {
        let mut ll = T::zero();
        for seq in data {
            let em = self.emissions(&seq.input);
            ll += lattice::path_score(&em, &self.transitions, &seq.tags) - lattice::log_partition(&em, &self.transitions);
        }
        ll / T::from_count(data.len().max(1)) - self.l2_penalty()
    }

    /// Gradient of [`Self::objective`] in [`Self::to_flat`] order.
    pub fn objective_gradient(&self, data: &[TrainingSequence<T>]) -> Vec<T> {
        let ne = self.emission.len();
        let nd = self.dense.len();
        let mut g = vec![T::zero(); self.num_params()];
        for seq in data {
            let em = self.emissions(&seq.input);
            let m = lattice::marginals(&em, &self.transitions);
            for (t, feats) in seq.input.sparse.iter().enumerate() {
                let mut diff = [T::zero(); NUM_TAGS];
                for (y, d) in diff.iter_mut().enumerate() {
                    *d = -m.node[t][y];
                }
                diff[seq.tags[t].index()] += T::one();
                for &f in feats {
                    let base = f as usize * NUM_TAGS;
                    for y in 0..NUM_TAGS {
                        g[base + y] += diff[y];
                    }
                }
                if let Some(x) = seq.input.dense.get(t) {
                    for (e, &xv) in x.iter().enumerate() {
                        for y in 0..NUM_TAGS {
                            g[ne + e * NUM_TAGS + y] += xv * diff[y];
                        }
                    }
                }
            }
            for t in 1..seq.tags.len() {
                let a = seq.tags[t - 1].index();
                let b = seq.tags[t].index();
                g[ne + nd + a * NUM_TAGS + b] += T::one();
                for p in 0..NUM_TAGS {
                    for y in 0..NUM_TAGS {
                        g[ne + nd + p * NUM_TAGS + y] -= m.edge[t - 1][p][y];
                    }
                }
            }
        }
        let n = T::from_count(data.len().max(1));
        let lambda = T::from_f64_lossy(self.hyper.l2);
        for (gi, w) in g.iter_mut().zip(self.to_flat()) {
            *gi = *gi / n - lambda * w;
        }
        g[ne + nd + Tag::O.index() * NUM_TAGS + Tag::I.index()] = T::zero();
        g
    }

    /// Maximizes the regularized log-likelihood by full-batch, diagonally
    /// preconditioned (AdaGrad-scaled) gradient ascent with a backtracking
    /// line search, so the objective never decreases between epochs.
    pub fn train(
        features: CrfFeatureConfig,
        hyper: CrfHyperParams,
        data: &[TrainingSequence<T>],
    ) -> Result<(Self, CrfTrainingReport<T>)> {
        validate_training(data)?;
        let mut model = Self::zeros(features, hyper);
        for seq in data {
            model.check_input(&seq.input)?;
        }
        let mut objective = model.objective(data);
        let mut history = vec![objective];
        let mut accum = vec![T::zero(); model.num_params()];
        let eps = T::from_f64_lossy(1e-8);
        let armijo = T::from_f64_lossy(1e-4);
        for _ in 0..model.hyper.epochs {
            let grad = model.objective_gradient(data);
            let mut dir = vec![T::zero(); grad.len()];
            let mut slope = T::zero();
            for ((d, a), &g) in dir.iter_mut().zip(accum.iter_mut()).zip(&grad) {
                *a += g * g;
                if *a > T::zero() {
                    *d = g / (a.sqrt() + eps);
                    slope += g * *d;
                }
            }
            if slope <= T::from_f64_lossy(1e-14) {
                break;
            }
            let theta = model.to_flat();
            let mut step = T::from_f64_lossy(model.hyper.learning_rate);
            let mut accepted = None;
            for _ in 0..40 {
                let cand: Vec<T> = theta.iter().zip(&dir).map(|(&w, &d)| w + step * d).collect();
                let mut trial = model.clone();
                trial.set_flat(&cand)?;
                let value = trial.objective(data);
                if value >= objective + armijo * step * slope {
                    accepted = Some((trial, value));
                    break;
                }
                step /= T::from_f64_lossy(2.0);
            }
            match accepted {
                Some((m, v)) => {
                    model = m;
                    objective = v;
                    history.push(v);
                }
                None => break,
            }
        }
        Ok((
            model,
            CrfTrainingReport {
                objective_history: history,
            },
        ))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        Header::new()
            .with("kind", "crf")
            .with("scalar", T::NAME)
            .with("dim", self.features.dim)
            .with("dense_width", self.features.dense_width)
            .with("emotion_features", u8::from(self.features.emotion_features))
            .write_to(w)?;
        let hp = &self.hyper;
        writeln!(w, "hyper {} {} {} {}", hp.l2, hp.learning_rate, hp.epochs, hp.seed)?;
        let flat_t: Vec<T> = self.transitions.iter().flatten().copied().collect();
        writeln!(w, "trans {}", format_list(&flat_t))?;
        if !self.dense.is_empty() {
            writeln!(w, "dense {}", format_list(&self.dense))?;
        }
        for (f, row) in self.emission.chunks(NUM_TAGS).enumerate() {
            if row.iter().any(|v| *v != T::zero()) {
                writeln!(w, "e {f} {}", format_list(row))?;
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "crf model";
        let (header, body) = split_header(WHAT, text)?;
        header.expect_kind(WHAT, "crf")?;
        if header.get("scalar") != Some(T::NAME) {
            return Err(Error::format(WHAT, 1, "scalar type mismatch"));
        }
        let features = CrfFeatureConfig {
            dim: header.require(WHAT, "dim")?,
            dense_width: header.require(WHAT, "dense_width")?,
            emotion_features: header.require::<u8>(WHAT, "emotion_features")? == 1,
        };
        let mut model = Self::zeros(features, CrfHyperParams::default());
        let mut saw_hyper = false;
        for (n, line) in body {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let bad = |m: &str| Error::format(WHAT, n, format!("{key}: {m}"));
            match key {
                "hyper" => {
                    let t: Vec<&str> = rest.split(' ').collect();
                    if t.len() != 4 {
                        return Err(bad("malformed"));
                    }
                    model.hyper = CrfHyperParams {
                        l2: t[0].parse().map_err(|_| bad("l2"))?,
                        learning_rate: t[1].parse().map_err(|_| bad("learning rate"))?,
                        epochs: t[2].parse().map_err(|_| bad("epochs"))?,
                        seed: t[3].parse().map_err(|_| bad("seed"))?,
                    };
                    saw_hyper = true;
                }
                "trans" => {
                    let v: Vec<T> = parse_list(rest).filter(|v: &Vec<T>| v.len() == 9).ok_or_else(|| bad("need 9 numbers"))?;
                    for (k, x) in v.into_iter().enumerate() {
                        model.transitions[k / NUM_TAGS][k % NUM_TAGS] = x;
                    }
                }
                "dense" => {
                    let v: Vec<T> = parse_list(rest)
                        .filter(|v: &Vec<T>| v.len() == model.dense.len())
                        .ok_or_else(|| bad("wrong width"))?;
                    model.dense = v;
                }
                "e" => {
                    let (idx, vals) = rest.split_once(' ').ok_or_else(|| bad("malformed"))?;
                    let f: usize = idx.parse().map_err(|_| bad("bad index"))?;
                    let v: Vec<T> = parse_list(vals).filter(|v: &Vec<T>| v.len() == NUM_TAGS).ok_or_else(|| bad("need 3 numbers"))?;
                    if f >= features.dim {
                        return Err(bad("index out of range"));
                    }
                    model.emission[f * NUM_TAGS..(f + 1) * NUM_TAGS].copy_from_slice(&v);
                }
                _ => return Err(bad("unknown key")),
            }
        }
        if !saw_hyper {
            return Err(Error::format(WHAT, 0, "missing `hyper`"));
        }
        Ok(model)
    }
}

fn validate_training<T>(data: &[TrainingSequence<T>]) -> Result<()> {
    if !data.iter().any(|s| s.tags.contains(&Tag::B)) {
        return Err(Error::NoPositiveSpans);
    }
    for s in data {
        if s.tags.len() != s.input.len() {
            return Err(Error::DimensionMismatch {
                expected: s.input.len(),
                got: s.tags.len(),
            });
        }
        let mut prev = None;
        for &t in &s.tags {
            if !transition_allowed(prev, t) {
                return Err(Error::InvalidLabel("I tag without a preceding B or I".into()));
            }
            prev = Some(t);
        }
    }
    Ok(())
}
