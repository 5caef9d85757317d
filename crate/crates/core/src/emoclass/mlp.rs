//! Two-layer binary classification head:
//! `p = σ(W2 · ReLU(W1 · h + b1) + b2)`.
//!
//! The input space is a hashed feature space of up to 2^18 dimensions, so
//! `W1` is stored lazily. Columns that training never touched are not kept
//! in memory: their values are regenerated from the seeded initializer. A
//! global multiplier carries the L2 weight decay so that a gradient step
//! only touches the columns present in the mini-batch.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::format::{split_header, Header};
use crate::scalar::{format_list, parse_list, sigmoid, Scalar};
use crate::textfeat::FeatureVector;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpHyperParams {
    pub hidden: usize,
    /// L2 strength on W1 and W2; biases are not regularized.
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpHyperParams {
    fn default() -> Self {
        Self {
            hidden: 64,
            l2: 1e-4,
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Labeled training example.
pub type Example<T> = (FeatureVector<T>, bool);

#[derive(Debug, Clone, PartialEq)]
pub struct MlpBinaryClassifier<T> {
    dim: usize,
    hyper: MlpHyperParams,
    trained: bool,
    /// Multiplies every W1 entry.
    scale: T,
    /// Extra multiplier on regenerated (never touched) W1 columns.
    implicit_scale: T,
    /// Touched W1 columns, `hidden` values each, before `scale`.
    columns: BTreeMap<u32, Vec<T>>,
    b1: Vec<T>,
    w2: Vec<T>,
    b2: T,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Uniform(-r, r) draw keyed by (seed, column, row).
fn init_weight(seed: u64, column: u32, row: usize, radius: f64) -> f64 {
    let key = splitmix64(u64::from(column)).wrapping_add(row as u64);
    let bits = splitmix64(seed ^ splitmix64(key));
    let u = (bits >> 11) as f64 / (1u64 << 53) as f64;
    radius * (2.0 * u - 1.0)
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Numerically stable `-[y ln σ(z) + (1-y) ln(1-σ(z))]`.
fn bce_from_logit<T: Scalar>(z: T, y: bool) -> T {
    let softplus = z.max(T::zero()) + (-z.abs()).exp().ln_1p();
    if y {
        softplus - z
    } else {
        softplus
    }
}

/// Gradient of the training objective. W1 entries cover only the columns
/// seen in the data; the L2 part is applied separately by the caller.
struct DataGradient<T> {
    w1: BTreeMap<u32, Vec<T>>,
    b1: Vec<T>,
    w2: Vec<T>,
    b2: T,
}

struct Forward<T> {
    pre: Vec<T>,
    logit: T,
}

impl<T: Scalar> MlpBinaryClassifier<T> {
    /// Randomly initialized, untrained head.
    pub fn initialized(dim: usize, hyper: MlpHyperParams) -> Result<Self> {
        if hyper.hidden == 0 {
            return Err(Error::Config("hidden size must be at least 1".into()));
        }
        if dim == 0 {
            return Err(Error::Config("input dimension must be at least 1".into()));
        }
        let h = hyper.hidden;
        let r2 = glorot(h, 1);
        let w2 = (0..h)
            .map(|j| T::from_f64_lossy(init_weight(hyper.seed.wrapping_add(1), u32::MAX, j, r2)))
            .collect();
        Ok(Self {
            dim,
            trained: false,
            scale: T::one(),
            implicit_scale: T::one(),
            columns: BTreeMap::new(),
            b1: vec![T::zero(); h],
            w2,
            b2: T::zero(),
            hyper,
        })
    }

    /// Head with explicit dense parameters; `w1` is `hidden × dim`.
    /// Marked as trained.
    pub fn from_dense(w1: &[Vec<T>], b1: Vec<T>, w2: Vec<T>, b2: T) -> Result<Self> {
        let hidden = b1.len();
        if hidden == 0 || w1.len() != hidden || w2.len() != hidden {
            return Err(Error::DimensionMismatch {
                expected: hidden,
                got: w1.len().min(w2.len()),
            });
        }
        let dim = w1[0].len();
        if dim == 0 || w1.iter().any(|row| row.len() != dim) {
            return Err(Error::Config("ragged or empty W1".into()));
        }
        let columns = (0..dim)
            .map(|i| (i as u32, w1.iter().map(|row| row[i]).collect()))
            .collect();
        Ok(Self {
            dim,
            hyper: MlpHyperParams {
                hidden,
                ..MlpHyperParams::default()
            },
            trained: true,
            scale: T::one(),
            implicit_scale: T::one(),
            columns,
            b1,
            w2,
            b2,
        })
    }

    /// All-zero parameters: predicts exactly 0.5 everywhere.
    pub fn zeros(dim: usize, hidden: usize) -> Result<Self> {
        Self::from_dense(
            &vec![vec![T::zero(); dim]; hidden],
            vec![T::zero(); hidden],
            vec![T::zero(); hidden],
            T::zero(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hyper.hidden
    }

    pub fn hyper(&self) -> &MlpHyperParams {
        &self.hyper
    }

    /// Changes the L2 strength used by [`Self::objective`] and later training.
    pub fn set_l2(&mut self, l2: f64) {
        self.hyper.l2 = l2;
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn b2(&self) -> T {
        self.b2
    }

    pub fn set_b2(&mut self, b2: T) {
        self.b2 = b2;
    }

    fn w1_radius(&self) -> f64 {
        glorot(self.dim, self.hyper.hidden)
    }

    /// Column `i` of W1 (the weights leaving input feature `i`).
    pub fn w1_column(&self, i: u32) -> Vec<T> {
        match self.columns.get(&i) {
            Some(col) => col.iter().map(|&v| v * self.scale).collect(),
            None => {
                let r = self.w1_radius();
                let s = self.scale * self.implicit_scale;
                (0..self.hyper.hidden)
                    .map(|j| T::from_f64_lossy(init_weight(self.hyper.seed, i, j, r)) * s)
                    .collect()
            }
        }
    }

    fn unscaled_column(&self, i: u32) -> Vec<T> {
        match self.columns.get(&i) {
            Some(c) => c.clone(),
            None => {
                let r = self.w1_radius();
                (0..self.hyper.hidden)
                    .map(|j| T::from_f64_lossy(init_weight(self.hyper.seed, i, j, r)) * self.implicit_scale)
                    .collect()
            }
        }
    }

    fn check_dim(&self, h: &FeatureVector<T>) -> Result<()> {
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: h.dim(),
            });
        }
        Ok(())
    }

    fn forward(&self, h: &FeatureVector<T>) -> Forward<T> {
        let mut pre = self.b1.clone();
        for &(i, x) in h.entries() {
            match self.columns.get(&i) {
                Some(col) => {
                    let c = x * self.scale;
                    for (a, &w) in pre.iter_mut().zip(col) {
                        *a += c * w;
                    }
                }
                None => {
                    let r = self.w1_radius();
                    let c = x * self.scale * self.implicit_scale;
                    for (j, a) in pre.iter_mut().enumerate() {
                        *a += c * T::from_f64_lossy(init_weight(self.hyper.seed, i, j, r));
                    }
                }
            }
        }
        let logit = self.b2
            + pre
                .iter()
                .zip(&self.w2)
                .map(|(&a, &w)| a.max(T::zero()) * w)
                .sum::<T>();
        Forward { pre, logit }
    }

    pub fn logit(&self, h: &FeatureVector<T>) -> Result<T> {
        self.check_dim(h)?;
        Ok(self.forward(h).logit)
    }

    /// Probability of the positive class, kept inside the open interval
    /// (0, 1) even when the logistic saturates.
    pub fn predict_proba(&self, h: &FeatureVector<T>) -> Result<T> {
        let z = self.logit(h)?;
        Ok(clamp_open(sigmoid(z)))
    }

    /// `∂p/∂h_i` for each requested input index, at `h`.
    pub fn input_gradient(&self, h: &FeatureVector<T>, indices: &[u32]) -> Result<Vec<T>> {
        self.check_dim(h)?;
        let fwd = self.forward(h);
        let p = clamp_open(sigmoid(fwd.logit));
        let dp = p * (T::one() - p);
        // back-propagated weight on each hidden unit
        let gate: Vec<T> = fwd
            .pre
            .iter()
            .zip(&self.w2)
            .map(|(&a, &w)| if a > T::zero() { w } else { T::zero() })
            .collect();
        Ok(indices
            .iter()
            .map(|&i| {
                let col = self.w1_column(i);
                dp * col.iter().zip(&gate).map(|(&w, &g)| w * g).sum::<T>()
            })
            .collect())
    }

    /// Mean binary cross-entropy plus `λ/2 (‖W1‖² + ‖W2‖²)`.
    ///
    /// The W1 norm covers the full `hidden × dim` matrix, so this is only
    /// cheap for small `dim`.
    pub fn objective(&self, data: &[Example<T>]) -> Result<T> {
        let n = T::from_count(data.len().max(1));
        let mut loss = T::zero();
        for (h, y) in data {
            loss += bce_from_logit(self.logit(h)?, *y);
        }
        let lambda = T::from_f64_lossy(self.hyper.l2);
        let mut sq = T::zero();
        for i in 0..self.dim as u32 {
            sq += self.w1_column(i).iter().map(|&w| w * w).sum::<T>();
        }
        sq += self.w2.iter().map(|&w| w * w).sum::<T>();
        Ok(loss / n + lambda * sq / T::from_f64_lossy(2.0))
    }

    fn data_gradient(&self, batch: &[&Example<T>]) -> DataGradient<T> {
        let hdim = self.hyper.hidden;
        let n = T::from_count(batch.len().max(1));
        let mut g = DataGradient {
            w1: BTreeMap::new(),
            b1: vec![T::zero(); hdim],
            w2: vec![T::zero(); hdim],
            b2: T::zero(),
        };
        for (h, y) in batch {
            let fwd = self.forward(h);
            let target = if *y { T::one() } else { T::zero() };
            let delta = (sigmoid(fwd.logit) - target) / n;
            g.b2 += delta;
            let mut back = vec![T::zero(); hdim];
            for j in 0..hdim {
                let a = fwd.pre[j];
                if a > T::zero() {
                    g.w2[j] += delta * a;
                    back[j] = delta * self.w2[j];
                    g.b1[j] += back[j];
                }
            }
            for &(i, x) in h.entries() {
                let col = g.w1.entry(i).or_insert_with(|| vec![T::zero(); hdim]);
                for j in 0..hdim {
                    col[j] += back[j] * x;
                }
            }
        }
        g
    }

    /// Full gradient of [`Self::objective`] in the order of
    /// [`Self::to_flat`]. Small models only.
    pub fn objective_gradient(&self, data: &[Example<T>]) -> Result<Vec<T>> {
        for (h, _) in data {
            self.check_dim(h)?;
        }
        let refs: Vec<&Example<T>> = data.iter().collect();
        let g = self.data_gradient(&refs);
        let lambda = T::from_f64_lossy(self.hyper.l2);
        let hdim = self.hyper.hidden;
        let mut out = Vec::with_capacity(hdim * self.dim + 2 * hdim + 1);
        let cols: Vec<Vec<T>> = (0..self.dim as u32).map(|i| self.w1_column(i)).collect();
        for j in 0..hdim {
            for (i, col) in cols.iter().enumerate() {
                let data_part = g.w1.get(&(i as u32)).map_or(T::zero(), |c| c[j]);
                out.push(data_part + lambda * col[j]);
            }
        }
        out.extend(g.b1.iter().copied());
        out.extend(g.w2.iter().zip(&self.w2).map(|(&gw, &w)| gw + lambda * w));
        out.push(g.b2);
        Ok(out)
    }

    /// Flattened parameters `[W1 (row-major, hidden × dim), b1, W2, b2]`.
    /// Materializes W1, so only meant for small models.
    pub fn to_flat(&self) -> Vec<T> {
        let hdim = self.hyper.hidden;
        let cols: Vec<Vec<T>> = (0..self.dim as u32).map(|i| self.w1_column(i)).collect();
        let mut out = Vec::with_capacity(hdim * self.dim + 2 * hdim + 1);
        for j in 0..hdim {
            out.extend(cols.iter().map(|c| c[j]));
        }
        out.extend(&self.b1);
        out.extend(&self.w2);
        out.push(self.b2);
        out
    }

    /// Inverse of [`Self::to_flat`].
    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        let hdim = self.hyper.hidden;
        let expected = hdim * self.dim + 2 * hdim + 1;
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: flat.len(),
            });
        }
        self.scale = T::one();
        self.implicit_scale = T::one();
        self.columns = (0..self.dim)
            .map(|i| (i as u32, (0..hdim).map(|j| flat[j * self.dim + i]).collect()))
            .collect();
        let rest = &flat[hdim * self.dim..];
        self.b1 = rest[..hdim].to_vec();
        self.w2 = rest[hdim..2 * hdim].to_vec();
        self.b2 = rest[2 * hdim];
        Ok(())
    }

    /// Squared Frobenius norms of (W1, W2). Materializes W1.
    pub fn weight_norms_sq(&self) -> (T, T) {
        let mut w1 = T::zero();
        for i in 0..self.dim as u32 {
            w1 += self.w1_column(i).iter().map(|&w| w * w).sum::<T>();
        }
        (w1, self.w2.iter().map(|&w| w * w).sum())
    }

    /// One mini-batch gradient-descent step on the regularized objective.
    fn step(&mut self, batch: &[&Example<T>]) {
        let g = self.data_gradient(batch);
        let lr = T::from_f64_lossy(self.hyper.learning_rate);
        let decay = T::one() - lr * T::from_f64_lossy(self.hyper.l2);
        self.scale *= decay;
        for (i, gcol) in g.w1 {
            let mut col = self.unscaled_column(i);
            for (w, gv) in col.iter_mut().zip(gcol) {
                *w -= lr * gv / self.scale;
            }
            self.columns.insert(i, col);
        }
        if self.scale < T::from_f64_lossy(1e-3) {
            self.renormalize();
        }
        for (w, gv) in self.w2.iter_mut().zip(&g.w2) {
            *w = *w * decay - lr * *gv;
        }
        for (b, gv) in self.b1.iter_mut().zip(&g.b1) {
            *b -= lr * *gv;
        }
        self.b2 -= lr * g.b2;
    }

    fn renormalize(&mut self) {
        let s = self.scale;
        for col in self.columns.values_mut() {
            for w in col.iter_mut() {
                *w *= s;
            }
        }
        self.implicit_scale *= s;
        self.scale = T::one();
    }

    /// Trains by mini-batch gradient descent and returns the epoch whose
    /// parameters score best on `dev` (F1 of the positive class, then lower
    /// dev loss). With an empty dev set the final epoch is returned.
    pub fn train(train: &[Example<T>], dev: &[Example<T>], hyper: &MlpHyperParams) -> Result<Self> {
        let pos = train.iter().filter(|(_, y)| *y).count();
        if train.is_empty() || pos == 0 || pos == train.len() {
            return Err(Error::DegenerateLabels);
        }
        if hyper.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        let dim = train[0].0.dim();
        for (h, _) in train.iter().chain(dev) {
            if h.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: h.dim(),
                });
            }
        }
        let mut model = Self::initialized(dim, hyper.clone())?;
        model.trained = true;
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut best: Option<(T, T, Self)> = None;
        for _ in 0..hyper.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(hyper.batch_size) {
                let batch: Vec<&Example<T>> = chunk.iter().map(|&i| &train[i]).collect();
                model.step(&batch);
            }
            if dev.is_empty() {
                continue;
            }
            let (f1, loss) = model.dev_score(dev);
            let better = match &best {
                None => true,
                Some((bf, bl, _)) => f1 > *bf || (f1 == *bf && loss < *bl),
            };
            if better {
                best = Some((f1, loss, model.clone()));
            }
        }
        Ok(best.map_or(model, |(_, _, m)| m))
    }

    fn dev_score(&self, dev: &[Example<T>]) -> (T, T) {
        let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
        let mut loss = T::zero();
        for (h, y) in dev {
            let z = self.forward(h).logit;
            loss += bce_from_logit(z, *y);
            let pred = sigmoid(z) >= T::from_f64_lossy(0.5);
            match (pred, *y) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
        let denom = 2 * tp + fp + fneg;
        let f1 = if denom == 0 {
            T::zero()
        } else {
            T::from_count(2 * tp) / T::from_count(denom)
        };
        (f1, loss / T::from_count(dev.len()))
    }

    pub(crate) fn write_body<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let hp = &self.hyper;
        writeln!(w, "dims {} {}", self.dim, hp.hidden)?;
        writeln!(
            w,
            "hyper {} {} {} {} {}",
            hp.l2, hp.learning_rate, hp.epochs, hp.batch_size, hp.seed
        )?;
        writeln!(w, "trained {}", u8::from(self.trained))?;
        writeln!(w, "scale {}", self.scale)?;
        writeln!(w, "implicit_scale {}", self.implicit_scale)?;
        writeln!(w, "b1 {}", format_list(&self.b1))?;
        writeln!(w, "w2 {}", format_list(&self.w2))?;
        writeln!(w, "b2 {}", self.b2)?;
        for (i, col) in &self.columns {
            writeln!(w, "col {i} {}", format_list(col))?;
        }
        Ok(())
    }

    pub(crate) fn parse_body<'a>(lines: impl IntoIterator<Item = (usize, &'a str)>) -> Result<Self> {
        const WHAT: &str = "model file";
        let mut dims = None;
        let mut hyper = None;
        let mut trained = None;
        let mut scale = None;
        let mut implicit_scale = None;
        let (mut b1, mut w2, mut b2) = (None, None, None);
        let mut columns = BTreeMap::new();
        for (n, line) in lines {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let bad = |m: &str| Error::format(WHAT, n, format!("{key}: {m}"));
            match key {
                "dims" => {
                    let v: Vec<usize> = rest.split(' ').filter_map(|t| t.parse().ok()).collect();
                    if v.len() != 2 {
                        return Err(bad("expected two integers"));
                    }
                    dims = Some((v[0], v[1]));
                }
                "hyper" => {
                    let t: Vec<&str> = rest.split(' ').collect();
                    let parsed = (|| -> Option<(f64, f64, usize, usize, u64)> {
                        if t.len() != 5 {
                            return None;
                        }
                        Some((t[0].parse().ok()?, t[1].parse().ok()?, t[2].parse().ok()?, t[3].parse().ok()?, t[4].parse().ok()?))
                    })()
                    .ok_or_else(|| bad("malformed"))?;
                    hyper = Some(parsed);
                }
                "trained" => trained = Some(rest == "1"),
                "scale" => scale = Some(rest.parse::<T>().map_err(|_| bad("bad number"))?),
                "implicit_scale" => implicit_scale = Some(rest.parse::<T>().map_err(|_| bad("bad number"))?),
                "b1" => b1 = Some(parse_list::<T>(rest).ok_or_else(|| bad("bad number"))?),
                "w2" => w2 = Some(parse_list::<T>(rest).ok_or_else(|| bad("bad number"))?),
                "b2" => b2 = Some(rest.parse::<T>().map_err(|_| bad("bad number"))?),
                "col" => {
                    let (idx, vals) = rest.split_once(' ').ok_or_else(|| bad("malformed"))?;
                    let idx: u32 = idx.parse().map_err(|_| bad("bad index"))?;
                    let vals = parse_list::<T>(vals).ok_or_else(|| bad("bad number"))?;
                    columns.insert(idx, vals);
                }
                _ => return Err(bad("unknown key")),
            }
        }
        let missing = |k: &str| Error::format(WHAT, 0, format!("missing `{k}`"));
        let (dim, hidden) = dims.ok_or_else(|| missing("dims"))?;
        let (l2, learning_rate, epochs, batch_size, seed) = hyper.ok_or_else(|| missing("hyper"))?;
        let b1 = b1.ok_or_else(|| missing("b1"))?;
        let w2 = w2.ok_or_else(|| missing("w2"))?;
        if b1.len() != hidden || w2.len() != hidden {
            return Err(Error::format(WHAT, 0, "bias or W2 length disagrees with hidden size"));
        }
        for (i, c) in &columns {
            if c.len() != hidden || *i as usize >= dim {
                return Err(Error::format(WHAT, 0, format!("bad column {i}")));
            }
        }
        Ok(Self {
            dim,
            hyper: MlpHyperParams {
                hidden,
                l2,
                learning_rate,
                epochs,
                batch_size,
                seed,
            },
            trained: trained.ok_or_else(|| missing("trained"))?,
            scale: scale.ok_or_else(|| missing("scale"))?,
            implicit_scale: implicit_scale.ok_or_else(|| missing("implicit_scale"))?,
            columns,
            b1,
            w2,
            b2: b2.ok_or_else(|| missing("b2"))?,
        })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        Header::new().with("kind", "mlp").with("scalar", T::NAME).write_to(w)?;
        self.write_body(w)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (header, body) = split_header("model file", text)?;
        header.expect_kind("model file", "mlp")?;
        check_scalar::<T>(&header)?;
        Self::parse_body(body)
    }
}

pub(crate) fn check_scalar<T: Scalar>(header: &Header) -> Result<()> {
    match header.get("scalar") {
        Some(s) if s == T::NAME => Ok(()),
        other => Err(Error::format(
            "model file",
            1,
            format!("scalar type {other:?} does not match {}", T::NAME),
        )),
    }
}

fn clamp_open<T: Scalar>(p: T) -> T {
    p.max(T::min_positive_value()).min(T::one() - T::epsilon())
}
