//! Score-lattice algorithms for a three-tag BIO chain.
//!
//! A lattice is a list of per-position emission scores plus a 3×3
//! transition matrix. Two transitions are structurally forbidden: entering
//! `I` at the first position and `O → I`. Both score `-inf` regardless of
//! the stored transition weight.

use crate::scalar::{log_sum_exp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    B,
    I,
    O,
}

pub const NUM_TAGS: usize = 3;

impl Tag {
    pub const ALL: [Tag; NUM_TAGS] = [Tag::B, Tag::I, Tag::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Tag {
        Self::ALL[i]
    }

    pub fn symbol(self) -> char {
        match self {
            Tag::B => 'B',
            Tag::I => 'I',
            Tag::O => 'O',
        }
    }
}

/// Whether `prev → next` is allowed; `None` is the sequence start.
pub fn transition_allowed(prev: Option<Tag>, next: Tag) -> bool {
    !(next == Tag::I && matches!(prev, None | Some(Tag::O)))
}

/// Transition score with the structural bans applied.
#[inline]
pub fn transition_score<T: Scalar>(trans: &[[T; NUM_TAGS]; NUM_TAGS], prev: Option<Tag>, next: Tag) -> T {
    if !transition_allowed(prev, next) {
        return T::neg_infinity();
    }
    match prev {
        None => T::zero(),
        Some(p) => trans[p.index()][next.index()],
    }
}

/// Unnormalized log-score of a tag path.
pub fn path_score<T: Scalar>(emissions: &[[T; NUM_TAGS]], trans: &[[T; NUM_TAGS]; NUM_TAGS], path: &[Tag]) -> T {
    let mut s = T::zero();
    let mut prev = None;
    for (e, &y) in emissions.iter().zip(path) {
        s += transition_score(trans, prev, y) + e[y.index()];
        prev = Some(y);
    }
    s
}

/// Highest-scoring path. Ties go to the lower tag (B < I < O) both at each
/// backpointer and at the final position.
pub fn viterbi<T: Scalar>(emissions: &[[T; NUM_TAGS]], trans: &[[T; NUM_TAGS]; NUM_TAGS]) -> Vec<Tag> {
    let n = emissions.len();
    if n == 0 {
        return Vec::new();
    }
    let mut delta = vec![[T::neg_infinity(); NUM_TAGS]; n];
    let mut back = vec![[0usize; NUM_TAGS]; n];
    for y in Tag::ALL {
        delta[0][y.index()] = transition_score(trans, None, y) + emissions[0][y.index()];
    }
    for t in 1..n {
        for y in Tag::ALL {
            let mut best = T::neg_infinity();
            let mut arg = 0;
            for p in Tag::ALL {
                let cand = delta[t - 1][p.index()] + transition_score(trans, Some(p), y);
                if cand > best {
                    best = cand;
                    arg = p.index();
                }
            }
            delta[t][y.index()] = best + emissions[t][y.index()];
            back[t][y.index()] = arg;
        }
    }
    let mut last = 0;
    for y in 1..NUM_TAGS {
        if delta[n - 1][y] > delta[n - 1][last] {
            last = y;
        }
    }
    let mut path = vec![Tag::O; n];
    let mut cur = last;
    for t in (0..n).rev() {
        path[t] = Tag::from_index(cur);
        cur = back[t][cur];
    }
    path
}

/// Forward–backward quantities in log space.
#[derive(Debug, Clone)]
pub struct Marginals<T> {
    pub log_partition: T,
    /// `P(y_t = y)` per position.
    pub node: Vec<[T; NUM_TAGS]>,
    /// `P(y_{t-1} = a, y_t = b)` for `t ≥ 1`, stored at index `t - 1`.
    pub edge: Vec<[[T; NUM_TAGS]; NUM_TAGS]>,
}

pub fn log_partition<T: Scalar>(emissions: &[[T; NUM_TAGS]], trans: &[[T; NUM_TAGS]; NUM_TAGS]) -> T {
    let alpha = forward(emissions, trans);
    alpha.last().map_or(T::zero(), |a| log_sum_exp(a))
}

fn forward<T: Scalar>(emissions: &[[T; NUM_TAGS]], trans: &[[T; NUM_TAGS]; NUM_TAGS]) -> Vec<[T; NUM_TAGS]> {
    let n = emissions.len();
    let mut alpha = vec![[T::neg_infinity(); NUM_TAGS]; n];
    if n == 0 {
        return alpha;
    }
    for y in Tag::ALL {
        alpha[0][y.index()] = transition_score(trans, None, y) + emissions[0][y.index()];
    }
    let mut buf = [T::zero(); NUM_TAGS];
    for t in 1..n {
        for y in Tag::ALL {
            for p in Tag::ALL {
                buf[p.index()] = alpha[t - 1][p.index()] + transition_score(trans, Some(p), y);
            }
            alpha[t][y.index()] = log_sum_exp(&buf) + emissions[t][y.index()];
        }
    }
    alpha
}

pub fn marginals<T: Scalar>(emissions: &[[T; NUM_TAGS]], trans: &[[T; NUM_TAGS]; NUM_TAGS]) -> Marginals<T> {
    let n = emissions.len();
    if n == 0 {
        return Marginals {
            log_partition: T::zero(),
            node: Vec::new(),
            edge: Vec::new(),
        };
    }
    let alpha = forward(emissions, trans);
    let log_z = log_sum_exp(&alpha[n - 1]);
    let mut beta = vec![[T::zero(); NUM_TAGS]; n];
    let mut buf = [T::zero(); NUM_TAGS];
    for t in (0..n - 1).rev() {
        for y in Tag::ALL {
            for nx in Tag::ALL {
                buf[nx.index()] = transition_score(trans, Some(y), nx)
                    + emissions[t + 1][nx.index()]
                    + beta[t + 1][nx.index()];
            }
            beta[t][y.index()] = log_sum_exp(&buf);
        }
    }
    let node = (0..n)
        .map(|t| {
            let mut row = [T::zero(); NUM_TAGS];
            for y in 0..NUM_TAGS {
                row[y] = (alpha[t][y] + beta[t][y] - log_z).exp();
            }
            row
        })
        .collect();
    let edge = (1..n)
        .map(|t| {
            let mut m = [[T::zero(); NUM_TAGS]; NUM_TAGS];
            for p in Tag::ALL {
                for y in Tag::ALL {
                    m[p.index()][y.index()] = (alpha[t - 1][p.index()]
                        + transition_score(trans, Some(p), y)
                        + emissions[t][y.index()]
                        + beta[t][y.index()]
                        - log_z)
                        .exp();
                }
            }
            m
        })
        .collect();
    Marginals {
        log_partition: log_z,
        node,
        edge,
    }
}
