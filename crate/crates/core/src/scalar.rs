//! Floating-point abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used by the classifiers, the tagger, the topic sampler and the
/// intensity series: `f32` or `f64`.
///
/// `Display` must print the shortest representation that parses back to the
/// same value; every artifact that stores parameters relies on this for
/// bit-exact reloads.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Display
    + Debug
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Name written into artifact headers so a file is never reloaded at a
    /// different precision.
    const NAME: &'static str;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to every Scalar")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}

/// Value type for counting metrics (precision, recall, F1, accuracy).
///
/// Only field arithmetic is needed, so exact rationals work as well as
/// floats.
pub trait MetricValue: num_traits::Num + FromPrimitive + Copy + PartialOrd + Debug {}

impl<T: num_traits::Num + FromPrimitive + Copy + PartialOrd + Debug> MetricValue for T {}

pub(crate) fn metric_count<T: MetricValue>(n: usize) -> T {
    T::from_usize(n).expect("count fits the metric type")
}

/// Logistic function, evaluated on the side that never overflows.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(Σ exp(xs))`, stable for large magnitudes and for `-inf` entries.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let sum: T = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Parses a whitespace-separated list of scalars.
pub(crate) fn parse_list<T: Scalar>(s: &str) -> Option<Vec<T>> {
    s.split_whitespace().map(|t| t.parse().ok()).collect()
}

pub(crate) fn format_list<T: Scalar>(xs: &[T]) -> String {
    let mut out = String::with_capacity(xs.len() * 8);
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&x.to_string());
    }
    out
}
