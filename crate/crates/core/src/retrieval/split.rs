use std::fmt;

use crate::corpus::sample_uniform;
use crate::error::{Error, Result};

pub const MIN_SPLIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SplitPart {
    Train,
    Dev,
    Test,
}

impl SplitPart {
    pub fn id(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::Dev => "dev",
            SplitPart::Test => "test",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitPart::Train),
            "dev" => Some(SplitPart::Dev),
            "test" => Some(SplitPart::Test),
            _ => None,
        }
    }
}

impl fmt::Display for SplitPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn part(&self, part: SplitPart) -> &[String] {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Dev => &self.dev,
            SplitPart::Test => &self.test,
        }
    }

    pub fn part_mut(&mut self, part: SplitPart) -> &mut Vec<String> {
        match part {
            SplitPart::Train => &mut self.train,
            SplitPart::Dev => &mut self.dev,
            SplitPart::Test => &mut self.test,
        }
    }

    /// Every id with its part, in split order.
    pub fn assignments(&self) -> impl Iterator<Item = (&str, SplitPart)> {
        [SplitPart::Train, SplitPart::Dev, SplitPart::Test]
            .into_iter()
            .flat_map(move |p| self.part(p).iter().map(move |id| (id.as_str(), p)))
    }
}

/// Seeded 8:1:1 split. Dev and test each get `⌊n/10⌋` ids and train takes
/// the rest. The input is treated as a set.
pub fn make_split(ids: &[String], seed: u64) -> Result<Split> {
    let shuffled = sample_uniform(ids, ids.len(), seed);
    let n = shuffled.len();
    if n < MIN_SPLIT {
        return Err(Error::InsufficientLabels { need: MIN_SPLIT, have: n });
    }
    let tenth = n / 10;
    let mut it = shuffled.into_iter();
    let test = it.by_ref().take(tenth).collect();
    let dev = it.by_ref().take(tenth).collect();
    Ok(Split { train: it.collect(), dev, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i:04}")).collect()
    }

    #[test]
    fn ratios() {
        for (n, want) in [(1000, (800, 100, 100)), (10, (8, 1, 1)), (11, (9, 1, 1)), (19, (17, 1, 1))] {
            let s = make_split(&ids(n), 3).unwrap();
            assert_eq!((s.train.len(), s.dev.len(), s.test.len()), want);
        }
        assert!(matches!(make_split(&ids(9), 0), Err(Error::InsufficientLabels { have: 9, .. })));
    }

    #[test]
    fn deterministic_and_disjoint() {
        let a = make_split(&ids(57), 9).unwrap();
        assert_eq!(a, make_split(&ids(57), 9).unwrap());
        let mut all: Vec<&str> = a.assignments().map(|(id, _)| id).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 57);
    }
}
