//! Sample-split index plans.
//!
//! A plan reserves an anchor block J₀ = {0, …, n⁽⁰⁾−1} and, for every order
//! k = 1..m, cuts the remaining indices into k contiguous near-equal blocks
//! (larger blocks first). The complement is re-partitioned for every k, so
//! blocks are disjoint within a level but shared across levels.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::MAX_ORDER;

/// How large the anchor block is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// n⁽⁰⁾ = ⌈n/2⌉.
    Balanced,
    /// n⁽⁰⁾ = max(1, ⌈n / max(ln n, 2)⌉).
    Efficient,
}

impl SplitMode {
    pub fn anchor_size(self, n: usize) -> usize {
        match self {
            SplitMode::Balanced => n.div_ceil(2),
            SplitMode::Efficient => {
                let denom = (n as f64).ln().max(2.0);
                ((n as f64 / denom).ceil() as usize).max(1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n: usize,
    pub m: usize,
    pub j0: Vec<usize>,
    /// `parts[k-1]` holds the k blocks of level k.
    pub parts: Vec<Vec<Vec<usize>>>,
}

impl SplitPlan {
    pub fn anchor_size(&self) -> usize {
        self.j0.len()
    }

    pub fn level(&self, k: usize) -> &[Vec<usize>] {
        &self.parts[k - 1]
    }
}

/// Smallest n for which a plan with this order and mode exists.
pub fn minimum_n(m: usize, mode: SplitMode) -> usize {
    (m + 1..)
        .find(|&n| n - mode.anchor_size(n).min(n) >= m)
        .expect("some n satisfies the split preconditions")
}

/// Builds the split plan for a sample of size `n` and Taylor order `m`.
pub fn make_split(n: usize, m: usize, mode: SplitMode, seed: u64, shuffle: bool) -> Result<SplitPlan> {
    if m == 0 || m > MAX_ORDER {
        return Err(Error::config("estimator.m", format!("m must be in 1..={MAX_ORDER}, got {m}")));
    }
    let n0 = mode.anchor_size(n);
    if n < m + 1 || n0 > n || n - n0 < m {
        return Err(Error::config(
            "n",
            format!(
                "sample size {n} too small for m = {m} with {mode:?} split; minimum n is {}",
                minimum_n(m, mode)
            ),
        ));
    }
    let j0: Vec<usize> = (0..n0).collect();
    let mut rest: Vec<usize> = (n0..n).collect();
    if shuffle {
        rest.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let parts = (1..=m)
        .map(|k| {
            let len = rest.len();
            let (q, r) = (len / k, len % k);
            let mut start = 0;
            (0..k)
                .map(|j| {
                    let size = q + usize::from(j < r);
                    let mut block = rest[start..start + size].to_vec();
                    block.sort_unstable();
                    start += size;
                    block
                })
                .collect()
        })
        .collect();
    Ok(SplitPlan { n, m, j0, parts })
}

/// The first broken plan invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitViolation {
    WrongLevelCount { expected: usize, found: usize },
    WrongBlockCount { level: usize, found: usize },
    EmptyBlock { level: usize, block: usize },
    IndexOutOfRange { index: usize },
    Unsorted { level: usize, block: usize },
    Overlap { level: usize, index: usize },
    NotCovering { level: usize, missing: usize },
    Unbalanced { level: usize, min: usize, max: usize },
}

impl fmt::Display for SplitViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitViolation::WrongLevelCount { expected, found } => {
                write!(f, "expected {expected} levels, found {found}")
            }
            SplitViolation::WrongBlockCount { level, found } => {
                write!(f, "level {level} has {found} blocks")
            }
            SplitViolation::EmptyBlock { level, block } => {
                write!(f, "block {block} of level {level} is empty")
            }
            SplitViolation::IndexOutOfRange { index } => write!(f, "index {index} out of range"),
            SplitViolation::Unsorted { level, block } => {
                write!(f, "block {block} of level {level} is not sorted")
            }
            SplitViolation::Overlap { level, index } => {
                write!(f, "index {index} appears twice at level {level} (disjointness)")
            }
            SplitViolation::NotCovering { level, missing } => {
                write!(f, "index {missing} is not covered at level {level}")
            }
            SplitViolation::Unbalanced { level, min, max } => {
                write!(f, "level {level} block sizes range {min}..{max}")
            }
        }
    }
}

/// Checks every plan invariant. Level 0 denotes J₀ itself.
pub fn validate(plan: &SplitPlan) -> std::result::Result<(), SplitViolation> {
    if plan.parts.len() != plan.m {
        return Err(SplitViolation::WrongLevelCount {
            expected: plan.m,
            found: plan.parts.len(),
        });
    }
    if plan.j0.is_empty() {
        return Err(SplitViolation::EmptyBlock { level: 0, block: 0 });
    }
    if plan.j0.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SplitViolation::Unsorted { level: 0, block: 0 });
    }
    for (li, level) in plan.parts.iter().enumerate() {
        let k = li + 1;
        if level.len() != k {
            return Err(SplitViolation::WrongBlockCount { level: k, found: level.len() });
        }
        let mut seen = vec![false; plan.n];
        for &i in &plan.j0 {
            if i >= plan.n {
                return Err(SplitViolation::IndexOutOfRange { index: i });
            }
            seen[i] = true;
        }
        for (bi, block) in level.iter().enumerate() {
            if block.is_empty() {
                return Err(SplitViolation::EmptyBlock { level: k, block: bi });
            }
            if block.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SplitViolation::Unsorted { level: k, block: bi });
            }
            for &i in block {
                if i >= plan.n {
                    return Err(SplitViolation::IndexOutOfRange { index: i });
                }
                if seen[i] {
                    return Err(SplitViolation::Overlap { level: k, index: i });
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(SplitViolation::NotCovering { level: k, missing });
        }
        let min = level.iter().map(Vec::len).min().unwrap_or(0);
        let max = level.iter().map(Vec::len).max().unwrap_or(0);
        if max - min > 1 {
            return Err(SplitViolation::Unbalanced { level: k, min, max });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn balanced_example() {
        let plan = make_split(10, 2, SplitMode::Balanced, 0, false).unwrap();
        assert_eq!(plan.j0, vec![0, 1, 2, 3, 4]);
        assert_eq!(plan.level(1), &[vec![5, 6, 7, 8, 9]]);
        assert_eq!(plan.level(2), &[vec![5, 6, 7], vec![8, 9]]);
        assert_eq!(validate(&plan), Ok(()));
    }

    #[test]
    fn too_small_is_config_error() {
        let err = make_split(3, 2, SplitMode::Balanced, 0, false).unwrap_err();
        match err {
            Error::Config { message, .. } => assert!(message.contains("minimum n is 4"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(make_split(3, 3, SplitMode::Balanced, 0, false).is_err());
    }

    #[test]
    fn efficient_anchor_size() {
        // 100 / ln 100 = 21.71…
        assert_eq!(SplitMode::Efficient.anchor_size(100), 22);
        let plan = make_split(100, 2, SplitMode::Efficient, 0, false).unwrap();
        assert_eq!(plan.anchor_size(), 22);
        // ln clamps at 2 for tiny n.
        assert_eq!(SplitMode::Efficient.anchor_size(5), 3);
    }

    #[test]
    fn violations_reported() {
        let mut plan = make_split(10, 2, SplitMode::Balanced, 0, false).unwrap();
        plan.parts[0][0].insert(0, 4);
        assert_eq!(validate(&plan), Err(SplitViolation::Overlap { level: 1, index: 4 }));

        let mut plan = make_split(10, 2, SplitMode::Balanced, 0, false).unwrap();
        plan.parts[1][1].clear();
        assert_eq!(validate(&plan), Err(SplitViolation::EmptyBlock { level: 2, block: 1 }));
    }

    #[test]
    fn shuffle_is_seeded() {
        let a = make_split(40, 3, SplitMode::Balanced, 9, true).unwrap();
        let b = make_split(40, 3, SplitMode::Balanced, 9, true).unwrap();
        let c = make_split(40, 3, SplitMode::Balanced, 10, true).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(validate(&a), Ok(()));
    }

    proptest! {
        #[test]
        fn plans_satisfy_invariants(
            n in 2usize..400,
            m in 1usize..6,
            efficient in any::<bool>(),
            shuffle in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let mode = if efficient { SplitMode::Efficient } else { SplitMode::Balanced };
            match make_split(n, m, mode, seed, shuffle) {
                Ok(plan) => {
                    prop_assert_eq!(validate(&plan), Ok(()));
                    for k in 1..=m {
                        let total: usize = plan.level(k).iter().map(Vec::len).sum();
                        prop_assert_eq!(total, n - plan.anchor_size());
                    }
                    prop_assert_eq!(&plan, &make_split(n, m, mode, seed, shuffle).unwrap());
                }
                Err(_) => prop_assert!(n < minimum_n(m, mode)),
            }
        }
    }
}
