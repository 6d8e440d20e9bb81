//! A fixed enumeration of generators whose generated portfolios are dense
//! among all functionally generated portfolios.
//!
//! Order:
//! - index 0 is the geometric mean with equal weights;
//! - then rounds `r = 1, 2, ...`, each made of two blocks:
//!   - geometric means whose positive weights have exact denominator
//!     `2^{r+1}`, lexicographic in the numerators;
//!   - minima of dyadic affine pieces at level `r - 1` (see below).
//!
//! A min-affine member is a tuple of linear pieces `c . p` whose entries are
//! dyadic in `[0, 1]` with overall maximum entry 1, pieces pairwise crossing
//! (neither dominates the other coordinatewise). Its level is the larger of
//! the finest entry denominator exponent and `pieces - 2`, so every tuple has
//! exactly one level and each level is finite. Within a level, tuples are
//! ordered by size, then lexicographically by piece index in the
//! lexicographic list of piece vectors. A tuple may contain a piece that
//! never attains the minimum, in which case it repeats the function of a
//! shorter tuple.
//!
//! Prior weights are `lambda_k proportional to 2^{-(k+1)}`.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;

use super::{AffinePiece, GeneratingFunction};

/// One member of a truncated dense family.
#[derive(Debug, Clone)]
pub struct DenseMember {
    pub index: usize,
    pub generator: GeneratingFunction,
    /// Normalised prior weight; may underflow to zero for long families.
    pub weight: f64,
    pub log_weight: f64,
}

/// Lazy iterator over the dense enumeration in dimension `n`.
pub struct DenseEnumerator {
    inner: Box<dyn Iterator<Item = GeneratingFunction> + Send>,
}

impl DenseEnumerator {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewCoordinates(n));
        }
        let first = GeneratingFunction::geometric_mean(SimplexPoint::barycenter(n))?;
        let rounds = (1u32..).flat_map(move |r| geometric_block(n, r).chain(affine_block(n, r - 1)));
        Ok(Self {
            inner: Box::new(std::iter::once(first).chain(rounds)),
        })
    }
}

impl Iterator for DenseEnumerator {
    type Item = GeneratingFunction;

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.next()
    }
}

/// The first `count` members with their renormalised prior weights.
pub fn dense_family(n: usize, count: usize) -> Result<Vec<DenseMember>> {
    if count == 0 {
        return Err(Error::InvalidParameter("dense family needs at least one member".into()));
    }
    let ln2 = std::f64::consts::LN_2;
    // sum_{k<K} 2^{-(k+1)} = 1 - 2^{-K}
    let log_total = (-(-(count as f64) * ln2).exp()).ln_1p();
    Ok(DenseEnumerator::new(n)?
        .take(count)
        .enumerate()
        .map(|(index, generator)| {
            let log_weight = -((index + 1) as f64) * ln2 - log_total;
            DenseMember {
                index,
                generator,
                weight: log_weight.exp(),
                log_weight,
            }
        })
        .collect())
}

/// Compositions of `total` into `n` positive parts in lexicographic order.
fn compositions(n: usize, total: u64) -> impl Iterator<Item = Vec<u64>> {
    let mut state: Option<Vec<u64>> = (total >= n as u64).then(|| {
        let mut a = vec![1; n];
        a[n - 1] = total - (n as u64 - 1);
        a
    });
    std::iter::from_fn(move || {
        let current = state.take()?;
        let mut tail = 0u64;
        for i in (0..n - 1).rev() {
            tail += current[i + 1];
            if tail > (n - 1 - i) as u64 {
                let mut next = current.clone();
                next[i] += 1;
                next[i + 1..].iter_mut().for_each(|x| *x = 1);
                next[n - 1] = tail - 1 - (n - 2 - i) as u64;
                state = Some(next);
                break;
            }
        }
        Some(current)
    })
}

fn geometric_block(n: usize, r: u32) -> impl Iterator<Item = GeneratingFunction> {
    let denom = 1u64 << (r + 1);
    compositions(n, denom)
        .filter(move |a| a.iter().any(|x| x % 2 == 1) && a.iter().any(|&x| x * n as u64 != denom))
        .map(move |a| {
            let w = a.iter().map(|&x| x as f64 / denom as f64).collect();
            GeneratingFunction::geometric_mean(SimplexPoint::new(w).expect("dyadic weights sum to one"))
                .expect("positive weights give a valid generator")
        })
}

/// Exponent of the reduced denominator of `j / 2^level`.
fn dyadic_level(j: u64, level: u32) -> u32 {
    if j == 0 {
        0
    } else {
        level - j.trailing_zeros().min(level)
    }
}

fn crosses(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).any(|(x, y)| x < y) && a.iter().zip(b).any(|(x, y)| x > y)
}

fn affine_block(n: usize, level: u32) -> impl Iterator<Item = GeneratingFunction> {
    let scale = 1u64 << level;
    let vectors: Vec<Vec<u64>> = (0..n)
        .map(|_| 0..=scale)
        .multi_cartesian_product()
        .filter(|v| v.iter().any(|&x| x > 0))
        .collect();
    let max_pieces = level as usize + 2;
    (1..=max_pieces).flat_map(move |k| {
        let vectors = vectors.clone();
        (0..vectors.len()).combinations(k).filter_map(move |idx| {
            let pieces: Vec<&Vec<u64>> = idx.iter().map(|&i| &vectors[i]).collect();
            let top = pieces.iter().flat_map(|v| v.iter()).copied().max()?;
            if top != scale {
                return None;
            }
            let entry_level = pieces
                .iter()
                .flat_map(|v| v.iter())
                .map(|&x| dyadic_level(x, level))
                .max()?;
            if entry_level.max((k as u32).saturating_sub(2)) != level {
                return None;
            }
            if !pieces.iter().tuple_combinations().all(|(a, b)| crosses(a, b)) {
                return None;
            }
            let affine = pieces
                .iter()
                .map(|v| AffinePiece::new(v.iter().map(|&x| x as f64 / scale as f64).collect(), 0.0))
                .collect();
            Some(GeneratingFunction::min_affine(affine).expect("non-negative dyadic pieces are positive"))
        })
    })
}
