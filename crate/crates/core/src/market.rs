//! Market-weight paths, test-market generators and the empirical pair measure.
//!
//! Paths keep the natural logarithms of the market weights alongside the
//! weights themselves. Relative returns are computed from the log-weights, so
//! paths whose smallest weight decays geometrically (the adversarial
//! counterexample path) stay exact long after the linear weights underflow.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;

/// Tolerance for transition-matrix row sums.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// Tolerance for probability weights summing to one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// A finite sequence of market weights `mu(0), ..., mu(T)` together with the
/// smallest `M` such that every relative return `mu_i(t+1)/mu_i(t)` lies in
/// `[1/M, M]`.
#[derive(Debug, Clone)]
pub struct MarketPath {
    points: Vec<SimplexPoint>,
    log_points: Vec<Vec<f64>>,
    ratios: Vec<Vec<f64>>,
    bound_m: f64,
}

impl MarketPath {
    /// Builds a path from open-simplex points of a common dimension.
    pub fn from_points(points: Vec<SimplexPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::PathTooShort {
                min: 2,
                got: points.len(),
            });
        }
        let n = points[0].dim();
        for p in &points {
            if p.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.dim(),
                });
            }
            p.check_open()?;
        }
        let log_points = points.iter().map(|p| p.iter().map(|x| x.ln()).collect()).collect();
        Ok(Self::assemble(points, log_points))
    }

    fn assemble(points: Vec<SimplexPoint>, log_points: Vec<Vec<f64>>) -> Self {
        let ratios = log_points
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).exp()).collect())
            .collect();
        Self::with_ratios(points, log_points, ratios)
    }

    fn with_ratios(points: Vec<SimplexPoint>, log_points: Vec<Vec<f64>>, ratios: Vec<Vec<f64>>) -> Self {
        let bound_m = ratios
            .iter()
            .flatten()
            .map(|&r: &f64| r.max(1.0 / r))
            .fold(1.0, f64::max);
        Self {
            points,
            log_points,
            ratios,
            bound_m,
        }
    }

    /// Number of points, `T + 1`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of trading periods, `T`.
    pub fn horizon(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[SimplexPoint] {
        &self.points
    }

    pub fn point(&self, t: usize) -> &SimplexPoint {
        &self.points[t]
    }

    pub fn log_weights(&self, t: usize) -> &[f64] {
        &self.log_points[t]
    }

    /// Relative returns `mu(t+1) / mu(t)`.
    pub fn ratio(&self, t: usize) -> &[f64] {
        &self.ratios[t]
    }

    pub fn bound_m(&self) -> f64 {
        self.bound_m
    }

    /// The sub-path `mu(from), ..., mu(to)`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if to >= self.len() {
            return Err(Error::HorizonTooLong {
                horizon: to,
                available: self.horizon(),
            });
        }
        if to < from + 1 {
            return Err(Error::PathTooShort {
                min: 2,
                got: to + 1 - from.min(to + 1),
            });
        }
        Ok(Self::with_ratios(
            self.points[from..=to].to_vec(),
            self.log_points[from..=to].to_vec(),
            self.ratios[from..to].to_vec(),
        ))
    }

    pub(crate) fn check_horizon(&self, horizon: usize) -> Result<()> {
        if horizon > self.horizon() {
            Err(Error::HorizonTooLong {
                horizon,
                available: self.horizon(),
            })
        } else {
            Ok(())
        }
    }
}

/// Validates raw coordinates as a market path. Sums within `1e-9` of one are
/// renormalised; coordinates below the open-simplex floor are rejected.
pub fn validate_path(points: Vec<Vec<f64>>) -> Result<MarketPath> {
    let points = points.into_iter().map(SimplexPoint::open).collect::<Result<Vec<_>>>()?;
    MarketPath::from_points(points)
}

/// The two-stock path on which Cover's portfolio over all maps fails to be
/// universal:
///
/// `mu(0) = (1/2, 1/2)`,
/// `mu(t+1) = (mu_1(t), (1+delta) mu_2(t)) / (1 + delta mu_2(t))`.
///
/// Stock 2 beats stock 1 by the factor `1 + delta` every period. The recursion
/// runs on log-weights; the first weight decays like `(1+delta)^{-t}` and
/// leaves the floating-point range after a few thousand steps.
pub fn counterexample_path(delta: f64, horizon: usize) -> Result<MarketPath> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if horizon < 1 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    // log mu_1 follows the recursion; log mu_2 = log(1 - mu_1) stays accurate
    // as mu_2 approaches one, where a recursion on it would cancel.
    let mut log_points = Vec::with_capacity(horizon + 1);
    let mut ratios = Vec::with_capacity(horizon);
    let mut log_mu1 = 0.5f64.ln();
    log_points.push(vec![log_mu1, 0.5f64.ln()]);
    for _ in 0..horizon {
        let mu1 = log_mu1.exp();
        let mu2 = 1.0 - mu1;
        let norm = 1.0 + delta * mu2;
        ratios.push(vec![1.0 / norm, (1.0 + delta) / norm]);
        log_mu1 -= (delta * mu2).ln_1p();
        log_points.push(vec![log_mu1, (-log_mu1.exp()).ln_1p()]);
    }
    let points = log_points
        .iter()
        .map(|lp| SimplexPoint::from_normalized(lp.iter().map(|x| x.exp()).collect()))
        .collect();
    Ok(MarketPath::with_ratios(points, log_points, ratios))
}

/// A time-homogeneous Markov chain on a finite set of open-simplex states.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    states: Vec<SimplexPoint>,
    transition: Vec<Vec<f64>>,
}

impl MarkovChain {
    pub fn new(states: Vec<SimplexPoint>, transition: Vec<Vec<f64>>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidParameter("state set is empty".into()));
        }
        let n = states[0].dim();
        for s in &states {
            if s.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.dim(),
                });
            }
            s.check_open()?;
        }
        if transition.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                got: transition.len(),
            });
        }
        for (row, probs) in transition.iter().enumerate() {
            if probs.len() != states.len() {
                return Err(Error::DimensionMismatch {
                    expected: states.len(),
                    got: probs.len(),
                });
            }
            let sum: f64 = probs.iter().sum();
            if probs.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(Error::NotStochastic { row, sum });
            }
        }
        Ok(Self { states, transition })
    }

    /// Raw-coordinate convenience constructor.
    pub fn from_coords(states: Vec<Vec<f64>>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let states = states.into_iter().map(SimplexPoint::open).collect::<Result<Vec<_>>>()?;
        Self::new(states, transition)
    }

    pub fn states(&self) -> &[SimplexPoint] {
        &self.states
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// Simulates `horizon` steps from state index `start`.
    ///
    /// Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
    /// `seed_from_u64(seed)`; each step draws one `f64` in `[0, 1)` and picks
    /// the first state whose cumulative transition probability exceeds it.
    /// The output is bit-reproducible across platforms.
    pub fn simulate_indices(&self, start: usize, horizon: usize, seed: u64) -> Result<Vec<usize>> {
        if start >= self.states.len() {
            return Err(Error::InvalidParameter(format!("start state {start} out of range")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut current = start;
        let mut out = Vec::with_capacity(horizon + 1);
        out.push(current);
        for _ in 0..horizon {
            let u: f64 = rng.random();
            let row = &self.transition[current];
            let mut cumulative = 0.0;
            let mut next = None;
            for (j, &prob) in row.iter().enumerate() {
                cumulative += prob;
                if u < cumulative {
                    next = Some(j);
                    break;
                }
            }
            // Rounding can leave u above the final cumulative sum.
            current = next.unwrap_or_else(|| row.iter().rposition(|&p| p > 0.0).unwrap_or(current));
            out.push(current);
        }
        Ok(out)
    }

    /// Stationary distribution, solving `x P = x`, `sum x = 1`.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let k = self.states.len();
        let mut a = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                a[(i, j)] = self.transition[j][i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..k {
            a[(k - 1, j)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(k);
        b[k - 1] = 1.0;
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::InvalidParameter("chain has no unique stationary distribution".into()))?;
        if x.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "chain has no unique stationary distribution".into(),
            ));
        }
        Ok(x.iter().map(|&v| v.max(0.0)).collect())
    }
}

/// Simulates a market path from a finite-state Markov chain.
pub fn markov_grid_path(chain: &MarkovChain, start: usize, seed: u64, horizon: usize) -> Result<MarketPath> {
    let indices = chain.simulate_indices(start, horizon, seed)?;
    MarketPath::from_points(indices.into_iter().map(|i| chain.states[i].clone()).collect())
}

/// One atom `(p, q)` of a pair measure. `ratio` is `q / p`, taken from the
/// path's log-weights when the atom comes from a path.
#[derive(Debug, Clone)]
pub struct PairAtom {
    pub p: SimplexPoint,
    pub q: SimplexPoint,
    pub ratio: Vec<f64>,
    pub weight: f64,
}

/// A finitely supported probability measure on pairs of simplex points.
#[derive(Debug, Clone)]
pub struct PairMeasure {
    atoms: Vec<PairAtom>,
    bound_m: f64,
}

impl PairMeasure {
    pub fn new(atoms: Vec<(SimplexPoint, SimplexPoint, f64)>) -> Result<Self> {
        let atoms = atoms
            .into_iter()
            .map(|(p, q, weight)| {
                let ratio = p.ratio_to(&q);
                PairAtom { p, q, ratio, weight }
            })
            .collect();
        Self::from_atoms(atoms)
    }

    fn from_atoms(atoms: Vec<PairAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("pair measure has no atoms".into()));
        }
        let n = atoms[0].p.dim();
        let mut max_log_ratio = 0.0f64;
        for atom in &atoms {
            for d in [atom.p.dim(), atom.q.dim()] {
                if d != n {
                    return Err(Error::DimensionMismatch { expected: n, got: d });
                }
            }
            if !(atom.weight >= 0.0) {
                return Err(Error::InvalidParameter(format!("negative atom weight {}", atom.weight)));
            }
            for r in &atom.ratio {
                if !(r.is_finite() && *r > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "pair outside every bounded-return set (ratio {r})"
                    )));
                }
                max_log_ratio = max_log_ratio.max(r.ln().abs());
            }
        }
        let total = crate::numeric::sum(atoms.iter().map(|a| a.weight));
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!("pair weights sum to {total}")));
        }
        Ok(Self {
            atoms,
            bound_m: max_log_ratio.exp(),
        })
    }

    pub fn atoms(&self) -> &[PairAtom] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].p.dim()
    }

    /// Smallest `M` with every atom inside the bounded-return pair set.
    pub fn bound_m(&self) -> f64 {
        self.bound_m
    }

    pub fn total_weight(&self) -> f64 {
        crate::numeric::sum(self.atoms.iter().map(|a| a.weight))
    }
}

/// Empirical measure of the pairs `(mu(s), mu(s+1))`, `s < t`. Repeated pairs
/// are merged into one atom carrying the summed weight.
pub fn empirical_pair_measure(path: &MarketPath, t: usize) -> Result<PairMeasure> {
    if t < 1 {
        return Err(Error::InvalidParameter("t must be at least 1".into()));
    }
    path.check_horizon(t)?;
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for s in 0..t {
        let key: Vec<u64> = path
            .point(s)
            .iter()
            .chain(path.point(s + 1).iter())
            .map(|x| x.to_bits())
            .collect();
        match index.get(&key) {
            Some(&k) => counts[k].1 += 1,
            None => {
                index.insert(key, counts.len());
                counts.push((s, 1));
            }
        }
    }
    let atoms = counts
        .into_iter()
        .map(|(s, count)| PairAtom {
            p: path.point(s).clone(),
            q: path.point(s + 1).clone(),
            ratio: path.ratio(s).to_vec(),
            weight: count as f64 / t as f64,
        })
        .collect();
    PairMeasure::from_atoms(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_path_has_unit_bound() {
        let path = validate_path(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(path.bound_m(), 1.0);
        assert_eq!(path.horizon(), 1);
    }

    #[test]
    fn one_counterexample_step_bound() {
        // stock 2 gains 12/11 but stock 1 loses 10/11, and 11/10 > 12/11
        let path = validate_path(vec![vec![0.5, 0.5], vec![5.0 / 11.0, 6.0 / 11.0]]).unwrap();
        assert!((path.bound_m() - 11.0 / 10.0).abs() < 1e-14);
    }

    #[test]
    fn validate_path_errors() {
        assert!(matches!(
            validate_path(vec![vec![0.5, 0.5], vec![0.5, 0.6]]),
            Err(Error::NotOnSimplex { .. })
        ));
        assert!(matches!(
            validate_path(vec![vec![0.5, 0.5], vec![0.2, 0.3, 0.5]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            validate_path(vec![vec![0.5, 0.5], vec![1.0, 0.0]]),
            Err(Error::BelowFloor { .. })
        ));
        assert!(matches!(
            validate_path(vec![vec![0.5, 0.5]]),
            Err(Error::PathTooShort { .. })
        ));
    }

    #[test]
    fn counterexample_first_step() {
        let path = counterexample_path(0.2, 1).unwrap();
        assert_eq!(path.point(0).coords(), &[0.5, 0.5]);
        let mu1 = path.point(1);
        assert!((mu1[0] - 5.0 / 11.0).abs() < 1e-15);
        assert!((mu1[1] - 6.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn counterexample_rejects_bad_parameters() {
        assert!(counterexample_path(0.0, 5).is_err());
        assert!(counterexample_path(-0.1, 5).is_err());
        assert!(counterexample_path(0.2, 0).is_err());
    }

    #[test]
    fn counterexample_second_stock_beats_first_by_factor() {
        let delta = 0.2;
        let path = counterexample_path(delta, 5000).unwrap();
        assert!(path.bound_m() <= 1.0 + delta);
        for t in 0..path.horizon() {
            let r = path.ratio(t);
            let rel = (r[1] / ((1.0 + delta) * r[0]) - 1.0).abs();
            assert!(rel < 1e-12, "t={t} rel={rel}");
            assert!(path.log_weights(t + 1)[0] < path.log_weights(t)[0]);
            assert!(path.log_weights(t + 1)[1] >= path.log_weights(t)[1]);
        }
    }

    #[test]
    fn permutation_chain_alternates() {
        let chain = MarkovChain::from_coords(
            vec![vec![0.4, 0.6], vec![0.6, 0.4]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let path = markov_grid_path(&chain, 0, 11, 4).unwrap();
        let firsts: Vec<f64> = path.points().iter().map(|p| p[0]).collect();
        assert_eq!(firsts, vec![0.4, 0.6, 0.4, 0.6, 0.4]);
    }

    #[test]
    fn single_state_chain_is_constant() {
        let chain = MarkovChain::from_coords(vec![vec![0.3, 0.7]], vec![vec![1.0]]).unwrap();
        let path = markov_grid_path(&chain, 0, 1, 10).unwrap();
        assert_eq!(path.bound_m(), 1.0);
        assert!(path.points().iter().all(|p| p.coords() == [0.3, 0.7]));
    }

    #[test]
    fn rejects_non_stochastic_transition() {
        let err = MarkovChain::from_coords(
            vec![vec![0.4, 0.6], vec![0.6, 0.4]],
            vec![vec![0.5, 0.6], vec![1.0, 0.0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotStochastic { row: 0, .. }));
    }

    #[test]
    fn uniform_two_state_frequencies() {
        let chain = MarkovChain::from_coords(
            vec![vec![0.4, 0.6], vec![0.6, 0.4]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        let n = 100_000;
        let idx = chain.simulate_indices(0, n, 99).unwrap();
        let ones = idx[1..].iter().filter(|&&i| i == 1).count() as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((ones / n as f64 - 0.5).abs() < 3.0 * sigma);
        let pi = chain.stationary_distribution().unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let chain = MarkovChain::from_coords(
            vec![vec![0.4, 0.6], vec![0.6, 0.4], vec![0.5, 0.5]],
            vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.2, 0.2], vec![0.1, 0.1, 0.8]],
        )
        .unwrap();
        let a = chain.simulate_indices(2, 1000, 5).unwrap();
        let b = chain.simulate_indices(2, 1000, 5).unwrap();
        let c = chain.simulate_indices(2, 1000, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_measure_examples() {
        let chain = MarkovChain::from_coords(
            vec![vec![0.4, 0.6], vec![0.6, 0.4]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let path = markov_grid_path(&chain, 0, 0, 6).unwrap();
        let single = empirical_pair_measure(&path, 1).unwrap();
        assert_eq!(single.atoms().len(), 1);
        assert_eq!(single.atoms()[0].weight, 1.0);
        let four = empirical_pair_measure(&path, 4).unwrap();
        assert_eq!(four.atoms().len(), 2);
        assert!(four.atoms().iter().all(|a| a.weight == 0.5));
        assert!(empirical_pair_measure(&path, 0).is_err());
        assert!(empirical_pair_measure(&path, 7).is_err());
    }

    #[test]
    fn pair_measure_rejects_bad_weights() {
        let p = SimplexPoint::barycenter(2);
        assert!(PairMeasure::new(vec![(p.clone(), p.clone(), 0.7)]).is_err());
        assert!(PairMeasure::new(vec![(p.clone(), p, 1.0)]).is_ok());
    }
}
