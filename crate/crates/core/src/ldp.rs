//! Growth rates, log-optimal portfolios on finite state spaces and
//! wealth-concentration diagnostics.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{MarketPath, MarkovChain, PairMeasure};
use crate::numeric::{dot, log_sum_exp, CompensatedSum};
use crate::portfolio::{
    family_log_values, log_return, ConvexCombination, MarketPortfolio, PortfolioMap, SharedMap, TabularMap,
};
use crate::simplex::SimplexPoint;
use crate::universal::{Prior, WealthTracker};

/// Joint, marginal and conditional laws must agree within this tolerance.
pub const MODEL_TOLERANCE: f64 = 1e-12;

/// One successor of a state in a [`FiniteStateModel`].
#[derive(Debug, Clone)]
pub struct Outcome {
    pub q: SimplexPoint,
    /// `q / p`.
    pub ratio: Vec<f64>,
    /// Conditional probability `P_2(q | p)`.
    pub probability: f64,
}

/// A pair law on `E x Delta_n` with finite `E`, stored as the marginal
/// `P_1(p)` and the conditionals `P_2(q | p)`.
#[derive(Debug, Clone)]
pub struct FiniteStateModel {
    states: Vec<SimplexPoint>,
    marginal: Vec<f64>,
    outcomes: Vec<Vec<Outcome>>,
}

impl FiniteStateModel {
    /// Builds the model from joint probabilities `joint[i][j] = P(states[i], states[j])`.
    pub fn new(states: Vec<SimplexPoint>, joint: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = std::iter::once(joint.len())
            .chain(joint.iter().map(Vec::len))
            .find(|&k| k != states.len())
        {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                got: bad,
            });
        }
        let mut atoms = Vec::new();
        for (p, row) in states.iter().zip(&joint) {
            for (q, &w) in states.iter().zip(row) {
                if w != 0.0 {
                    atoms.push((p.clone(), q.clone(), w));
                }
            }
        }
        Self::from_weighted_pairs(atoms)
    }

    /// The stationary pair law `pi(i) P(i, j)` of a Markov chain.
    pub fn from_chain(chain: &MarkovChain) -> Result<Self> {
        let stationary = chain.stationary_distribution()?;
        let states = chain.states();
        let mut atoms = Vec::new();
        for (i, p) in states.iter().enumerate() {
            for (j, q) in states.iter().enumerate() {
                let w = stationary[i] * chain.transition()[i][j];
                if w > 0.0 {
                    atoms.push((p.clone(), q.clone(), w));
                }
            }
        }
        Self::from_weighted_pairs(atoms)
    }

    pub fn from_pair_measure(measure: &PairMeasure) -> Result<Self> {
        Self::from_weighted_pairs(
            measure
                .atoms()
                .iter()
                .map(|a| (a.p.clone(), a.q.clone(), a.weight))
                .collect(),
        )
    }

    fn from_weighted_pairs(atoms: Vec<(SimplexPoint, SimplexPoint, f64)>) -> Result<Self> {
        // PairMeasure checks openness, dimensions, signs and total mass.
        let measure = PairMeasure::new(atoms)?;
        let mut states: Vec<SimplexPoint> = Vec::new();
        let mut marginal: Vec<CompensatedSum> = Vec::new();
        let mut grouped: Vec<Vec<(SimplexPoint, Vec<f64>, f64)>> = Vec::new();
        for a in measure.atoms() {
            let i = match states.iter().position(|s| s.same_bits(&a.p)) {
                Some(i) => i,
                None => {
                    states.push(a.p.clone());
                    marginal.push(CompensatedSum::new());
                    grouped.push(Vec::new());
                    states.len() - 1
                }
            };
            marginal[i].add(a.weight);
            grouped[i].push((a.q.clone(), a.ratio.clone(), a.weight));
        }
        let marginal: Vec<f64> = marginal.iter().map(|m| m.value()).collect();
        let outcomes = grouped
            .into_iter()
            .zip(&marginal)
            .map(|(g, m)| {
                g.into_iter()
                    .map(|(q, ratio, w)| Outcome {
                        q,
                        ratio,
                        probability: w / m,
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            states,
            marginal,
            outcomes,
        })
    }

    pub fn states(&self) -> &[SimplexPoint] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// `P_1(p)` for each state.
    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    /// `P_2(. | states[i])`.
    pub fn outcomes(&self, i: usize) -> &[Outcome] {
        &self.outcomes[i]
    }

    /// `P(states[i], q)` summed over outcomes equal to `q`.
    pub fn joint(&self, i: usize, q: &SimplexPoint) -> f64 {
        self.outcomes[i]
            .iter()
            .filter(|o| o.q.same_bits(q))
            .map(|o| o.probability * self.marginal[i])
            .sum()
    }

    /// The joint law as a [`PairMeasure`].
    pub fn pair_measure(&self) -> Result<PairMeasure> {
        PairMeasure::new(
            self.states
                .iter()
                .zip(&self.marginal)
                .zip(&self.outcomes)
                .flat_map(|((p, m), outs)| outs.iter().map(move |o| (p.clone(), o.q.clone(), m * o.probability)))
                .collect(),
        )
    }
}

/// `W(pi) = sum P(p, q) log(pi(p) . q/p)`.
pub fn growth_rate(map: &dyn PortfolioMap, model: &FiniteStateModel) -> Result<f64> {
    let mut total = CompensatedSum::new();
    for (i, p) in model.states.iter().enumerate() {
        let w = map.evaluate(p)?;
        for o in &model.outcomes[i] {
            total.add(model.marginal[i] * o.probability * log_return(&w, &o.ratio)?);
        }
    }
    Ok(total.value())
}

/// Settings for the exponentiated-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when the Frank-Wolfe gap `max_i g_i - x . g` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Starting step size; grown by 1.5 after an accepted step and halved
    /// after a rejected one.
    pub initial_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
            initial_step: 0.5,
        }
    }
}

/// Maximiser of `sum_k P_k log(x . R_k)` over the closed simplex.
#[derive(Debug, Clone)]
pub struct LogOptimalSolution {
    pub weights: SimplexPoint,
    pub objective: f64,
    /// Frank-Wolfe gap at `weights`; bounds the distance to the optimum value.
    pub gap: f64,
    pub iterations: usize,
}

/// `sum_k P_k log(x . R_k)`.
pub fn expected_log_return(x: &[f64], probabilities: &[f64], returns: &[Vec<f64>]) -> f64 {
    let mut total = CompensatedSum::new();
    for (pk, r) in probabilities.iter().zip(returns) {
        total.add(pk * dot(x, r).ln());
    }
    total.value()
}

fn log_return_gradient(x: &[f64], probabilities: &[f64], returns: &[Vec<f64>]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for (pk, r) in probabilities.iter().zip(returns) {
        let scale = pk / dot(x, r);
        g.iter_mut().zip(r).for_each(|(gi, ri)| *gi += scale * ri);
    }
    g
}

/// Solves `max_x sum_k P_k log(x . R_k)` on the simplex by exponentiated
/// gradient ascent with a backtracking step size.
pub fn log_optimal_weights(
    probabilities: &[f64],
    returns: &[Vec<f64>],
    options: SolverOptions,
) -> Result<LogOptimalSolution> {
    let Some(first) = returns.first() else {
        return Err(Error::InvalidParameter("no outcomes".into()));
    };
    let n = first.len();
    if n < 2 {
        return Err(Error::TooFewCoordinates(n));
    }
    if probabilities.len() != returns.len() {
        return Err(Error::DimensionMismatch {
            expected: returns.len(),
            got: probabilities.len(),
        });
    }
    for r in returns {
        if r.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.len(),
            });
        }
        if r.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidParameter("returns must be positive".into()));
        }
    }
    let total: f64 = probabilities.iter().sum();
    if probabilities.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("outcome probabilities sum to {total}")));
    }

    let gap_of = |x: &[f64], g: &[f64]| g.iter().copied().fold(f64::NEG_INFINITY, f64::max) - dot(x, g);
    let mut x = vec![1.0 / n as f64; n];
    let mut f = expected_log_return(&x, probabilities, returns);
    let mut g = log_return_gradient(&x, probabilities, returns);
    let mut gap = gap_of(&x, &g);
    let mut eta = options.initial_step;
    let mut iterations = 0;
    while gap >= options.tolerance {
        if iterations >= options.max_iterations {
            return Err(Error::NoConvergence { iterations, gap });
        }
        iterations += 1;
        let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi * (eta * (gi - top)).exp()).collect();
        let s: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= s);
        let fy = expected_log_return(&y, probabilities, returns);
        let gy = log_return_gradient(&y, probabilities, returns);
        let gap_y = gap_of(&y, &gy);
        // Near the optimum f moves by less than its rounding error. By
        // concavity a non-negative slope at y along y - x still certifies
        // that the step did not overshoot. Centring the gradient keeps the
        // normalisation error of y out of the slope.
        let noise = 8.0 * f64::EPSILON * (1.0 + f.abs());
        let accept = if (fy - f).abs() <= noise {
            let c = dot(&y, &gy);
            gy.iter()
                .zip(y.iter().zip(&x))
                .map(|(gi, (yi, xi))| (gi - c) * (yi - xi))
                .sum::<f64>()
                >= 0.0
        } else {
            fy > f
        };
        if accept {
            x = y;
            f = fy;
            g = gy;
            gap = gap_y;
            eta *= 1.5;
        } else {
            eta *= 0.5;
            if eta < 1e-300 {
                return Err(Error::NoConvergence { iterations, gap });
            }
        }
    }
    Ok(LogOptimalSolution {
        weights: SimplexPoint::from_portfolio_weights("log-optimal", x)?,
        objective: f,
        gap,
        iterations,
    })
}

/// Log-optimal portfolio map of a model together with the per-state
/// solver output.
#[derive(Debug, Clone)]
pub struct LogOptimal {
    pub map: TabularMap,
    pub solutions: Vec<LogOptimalSolution>,
}

/// Solves the log-optimal problem at every state of `model`. Off the state
/// set the returned map holds the market.
pub fn log_optimal(model: &FiniteStateModel, options: SolverOptions) -> Result<LogOptimal> {
    let solutions: Vec<LogOptimalSolution> = (0..model.states.len())
        .into_par_iter()
        .map(|i| {
            let probs: Vec<f64> = model.outcomes[i].iter().map(|o| o.probability).collect();
            let returns: Vec<Vec<f64>> = model.outcomes[i].iter().map(|o| o.ratio.clone()).collect();
            log_optimal_weights(&probs, &returns, options)
        })
        .collect::<Result<_>>()?;
    let map = TabularMap::new(
        "log-optimal",
        model.states.clone(),
        solutions.iter().map(|s| s.weights.clone()).collect(),
    )?;
    Ok(LogOptimal { map, solutions })
}

/// One row of a [`GrowthProfile`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub label: String,
    pub growth: f64,
    /// `W* - W`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthProfile {
    pub rows: Vec<ProfileRow>,
    pub best_growth: f64,
}

/// Growth rate and rate-function value `I = W* - W` of every member.
pub fn rate_profile(family: &[SharedMap], model: &FiniteStateModel) -> Result<GrowthProfile> {
    if family.is_empty() {
        return Err(Error::InvalidParameter("family is empty".into()));
    }
    let growth: Vec<f64> = family
        .par_iter()
        .map(|m| growth_rate(m.as_ref(), model))
        .collect::<Result<_>>()?;
    Ok(profile_from_growth(family.iter().map(|m| m.label()).collect(), growth))
}

fn profile_from_growth(labels: Vec<String>, growth: Vec<f64>) -> GrowthProfile {
    let best = growth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    GrowthProfile {
        rows: labels
            .into_iter()
            .zip(growth)
            .map(|(label, w)| ProfileRow {
                label,
                growth: w,
                rate: best - w,
            })
            .collect(),
        best_growth: best,
    }
}

/// Where the limiting growth rates of a diagnostic come from.
#[derive(Debug, Clone, Copy)]
pub enum RateSource<'a> {
    /// `(1/T) log V(T)` at the longest requested horizon.
    LongestHorizon,
    /// Exact `W` under a finite-state model.
    Exact(&'a FiniteStateModel),
}

fn limiting_rates(
    atoms: &[SharedMap],
    path: &MarketPath,
    horizons: &[usize],
    source: RateSource<'_>,
) -> Result<Vec<f64>> {
    match source {
        RateSource::Exact(model) => atoms.par_iter().map(|m| growth_rate(m.as_ref(), model)).collect(),
        RateSource::LongestHorizon => {
            let &t = horizons
                .iter()
                .max()
                .ok_or_else(|| Error::InvalidParameter("no horizons".into()))?;
            if t == 0 {
                return Err(Error::InvalidParameter("longest horizon must be positive".into()));
            }
            Ok(family_log_values(atoms, path, &[t])?
                .into_iter()
                .map(|v| v[0] / t as f64)
                .collect())
        }
    }
}

fn check_horizons(horizons: &[usize]) -> Result<()> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) || horizons[0] == 0 {
        return Err(Error::InvalidParameter(
            "horizons must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationRow {
    pub t: usize,
    pub log_set_mass: f64,
    /// `-(1/t) log nu_t(F)`.
    pub empirical_rate: f64,
    /// `inf_F I = W* - max_F W`.
    pub target_rate: f64,
}

impl ConcentrationRow {
    pub fn set_mass(&self) -> f64 {
        self.log_set_mass.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Concentration {
    /// `F` is empty: every atom is within `epsilon` of the best rate.
    NotApplicable,
    Table {
        /// Indices of the prior atoms in `F`.
        members: Vec<usize>,
        rows: Vec<ConcentrationRow>,
    },
}

/// Posterior mass of `F = {theta : W(theta) <= W* - epsilon}` along the
/// path and the empirical rate at which it decays, next to `inf_F I`.
pub fn concentration_diagnostic(
    prior: &Prior,
    path: &MarketPath,
    epsilon: f64,
    horizons: &[usize],
    source: RateSource<'_>,
) -> Result<Concentration> {
    check_horizons(horizons)?;
    if !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be finite, got {epsilon}"
        )));
    }
    path.check_horizon(*horizons.last().unwrap())?;
    let rates = limiting_rates(prior.atoms(), path, horizons, source)?;
    let best = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let members: Vec<usize> = (0..rates.len()).filter(|&i| rates[i] <= best - epsilon).collect();
    if members.is_empty() {
        return Ok(Concentration::NotApplicable);
    }
    let target = best - members.iter().map(|&i| rates[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut in_set = vec![false; rates.len()];
    members.iter().for_each(|&i| in_set[i] = true);
    let mut tracker = WealthTracker::new(prior);
    let mut rows = Vec::with_capacity(horizons.len());
    for &t in horizons {
        while tracker.t() < t {
            tracker.step(path)?;
        }
        let log_set_mass = tracker.distribution().log_mass(|i| in_set[i]);
        rows.push(ConcentrationRow {
            t,
            log_set_mass,
            empirical_rate: -log_set_mass / t as f64,
            target_rate: target,
        });
    }
    Ok(Concentration::Table { members, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupErrorRow {
    pub t: usize,
    pub sup_error: f64,
}

/// `sup_pi |(1/t) log V_pi(t) - W(pi)|` over the family at each horizon.
pub fn glivenko_cantelli_diagnostic(
    family: &[SharedMap],
    path: &MarketPath,
    horizons: &[usize],
    source: RateSource<'_>,
) -> Result<Vec<SupErrorRow>> {
    check_horizons(horizons)?;
    if family.is_empty() {
        return Err(Error::InvalidParameter("family is empty".into()));
    }
    let rates = limiting_rates(family, path, horizons, source)?;
    let values = family_log_values(family, path, horizons)?;
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(k, &t)| SupErrorRow {
            t,
            sup_error: values
                .iter()
                .zip(&rates)
                .map(|(v, w)| (v[k] / t as f64 - w).abs())
                .fold(0.0, f64::max),
        })
        .collect())
}

/// Two-atom prior `{optimal, suboptimal}` with an exact rate gap.
#[derive(Debug, Clone)]
pub struct TwoAtomScenario {
    pub optimal: SharedMap,
    pub suboptimal: SharedMap,
    pub optimal_growth: f64,
    pub suboptimal_growth: f64,
    /// Weight of the log-optimal map inside the suboptimal atom.
    pub mix: f64,
}

impl TwoAtomScenario {
    pub fn gap(&self) -> f64 {
        self.optimal_growth - self.suboptimal_growth
    }

    /// Prior with mass `lambda` on the suboptimal atom.
    pub fn prior(&self, lambda: f64) -> Result<Prior> {
        Prior::new(vec![
            (self.optimal.clone(), 1.0 - lambda),
            (self.suboptimal.clone(), lambda),
        ])
    }

    /// `log nu_t(suboptimal) = log(l e^{t W_2} / ((1-l) e^{t W_1} + l e^{t W_2}))`.
    pub fn closed_form_log_mass(&self, lambda: f64, t: usize) -> f64 {
        let t = t as f64;
        let sub = lambda.ln() + t * self.suboptimal_growth;
        sub - log_sum_exp(&[(1.0 - lambda).ln() + t * self.optimal_growth, sub])
    }
}

/// The log-optimal map of `model` and a blend `eta pi_opt + (1 - eta) mu`
/// with the market whose growth rate sits exactly `gap` below it.
pub fn two_atom_scenario(model: &FiniteStateModel, gap: f64, options: SolverOptions) -> Result<TwoAtomScenario> {
    let optimal: SharedMap = Arc::new(log_optimal(model, options)?.map);
    let optimal_growth = growth_rate(optimal.as_ref(), model)?;
    let market_growth = growth_rate(&MarketPortfolio, model)?;
    if !(gap > 0.0 && gap <= optimal_growth - market_growth) {
        return Err(Error::InvalidParameter(format!(
            "gap must lie in (0, {}], got {gap}",
            optimal_growth - market_growth
        )));
    }
    let blend = |eta: f64| -> Result<ConvexCombination> {
        ConvexCombination::pair(optimal.clone(), Arc::new(MarketPortfolio), eta)
    };
    // W(eta) is concave with its maximum at eta = 1, hence increasing.
    let target = optimal_growth - gap;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if growth_rate(&blend(mid)?, model)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mix = if (growth_rate(&blend(lo)?, model)? - target).abs() <= (growth_rate(&blend(hi)?, model)? - target).abs()
    {
        lo
    } else {
        hi
    };
    let suboptimal: SharedMap = Arc::new(blend(mix)?);
    let suboptimal_growth = growth_rate(suboptimal.as_ref(), model)?;
    Ok(TwoAtomScenario {
        optimal,
        suboptimal,
        optimal_growth,
        suboptimal_growth,
        mix,
    })
}

/// Deterministic alternation between `(0.4, 0.6)` and `(0.6, 0.4)`.
pub fn alternating_chain() -> MarkovChain {
    MarkovChain::from_coords(
        vec![vec![0.4, 0.6], vec![0.6, 0.4]],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
    )
    .expect("valid two-state chain")
}
