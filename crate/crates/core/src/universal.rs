//! Wealth distributions over portfolio families and Cover's portfolio.
//!
//! Every atom `theta` of a prior `nu_0` trades in an imaginary market of its
//! own. The total relative value `V_hat(t) = sum_theta lambda_theta V_theta(t)`
//! is realised by trading the posterior mean
//! `pi_hat(t) = sum_theta nu_t(theta) pi_theta(mu(t))` where
//! `nu_t(theta)` is proportional to `lambda_theta V_theta(t)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fgp::{portfolio_from_generator, DenseMember};
use crate::market::{counterexample_path, MarketPath};
use crate::numeric::{cube_to_simplex, halton, log_sum_exp, CompensatedSum};
use crate::portfolio::{log_return, relative_value_to, ConstantWeights, SharedMap, ValueSeries};
use crate::simplex::SimplexPoint;

/// Prior weights must sum to one within this tolerance.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-12;

/// A finitely supported initial distribution over portfolio maps. Weights are
/// held as logarithms so long dyadic families do not underflow.
#[derive(Debug, Clone)]
pub struct Prior {
    atoms: Vec<SharedMap>,
    log_weights: Vec<f64>,
}

impl Prior {
    pub fn new(atoms: Vec<(SharedMap, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidPrior("prior needs at least one atom".into()));
        }
        if let Some((i, (_, w))) = atoms
            .iter()
            .enumerate()
            .find(|(_, (_, w))| !(*w >= 0.0 && w.is_finite()))
        {
            return Err(Error::InvalidPrior(format!("weight {i} is {w}")));
        }
        let total = crate::numeric::sum(atoms.iter().map(|(_, w)| *w));
        if (total - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(Error::InvalidPrior(format!("weights sum to {total}")));
        }
        let (atoms, log_weights) = atoms.into_iter().map(|(a, w)| (a, w.ln())).unzip();
        Ok(Self { atoms, log_weights })
    }

    /// Prior from log-weights whose exponentials sum to one.
    pub fn from_log_weights(atoms: Vec<SharedMap>, log_weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != log_weights.len() {
            return Err(Error::InvalidPrior(format!(
                "{} atoms with {} weights",
                atoms.len(),
                log_weights.len()
            )));
        }
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::InvalidPrior("log-weights must be finite or -inf".into()));
        }
        let log_total = log_sum_exp(&log_weights);
        if !(log_total.abs() <= PRIOR_SUM_TOLERANCE) {
            return Err(Error::InvalidPrior(format!("weights sum to {}", log_total.exp())));
        }
        Ok(Self { atoms, log_weights })
    }

    pub fn uniform(atoms: Vec<SharedMap>) -> Result<Self> {
        let lw = -(atoms.len() as f64).ln();
        let n = atoms.len();
        Self::from_log_weights(atoms, vec![lw; n])
    }

    pub fn single(atom: SharedMap) -> Self {
        Self {
            atoms: vec![atom],
            log_weights: vec![0.0],
        }
    }

    /// Prior over the portfolios generated by a truncated dense family.
    pub fn from_dense_family(members: Vec<DenseMember>) -> Result<Self> {
        let mut atoms: Vec<SharedMap> = Vec::with_capacity(members.len());
        let mut log_weights = Vec::with_capacity(members.len());
        for m in members {
            atoms.push(std::sync::Arc::new(portfolio_from_generator(m.generator)?));
            log_weights.push(m.log_weight);
        }
        Self::from_log_weights(atoms, log_weights)
    }

    /// Equal-weight cloud of `count` constant-weighted portfolios placed at
    /// Halton points of the simplex; approximates the uniform prior on
    /// constant weights.
    pub fn constant_cloud(n: usize, count: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewCoordinates(n));
        }
        if count == 0 {
            return Err(Error::InvalidPrior("cloud needs at least one atom".into()));
        }
        let atoms = (1..=count as u64)
            .map(|k| {
                let w = SimplexPoint::from_normalized(cube_to_simplex(&halton(k, n - 1)));
                std::sync::Arc::new(ConstantWeights::new(w)) as SharedMap
            })
            .collect();
        Self::uniform(atoms)
    }

    pub fn atoms(&self) -> &[SharedMap] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.atoms.iter().map(|a| a.label()).collect()
    }

    /// Wealth distribution at time zero.
    pub fn initial(&self) -> WealthDistribution<'_> {
        WealthDistribution {
            prior: self,
            log_values: vec![0.0; self.len()],
            t: 0,
        }
    }
}

/// Posterior wealth distribution `nu_t` at a fixed time.
#[derive(Debug, Clone)]
pub struct WealthDistribution<'a> {
    prior: &'a Prior,
    log_values: Vec<f64>,
    t: usize,
}

impl<'a> WealthDistribution<'a> {
    pub fn prior(&self) -> &'a Prior {
        self.prior
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Per-atom `log V_theta(t)`.
    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    fn log_joint(&self) -> Vec<f64> {
        self.prior
            .log_weights
            .iter()
            .zip(&self.log_values)
            .map(|(l, v)| l + v)
            .collect()
    }

    /// `log V_hat(t)`.
    pub fn log_mixture_value(&self) -> f64 {
        log_sum_exp(&self.log_joint())
    }

    pub fn mixture_value(&self) -> f64 {
        self.log_mixture_value().exp()
    }

    /// `log V*(t)`, the best atom in hindsight.
    pub fn log_best_value(&self) -> f64 {
        self.log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn log_posterior(&self) -> Vec<f64> {
        let joint = self.log_joint();
        let total = log_sum_exp(&joint);
        joint.into_iter().map(|x| x - total).collect()
    }

    pub fn posterior(&self) -> Vec<f64> {
        self.log_posterior().into_iter().map(f64::exp).collect()
    }

    /// `log nu_t(A)` for the atoms selected by `member`.
    pub fn log_mass(&self, member: impl Fn(usize) -> bool) -> f64 {
        let lp = self.log_posterior();
        let selected: Vec<f64> = lp
            .into_iter()
            .enumerate()
            .filter(|(i, _)| member(*i))
            .map(|(_, x)| x)
            .collect();
        log_sum_exp(&selected)
    }

    /// The posterior as a prior for the remaining path.
    pub fn as_prior(&self) -> Result<Prior> {
        Prior::from_log_weights(self.prior.atoms.clone(), self.log_posterior())
    }

    /// Cover's portfolio `sum nu_t(theta) pi_theta(current)`.
    pub fn cover_portfolio(&self, current: &SimplexPoint) -> Result<SimplexPoint> {
        let weights = self.posterior();
        let mut acc = vec![CompensatedSum::new(); current.dim()];
        for (atom, nu) in self.prior.atoms.iter().zip(weights) {
            if nu == 0.0 {
                continue;
            }
            let w = atom.evaluate(current)?;
            for (a, x) in acc.iter_mut().zip(w.iter()) {
                a.add(nu * x);
            }
        }
        SimplexPoint::from_portfolio_weights("cover", acc.iter().map(|a| a.value()).collect())
    }
}

/// Advances a wealth distribution one market step at a time.
#[derive(Debug, Clone)]
pub struct WealthTracker<'a> {
    prior: &'a Prior,
    sums: Vec<CompensatedSum>,
    t: usize,
}

impl<'a> WealthTracker<'a> {
    pub fn new(prior: &'a Prior) -> Self {
        Self {
            prior,
            sums: vec![CompensatedSum::new(); prior.len()],
            t: 0,
        }
    }

    /// Continues from an existing distribution.
    pub fn resume(wd: &WealthDistribution<'a>) -> Self {
        Self {
            prior: wd.prior,
            sums: wd
                .log_values
                .iter()
                .map(|&v| {
                    let mut s = CompensatedSum::new();
                    s.add(v);
                    s
                })
                .collect(),
            t: wd.t,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Trades every atom from `path.point(t)` to `path.point(t + 1)`.
    pub fn step(&mut self, path: &MarketPath) -> Result<()> {
        path.check_horizon(self.t + 1)?;
        let p = path.point(self.t);
        let ratio = path.ratio(self.t);
        self.sums
            .par_iter_mut()
            .zip(self.prior.atoms.par_iter())
            .try_for_each(|(s, atom)| -> Result<()> {
                s.add(log_return(&atom.evaluate(p)?, ratio)?);
                Ok(())
            })?;
        self.t += 1;
        Ok(())
    }

    pub fn distribution(&self) -> WealthDistribution<'a> {
        WealthDistribution {
            prior: self.prior,
            log_values: self.sums.iter().map(|s| s.value()).collect(),
            t: self.t,
        }
    }
}

/// Wealth distributions `nu_0, ..., nu_T`.
pub fn evolve<'a>(prior: &'a Prior, path: &MarketPath, horizon: usize) -> Result<Vec<WealthDistribution<'a>>> {
    path.check_horizon(horizon)?;
    let series: Vec<ValueSeries> = prior
        .atoms
        .par_iter()
        .map(|atom| relative_value_to(atom.as_ref(), path, horizon))
        .collect::<Result<_>>()?;
    Ok((0..=horizon)
        .map(|t| WealthDistribution {
            prior,
            log_values: series.iter().map(|s| s.log_value(t)).collect(),
            t,
        })
        .collect())
}

/// Continues `wd` along `path` up to time `horizon`.
pub fn evolve_from<'a>(
    wd: &WealthDistribution<'a>,
    path: &MarketPath,
    horizon: usize,
) -> Result<WealthDistribution<'a>> {
    let mut tracker = WealthTracker::resume(wd);
    while tracker.t() < horizon {
        tracker.step(path)?;
    }
    Ok(tracker.distribution())
}

/// One row of a Cover-portfolio trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    /// `log V_hat(t)` from the mixture.
    pub log_v_hat: f64,
    /// `log V*(t)` over the prior's atoms.
    pub log_v_star: f64,
    /// Cover's portfolio held over `[t, t+1)`; absent at the final time.
    pub pi_hat: Option<SimplexPoint>,
}

impl TraceRow {
    /// `(1/t) log(V_hat/V*)`, zero at `t = 0`.
    pub fn log_ratio_rate(&self) -> f64 {
        if self.t == 0 {
            0.0
        } else {
            (self.log_v_hat - self.log_v_star) / self.t as f64
        }
    }
}

/// Mixture value, best atom and Cover's portfolio at each `t` in `times`
/// (sorted, at most the path horizon).
pub fn cover_trace(prior: &Prior, path: &MarketPath, times: &[usize]) -> Result<Vec<TraceRow>> {
    let Some(&last) = times.last() else {
        return Ok(Vec::new());
    };
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("trace times must be sorted".into()));
    }
    path.check_horizon(last)?;
    let mut tracker = WealthTracker::new(prior);
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        while tracker.t() < t {
            tracker.step(path)?;
        }
        let wd = tracker.distribution();
        let pi_hat = if t < path.horizon() {
            Some(wd.cover_portfolio(path.point(t))?)
        } else {
            None
        };
        rows.push(TraceRow {
            t,
            log_v_hat: wd.log_mixture_value(),
            log_v_star: wd.log_best_value(),
            pi_hat,
        });
    }
    Ok(rows)
}

/// `max_t |log V_pi_hat(t) - log V_hat(t)|` over `t <= horizon`, where the
/// left side trades Cover's portfolio step by step and the right side is the
/// prior mixture of the atoms' values.
pub fn cover_value_identity_check(prior: &Prior, path: &MarketPath, horizon: usize) -> Result<f64> {
    path.check_horizon(horizon)?;
    let mut tracker = WealthTracker::new(prior);
    let mut traded = CompensatedSum::new();
    let mut gap: f64 = 0.0;
    for t in 0..horizon {
        let pi_hat = tracker.distribution().cover_portfolio(path.point(t))?;
        traded.add(log_return(&pi_hat, path.ratio(t))?);
        tracker.step(path)?;
        gap = gap.max((traded.value() - tracker.distribution().log_mixture_value()).abs());
    }
    Ok(gap)
}

/// Cover's portfolio on the counterexample path under the product-uniform
/// prior, computed two ways.
#[derive(Debug, Clone)]
pub struct CounterexampleValue {
    pub delta: f64,
    /// `log V_hat(t) = log(mu_2(t)/mu_2(0)) + t log(1 - delta/(2(1+delta)))`.
    pub closed_form: ValueSeries,
    /// Sequential trading of the posterior mean `pi_hat = (1/2, 1/2)` at
    /// every never-visited state.
    pub sequential: ValueSeries,
    /// `log V*(t) = log(mu_2(t)/mu_2(0))`, attained by holding stock 2.
    pub log_best: Vec<f64>,
    /// Largest `|V_seq(t)/V_closed(t) - 1|`.
    pub max_relative_gap: f64,
}

impl CounterexampleValue {
    /// `log(1 - delta/(2(1+delta)))`, the limit of `(1/t) log(V_hat/V*)`.
    pub fn limiting_log_ratio(&self) -> f64 {
        counterexample_log_factor(self.delta)
    }

    pub fn log_ratio_rate(&self, t: usize) -> f64 {
        (self.closed_form.log_value(t) - self.log_best[t]) / t as f64
    }
}

/// `log(1 - delta/(2(1+delta)))`.
pub fn counterexample_log_factor(delta: f64) -> f64 {
    (-delta / (2.0 * (1.0 + delta))).ln_1p()
}

/// Under the product-uniform prior each state is visited once, so the
/// posterior mean of `pi_2` at the current state is the prior mean 1/2.
pub fn counterexample_cover_value(delta: f64, horizon: usize) -> Result<CounterexampleValue> {
    let path = counterexample_path(delta, horizon)?;
    let factor = counterexample_log_factor(delta);
    let log_mu2_0 = path.log_weights(0)[1];
    let log_best: Vec<f64> = (0..=horizon).map(|t| path.log_weights(t)[1] - log_mu2_0).collect();
    let closed: Vec<f64> = log_best
        .iter()
        .enumerate()
        .map(|(t, b)| b + t as f64 * factor)
        .collect();
    let half = [0.5, 0.5];
    let mut acc = CompensatedSum::new();
    let mut sequential = Vec::with_capacity(horizon + 1);
    sequential.push(0.0);
    for t in 0..horizon {
        acc.add(log_return(&half, path.ratio(t))?);
        sequential.push(acc.value());
    }
    let max_relative_gap = closed
        .iter()
        .zip(&sequential)
        .map(|(c, s)| (s - c).exp_m1().abs())
        .fold(0.0, f64::max);
    Ok(CounterexampleValue {
        delta,
        closed_form: ValueSeries::from_log_values(closed),
        sequential: ValueSeries::from_log_values(sequential),
        log_best,
        max_relative_gap,
    })
}

/// A cylinder set of the product-uniform family: `pi_2` at the state visited
/// at time `coordinate` lies in `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderFactor {
    pub coordinate: usize,
    pub lo: f64,
    pub hi: f64,
}

/// `log nu_t(C)` for a cylinder in the counterexample. Trading at a visited
/// coordinate multiplies the likelihood by `1 + delta x`, so its posterior
/// density is `(1 + delta x)/(1 + delta/2)` on `[0, 1]`; coordinates not yet
/// traded keep the uniform prior.
pub fn counterexample_cylinder_log_mass(delta: f64, t: usize, cylinder: &[CylinderFactor]) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let mut coords: Vec<usize> = cylinder.iter().map(|c| c.coordinate).collect();
    coords.sort_unstable();
    if coords.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("cylinder coordinates must be distinct".into()));
    }
    let mut total = CompensatedSum::new();
    for c in cylinder {
        if !(0.0 <= c.lo && c.lo < c.hi && c.hi <= 1.0) {
            return Err(Error::InvalidParameter(format!("bad cylinder interval {c:?}")));
        }
        let mass = if c.coordinate < t {
            ((c.hi - c.lo) + 0.5 * delta * (c.hi * c.hi - c.lo * c.lo)) / (1.0 + 0.5 * delta)
        } else {
            c.hi - c.lo
        };
        total.add(mass.ln());
    }
    Ok(total.value())
}

/// Posterior mean of `pi_2` at a visited coordinate of the counterexample.
pub fn counterexample_posterior_mean(delta: f64) -> f64 {
    (0.5 + delta / 3.0) / (1.0 + 0.5 * delta)
}

/// Random cylinders over the first `visited` coordinates, for diagnostics.
pub fn random_cylinders(
    count: usize,
    visited: usize,
    max_factors: usize,
    seed: u64,
) -> Result<Vec<Vec<CylinderFactor>>> {
    use rand::seq::index::sample;
    use rand::Rng;
    if visited == 0 || max_factors == 0 {
        return Err(Error::InvalidParameter(
            "cylinders need visited coordinates and factors".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let k = rng.random_range(1..=max_factors.min(visited));
            sample(&mut rng, visited, k)
                .into_iter()
                .map(|coordinate| {
                    let a: f64 = rng.random();
                    let b: f64 = rng.random();
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    let hi = hi.max(lo + 1e-3).min(1.0);
                    CylinderFactor {
                        coordinate,
                        lo: lo.min(hi - 1e-3),
                        hi,
                    }
                })
                .collect()
        })
        .collect())
}
