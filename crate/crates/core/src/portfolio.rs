//! Portfolio maps, relative values and growth rates.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{MarketPath, PairMeasure};
use crate::numeric::{dot, CompensatedSum};
use crate::simplex::SimplexPoint;

/// A deterministic map from market weights (open simplex) to portfolio
/// weights (closed simplex).
pub trait PortfolioMap: Send + Sync + fmt::Debug {
    fn label(&self) -> String;

    /// Weights before validation. Implementations may return vectors that
    /// are off the simplex by float noise.
    fn raw_weights(&self, p: &SimplexPoint) -> Vec<f64>;

    /// Validated weights; see [`SimplexPoint::from_portfolio_weights`].
    fn evaluate(&self, p: &SimplexPoint) -> Result<SimplexPoint> {
        SimplexPoint::from_portfolio_weights(&self.label(), self.raw_weights(p))
    }
}

pub type SharedMap = Arc<dyn PortfolioMap>;

/// The market portfolio: `pi(p) = p`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MarketPortfolio;

impl PortfolioMap for MarketPortfolio {
    fn label(&self) -> String {
        "market".into()
    }

    fn raw_weights(&self, p: &SimplexPoint) -> Vec<f64> {
        p.to_vec()
    }
}

/// A constant-weighted (constantly rebalanced) portfolio.
#[derive(Debug, Clone)]
pub struct ConstantWeights {
    weights: SimplexPoint,
}

impl ConstantWeights {
    pub fn new(weights: SimplexPoint) -> Self {
        Self { weights }
    }

    pub fn from_coords(weights: Vec<f64>) -> Result<Self> {
        Ok(Self::new(SimplexPoint::new(weights)?))
    }

    pub fn weights(&self) -> &SimplexPoint {
        &self.weights
    }
}

impl PortfolioMap for ConstantWeights {
    fn label(&self) -> String {
        let parts: Vec<String> = self.weights.iter().map(|w| format!("{w}")).collect();
        format!("const({})", parts.join(";"))
    }

    fn raw_weights(&self, _p: &SimplexPoint) -> Vec<f64> {
        self.weights.to_vec()
    }
}

/// Pointwise convex combination `sum_k w_k pi_k(p)`.
#[derive(Debug, Clone)]
pub struct ConvexCombination {
    components: Vec<(SharedMap, f64)>,
}

impl ConvexCombination {
    pub fn new(components: Vec<(SharedMap, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("empty convex combination".into()));
        }
        let total: f64 = components.iter().map(|(_, w)| w).sum();
        if components.iter().any(|(_, w)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "combination weights must be non-negative and sum to 1, got {total}"
            )));
        }
        Ok(Self { components })
    }

    /// `lambda * a + (1 - lambda) * b`.
    pub fn pair(a: SharedMap, b: SharedMap, lambda: f64) -> Result<Self> {
        Self::new(vec![(a, lambda), (b, 1.0 - lambda)])
    }
}

impl PortfolioMap for ConvexCombination {
    fn label(&self) -> String {
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|(m, w)| format!("{w}*{}", m.label()))
            .collect();
        format!("mix({})", parts.join("+"))
    }

    fn raw_weights(&self, p: &SimplexPoint) -> Vec<f64> {
        let mut out = vec![0.0; p.dim()];
        for (map, w) in &self.components {
            for (o, x) in out.iter_mut().zip(map.raw_weights(p)) {
                *o += w * x;
            }
        }
        out
    }
}

/// A portfolio map defined on a finite state set by table lookup. States are
/// matched bit-for-bit; any other input gets the market weights.
#[derive(Debug, Clone)]
pub struct TabularMap {
    label: String,
    states: Vec<SimplexPoint>,
    weights: Vec<SimplexPoint>,
}

impl TabularMap {
    pub fn new(label: impl Into<String>, states: Vec<SimplexPoint>, weights: Vec<SimplexPoint>) -> Result<Self> {
        if states.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                got: weights.len(),
            });
        }
        Ok(Self {
            label: label.into(),
            states,
            weights,
        })
    }

    pub fn states(&self) -> &[SimplexPoint] {
        &self.states
    }

    pub fn table(&self) -> &[SimplexPoint] {
        &self.weights
    }

    pub fn lookup(&self, p: &SimplexPoint) -> Option<&SimplexPoint> {
        self.states
            .iter()
            .position(|s| s.same_bits(p))
            .map(|i| &self.weights[i])
    }
}

impl PortfolioMap for TabularMap {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn raw_weights(&self, p: &SimplexPoint) -> Vec<f64> {
        match self.lookup(p) {
            Some(w) => w.to_vec(),
            None => p.to_vec(),
        }
    }
}

/// Relative value of a portfolio with respect to the market, kept in log
/// space: `V(0) = 1`, `V(t+1) = V(t) * pi(mu(t)) . mu(t+1)/mu(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSeries {
    log_values: Vec<f64>,
}

impl ValueSeries {
    pub fn from_log_values(log_values: Vec<f64>) -> Self {
        Self { log_values }
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn values(&self) -> Vec<f64> {
        self.log_values.iter().map(|x| x.exp()).collect()
    }

    pub fn log_value(&self, t: usize) -> f64 {
        self.log_values[t]
    }

    pub fn value(&self, t: usize) -> f64 {
        self.log_values[t].exp()
    }

    /// `(1/t) log V(t)`.
    pub fn growth_rate(&self, t: usize) -> f64 {
        self.log_values[t] / t as f64
    }

    pub fn horizon(&self) -> usize {
        self.log_values.len() - 1
    }
}

/// `log(pi(p) . ratio)` where `ratio = q / p`.
pub fn log_return(weights: &[f64], ratio: &[f64]) -> Result<f64> {
    let growth = dot(weights, ratio);
    if growth > 0.0 && growth.is_finite() {
        Ok(growth.ln())
    } else {
        Err(Error::InvalidParameter(format!(
            "one-period return {growth} is not positive"
        )))
    }
}

/// The log-return kernel `l_pi(p, q) = log(pi(p) . q/p)`.
pub fn log_return_kernel(map: &dyn PortfolioMap, p: &SimplexPoint, q: &SimplexPoint) -> Result<f64> {
    let weights = map.evaluate(p)?;
    log_return(&weights, &p.ratio_to(q))
}

/// Relative value over the whole path.
pub fn relative_value(map: &dyn PortfolioMap, path: &MarketPath) -> Result<ValueSeries> {
    relative_value_to(map, path, path.horizon())
}

/// Relative value up to `horizon`.
pub fn relative_value_to(map: &dyn PortfolioMap, path: &MarketPath, horizon: usize) -> Result<ValueSeries> {
    path.check_horizon(horizon)?;
    let mut log_values = Vec::with_capacity(horizon + 1);
    let mut acc = CompensatedSum::new();
    log_values.push(0.0);
    for t in 0..horizon {
        let weights = map.evaluate(path.point(t))?;
        acc.add(log_return(&weights, path.ratio(t))?);
        log_values.push(acc.value());
    }
    Ok(ValueSeries { log_values })
}

/// `log V(t)` at each of the given horizons (any order), in one pass.
pub fn log_values_at(map: &dyn PortfolioMap, path: &MarketPath, horizons: &[usize]) -> Result<Vec<f64>> {
    let last = horizons.iter().copied().max().unwrap_or(0);
    path.check_horizon(last)?;
    let mut at = vec![f64::NAN; last + 1];
    let mut acc = CompensatedSum::new();
    at[0] = 0.0;
    for t in 0..last {
        let weights = map.evaluate(path.point(t))?;
        acc.add(log_return(&weights, path.ratio(t))?);
        at[t + 1] = acc.value();
    }
    Ok(horizons.iter().map(|&h| at[h]).collect())
}

/// `log V(t)` for every family member at each horizon; rows follow the
/// family order. Members are evaluated in parallel.
pub fn family_log_values(family: &[SharedMap], path: &MarketPath, horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
    family
        .par_iter()
        .map(|m| log_values_at(m.as_ref(), path, horizons))
        .collect()
}

/// `integral of l_pi against the pair measure`. For the empirical measure of
/// the first `t` pairs of a path this equals `(1/t) log V_pi(t)`.
pub fn growth_rate_via_empirical(map: &dyn PortfolioMap, measure: &PairMeasure) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for atom in measure.atoms() {
        let weights = map.evaluate(&atom.p)?;
        acc.add(atom.weight * log_return(&weights, &atom.ratio)?);
    }
    Ok(acc.value())
}

/// Best member in hindsight at horizon `t`: `(index, V*)`. Ties go to the
/// lowest index.
pub fn best_in_hindsight(family: &[SharedMap], path: &MarketPath, t: usize) -> Result<(usize, f64)> {
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty family".into()));
    }
    let logs = family_log_values(family, path, &[t])?;
    let (index, best) = argmax_first(logs.iter().map(|v| v[0]));
    Ok((index, best.exp()))
}

/// Index and value of the first maximum.
pub(crate) fn argmax_first(values: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}
