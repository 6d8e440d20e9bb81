//! Points of the unit simplex.

use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates of an "open" simplex point must be at least this large.
pub const BOUNDARY_FLOOR: f64 = 1e-12;

/// Inputs whose coordinate sum is off by more than this are rejected; smaller
/// deviations are removed by renormalising.
pub const INPUT_SUM_TOLERANCE: f64 = 1e-9;

/// Portfolio weight vectors violating the closed simplex by less than this are
/// clipped and renormalised; larger violations are errors.
pub const PROJECTION_TOLERANCE: f64 = 1e-9;

/// A point of the closed unit simplex in `R^n`, `n >= 2`.
///
/// Market weights live in the open simplex ([`SimplexPoint::open`]); portfolio
/// weights may sit on the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Validates a closed-simplex point, renormalising sums within
    /// [`INPUT_SUM_TOLERANCE`] of one.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::TooFewCoordinates(coords.len()));
        }
        for (index, &value) in coords.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidCoordinate { index, value });
            }
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > INPUT_SUM_TOLERANCE {
            return Err(Error::NotOnSimplex { sum });
        }
        Ok(Self::renormalized(coords, sum))
    }

    /// Validates an open-simplex point: every coordinate at least
    /// [`BOUNDARY_FLOOR`].
    pub fn open(coords: Vec<f64>) -> Result<Self> {
        let point = Self::new(coords)?;
        point.check_open()?;
        Ok(point)
    }

    pub fn check_open(&self) -> Result<()> {
        match self.0.iter().position(|&x| x < BOUNDARY_FLOOR) {
            Some(index) => Err(Error::BelowFloor {
                index,
                value: self.0[index],
            }),
            None => Ok(()),
        }
    }

    pub fn is_open(&self) -> bool {
        self.check_open().is_ok()
    }

    /// Turns raw portfolio weights into a closed-simplex point. Violations
    /// below [`PROJECTION_TOLERANCE`] (negative entries or a sum off one) are
    /// treated as float noise: negatives are clipped to zero and the vector is
    /// renormalised.
    pub fn from_portfolio_weights(label: &str, weights: Vec<f64>) -> Result<Self> {
        let invalid = |violation: f64| Error::InvalidPortfolio {
            label: label.to_string(),
            violation,
        };
        if weights.len() < 2 || weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid(f64::INFINITY));
        }
        let sum: f64 = weights.iter().sum();
        let negative = weights.iter().fold(0.0f64, |acc, &w| acc.max(-w));
        let violation = negative.max((sum - 1.0).abs());
        if violation > PROJECTION_TOLERANCE {
            return Err(invalid(violation));
        }
        if negative > 0.0 {
            let clipped: Vec<f64> = weights.into_iter().map(|w| w.max(0.0)).collect();
            let sum = clipped.iter().sum();
            Ok(Self::renormalized(clipped, sum))
        } else {
            Ok(Self::renormalized(weights, sum))
        }
    }

    fn renormalized(mut coords: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            coords.iter_mut().for_each(|x| *x /= sum);
        }
        Self(coords)
    }

    /// Builds a point from coordinates already known to be non-negative and to
    /// sum to one up to rounding.
    pub(crate) fn from_normalized(coords: Vec<f64>) -> Self {
        debug_assert!((coords.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self(coords)
    }

    /// The barycenter `(1/n, ..., 1/n)`.
    pub fn barycenter(n: usize) -> Self {
        assert!(n >= 2, "simplex dimension must be at least 2");
        Self(vec![1.0 / n as f64; n])
    }

    /// The vertex `e_i` of the closed simplex.
    pub fn vertex(n: usize, i: usize) -> Self {
        assert!(n >= 2 && i < n);
        let mut coords = vec![0.0; n];
        coords[i] = 1.0;
        Self(coords)
    }

    /// Draws a point uniformly from the simplex (normalised exponentials).
    pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        assert!(n >= 2);
        let draws: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = draws.iter().sum();
        Self(draws.into_iter().map(|x| x / total).collect())
    }

    /// Draws a point uniformly from `{p : p_i >= floor}` by mapping a uniform
    /// simplex draw affinely onto that sub-simplex.
    pub fn sample_uniform_with_floor<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> Self {
        assert!(floor >= 0.0 && floor * (n as f64) < 1.0);
        let base = Self::sample_uniform(rng, n);
        let scale = 1.0 - n as f64 * floor;
        Self(base.0.into_iter().map(|y| floor + scale * y).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Componentwise ratio `next / self`.
    pub fn ratio_to(&self, next: &SimplexPoint) -> Vec<f64> {
        self.0.iter().zip(&next.0).map(|(p, q)| q / p).collect()
    }

    /// Bit-level identity, used for exact state lookups.
    pub fn same_bits(&self, other: &SimplexPoint) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn sup_distance(&self, other: &SimplexPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn euclidean_distance(&self, other: &SimplexPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for SimplexPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Vec<f64> {
        p.0
    }
}
