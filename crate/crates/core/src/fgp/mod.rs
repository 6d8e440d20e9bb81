//! Functionally generated portfolios.
//!
//! A positive concave function `Phi` on the simplex generates the portfolio
//!
//! ```text
//! pi_i(p) = p_i * (v_i(p) + 1 - sum_j p_j v_j(p)),   v(p) a supergradient of log Phi at p,
//! ```
//!
//! and every such portfolio satisfies `pi(p) . q/p >= Phi(q)/Phi(p)` for all
//! `p, q`. Generators come in three closed forms: weighted geometric means
//! (constant-weighted portfolios), minima of affine functions (piecewise
//! constant-in-region portfolios) and weighted log-blends of other generators
//! (convex combinations of the generated portfolios).

mod dense;
mod metric;

pub use dense::{dense_family, DenseEnumerator, DenseMember};
pub use metric::{metric_d, metric_points, METRIC_POINTS_PER_SET, METRIC_TRUNCATION};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::dot;
use crate::portfolio::PortfolioMap;
use crate::simplex::SimplexPoint;

/// Pieces of a minimum of affine functions whose values are within this
/// distance of the minimum count as active.
pub const ACTIVE_TOLERANCE: f64 = 1e-9;

/// Minimum slack accepted by the defining-inequality verifier.
pub const FG_SLACK_TOLERANCE: f64 = 1e-10;

/// Concavity midpoint checks accept violations up to this size.
pub const CONCAVITY_TOLERANCE: f64 = 1e-10;

/// `slope . p + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub slope: Vec<f64>,
    pub intercept: f64,
}

impl AffinePiece {
    pub fn new(slope: Vec<f64>, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        dot(&self.slope, p) + self.intercept
    }

    /// Values at the simplex vertices.
    fn vertex_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.slope.iter().map(move |a| a + self.intercept)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendComponent {
    pub generator: GeneratingFunction,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// `prod_i p_i^{w_i}` with `w` in the closed simplex.
    GeometricMean { weights: Vec<f64> },
    /// `min_j (a_j . p + b_j)`.
    MinAffine { pieces: Vec<AffinePiece> },
    /// `prod_k Phi_k^{lambda_k}` with `lambda` in the closed simplex.
    LogBlend { components: Vec<BlendComponent> },
}

/// A positive concave function on the simplex, scaled so that its value at
/// the barycenter is one.
///
/// The JSON form carries `kind`, the kind's parameters and the
/// `normalization` constant; reading it back reproduces the value bit for
/// bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGenerator", into = "RawGenerator")]
pub struct GeneratingFunction {
    kind: GeneratorKind,
    normalization: f64,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGenerator {
    #[serde(flatten)]
    kind: GeneratorKind,
    normalization: f64,
}

impl TryFrom<RawGenerator> for GeneratingFunction {
    type Error = Error;

    fn try_from(raw: RawGenerator) -> Result<Self> {
        let dim = structural_dim(&raw.kind)?;
        if !(raw.normalization.is_finite() && raw.normalization > 0.0) {
            return Err(Error::InvalidGenerator(format!(
                "normalization must be positive, got {}",
                raw.normalization
            )));
        }
        Ok(Self {
            kind: raw.kind,
            normalization: raw.normalization,
            dim,
        })
    }
}

impl From<GeneratingFunction> for RawGenerator {
    fn from(g: GeneratingFunction) -> Self {
        Self {
            kind: g.kind,
            normalization: g.normalization,
        }
    }
}

fn structural_dim(kind: &GeneratorKind) -> Result<usize> {
    let bad = |msg: String| Err(Error::InvalidGenerator(msg));
    match kind {
        GeneratorKind::GeometricMean { weights } => {
            if weights.len() < 2 {
                return bad("geometric mean needs at least 2 weights".into());
            }
            Ok(weights.len())
        }
        GeneratorKind::MinAffine { pieces } => {
            let Some(first) = pieces.first() else {
                return bad("min-affine generator needs at least one piece".into());
            };
            let n = first.slope.len();
            if n < 2 || pieces.iter().any(|pc| pc.slope.len() != n) {
                return bad("affine pieces must share a dimension of at least 2".into());
            }
            Ok(n)
        }
        GeneratorKind::LogBlend { components } => {
            let Some(first) = components.first() else {
                return bad("log-blend needs at least one component".into());
            };
            let n = first.generator.dim;
            if components.iter().any(|c| c.generator.dim != n) {
                return bad("blend components must share a dimension".into());
            }
            Ok(n)
        }
    }
}

impl GeneratingFunction {
    fn normalized(kind: GeneratorKind) -> Result<Self> {
        let dim = structural_dim(&kind)?;
        let mut g = Self {
            kind,
            normalization: 1.0,
            dim,
        };
        let at_center = g.raw_log_value(&SimplexPoint::barycenter(dim));
        if !at_center.is_finite() {
            return Err(Error::InvalidGenerator(
                "generator is not positive at the barycenter".into(),
            ));
        }
        g.normalization = (-at_center).exp();
        Ok(g)
    }

    /// Weighted geometric mean `prod p_i^{w_i}`; generates the constant
    /// portfolio `w`.
    pub fn geometric_mean(weights: SimplexPoint) -> Result<Self> {
        Self::normalized(GeneratorKind::GeometricMean {
            weights: weights.into_inner(),
        })
    }

    /// Minimum of affine functions. Each piece must be non-negative at every
    /// vertex and positive at one, which makes it positive on the open
    /// simplex.
    pub fn min_affine(pieces: Vec<AffinePiece>) -> Result<Self> {
        for (j, piece) in pieces.iter().enumerate() {
            let values: Vec<f64> = piece.vertex_values().collect();
            if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || values.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidGenerator(format!(
                    "affine piece {j} is not positive on the open simplex"
                )));
            }
        }
        Self::normalized(GeneratorKind::MinAffine { pieces })
    }

    /// `prod_k Phi_k^{lambda_k}`; generates `sum_k lambda_k pi_k`.
    pub fn log_blend(components: Vec<(GeneratingFunction, f64)>) -> Result<Self> {
        let total: f64 = components.iter().map(|(_, l)| l).sum();
        if components.iter().any(|(_, l)| !(*l >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidGenerator(format!(
                "blend weights must be non-negative and sum to 1 (sum {total})"
            )));
        }
        Self::log_blend_unchecked(components)
    }

    /// Log-blend without the sign check on the exponents. Negative exponents
    /// break concavity; this exists to build negative controls for the
    /// verifiers.
    pub fn log_blend_unchecked(components: Vec<(GeneratingFunction, f64)>) -> Result<Self> {
        Self::normalized(GeneratorKind::LogBlend {
            components: components
                .into_iter()
                .map(|(generator, lambda)| BlendComponent { generator, lambda })
                .collect(),
        })
    }

    /// The constant function one; generates the market portfolio.
    pub fn constant(n: usize) -> Result<Self> {
        Self::min_affine(vec![AffinePiece::new(vec![0.0; n], 1.0)])
    }

    /// Two-stock tent `min(p_1/theta, p_2/(1-theta))`, the smallest piecewise
    /// affine function vanishing at both vertices with value one at
    /// `(theta, 1-theta)`. It generates the all-or-nothing switch at
    /// `p_1 = theta`.
    pub fn threshold(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must lie in (0, 1), got {theta}"
            )));
        }
        Self::min_affine(vec![
            AffinePiece::new(vec![1.0 / theta, 0.0], 0.0),
            AffinePiece::new(vec![0.0, 1.0 / (1.0 - theta)], 0.0),
        ])
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";");
        match &self.kind {
            GeneratorKind::GeometricMean { weights } => format!("gm({})", list(weights)),
            GeneratorKind::MinAffine { pieces } => {
                let parts: Vec<String> = pieces
                    .iter()
                    .map(|pc| {
                        if pc.intercept == 0.0 {
                            format!("({})", list(&pc.slope))
                        } else {
                            format!("({})+{}", list(&pc.slope), pc.intercept)
                        }
                    })
                    .collect();
                format!("minaff[{}]", parts.join("|"))
            }
            GeneratorKind::LogBlend { components } => {
                let parts: Vec<String> = components
                    .iter()
                    .map(|c| format!("{}^{}", c.generator.describe(), c.lambda))
                    .collect();
                format!("blend[{}]", parts.join("*"))
            }
        }
    }

    fn raw_log_value(&self, p: &[f64]) -> f64 {
        match &self.kind {
            GeneratorKind::GeometricMean { weights } => weights
                .iter()
                .zip(p)
                .filter(|(w, _)| **w != 0.0)
                .map(|(w, x)| w * x.ln())
                .sum(),
            GeneratorKind::MinAffine { pieces } => {
                let m = pieces.iter().map(|pc| pc.value(p)).fold(f64::INFINITY, f64::min);
                if m > 0.0 {
                    m.ln()
                } else {
                    f64::NAN
                }
            }
            GeneratorKind::LogBlend { components } => {
                components.iter().map(|c| c.lambda * c.generator.log_value(p)).sum()
            }
        }
    }

    /// `log Phi(p)`; NaN where the generator is not positive.
    pub fn log_value(&self, p: &[f64]) -> f64 {
        self.raw_log_value(p) + self.normalization.ln()
    }

    /// `Phi(p)`.
    pub fn eval(&self, p: &SimplexPoint) -> Result<f64> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.dim(),
            });
        }
        let v = self.log_value(p).exp();
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidGenerator(format!(
                "non-positive value {v} at {:?}",
                p.coords()
            )))
        }
    }

    /// A supergradient of `log Phi` at `p` in ambient coordinates; adding a
    /// multiple of `(1, ..., 1)` gives another representative of the same
    /// tangent supergradient.
    ///
    /// Where a minimum of affine pieces has several active pieces, the
    /// average of their slopes is used.
    pub fn log_gradient(&self, p: &[f64]) -> Vec<f64> {
        match &self.kind {
            GeneratorKind::GeometricMean { weights } => weights
                .iter()
                .zip(p)
                .map(|(w, x)| if *w == 0.0 { 0.0 } else { w / x })
                .collect(),
            GeneratorKind::MinAffine { pieces } => {
                let values: Vec<f64> = pieces.iter().map(|pc| pc.value(p)).collect();
                let m = values.iter().copied().fold(f64::INFINITY, f64::min);
                let mut slope = vec![0.0; p.len()];
                let mut active = 0usize;
                for (pc, v) in pieces.iter().zip(&values) {
                    if v - m <= ACTIVE_TOLERANCE {
                        active += 1;
                        slope.iter_mut().zip(&pc.slope).for_each(|(s, a)| *s += a);
                    }
                }
                let scale = 1.0 / (active as f64 * m);
                slope.into_iter().map(|s| s * scale).collect()
            }
            GeneratorKind::LogBlend { components } => {
                let mut out = vec![0.0; p.len()];
                for c in components {
                    for (o, g) in out.iter_mut().zip(c.generator.log_gradient(p)) {
                        *o += c.lambda * g;
                    }
                }
                out
            }
        }
    }

    /// Tangent supergradient `v` of `log Phi` at `p`: `sum v_i = 0` and
    /// `log Phi(p) + v . (q - p) >= log Phi(q)` for all `q`.
    pub fn supergradient_log(&self, p: &SimplexPoint) -> Vec<f64> {
        let g = self.log_gradient(p);
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        g.into_iter().map(|x| x - mean).collect()
    }

    /// Sampled structural checks: positivity, midpoint concavity with random
    /// weights, and the barycenter normalisation.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<()> {
        let center = SimplexPoint::barycenter(self.dim);
        let at_center = self.eval(&center)?;
        if (at_center - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidGenerator(format!(
                "value at the barycenter is {at_center}, not 1"
            )));
        }
        let worst = self.concavity_slack(samples, seed)?;
        if worst < -CONCAVITY_TOLERANCE {
            return Err(Error::InvalidGenerator(format!("concavity violated by {worst:e}")));
        }
        Ok(())
    }

    /// Smallest `Phi(l p + (1-l) q) - l Phi(p) - (1-l) Phi(q)` over sampled
    /// triples. Errors if a sampled value is not positive.
    pub fn concavity_slack(&self, samples: usize, seed: u64) -> Result<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = f64::INFINITY;
        for _ in 0..samples {
            let p = SimplexPoint::sample_uniform_with_floor(&mut rng, self.dim, 1e-6);
            let q = SimplexPoint::sample_uniform_with_floor(&mut rng, self.dim, 1e-6);
            let l: f64 = rng.random();
            let mid =
                SimplexPoint::from_normalized(p.iter().zip(q.iter()).map(|(a, b)| l * a + (1.0 - l) * b).collect());
            let slack = self.eval(&mid)? - l * self.eval(&p)? - (1.0 - l) * self.eval(&q)?;
            worst = worst.min(slack);
        }
        Ok(worst)
    }
}

/// How a supergradient is picked where the generator is not differentiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SelectionRule {
    /// Average of the slopes of all pieces active within [`ACTIVE_TOLERANCE`].
    #[default]
    AverageActive,
}

/// The portfolio generated by a [`GeneratingFunction`].
#[derive(Debug, Clone)]
pub struct FgPortfolio {
    generator: GeneratingFunction,
    rule: SelectionRule,
}

impl FgPortfolio {
    pub fn generator(&self) -> &GeneratingFunction {
        &self.generator
    }

    pub fn rule(&self) -> SelectionRule {
        self.rule
    }
}

impl PortfolioMap for FgPortfolio {
    fn label(&self) -> String {
        format!("fg:{}", self.generator.describe())
    }

    fn raw_weights(&self, p: &SimplexPoint) -> Vec<f64> {
        let g = self.generator.log_gradient(p);
        let shift = 1.0 - dot(p, &g);
        p.iter().zip(&g).map(|(x, gi)| x * (gi + shift)).collect()
    }
}

/// Builds the portfolio generated by `generator` and checks that it lands in
/// the closed simplex at the barycenter.
pub fn portfolio_from_generator(generator: GeneratingFunction) -> Result<FgPortfolio> {
    let portfolio = FgPortfolio {
        generator,
        rule: SelectionRule::AverageActive,
    };
    portfolio.evaluate(&SimplexPoint::barycenter(portfolio.generator.dim()))?;
    Ok(portfolio)
}

/// Sampling region for the defining-inequality check: `p` uniform on
/// `{p_i >= floor}`, then `q` uniform on the simplex subject to
/// `1/M <= q_i/p_i <= M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRegion {
    pub bound_m: f64,
    pub floor: f64,
}

impl Default for PairRegion {
    fn default() -> Self {
        Self {
            bound_m: 2.0,
            floor: 0.01,
        }
    }
}

impl PairRegion {
    const MAX_ATTEMPTS: usize = 1_000_000;

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.bound_m > 1.0) || !(self.floor >= 0.0) || self.floor * n as f64 >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "pair region needs M > 1 and 0 <= floor < 1/n, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Draws one pair from the region.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<(SimplexPoint, SimplexPoint)> {
        self.validate(n)?;
        let p = SimplexPoint::sample_uniform_with_floor(rng, n, self.floor);
        for _ in 0..Self::MAX_ATTEMPTS {
            let q = SimplexPoint::sample_uniform(rng, n);
            let inside = p.iter().zip(q.iter()).all(|(a, b)| {
                let r = b / a;
                r >= 1.0 / self.bound_m && r <= self.bound_m
            });
            if inside {
                return Ok((p, q));
            }
        }
        Err(Error::InvalidParameter(format!(
            "could not sample a pair from {self:?} around {:?}",
            p.coords()
        )))
    }
}

/// Outcome of [`verify_fg_inequality`].
#[derive(Debug, Clone)]
pub struct FgReport {
    pub samples: usize,
    /// Smallest `pi(p) . q/p - Phi(q)/Phi(p)` seen.
    pub min_slack: f64,
    /// The pair attaining `min_slack`.
    pub worst_pair: Option<(SimplexPoint, SimplexPoint)>,
    /// First sampled point where the portfolio returned an invalid vector.
    pub invalid_output_at: Option<SimplexPoint>,
    pub passed: bool,
}

/// Checks `pi(p) . q/p >= Phi(q)/Phi(p)` on sampled pairs. A failing
/// report is returned as data.
pub fn verify_fg_inequality(
    map: &dyn PortfolioMap,
    generator: &GeneratingFunction,
    samples: usize,
    seed: u64,
    region: PairRegion,
) -> Result<FgReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let n = generator.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FgReport {
        samples,
        min_slack: f64::INFINITY,
        worst_pair: None,
        invalid_output_at: None,
        passed: true,
    };
    for _ in 0..samples {
        let (p, q) = region.sample(&mut rng, n)?;
        let weights = match map.evaluate(&p) {
            Ok(w) => w,
            Err(_) => {
                report.passed = false;
                report.min_slack = f64::NEG_INFINITY;
                report.invalid_output_at.get_or_insert(p);
                continue;
            }
        };
        let lhs = dot(&weights, &p.ratio_to(&q));
        let rhs = (generator.log_value(&q) - generator.log_value(&p)).exp();
        let slack = lhs - rhs;
        let slack = if slack.is_nan() { f64::NEG_INFINITY } else { slack };
        if slack < report.min_slack || report.worst_pair.is_none() {
            report.min_slack = report.min_slack.min(slack);
            report.worst_pair = Some((p, q));
        }
    }
    report.passed &= report.min_slack >= -FG_SLACK_TOLERANCE;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::{ConstantWeights, MarketPortfolio};
    use rand::Rng;

    fn sp(v: &[f64]) -> SimplexPoint {
        SimplexPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let gm = GeneratingFunction::geometric_mean(sp(&[0.3, 0.7])).unwrap();
        let center = SimplexPoint::barycenter(2);
        assert!((gm.eval(&center).unwrap() - 1.0).abs() < 1e-15);
        // raw value 0.5 at the barycenter, so the normalisation is 2
        assert!((gm.normalization() - 2.0).abs() < 1e-15);

        let tent = GeneratingFunction::min_affine(vec![
            AffinePiece::new(vec![1.0, 0.0], 0.5),
            AffinePiece::new(vec![0.0, 1.0], 0.5),
        ])
        .unwrap();
        assert_eq!(tent.normalization(), 1.0);
        assert_eq!(tent.eval(&center).unwrap(), 1.0);

        let other = GeneratingFunction::threshold(0.3).unwrap();
        let blend = GeneratingFunction::log_blend(vec![(gm.clone(), 0.5), (other.clone(), 0.5)]).unwrap();
        let p = sp(&[0.2, 0.8]);
        let expected = (gm.eval(&p).unwrap() * other.eval(&p).unwrap()).sqrt();
        assert!((blend.eval(&p).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn constructors_reject_invalid_input() {
        assert!(GeneratingFunction::min_affine(vec![AffinePiece::new(vec![1.0, -1.0], 0.0)]).is_err());
        assert!(GeneratingFunction::min_affine(vec![]).is_err());
        let gm = GeneratingFunction::geometric_mean(SimplexPoint::barycenter(2)).unwrap();
        assert!(GeneratingFunction::log_blend(vec![(gm.clone(), 1.5), (gm, -0.5)]).is_err());
        assert!(GeneratingFunction::threshold(1.0).is_err());
    }

    #[test]
    fn geometric_mean_supergradient_formula() {
        let w = sp(&[0.2, 0.3, 0.5]);
        let gm = GeneratingFunction::geometric_mean(w.clone()).unwrap();
        let p = sp(&[0.1, 0.6, 0.3]);
        let v = gm.supergradient_log(&p);
        let mean: f64 = (0..3).map(|j| w[j] / p[j]).sum::<f64>() / 3.0;
        for i in 0..3 {
            assert!((v[i] - (w[i] / p[i] - mean)).abs() < 1e-13);
        }
        assert!(v.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn constant_generator_has_zero_supergradient() {
        let c = GeneratingFunction::constant(3).unwrap();
        let v = c.supergradient_log(&sp(&[0.2, 0.3, 0.5]));
        assert!(v.iter().all(|&x| x == 0.0));
        let pi = portfolio_from_generator(c).unwrap();
        assert_eq!(pi.raw_weights(&sp(&[0.2, 0.3, 0.5])), vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn supergradient_inequality_holds_on_samples() {
        let gens = [
            GeneratingFunction::geometric_mean(sp(&[0.1, 0.6, 0.3])).unwrap(),
            GeneratingFunction::min_affine(vec![
                AffinePiece::new(vec![1.0, 0.0, 0.5], 0.0),
                AffinePiece::new(vec![0.0, 1.0, 0.5], 0.1),
                AffinePiece::new(vec![0.5, 0.5, 0.0], 0.2),
            ])
            .unwrap(),
        ];
        let blend = GeneratingFunction::log_blend(vec![(gens[0].clone(), 0.3), (gens[1].clone(), 0.7)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for g in gens.iter().chain(std::iter::once(&blend)) {
            let mut worst = f64::INFINITY;
            for _ in 0..1000 {
                let p = SimplexPoint::sample_uniform_with_floor(&mut rng, 3, 1e-4);
                let q = SimplexPoint::sample_uniform_with_floor(&mut rng, 3, 1e-4);
                let v = g.supergradient_log(&p);
                let diff: Vec<f64> = q.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
                let slack = g.log_value(&p) + dot(&v, &diff) - g.log_value(&q);
                worst = worst.min(slack);
            }
            assert!(worst >= -1e-10, "{}: {worst}", g.describe());
        }
    }

    #[test]
    fn geometric_mean_generates_its_weights() {
        let w = sp(&[0.3, 0.7]);
        let pi = portfolio_from_generator(GeneratingFunction::geometric_mean(w.clone()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = SimplexPoint::sample_uniform_with_floor(&mut rng, 2, 1e-6);
            let out = pi.evaluate(&p).unwrap();
            assert!(out.sup_distance(&w) < 1e-12);
        }
    }

    #[test]
    fn threshold_generator_switches() {
        let theta = 0.37;
        let pi = portfolio_from_generator(GeneratingFunction::threshold(theta).unwrap()).unwrap();
        for p1 in [0.01, 0.2, 0.36, 0.38, 0.6, 0.99] {
            let w = pi.evaluate(&sp(&[p1, 1.0 - p1])).unwrap();
            let expected = if p1 <= theta { [1.0, 0.0] } else { [0.0, 1.0] };
            assert!((w[0] - expected[0]).abs() < 1e-12 && (w[1] - expected[1]).abs() < 1e-12);
        }
        // tie set: average of the two active pieces
        let w = pi.evaluate(&sp(&[theta, 1.0 - theta])).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn threshold_family_is_discrete() {
        let a = portfolio_from_generator(GeneratingFunction::threshold(0.3).unwrap()).unwrap();
        let b = portfolio_from_generator(GeneratingFunction::threshold(0.31).unwrap()).unwrap();
        let p = sp(&[0.305, 0.695]);
        let d = a.evaluate(&p).unwrap().euclidean_distance(&b.evaluate(&p).unwrap());
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn blend_generates_convex_combination() {
        let g1 = GeneratingFunction::geometric_mean(sp(&[0.2, 0.8])).unwrap();
        let g2 = GeneratingFunction::threshold(0.45).unwrap();
        let lambda = 0.35;
        let blend = GeneratingFunction::log_blend(vec![(g1.clone(), lambda), (g2.clone(), 1.0 - lambda)]).unwrap();
        let pb = portfolio_from_generator(blend).unwrap();
        let p1 = portfolio_from_generator(g1).unwrap();
        let p2 = portfolio_from_generator(g2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let p = SimplexPoint::sample_uniform_with_floor(&mut rng, 2, 1e-3);
            let a = p1.evaluate(&p).unwrap();
            let b = p2.evaluate(&p).unwrap();
            let c = pb.evaluate(&p).unwrap();
            for i in 0..2 {
                assert!((c[i] - (lambda * a[i] + (1.0 - lambda) * b[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn verifier_examples() {
        let w = sp(&[0.25, 0.75]);
        let gm = GeneratingFunction::geometric_mean(w.clone()).unwrap();
        let report = verify_fg_inequality(&ConstantWeights::new(w), &gm, 1000, 3, PairRegion::default()).unwrap();
        assert!(report.passed, "{report:?}");

        let e2 = GeneratingFunction::geometric_mean(SimplexPoint::vertex(2, 1)).unwrap();
        let e1 = ConstantWeights::new(SimplexPoint::vertex(2, 0));
        let report = verify_fg_inequality(&e1, &e2, 1000, 3, PairRegion::default()).unwrap();
        assert!(!report.passed);
        assert!(report.min_slack < 0.0);
        let (p, q) = report.worst_pair.unwrap();
        // re-evaluate the located pair
        let slack = q[0] / p[0] - e2.eval(&q).unwrap() / e2.eval(&p).unwrap();
        assert!((slack - report.min_slack).abs() < 1e-12);
        // explicit violating pair
        let p = sp(&[0.5, 0.5]);
        let q = sp(&[0.4, 0.6]);
        assert!(q[0] / p[0] < e2.eval(&q).unwrap() / e2.eval(&p).unwrap());

        let one = GeneratingFunction::constant(3).unwrap();
        let report = verify_fg_inequality(&MarketPortfolio, &one, 500, 4, PairRegion::default()).unwrap();
        assert!(report.passed);
        assert!(report.min_slack.abs() < 1e-14);

        assert!(verify_fg_inequality(&MarketPortfolio, &one, 0, 4, PairRegion::default()).is_err());
    }

    #[test]
    fn non_concave_blend_is_caught() {
        let center = GeneratingFunction::geometric_mean(SimplexPoint::barycenter(2)).unwrap();
        let tent = GeneratingFunction::threshold(0.5).unwrap();
        // sqrt(p1 p2)^2 / min(p1, p2) = max(p1, p2), convex
        let bad = GeneratingFunction::log_blend_unchecked(vec![(center, 2.0), (tent, -1.0)]).unwrap();
        assert!(bad.validate(1000, 1).is_err());
        let pi = portfolio_from_generator(bad.clone()).unwrap();
        let report = verify_fg_inequality(&pi, &bad, 1000, 2, PairRegion::default()).unwrap();
        assert!(!report.passed);
        assert!(report.worst_pair.is_some());
    }

    #[test]
    fn generators_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let w = SimplexPoint::sample_uniform(&mut rng, 3);
            GeneratingFunction::geometric_mean(w)
                .unwrap()
                .validate(1000, rng.random())
                .unwrap();
        }
        GeneratingFunction::threshold(0.2).unwrap().validate(1000, 1).unwrap();
    }

    #[test]
    fn json_round_trip_is_exact() {
        let g = GeneratingFunction::log_blend(vec![
            (GeneratingFunction::geometric_mean(sp(&[0.1, 0.9])).unwrap(), 1.0 / 3.0),
            (GeneratingFunction::threshold(0.3).unwrap(), 2.0 / 3.0),
        ])
        .unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.contains("\"kind\":\"log_blend\""));
        assert!(text.contains("\"normalization\""));
        let back: GeneratingFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.normalization().to_bits(), g.normalization().to_bits());
    }

    #[test]
    fn json_rejects_malformed_generators() {
        assert!(serde_json::from_str::<GeneratingFunction>(
            r#"{"kind":"geometric_mean","weights":[1.0],"normalization":1.0}"#
        )
        .is_err());
        assert!(serde_json::from_str::<GeneratingFunction>(
            r#"{"kind":"geometric_mean","weights":[0.5,0.5],"normalization":-2.0}"#
        )
        .is_err());
    }
}
