//! Experiment configuration files.
//!
//! One TOML file per experiment. Every table rejects unknown keys and all
//! values are validated before anything runs.

use serde::Deserialize;

use univport::market::MarkovChain;

use crate::CliError;

/// Scenario names as used in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Counterexample,
    Universality,
    Ldp,
    FgpVerify,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Counterexample => "counterexample",
            Scenario::Universality => "universality",
            Scenario::Ldp => "ldp",
            Scenario::FgpVerify => "fgp-verify",
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarketSpec {
    /// The two-stock path on which Cover's portfolio is not universal.
    Counterexample { delta: f64 },
    /// Finite-state Markov chain of market weights.
    Markov {
        states: Vec<Vec<f64>>,
        transition: Vec<Vec<f64>>,
        #[serde(default)]
        start: usize,
    },
    /// Deterministic alternation between (0.4, 0.6) and (0.6, 0.4).
    Alternating,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Prefix of the dense enumeration of generating functions with dyadic weights.
    DenseFgp { size: usize },
    /// Equal-weight cloud of constant-weighted portfolios.
    ConstantCloud { size: usize },
    /// The market portfolio alone.
    Market,
    /// Log-optimal map and a market blend whose growth is `gap` lower.
    TwoAtom {
        gap: f64,
        #[serde(default = "half")]
        lambda: f64,
    },
    /// Product-uniform family on the counterexample path, probed through
    /// random cylinder sets.
    ProductUniform {
        cylinders: usize,
        #[serde(default = "default_factors")]
        max_factors: usize,
    },
}

fn half() -> f64 {
    0.5
}

fn default_factors() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Strictly increasing positive horizons; the path runs to the last one.
    pub horizons: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleCheck {
    /// Allowed distance of the final `(1/t) log(V_hat/V*)` from its limit.
    pub tolerance: f64,
    /// Allowed relative disagreement between the sequential and closed-form values.
    #[serde(default = "agreement")]
    pub agreement_tolerance: f64,
}

fn agreement() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    pub market: MarketSpec,
    pub run: RunSpec,
    pub check: CounterexampleCheck,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct UniversalityCheck {
    /// Bound on `|(1/t) log(V_hat/V*)|` at the final horizon.
    pub tolerance: f64,
    /// Optional bound on the fitted slope of `log V* - log V_hat` against `log t`.
    pub max_regret_slope: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct UniversalityConfig {
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    pub market: MarketSpec,
    pub family: FamilySpec,
    pub run: RunSpec,
    pub check: UniversalityCheck,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LdpCheck {
    /// Allowed distance of the final empirical rate from the target rate.
    pub tolerance: f64,
    /// Growth-rate margin defining `F = {W <= W* - epsilon}`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LdpConfig {
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    pub market: MarketSpec,
    pub family: FamilySpec,
    pub run: RunSpec,
    pub check: LdpCheck,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FgpSpec {
    /// Dimension of the generated family.
    pub dim: usize,
    /// Members of the dense enumeration to verify.
    pub family_size: usize,
    /// Sampled pairs per member.
    pub samples: usize,
    #[serde(default = "default_bound")]
    pub bound_m: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// Adds a non-concave generator as a negative control.
    #[serde(default)]
    pub inject_non_concave: bool,
}

fn default_bound() -> f64 {
    2.0
}

fn default_floor() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IdentitySpec {
    /// Number of random (prior, path) pairs.
    pub cases: usize,
    pub max_atoms: usize,
    pub horizon: usize,
    #[serde(default = "identity_tolerance")]
    pub tolerance: f64,
}

fn identity_tolerance() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FgpVerifyConfig {
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    pub fgp: FgpSpec,
    pub identity: IdentitySpec,
}

/// Parses and validates a config without running it.
pub fn validate(scenario: Scenario, text: &str) -> Result<(), CliError> {
    match scenario {
        Scenario::Counterexample => CounterexampleConfig::parse(text).map(|_| ()),
        Scenario::Universality => UniversalityConfig::parse(text).map(|_| ()),
        Scenario::Ldp => LdpConfig::parse(text).map(|_| ()),
        Scenario::FgpVerify => FgpVerifyConfig::parse(text).map(|_| ()),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, scenario: Scenario) -> Result<T, CliError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
    match table.get("scenario").and_then(|v| v.as_str()) {
        Some(name) if name == scenario.name() => {}
        Some(name) => {
            return Err(invalid(format!(
                "config is for scenario {name:?}, not {:?}",
                scenario.name()
            )))
        }
        None => return Err(invalid("missing string key `scenario`")),
    }
    toml::from_str(text).map_err(|e| invalid(e.to_string()))
}

fn check_positive(name: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {x}")))
    }
}

fn check_horizons(run: &RunSpec) -> Result<usize, CliError> {
    if run.horizons.is_empty() || run.horizons[0] == 0 || run.horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("run.horizons must be positive and strictly increasing"));
    }
    Ok(*run.horizons.last().unwrap())
}

impl MarketSpec {
    fn validate(&self) -> Result<(), CliError> {
        match self {
            MarketSpec::Counterexample { delta } => check_positive("market.delta", *delta),
            MarketSpec::Markov { .. } => self.chain().map(|_| ()),
            MarketSpec::Alternating => Ok(()),
        }
    }

    /// The chain behind a Markov-type market.
    pub fn chain(&self) -> Result<MarkovChain, CliError> {
        match self {
            MarketSpec::Markov {
                states,
                transition,
                start,
            } => {
                let chain = MarkovChain::from_coords(states.clone(), transition.clone())
                    .map_err(|e| invalid(format!("market: {e}")))?;
                if *start >= chain.states().len() {
                    return Err(invalid(format!("market.start {start} is not a state index")));
                }
                Ok(chain)
            }
            MarketSpec::Alternating => Ok(univport::ldp::alternating_chain()),
            MarketSpec::Counterexample { .. } => Err(invalid("the counterexample market is not a Markov chain")),
        }
    }

    pub fn start(&self) -> usize {
        match self {
            MarketSpec::Markov { start, .. } => *start,
            _ => 0,
        }
    }
}

impl FamilySpec {
    fn validate(&self) -> Result<(), CliError> {
        match self {
            FamilySpec::DenseFgp { size } | FamilySpec::ConstantCloud { size } if *size == 0 => {
                Err(invalid("family.size must be at least 1"))
            }
            FamilySpec::TwoAtom { gap, lambda } => {
                check_positive("family.gap", *gap)?;
                if !(*lambda > 0.0 && *lambda < 1.0) {
                    return Err(invalid(format!("family.lambda must lie in (0, 1), got {lambda}")));
                }
                Ok(())
            }
            FamilySpec::ProductUniform { cylinders, max_factors } if *cylinders == 0 || *max_factors == 0 => {
                Err(invalid("family.cylinders and family.max_factors must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

impl CounterexampleConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let c: Self = parse(text, Scenario::Counterexample)?;
        if !matches!(c.market, MarketSpec::Counterexample { .. }) {
            return Err(invalid("counterexample needs market.kind = \"counterexample\""));
        }
        c.market.validate()?;
        check_horizons(&c.run)?;
        check_positive("check.tolerance", c.check.tolerance)?;
        check_positive("check.agreement_tolerance", c.check.agreement_tolerance)?;
        Ok(c)
    }

    pub fn delta(&self) -> f64 {
        match self.market {
            MarketSpec::Counterexample { delta } => delta,
            _ => unreachable!("validated on parse"),
        }
    }
}

impl UniversalityConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let c: Self = parse(text, Scenario::Universality)?;
        if matches!(c.market, MarketSpec::Counterexample { .. }) {
            return Err(invalid("universality needs a Markov-type market"));
        }
        c.market.validate()?;
        c.family.validate()?;
        if !matches!(
            c.family,
            FamilySpec::DenseFgp { .. } | FamilySpec::ConstantCloud { .. } | FamilySpec::Market
        ) {
            return Err(invalid(
                "universality family must be dense_fgp, constant_cloud or market",
            ));
        }
        check_horizons(&c.run)?;
        check_positive("check.tolerance", c.check.tolerance)?;
        if let Some(s) = c.check.max_regret_slope {
            check_positive("check.max_regret_slope", s)?;
            if c.run.horizons.len() < 3 {
                return Err(invalid("a regret-slope check needs at least three horizons"));
            }
        }
        Ok(c)
    }
}

impl LdpConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let c: Self = parse(text, Scenario::Ldp)?;
        c.market.validate()?;
        c.family.validate()?;
        let counterexample_market = matches!(c.market, MarketSpec::Counterexample { .. });
        let product = matches!(c.family, FamilySpec::ProductUniform { .. });
        if counterexample_market != product {
            return Err(invalid(
                "the product_uniform family goes with the counterexample market and only with it",
            ));
        }
        check_horizons(&c.run)?;
        check_positive("check.tolerance", c.check.tolerance)?;
        if !c.check.epsilon.is_finite() {
            return Err(invalid("check.epsilon must be finite"));
        }
        Ok(c)
    }
}

impl FgpVerifyConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let c: Self = parse(text, Scenario::FgpVerify)?;
        let f = &c.fgp;
        if f.dim < 2 {
            return Err(invalid("fgp.dim must be at least 2"));
        }
        if f.family_size == 0 {
            return Err(invalid("fgp.family_size must be at least 1"));
        }
        if f.samples == 0 {
            return Err(invalid("fgp.samples must be at least 1"));
        }
        if !(f.bound_m > 1.0 && f.bound_m.is_finite()) {
            return Err(invalid(format!("fgp.bound_m must exceed 1, got {}", f.bound_m)));
        }
        if !(f.floor >= 0.0 && f.floor * (f.dim as f64) < 1.0) {
            return Err(invalid(format!("fgp.floor must lie in [0, 1/dim), got {}", f.floor)));
        }
        let id = &c.identity;
        if id.cases == 0 || id.max_atoms == 0 || id.horizon == 0 {
            return Err(invalid(
                "identity.cases, identity.max_atoms and identity.horizon must be at least 1",
            ));
        }
        check_positive("identity.tolerance", id.tolerance)?;
        Ok(c)
    }
}
