//! Discrete-time universal portfolios over families of portfolio maps.
//!
//! The crate is organised bottom-up:
//!
//! * [`simplex`] and [`market`]: points of the unit simplex, market-weight
//!   paths with bounded relative returns, test-market generators and the
//!   empirical pair measure.
//! * [`portfolio`]: the portfolio-map abstraction, relative values and
//!   growth rates.
//! * [`fgp`]: concave generating functions and the functionally generated
//!   portfolios they induce.
//! * [`universal`]: priors, wealth distributions and Cover's mixture portfolio.
//! * [`ldp`]: finite-state growth rates, the log-optimal solver and
//!   concentration diagnostics.

// Checks like `!(x >= 0.0)` are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fgp;
pub mod io;
pub mod ldp;
pub mod market;
pub mod numeric;
pub mod portfolio;
pub mod simplex;
pub mod universal;

#[cfg(any(test, feature = "oracles"))]
pub mod oracle;

pub use error::{Error, Result};
pub use market::{MarketPath, PairMeasure};
pub use portfolio::{PortfolioMap, ValueSeries};
pub use simplex::SimplexPoint;
