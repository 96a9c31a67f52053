//! Effective-degrees-of-freedom analysis of asset return panels.
//!
//! The library measures how many independent bets an equal-weighted
//! portfolio actually carries: for a random subset of `N` assets,
//! `N* = N V_I / V_P`, where `V_P` is the realized portfolio variance and
//! `V_I` is the variance the portfolio would have were the assets
//! independent. Repeating the draw over many subsets traces the signature
//! curve `N*(N)`, whose shape discriminates an isotropic correlation
//! structure from a linear factor structure.
//!
//! Numeric kernels are generic over the float type through [`Scalar`];
//! the aliases at the crate root fix `f64` for ordinary use. File
//! ingestion and the end-to-end pipeline are concrete in `f64`.

pub mod error;
pub mod fit;
pub mod inference;
pub mod ingest;
pub mod models;
pub mod pipeline;
pub mod returns;
pub mod sampling;
pub mod scalar;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` return panel.
pub type Panel = returns::ReturnPanel<f64>;
/// `f64` price series.
pub type Prices = returns::PriceSeries<f64>;
/// `f64` pairwise correlation census.
pub type Census = returns::CorrelationCensus<f64>;
/// `f64` sampled portfolio record.
pub type Trial = sampling::TrialRecord<f64>;
/// `f64` per-size aggregate.
pub type Summary = sampling::SizeSummary<f64>;
/// `f64` isotropic curve.
pub type IsoModel = models::IsotropicModel<f64>;
/// `f64` factor curve.
pub type Curve = models::FactorCurve<f64>;
/// `f64` factor fit result.
pub type Fit = fit::FactorFit<f64>;
/// `f64` goodness-of-fit report.
pub type Report = inference::TestReport<f64>;
/// `f64` equivalence test result.
pub type Equivalence = inference::EquivalenceResult<f64>;
