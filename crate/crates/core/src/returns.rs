//! Price-to-return transformations and cross-sectional statistics.
//!
//! Returns are simple (arithmetic) percent returns throughout: the
//! equal-weighted portfolio return must equal the mean of member returns,
//! which only holds for simple returns.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Daily mid prices for a single asset, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries<F> {
    pub asset: String,
    /// (date, mid price); prices finite and positive.
    pub observations: Vec<(NaiveDate, F)>,
}

impl<F: Scalar> PriceSeries<F> {
    pub fn new(asset: impl Into<String>, observations: Vec<(NaiveDate, F)>) -> Result<Self> {
        let asset = asset.into();
        for w in observations.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::validation(format!(
                    "{asset}: dates not strictly increasing at {}",
                    w[1].0
                )));
            }
        }
        for (d, p) in &observations {
            if !p.is_finite() || *p <= F::zero() {
                return Err(Error::validation(format!(
                    "{asset}: non-positive or non-finite price {p} at {d}"
                )));
            }
        }
        Ok(PriceSeries { asset, observations })
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.observations.first().map(|(d, _)| *d)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Complete assets x dates matrix of daily simple returns in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel<F> {
    pub assets: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// Row-major: `returns[i]` is the series for `assets[i]`, length `dates.len()`.
    pub returns: Vec<Vec<F>>,
}

impl<F: Scalar> ReturnPanel<F> {
    pub fn new(assets: Vec<String>, dates: Vec<NaiveDate>, returns: Vec<Vec<F>>) -> Result<Self> {
        if assets.is_empty() {
            return Err(Error::validation("panel needs at least one asset"));
        }
        if returns.len() != assets.len() {
            return Err(Error::validation(format!(
                "panel has {} assets but {} return rows",
                assets.len(),
                returns.len()
            )));
        }
        for (a, row) in assets.iter().zip(&returns) {
            if row.len() != dates.len() {
                return Err(Error::validation(format!(
                    "{a}: row length {} does not match {} dates",
                    row.len(),
                    dates.len()
                )));
            }
            if let Some(x) = row.iter().find(|x| !x.is_finite()) {
                return Err(Error::validation(format!("{a}: non-finite return {x}")));
            }
        }
        Ok(ReturnPanel { assets, dates, returns })
    }

    /// Number of assets (`N_max`).
    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Number of return observations (`T`).
    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn asset_index(&self, asset: &str) -> Option<usize> {
        self.assets.iter().position(|a| a == asset)
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.returns[i]
    }
}

/// Every unordered pairwise Pearson correlation of a panel, with summary stats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationCensus<F> {
    /// (asset_i, asset_j, rho_ij), each unordered pair once, i < j in panel order.
    pub pairs: Vec<(String, String, F)>,
    pub mean_rho: F,
    /// Fisher approximation 1/sqrt(T-3).
    pub fisher_se: F,
    /// (bin lower, bin upper, count) over [-1, 1].
    pub histogram: Vec<(F, F, usize)>,
}

/// Midpoint of a bid/ask quote.
///
/// Crossed quotes (bid > ask) still have a well-defined mid; callers that
/// care should count them via [`is_crossed`].
pub fn mid_price<F: Scalar>(bid: F, ask: F) -> Result<F> {
    if !bid.is_finite() || !ask.is_finite() || bid <= F::zero() || ask <= F::zero() {
        return Err(Error::validation(format!(
            "quote must be finite and positive: bid={bid} ask={ask}"
        )));
    }
    Ok((bid + ask) / F::of(2.0))
}

pub fn is_crossed<F: Scalar>(bid: F, ask: F) -> bool {
    bid > ask
}

/// Daily simple returns in percent between consecutive retained dates.
pub fn to_returns<F: Scalar>(series: &PriceSeries<F>) -> Result<Vec<(NaiveDate, F)>> {
    if series.observations.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: series.observations.len() });
    }
    Ok(series
        .observations
        .windows(2)
        .map(|w| (w[1].0, F::of(100.0) * (w[1].1 / w[0].1 - F::one())))
        .collect())
}

pub fn sample_mean<F: Scalar>(x: &[F]) -> F {
    x.iter().copied().sum::<F>() / F::of_usize(x.len())
}

/// Unbiased sample variance, divisor `len - 1`.
pub fn sample_variance<F: Scalar>(x: &[F]) -> Result<F> {
    if x.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: x.len() });
    }
    let m = sample_mean(x);
    let ss = x.iter().map(|&v| (v - m) * (v - m)).sum::<F>();
    Ok(ss / F::of_usize(x.len() - 1))
}

/// Pearson correlation of two equal-length series.
pub fn pearson<F: Scalar>(x: &[F], y: &[F]) -> Result<F> {
    if x.len() != y.len() {
        return Err(Error::validation("series lengths differ"));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: x.len() });
    }
    let (mx, my) = (sample_mean(x), sample_mean(y));
    let mut sxy = F::zero();
    let mut sxx = F::zero();
    let mut syy = F::zero();
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == F::zero() || syy == F::zero() {
        return Err(Error::validation("zero-variance series in correlation"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Enumerate all `N(N-1)/2` pairwise correlations of the panel.
///
/// `fisher_se = 1/sqrt(T-3)` is the Fisher approximation to the standard
/// error of a single coefficient.
pub fn pairwise_correlation_census<F: Scalar>(
    panel: &ReturnPanel<F>,
    bins: usize,
) -> Result<CorrelationCensus<F>> {
    let n = panel.n_assets();
    let t = panel.n_obs();
    if n < 2 {
        return Err(Error::validation("census needs at least two assets"));
    }
    if t < 3 {
        return Err(Error::InsufficientData { needed: 3, got: t });
    }
    if bins == 0 {
        return Err(Error::validation("bins must be positive"));
    }
    for (a, row) in panel.assets.iter().zip(&panel.returns) {
        if sample_variance(row)? == F::zero() {
            return Err(Error::ConstantSeries(a.clone()));
        }
    }
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let rho = pearson(&panel.returns[i], &panel.returns[j])?;
            pairs.push((panel.assets[i].clone(), panel.assets[j].clone(), rho));
        }
    }
    let mean_rho = pairs.iter().map(|(_, _, r)| *r).sum::<F>() / F::of_usize(pairs.len());
    let fisher_se = (F::of_usize(t - 3)).sqrt().recip();

    let lo = F::of(-1.0);
    let width = F::of(2.0) / F::of_usize(bins);
    let mut histogram: Vec<(F, F, usize)> = (0..bins)
        .map(|b| (lo + width * F::of_usize(b), lo + width * F::of_usize(b + 1), 0usize))
        .collect();
    for (_, _, r) in &pairs {
        let mut b = ((*r - lo) / width).to_usize().unwrap_or(0);
        if b >= bins {
            b = bins - 1; // rho == 1 lands in the top bin
        }
        histogram[b].2 += 1;
    }

    Ok(CorrelationCensus { pairs, mean_rho, fisher_se, histogram })
}
