//! Oracle-grade synthetic return panels: isotropic correlation and linear
//! K-factor structures with Gaussian innovations.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::returns::ReturnPanel;
use crate::scalar::Scalar;

/// Per-asset volatility: one common value or a full vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Volatility<F> {
    Homoskedastic(F),
    Heteroskedastic(Vec<F>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropicSpec<F> {
    pub n_assets: usize,
    pub t_obs: usize,
    /// Daily volatility in percent.
    pub sigma: Volatility<F>,
    pub rho: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec<F> {
    /// Mean daily return per asset (percent).
    pub mu: Vec<F>,
    /// N x K loadings, row per asset.
    pub loadings: Vec<Vec<F>>,
    /// Residual standard deviation per asset (percent).
    pub residual_sd: Vec<F>,
    pub k_factors: usize,
    pub t_obs: usize,
}

fn synthetic_dates(t: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    (0..t).map(|i| start + chrono::Days::new(i as u64)).collect()
}

fn asset_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("A{i:02}")).collect()
}

fn sigmas<F: Scalar>(spec: &IsotropicSpec<F>) -> Result<Vec<F>> {
    let v = match &spec.sigma {
        Volatility::Homoskedastic(s) => vec![*s; spec.n_assets],
        Volatility::Heteroskedastic(v) => {
            if v.len() != spec.n_assets {
                return Err(Error::validation(format!(
                    "{} volatilities for {} assets",
                    v.len(),
                    spec.n_assets
                )));
            }
            v.clone()
        }
    };
    if v.iter().any(|s| *s <= F::zero() || !s.is_finite()) {
        return Err(Error::validation("volatilities must be positive and finite"));
    }
    Ok(v)
}

fn validate_rho<F: Scalar>(n: usize, rho: F) -> Result<()> {
    let lower = if n > 1 { -(F::of_usize(n - 1)).recip() } else { F::of(-1.0) };
    if rho < lower || rho > F::one() {
        return Err(Error::validation(format!(
            "rho={rho} outside [{lower}, 1]: not a valid covariance"
        )));
    }
    Ok(())
}

/// Draw an i.i.d. Gaussian panel with the isotropic covariance of `spec`.
///
/// For `rho >= 0` the one-factor construction
/// `r_it = sigma_i (sqrt(rho) z_t + sqrt(1-rho) eps_it)` is used; for
/// `rho < 0` the analytic symmetric square root of the correlation matrix
/// (which has eigenvalues `1 + (n-1)rho` and `1 - rho`) maps i.i.d. normals
/// into the target structure.
pub fn gen_isotropic<F: Scalar>(spec: &IsotropicSpec<F>, seed: u64) -> Result<ReturnPanel<F>>
where
    StandardNormal: Distribution<F>,
{
    let (n, t) = (spec.n_assets, spec.t_obs);
    if n == 0 || t < 2 {
        return Err(Error::validation("need n >= 1 assets and t >= 2 observations"));
    }
    validate_rho(n, spec.rho)?;
    let sigma = sigmas(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![vec![F::zero(); t]; n];

    if spec.rho >= F::zero() {
        let (w_common, w_own) = (spec.rho.sqrt(), (F::one() - spec.rho).sqrt());
        for ti in 0..t {
            let z: F = rng.sample(StandardNormal);
            for (i, row) in rows.iter_mut().enumerate() {
                let eps: F = rng.sample(StandardNormal);
                row[ti] = sigma[i] * (w_common * z + w_own * eps);
            }
        }
    } else {
        // symmetric square root: alpha on the mean projector, beta off it
        let nf = F::of_usize(n);
        let alpha = (F::one() + (nf - F::one()) * spec.rho).max(F::zero()).sqrt();
        let beta = (F::one() - spec.rho).sqrt();
        let mut z = vec![F::zero(); n];
        for ti in 0..t {
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            let zbar = z.iter().copied().sum::<F>() / nf;
            for (i, row) in rows.iter_mut().enumerate() {
                row[ti] = sigma[i] * (beta * (z[i] - zbar) + alpha * zbar);
            }
        }
    }
    ReturnPanel::new(asset_names(n), synthetic_dates(t), rows)
}

/// Draw a panel from `r_t = mu + B f_t + eps_t` with standard-normal
/// factors and independent per-asset residuals.
pub fn gen_factor<F: Scalar>(spec: &FactorSpec<F>, seed: u64) -> Result<ReturnPanel<F>>
where
    StandardNormal: Distribution<F>,
{
    let n = spec.mu.len();
    let t = spec.t_obs;
    if n == 0 || t < 2 {
        return Err(Error::validation("need n >= 1 assets and t >= 2 observations"));
    }
    if spec.loadings.len() != n || spec.residual_sd.len() != n {
        return Err(Error::validation(format!(
            "dimension mismatch: mu={n}, loadings={}, residual_sd={}",
            spec.loadings.len(),
            spec.residual_sd.len()
        )));
    }
    if spec.loadings.iter().any(|b| b.len() != spec.k_factors) {
        return Err(Error::validation(format!(
            "every loading row must have k_factors = {} entries",
            spec.k_factors
        )));
    }
    if spec.residual_sd.iter().any(|s| *s < F::zero()) {
        return Err(Error::validation("residual standard deviations must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![vec![F::zero(); t]; n];
    let mut f = vec![F::zero(); spec.k_factors];
    for ti in 0..t {
        for fk in f.iter_mut() {
            *fk = rng.sample(StandardNormal);
        }
        for (i, row) in rows.iter_mut().enumerate() {
            let systematic =
                spec.loadings[i].iter().zip(&f).map(|(&b, &fk)| b * fk).sum::<F>();
            let eps: F = rng.sample(StandardNormal);
            row[ti] = spec.mu[i] + systematic + spec.residual_sd[i] * eps;
        }
    }
    ReturnPanel::new(asset_names(n), synthetic_dates(t), rows)
}

/// Dense `n x n` covariance `diag(sigma) C diag(sigma)` with the isotropic
/// correlation `C` (ones on the diagonal, `rho` off it). Row-major.
pub fn isotropic_covariance_matrix<F: Scalar>(spec: &IsotropicSpec<F>) -> Result<Vec<Vec<F>>> {
    validate_rho(spec.n_assets, spec.rho)?;
    let sigma = sigmas(spec)?;
    let n = spec.n_assets;
    let mut m = vec![vec![F::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let c = if i == j { F::one() } else { spec.rho };
            m[i][j] = sigma[i] * sigma[j] * c;
        }
    }
    Ok(m)
}
