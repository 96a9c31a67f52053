//! The two competing N*(N) curves: isotropic correlation and linear
//! factor model, plus imputation from the final datum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Isotropic-correlation curve fixed by the all-asset ("final") datum.
///
/// This is an extrapolation, not a curve fit: the curve passes through
/// `(1, 1)` and `(n_max, anchor_n_star)` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropicModel<F> {
    pub rho: F,
    pub n_max: usize,
    pub anchor_n_star: F,
    /// Optional homoskedastic scale (percent^2); not needed for the curve.
    pub sigma2: Option<F>,
}

impl<F: Scalar> IsotropicModel<F> {
    pub fn value(&self, n: usize) -> Result<F> {
        isotropic_nstar(n, self.rho)
    }
}

/// Factor-model coefficients for `N*(N) = N(aN+d)/(cN+d)`.
///
/// `a` is the mean-squared loading, `c` the mean-loading dot product and
/// `d` the mean residual variance; only the ratios `a/d`, `c/d` are
/// identifiable since the curve is invariant along `(a,c,d) -> (λa,λc,λd)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorCurve<F> {
    pub a: F,
    pub c: F,
    pub d: F,
    pub imputed_k: Option<usize>,
}

impl<F: Scalar> FactorCurve<F> {
    pub fn new(a: F, c: F, d: F) -> Result<Self> {
        if a < F::zero() || c < F::zero() || d < F::zero() {
            return Err(Error::validation(format!(
                "factor coefficients must be non-negative: a={a} c={c} d={d}"
            )));
        }
        Ok(FactorCurve { a, c, d, imputed_k: None })
    }

    pub fn value(&self, n: usize) -> Result<F> {
        factor_curve_nstar(n, self)
    }
}

/// `N*(N) = N / (1 + (N-1) rho)` for the homoskedastic isotropic structure.
pub fn isotropic_nstar<F: Scalar>(n: usize, rho: F) -> Result<F> {
    if n == 0 {
        return Err(Error::validation("portfolio size must be positive"));
    }
    if n == 1 {
        return Ok(F::one());
    }
    let nf = F::of_usize(n);
    let denom = F::one() + (nf - F::one()) * rho;
    if rho > F::one() || denom <= F::zero() {
        return Err(Error::validation(format!(
            "rho={rho} outside validity range (1/(1-{n}), 1]: covariance not positive definite"
        )));
    }
    Ok(nf / denom)
}

/// Impute the common pairwise correlation from the final datum:
/// `rho = (n_max / anchor - 1) / (n_max - 1)`.
pub fn impute_isotropic<F: Scalar>(n_max: usize, anchor_n_star: F) -> Result<IsotropicModel<F>> {
    if n_max < 2 {
        return Err(Error::validation("n_max must be at least 2"));
    }
    let nf = F::of_usize(n_max);
    if anchor_n_star <= F::zero() || anchor_n_star > nf {
        return Err(Error::validation(format!(
            "anchor N* must lie in (0, {n_max}], got {anchor_n_star}"
        )));
    }
    let rho = (nf / anchor_n_star - F::one()) / (nf - F::one());
    Ok(IsotropicModel { rho, n_max, anchor_n_star, sigma2: None })
}

/// Large-N limit of the isotropic curve, `1/rho`.
pub fn isotropic_limit<F: Scalar>(rho: F) -> Result<F> {
    if rho <= F::zero() {
        return Err(Error::validation("no finite limit for rho <= 0"));
    }
    Ok(rho.recip())
}

/// `N*(N) = N (aN + d) / (cN + d)` for the factor coefficients.
pub fn factor_curve_nstar<F: Scalar>(n: usize, curve: &FactorCurve<F>) -> Result<F> {
    if n == 0 {
        return Err(Error::validation("portfolio size must be positive"));
    }
    let nf = F::of_usize(n);
    let denom = curve.c * nf + curve.d;
    if denom <= F::zero() {
        return Err(Error::validation("degenerate factor curve: c*n + d must be positive"));
    }
    Ok(nf * (curve.a * nf + curve.d) / denom)
}

/// Large-portfolio factor asymptote through the origin and the final datum.
///
/// Returns the imputed factor count `K = round(n_max / anchor)` and the
/// line value `n * anchor / n_max`.
pub fn factor_asymptote<F: Scalar>(
    n: usize,
    n_max: usize,
    anchor_n_star: F,
) -> Result<(usize, F)> {
    if anchor_n_star <= F::zero() {
        return Err(Error::validation("anchor N* must be positive"));
    }
    if n == 0 || n_max == 0 {
        return Err(Error::validation("portfolio sizes must be positive"));
    }
    let k = (F::of_usize(n_max) / anchor_n_star)
        .round()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let value = F::of_usize(n) * anchor_n_star / F::of_usize(n_max);
    Ok((k, value))
}
