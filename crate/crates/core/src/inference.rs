//! Z-scores, chi-square goodness-of-fit totals and the F-ratio test of
//! model equivalence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::SizeSummary;
use crate::scalar::Scalar;
use crate::special::{gamma_q, regularized_incomplete_beta};

/// One row of a goodness-of-fit comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow<F> {
    pub size: usize,
    pub sample_mean: F,
    pub model_value: F,
    /// `sample_mean - model_value`.
    pub error: F,
    pub z_score: F,
    /// `z_score^2`.
    pub chi_sq_contribution: F,
    /// Normality of the residual is doubtful below 30 observations; such
    /// sizes are kept but flagged.
    pub low_count: bool,
}

/// Chi-square comparison of per-size sample means against a model curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport<F> {
    pub per_size: Vec<TestRow<F>>,
    pub total_chi_sq: F,
    pub dof: usize,
    pub p_value: F,
}

/// F-ratio comparison of two reduced chi-squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceResult<F> {
    /// Ratio of reduced chi-squares, larger on top.
    pub f_statistic: F,
    pub dof_numerator: usize,
    pub dof_denominator: usize,
    /// Upper-tail probability of the F distribution.
    pub p_value: F,
    /// Two-sided probability, `min(1, 2 * p_value)`; this is the convention
    /// behind the quoted equivalence p-values.
    pub p_value_two_sided: F,
    /// Set when the denominator chi-square was zero.
    pub degenerate: bool,
}

/// Upper-tail probability of the chi-square distribution, `Q(dof/2, x/2)`.
pub fn chi2_sf<F: Scalar>(x: F, dof: usize) -> Result<F> {
    if x < F::zero() {
        return Err(Error::validation(format!("chi-square statistic must be >= 0, got {x}")));
    }
    if dof == 0 {
        return Err(Error::validation("dof must be positive"));
    }
    gamma_q(F::of_usize(dof) / F::of(2.0), x / F::of(2.0))
}

/// Upper-tail probability of the F distribution with (d1, d2) dof.
pub fn f_sf<F: Scalar>(f: F, d1: usize, d2: usize) -> Result<F> {
    if f < F::zero() {
        return Err(Error::validation(format!("F statistic must be >= 0, got {f}")));
    }
    if d1 == 0 || d2 == 0 {
        return Err(Error::validation("F dof must be positive"));
    }
    let (d1f, d2f) = (F::of_usize(d1), F::of_usize(d2));
    let x = d2f / (d2f + d1f * f);
    regularized_incomplete_beta(d2f / F::of(2.0), d1f / F::of(2.0), x)
}

/// Compare per-size means to a model curve via a chi-square statistic.
///
/// `model` maps a portfolio size to the model value. `included_sizes` is
/// inclusive; summaries outside it (conventionally sizes 1 and `N_max`)
/// are ignored. `n_params` reduces the degrees of freedom by the number of
/// free parameters behind the model values.
pub fn goodness_of_fit<F: Scalar>(
    summaries: &[SizeSummary<F>],
    model: impl Fn(usize) -> Result<F>,
    included_sizes: std::ops::RangeInclusive<usize>,
    n_params: usize,
) -> Result<TestReport<F>> {
    let mut per_size = Vec::new();
    let mut total = F::zero();
    for s in summaries {
        if !included_sizes.contains(&s.size) {
            continue;
        }
        if s.std_err <= F::zero() {
            return Err(Error::validation(format!(
                "size {} has zero standard error; cannot form a z-score",
                s.size
            )));
        }
        let model_value = model(s.size)?;
        let error = s.mean - model_value;
        let z = error / s.std_err;
        let contrib = z * z;
        total = total + contrib;
        per_size.push(TestRow {
            size: s.size,
            sample_mean: s.mean,
            model_value,
            error,
            z_score: z,
            chi_sq_contribution: contrib,
            low_count: s.count < 30,
        });
    }
    if per_size.len() <= n_params {
        return Err(Error::validation(format!(
            "{} included sizes cannot support {n_params} free parameters",
            per_size.len()
        )));
    }
    let dof = per_size.len() - n_params;
    let p_value = chi2_sf(total, dof)?;
    Ok(TestReport { per_size, total_chi_sq: total, dof, p_value })
}

/// F-ratio test of model equivalence between two chi-square reports.
///
/// The larger reduced chi-square goes in the numerator. A zero denominator
/// chi-square yields `p_value = 0` with the degenerate flag set.
pub fn equivalence_test<F: Scalar>(
    report_a: &TestReport<F>,
    report_b: &TestReport<F>,
) -> Result<EquivalenceResult<F>> {
    if report_a.dof == 0 || report_b.dof == 0 {
        return Err(Error::validation("both reports need dof >= 1"));
    }
    let ra = report_a.total_chi_sq / F::of_usize(report_a.dof);
    let rb = report_b.total_chi_sq / F::of_usize(report_b.dof);
    let (num, den, d_num, d_den) = if ra >= rb {
        (ra, rb, report_a.dof, report_b.dof)
    } else {
        (rb, ra, report_b.dof, report_a.dof)
    };
    if den == F::zero() {
        return Ok(EquivalenceResult {
            f_statistic: F::infinity(),
            dof_numerator: d_num,
            dof_denominator: d_den,
            p_value: F::zero(),
            p_value_two_sided: F::zero(),
            degenerate: true,
        });
    }
    let f = num / den;
    let p = f_sf(f, d_num, d_den)?;
    Ok(EquivalenceResult {
        f_statistic: f,
        dof_numerator: d_num,
        dof_denominator: d_den,
        p_value: p,
        p_value_two_sided: (F::of(2.0) * p).min(F::one()),
        degenerate: false,
    })
}
