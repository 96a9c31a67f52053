//! End-to-end analysis: sampling experiment, isotropic imputation, factor
//! fit, goodness-of-fit tables and the equivalence test, plus the CSV
//! report writers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_factor_curve, FactorFit, FitError, FitOptions};
use crate::inference::{equivalence_test, goodness_of_fit, EquivalenceResult, TestReport};
use crate::models::{factor_asymptote, impute_isotropic, IsotropicModel};
use crate::returns::ReturnPanel;
use crate::sampling::{
    effective_dof, portfolio_variances, run_experiment, summarize_by_size, ExperimentConfig,
    SizeSummary, TrialRecord,
};

/// Options for [`run_full_analysis`]. Test and fit ranges default to
/// `[2, N_max - 1]`: size 1 is exact by construction and size `N_max`
/// pins the isotropic curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub experiment: ExperimentConfig,
    pub fit: FitOptions<f64>,
    pub fit_sizes: Option<(usize, usize)>,
    pub test_sizes: Option<(usize, usize)>,
}

impl AnalysisOptions {
    pub fn new(n_iter: usize, seed: u64) -> Self {
        AnalysisOptions {
            experiment: ExperimentConfig::new(n_iter, seed),
            fit: FitOptions::default(),
            fit_sizes: None,
            test_sizes: None,
        }
    }
}

/// Everything the comparison produces, Table-1 shaped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub summaries: Vec<SizeSummary<f64>>,
    /// `N*` of the full universe, the isotropic anchor.
    pub anchor_n_star: f64,
    pub isotropic: IsotropicModel<f64>,
    pub factor: FactorFit<f64>,
    /// Imputed factor count `K` and the asymptote line slope per unit size.
    pub asymptote: (usize, f64),
    pub iso_test: TestReport<f64>,
    pub factor_test: TestReport<f64>,
    pub equivalence: EquivalenceResult<f64>,
}

/// Run the whole comparison on a return panel.
pub fn run_full_analysis(
    panel: &ReturnPanel<f64>,
    opts: &AnalysisOptions,
) -> Result<(Vec<TrialRecord<f64>>, AnalysisReport)> {
    let n_max = panel.n_assets();
    if n_max < 5 {
        return Err(Error::validation(format!(
            "need at least 5 assets for the model comparison, got {n_max}"
        )));
    }
    let trials = run_experiment(panel, &opts.experiment)?;
    let summaries = summarize_by_size(&trials)?;
    let report = analyze_summaries(panel, &summaries, opts)?;
    Ok((trials, report))
}

/// The analysis stage alone, for pre-computed summaries.
pub fn analyze_summaries(
    panel: &ReturnPanel<f64>,
    summaries: &[SizeSummary<f64>],
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let n_max = panel.n_assets();
    let all: Vec<String> = panel.assets.clone();
    let (v_p, v_i) = portfolio_variances(panel, &all)?;
    let anchor = effective_dof(n_max, v_i, v_p)?;
    let isotropic = impute_isotropic(n_max, anchor)?;
    let asymptote = factor_asymptote(1, n_max, anchor)?;

    let (fit_lo, fit_hi) = opts.fit_sizes.unwrap_or((2, n_max - 1));
    let factor = match fit_factor_curve(summaries, fit_lo..=fit_hi, &opts.fit) {
        Ok(f) => f,
        Err(FitError::Invalid(msg)) => return Err(Error::validation(msg)),
        Err(FitError::NotConverged { best }) => *best,
    };

    let (t_lo, t_hi) = opts.test_sizes.unwrap_or((2, n_max - 1));
    let iso_test = goodness_of_fit(summaries, |n| isotropic.value(n), t_lo..=t_hi, 0)?;
    let factor_test = goodness_of_fit(summaries, |n| factor.curve.value(n), t_lo..=t_hi, 3)?;
    let equivalence = equivalence_test(&factor_test, &iso_test)?;

    Ok(AnalysisReport {
        summaries: summaries.to_vec(),
        anchor_n_star: anchor,
        isotropic,
        factor,
        asymptote,
        iso_test,
        factor_test,
        equivalence,
    })
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

/// Write the per-size comparison table.
///
/// Sizes outside the test range carry model values and errors but blank
/// z and chi-square cells.
pub fn write_report_csv<W: Write>(report: &AnalysisReport, mut w: W) -> Result<()> {
    writeln!(
        w,
        "assets,sample_mean,sample_sd,count,std_err,iso_model,iso_error,iso_z,iso_chisq,\
         factor_model,factor_error,factor_z,factor_chisq"
    )?;
    for s in &report.summaries {
        let iso_row = report.iso_test.per_size.iter().find(|r| r.size == s.size);
        let fac_row = report.factor_test.per_size.iter().find(|r| r.size == s.size);
        let iso_model = report.isotropic.value(s.size)?;
        let fac_model = report.factor.curve.value(s.size)?;
        let cells = |row: Option<&crate::inference::TestRow<f64>>, model: f64| {
            match row {
                Some(r) => format!(
                    "{},{},{},{}",
                    fmt(r.model_value),
                    fmt(r.error),
                    fmt(r.z_score),
                    fmt(r.chi_sq_contribution)
                ),
                None => format!("{},{},,", fmt(model), fmt(s.mean - model)),
            }
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.size,
            fmt(s.mean),
            fmt(s.std_dev),
            s.count,
            fmt(s.std_err),
            cells(iso_row, iso_model),
            cells(fac_row, fac_model),
        )?;
    }
    Ok(())
}

/// Write the fitted curves on a size grid: observed range plus the
/// asymptote line, for plotting.
pub fn write_curves_csv<W: Write>(report: &AnalysisReport, mut w: W) -> Result<()> {
    writeln!(w, "assets,iso_model,factor_model,asymptote")?;
    let (_, slope) = report.asymptote;
    for s in &report.summaries {
        writeln!(
            w,
            "{},{},{},{}",
            s.size,
            fmt(report.isotropic.value(s.size)?),
            fmt(report.factor.curve.value(s.size)?),
            fmt(slope * s.size as f64),
        )?;
    }
    Ok(())
}
