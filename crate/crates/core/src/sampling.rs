//! Random equal-weighted portfolio sampling.
//!
//! Each trial draws a portfolio size uniformly from the configured range,
//! then a uniform subset of that size. Duplicate subsets are dropped after
//! the fact, so the distinct count is itself random. Every trial derives
//! its RNG stream from (seed, iteration index), so parallel and sequential
//! execution produce identical trial lists.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::returns::{sample_variance, ReturnPanel};
use crate::scalar::Scalar;

/// One sampled portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord<F> {
    /// Sorted member asset identifiers.
    pub subset: Vec<String>,
    pub size: usize,
    /// Sample variance of the equal-weighted portfolio series (percent^2).
    pub v_portfolio: F,
    /// Variance expected under independence (percent^2).
    pub v_independent: F,
    /// `size * v_independent / v_portfolio`.
    pub n_star: F,
}

/// Per-portfolio-size aggregate of `n_star`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary<F> {
    pub size: usize,
    pub mean: F,
    /// Sample standard deviation (divisor count-1); 0 when count == 1.
    pub std_dev: F,
    pub count: usize,
    /// `std_dev / sqrt(count)`.
    pub std_err: F,
    /// Set when count == 1 and the dispersion columns are meaningless.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_iter: usize,
    pub seed: u64,
    /// Inclusive size range; defaults to `[1, N_max]`.
    pub size_range: Option<(usize, usize)>,
}

impl ExperimentConfig {
    pub fn new(n_iter: usize, seed: u64) -> Self {
        ExperimentConfig { n_iter, seed, size_range: None }
    }
}

/// `(V_P, V_I)` for an equal-weighted portfolio over `subset`.
pub fn portfolio_variances<F: Scalar>(
    panel: &ReturnPanel<F>,
    subset: &[String],
) -> Result<(F, F)> {
    let mut idx = Vec::with_capacity(subset.len());
    for a in subset {
        idx.push(panel.asset_index(a).ok_or_else(|| Error::MissingAsset(a.clone()))?);
    }
    portfolio_variances_by_index(panel, &idx)
}

fn portfolio_variances_by_index<F: Scalar>(
    panel: &ReturnPanel<F>,
    idx: &[usize],
) -> Result<(F, F)> {
    if idx.is_empty() {
        return Err(Error::validation("subset must be nonempty"));
    }
    let n = F::of_usize(idx.len());
    let t = panel.n_obs();
    let mut port = vec![F::zero(); t];
    for &i in idx {
        for (p, &r) in port.iter_mut().zip(panel.row(i)) {
            *p = *p + r;
        }
    }
    for p in &mut port {
        *p = *p / n;
    }
    let v_p = sample_variance(&port)?;
    let mut sum_var = F::zero();
    for &i in idx {
        sum_var = sum_var + sample_variance(panel.row(i))?;
    }
    let v_i = sum_var / (n * n);
    Ok((v_p, v_i))
}

/// `N* = N * V_I / V_P`.
pub fn effective_dof<F: Scalar>(size: usize, v_independent: F, v_portfolio: F) -> Result<F> {
    if v_portfolio <= F::zero() || v_independent <= F::zero() {
        return Err(Error::validation(format!(
            "variances must be positive: v_independent={v_independent} v_portfolio={v_portfolio}"
        )));
    }
    Ok(F::of_usize(size) * v_independent / v_portfolio)
}

/// Draw a uniform `k`-subset of `0..n` by partial Fisher-Yates, sorted.
fn draw_subset<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut subset = pool[..k].to_vec();
    subset.sort_unstable();
    subset
}

/// Run the sampling experiment: size-first uniform draws, post-hoc dedup.
///
/// Output is deterministic given (panel, config) and contains only distinct
/// subsets, in first-appearance order.
pub fn run_experiment<F: Scalar>(
    panel: &ReturnPanel<F>,
    config: &ExperimentConfig,
) -> Result<Vec<TrialRecord<F>>> {
    let n_max = panel.n_assets();
    if config.n_iter == 0 {
        return Err(Error::validation("n_iter must be at least 1"));
    }
    let (lo, hi) = config.size_range.unwrap_or((1, n_max));
    if lo < 1 || hi > n_max || lo > hi {
        return Err(Error::validation(format!(
            "size range [{lo}, {hi}] invalid for universe of {n_max}"
        )));
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut trials = Vec::new();
    for j in 0..config.n_iter {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(j as u64);
        let k = rng.random_range(lo..=hi);
        let subset = draw_subset(&mut rng, n_max, k);
        if !seen.insert(subset.clone()) {
            continue;
        }
        let (v_p, v_i) = portfolio_variances_by_index(panel, &subset)?;
        trials.push(TrialRecord {
            subset: subset.iter().map(|&i| panel.assets[i].clone()).collect(),
            size: k,
            v_portfolio: v_p,
            v_independent: v_i,
            n_star: effective_dof(k, v_i, v_p)?,
        });
    }
    Ok(trials)
}

/// Aggregate trials into one [`SizeSummary`] per size, sorted by size.
pub fn summarize_by_size<F: Scalar>(trials: &[TrialRecord<F>]) -> Result<Vec<SizeSummary<F>>> {
    if trials.is_empty() {
        return Err(Error::validation("no trials to summarize"));
    }
    let mut by_size: std::collections::BTreeMap<usize, Vec<F>> = Default::default();
    for t in trials {
        by_size.entry(t.size).or_default().push(t.n_star);
    }
    Ok(by_size
        .into_iter()
        .map(|(size, v)| {
            let count = v.len();
            let mean = v.iter().copied().sum::<F>() / F::of_usize(count);
            let (std_dev, degenerate) = if count > 1 {
                (sample_variance(&v).expect("count > 1").sqrt(), false)
            } else {
                (F::zero(), true)
            };
            let std_err = std_dev / F::of_usize(count).sqrt();
            SizeSummary { size, mean, std_dev, count, std_err, degenerate }
        })
        .collect())
}

/// Write trials as CSV: `subset,size,v_independent,v_portfolio,n_star`,
/// subset members semicolon-joined.
pub fn write_trials_csv<F: Scalar, W: Write>(trials: &[TrialRecord<F>], mut w: W) -> Result<()> {
    writeln!(w, "subset,size,v_independent,v_portfolio,n_star")?;
    for t in trials {
        writeln!(
            w,
            "{},{},{},{},{}",
            t.subset.join(";"),
            t.size,
            t.v_independent,
            t.v_portfolio,
            t.n_star
        )?;
    }
    Ok(())
}
