//! `nstar`: measure the effective-degrees-of-freedom signature of an asset
//! universe and compare correlation models against it.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 I/O error.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use nstar_core::error::{Error, Result};
use nstar_core::fit::FitOptions;
use nstar_core::ingest::{
    build_panel, parse_daily_bars, parse_quote_snapshots, read_panel_csv, write_panel_csv,
    yearly_report, UniverseConfig,
};
use nstar_core::pipeline::{
    run_full_analysis, write_curves_csv, write_report_csv, AnalysisOptions,
};
use nstar_core::returns::pairwise_correlation_census;
use nstar_core::sampling::write_trials_csv;
use nstar_core::synth::{gen_factor, gen_isotropic, FactorSpec, IsotropicSpec, Volatility};
use nstar_core::Panel;

#[derive(Parser)]
#[command(name = "nstar", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pairwise correlation census of a return panel
    Corr {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
        /// Histogram bin count over [-1, 1]
        #[arg(long, default_value_t = 40)]
        bins: usize,
    },
    /// Random-portfolio sampling experiment; emits per-trial records
    Experiment {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
        /// Trial count (overrides config)
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Fit the factor curve and impute the isotropic curve
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Goodness-of-fit tables, p-values and the model equivalence test
    Test {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Year-stratified full-universe statistics and the stability summary
    ByYear {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: InputArgs,
        /// Years for the stability summary, e.g. 2018-2023
        #[arg(long)]
        years: Option<String>,
    },
    /// Generate a synthetic return panel
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Model::Isotropic)]
        model: Model,
        #[arg(long, default_value_t = 14)]
        assets: usize,
        #[arg(long, default_value_t = 125)]
        t_obs: usize,
        /// Common pairwise correlation (isotropic model)
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Daily volatility in percent (isotropic model)
        #[arg(long, default_value_t = 3.0)]
        sigma: f64,
        /// Factor count (factor model)
        #[arg(long, default_value_t = 3)]
        k_factors: usize,
        /// Loading of each asset on its own factor (factor model)
        #[arg(long, default_value_t = 3.0)]
        loading: f64,
        /// Residual volatility in percent (factor model)
        #[arg(long, default_value_t = 1.0)]
        residual_sd: f64,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum Model {
    Isotropic,
    Factor,
}

#[derive(Args)]
struct Common {
    /// TOML config file with universe/experiment/fit/test sections
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = ".")]
    output: PathBuf,
}

#[derive(Args)]
struct InputArgs {
    /// Pre-built panel CSV (date,<symbol>,...)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Quote snapshot CSV (timestamp,symbol,bid,ask)
    #[arg(long)]
    snapshots: Option<PathBuf>,
    /// Daily bar CSV (date,symbol,close)
    #[arg(long)]
    bars: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    universe: UniverseConfig,
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    fit: FitSection,
    #[serde(default)]
    test: TestSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    #[serde(default = "default_iters")]
    iters: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    size_range: Option<(usize, usize)>,
}

fn default_iters() -> usize {
    1000
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection { iters: default_iters(), seed: 0, size_range: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitSection {
    #[serde(default)]
    sizes: Option<(usize, usize)>,
    #[serde(default = "default_fit_iterations")]
    max_iterations: usize,
    #[serde(default = "default_tolerance")]
    tolerance: f64,
    #[serde(default)]
    weighted: bool,
}

fn default_fit_iterations() -> usize {
    500
}

fn default_tolerance() -> f64 {
    1e-10
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            sizes: None,
            max_iterations: default_fit_iterations(),
            tolerance: default_tolerance(),
            weighted: false,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestSection {
    #[serde(default)]
    included_sizes: Option<(usize, usize)>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Corr { common, input, bins } => cmd_corr(&common, &input, bins),
        Command::Experiment { common, input, iters } => cmd_experiment(&common, &input, iters),
        Command::Fit { common, input, iters } => cmd_analysis(&common, &input, iters, false),
        Command::Test { common, input, iters } => cmd_analysis(&common, &input, iters, true),
        Command::ByYear { common, input, years } => cmd_by_year(&common, &input, years.as_deref()),
        Command::Simulate {
            common,
            model,
            assets,
            t_obs,
            rho,
            sigma,
            k_factors,
            loading,
            residual_sd,
        } => cmd_simulate(&common, model, assets, t_obs, rho, sigma, k_factors, loading, residual_sd),
    }
}

fn load_config(common: &Common) -> Result<FileConfig> {
    let Some(path) = &common.config else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)?;
    let cfg: FileConfig =
        toml::from_str(&text).map_err(|e| Error::validation(format!("config parse: {e}")))?;
    cfg.universe.validate()?;
    Ok(cfg)
}

fn load_panel(input: &InputArgs, cfg: &FileConfig) -> Result<Panel> {
    match (&input.input, &input.snapshots, &input.bars) {
        (Some(p), None, None) => read_panel_csv(File::open(p)?),
        (None, Some(p), None) => {
            let (series, diag) = parse_quote_snapshots(File::open(p)?)?;
            if diag.crossed_quotes > 0 || diag.duplicates > 0 {
                eprintln!(
                    "warning: {} crossed quotes, {} duplicate timestamps",
                    diag.crossed_quotes, diag.duplicates
                );
            }
            Ok(build_panel(&series, &cfg.universe, None)?.panel)
        }
        (None, None, Some(p)) => {
            let (series, diag) = parse_daily_bars(File::open(p)?)?;
            if diag.skipped_rows > 0 {
                eprintln!("warning: {} rows with non-positive close skipped", diag.skipped_rows);
            }
            Ok(build_panel(&series, &cfg.universe, None)?.panel)
        }
        _ => Err(Error::validation("provide exactly one of --input, --snapshots, --bars")),
    }
}

fn analysis_options(cfg: &FileConfig, common: &Common, iters: Option<usize>) -> AnalysisOptions {
    let mut opts = AnalysisOptions::new(
        iters.unwrap_or(cfg.experiment.iters),
        common.seed.unwrap_or(cfg.experiment.seed),
    );
    opts.experiment.size_range = cfg.experiment.size_range;
    opts.fit = FitOptions {
        weighted: cfg.fit.weighted,
        max_iterations: cfg.fit.max_iterations,
        tolerance: cfg.fit.tolerance,
    };
    opts.fit_sizes = cfg.fit.sizes;
    opts.test_sizes = cfg.test.included_sizes;
    opts
}

fn out_file(dir: &Path, name: &str) -> Result<File> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let f = File::create(&path)?;
    println!("wrote {}", path.display());
    Ok(f)
}

fn cmd_corr(common: &Common, input: &InputArgs, bins: usize) -> Result<()> {
    let cfg = load_config(common)?;
    let panel = load_panel(input, &cfg)?;
    let census = pairwise_correlation_census(&panel, bins)?;

    let mut f = out_file(&common.output, "correlations.csv")?;
    writeln!(f, "asset_a,asset_b,rho")?;
    for (a, b, rho) in &census.pairs {
        writeln!(f, "{a},{b},{rho:.6}")?;
    }
    let mut f = out_file(&common.output, "rho_histogram.csv")?;
    writeln!(f, "bin_low,bin_high,count")?;
    for (lo, hi, count) in &census.histogram {
        writeln!(f, "{lo:.4},{hi:.4},{count}")?;
    }
    let mut f = out_file(&common.output, "census.json")?;
    let summary = serde_json::json!({
        "n_pairs": census.pairs.len(),
        "mean_rho": census.mean_rho,
        "fisher_se": census.fisher_se,
    });
    writeln!(f, "{}", serde_json::to_string_pretty(&summary).expect("serializable"))?;
    println!(
        "{} pairs, mean rho {:.4} (Fisher se {:.4})",
        census.pairs.len(),
        census.mean_rho,
        census.fisher_se
    );
    Ok(())
}

fn cmd_experiment(common: &Common, input: &InputArgs, iters: Option<usize>) -> Result<()> {
    let cfg = load_config(common)?;
    let panel = load_panel(input, &cfg)?;
    let opts = analysis_options(&cfg, common, iters);
    let trials = nstar_core::sampling::run_experiment(&panel, &opts.experiment)?;

    let f = out_file(&common.output, "trials.csv")?;
    write_trials_csv(&trials, f)?;
    let mut f = out_file(&common.output, "nstar_scatter.csv")?;
    writeln!(f, "assets,n_star")?;
    for t in &trials {
        writeln!(f, "{},{}", t.size, t.n_star)?;
    }
    println!("{} distinct portfolios from {} trials", trials.len(), opts.experiment.n_iter);
    Ok(())
}

fn cmd_analysis(
    common: &Common,
    input: &InputArgs,
    iters: Option<usize>,
    full_test: bool,
) -> Result<()> {
    let cfg = load_config(common)?;
    let panel = load_panel(input, &cfg)?;
    let opts = analysis_options(&cfg, common, iters);
    let (_, report) = run_full_analysis(&panel, &opts)?;

    let f = out_file(&common.output, "curves.csv")?;
    write_curves_csv(&report, f)?;
    let mut f = out_file(&common.output, "fit.json")?;
    let fit_summary = serde_json::json!({
        "anchor_n_star": report.anchor_n_star,
        "isotropic": report.isotropic,
        "factor": report.factor,
        "imputed_k": report.asymptote.0,
    });
    writeln!(f, "{}", serde_json::to_string_pretty(&fit_summary).expect("serializable"))?;
    println!(
        "anchor N*({}) = {:.4}, rho = {:.2}%, factor a/d = {:.4}, c/d = {:.4}, K = {}",
        panel.n_assets(),
        report.anchor_n_star,
        100.0 * report.isotropic.rho,
        report.factor.ratio_a(),
        report.factor.ratio_c(),
        report.asymptote.0
    );
    if !full_test {
        return Ok(());
    }

    let f = out_file(&common.output, "report.csv")?;
    write_report_csv(&report, f)?;
    let mut f = out_file(&common.output, "test.json")?;
    writeln!(f, "{}", serde_json::to_string_pretty(&report).expect("serializable"))?;
    println!(
        "iso chi2 = {:.2} ({} dof, p = {:.4}); factor chi2 = {:.2} ({} dof, p = {:.3e}); \
         F = {:.2}, p = {:.3e}",
        report.iso_test.total_chi_sq,
        report.iso_test.dof,
        report.iso_test.p_value,
        report.factor_test.total_chi_sq,
        report.factor_test.dof,
        report.factor_test.p_value,
        report.equivalence.f_statistic,
        report.equivalence.p_value,
    );
    Ok(())
}

fn parse_years(spec: &str) -> Result<Vec<i32>> {
    let (lo, hi) = spec
        .split_once('-')
        .ok_or_else(|| Error::validation(format!("years must look like 2018-2023, got {spec}")))?;
    let lo: i32 = lo.trim().parse().map_err(|_| Error::validation(format!("bad year {lo}")))?;
    let hi: i32 = hi.trim().parse().map_err(|_| Error::validation(format!("bad year {hi}")))?;
    if lo > hi {
        return Err(Error::validation(format!("year range {lo}-{hi} is reversed")));
    }
    Ok((lo..=hi).collect())
}

fn cmd_by_year(common: &Common, input: &InputArgs, years: Option<&str>) -> Result<()> {
    let cfg = load_config(common)?;
    let series = match (&input.snapshots, &input.bars) {
        (Some(p), None) => parse_quote_snapshots(File::open(p)?)?.0,
        (None, Some(p)) => parse_daily_bars(File::open(p)?)?.0,
        _ => return Err(Error::validation("by-year needs exactly one of --snapshots, --bars")),
    };
    let years = years.map(parse_years).transpose()?;
    let report = yearly_report(&series, &cfg.universe, years.as_deref())?;

    let mut f = out_file(&common.output, "yearly_stats.csv")?;
    writeln!(f, "year,n_max,n_obs,v_portfolio,v_independent,n_star,rho,flagged")?;
    for y in &report.per_year {
        writeln!(
            f,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            y.year, y.n_max, y.n_obs, y.v_portfolio, y.v_independent, y.n_star, y.rho, y.flagged
        )?;
    }
    let mut f = out_file(&common.output, "yearly_variances.csv")?;
    writeln!(f, "year,symbol,variance")?;
    for y in &report.per_year {
        for (symbol, v) in &y.per_asset_variance {
            writeln!(f, "{},{symbol},{v:.6}", y.year)?;
        }
    }
    let mut f = out_file(&common.output, "stability.json")?;
    writeln!(f, "{}", serde_json::to_string_pretty(&report.stability).expect("serializable"))?;
    println!(
        "{} years; stability over {:?}: mean {:.4}, std dev {:.4}, std err {:.4}",
        report.per_year.len(),
        report.stability.years,
        report.stability.mean,
        report.stability.std_dev,
        report.stability.std_err
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    common: &Common,
    model: Model,
    assets: usize,
    t_obs: usize,
    rho: f64,
    sigma: f64,
    k_factors: usize,
    loading: f64,
    residual_sd: f64,
) -> Result<()> {
    let seed = common.seed.unwrap_or(0);
    let panel = match model {
        Model::Isotropic => {
            let spec = IsotropicSpec {
                n_assets: assets,
                t_obs,
                sigma: Volatility::Homoskedastic(sigma),
                rho,
            };
            gen_isotropic(&spec, seed)?
        }
        Model::Factor => {
            if k_factors == 0 || k_factors > assets {
                return Err(Error::validation(format!(
                    "k_factors {k_factors} invalid for {assets} assets"
                )));
            }
            let mut loadings = vec![vec![0.0; k_factors]; assets];
            for (i, row) in loadings.iter_mut().enumerate() {
                row[i % k_factors] = loading;
            }
            let spec = FactorSpec {
                mu: vec![0.0; assets],
                loadings,
                residual_sd: vec![residual_sd; assets],
                k_factors,
                t_obs,
            };
            gen_factor(&spec, seed)?
        }
    };
    let f = out_file(&common.output, "panel.csv")?;
    write_panel_csv(&panel, f)?;
    println!("{} assets x {} returns", panel.n_assets(), panel.n_obs());
    Ok(())
}
