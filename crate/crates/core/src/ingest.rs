//! File ingestion (quote snapshots, daily bars), universe filtering, panel
//! assembly and the yearly stability report.
//!
//! This layer is concrete in `f64`; parsing precision and the panel CSV
//! round-trip are defined in terms of `f64` shortest-round-trip formatting.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::returns::{is_crossed, mid_price, sample_variance, to_returns, PriceSeries, ReturnPanel};
use crate::sampling::effective_dof;

/// One row of the snapshot capture file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub timestamp: DateTime<Utc>,
    pub symbol: String,
    pub bid: f64,
    pub ask: f64,
}

/// Universe filter rules.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UniverseConfig {
    /// When present, only these symbols are considered.
    #[serde(default)]
    pub include: Option<Vec<String>>,
    /// Symbols dropped, each with a reason recorded verbatim.
    #[serde(default)]
    pub exclude: Vec<ExcludeRule>,
    /// Drop the first 365 calendar days after each symbol's first observation.
    #[serde(default)]
    pub trim_first_year: bool,
    /// Minimum observations a symbol must retain to stay in the universe.
    #[serde(default)]
    pub min_history_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludeRule {
    pub symbol: String,
    pub reason: String,
}

impl UniverseConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(inc) = &self.include {
            for rule in &self.exclude {
                if inc.contains(&rule.symbol) {
                    return Err(Error::validation(format!(
                        "symbol {} appears in both include and exclude",
                        rule.symbol
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Counters accumulated while parsing price files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    /// Quotes with bid > ask; the mid is still used.
    pub crossed_quotes: usize,
    /// Duplicate keys where the last occurrence won.
    pub duplicates: usize,
    /// Rows skipped (non-positive close in daily bars).
    pub skipped_rows: usize,
    pub empty_input: bool,
}

/// Table-2-style statistics for one calendar year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearlyStats {
    pub year: i32,
    pub per_asset_variance: BTreeMap<String, f64>,
    pub v_portfolio: f64,
    pub v_independent: f64,
    pub n_max: usize,
    pub n_star: f64,
    pub rho: f64,
    pub n_obs: usize,
    /// Fewer than 30 return observations in the year.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub years: Vec<i32>,
    pub mean: f64,
    pub std_dev: f64,
    pub std_err: f64,
    /// Single-year input: dispersion is undefined.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearlyReport {
    pub per_year: Vec<YearlyStats>,
    pub stability: StabilitySummary,
}

/// Result of panel assembly, with the filter decisions that produced it.
#[derive(Debug, Clone)]
pub struct PanelBuild {
    pub panel: ReturnPanel<f64>,
    /// (symbol, reason) for every symbol dropped.
    pub dropped: Vec<(String, String)>,
}

fn line_of(pos: Option<&csv::Position>) -> usize {
    pos.map(|p| p.line() as usize).unwrap_or(0)
}

/// Parse a quote-snapshot CSV (`timestamp,symbol,bid,ask`, RFC 3339 UTC)
/// into daily mid-price series: per symbol and UTC date, the record with
/// the latest timestamp wins.
pub fn parse_quote_snapshots<R: Read>(
    reader: R,
) -> Result<(BTreeMap<String, PriceSeries<f64>>, ParseDiagnostics)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr.headers()?;
        let expect = ["timestamp", "symbol", "bid", "ask"];
        if headers.iter().collect::<Vec<_>>() != expect {
            return Err(Error::Parse {
                line: 1,
                message: format!("snapshot header must be {}", expect.join(",")),
            });
        }
    }
    let mut diag = ParseDiagnostics::default();
    // (symbol, date) -> (timestamp, mid)
    let mut latest: BTreeMap<(String, NaiveDate), (DateTime<Utc>, f64)> = BTreeMap::new();
    let mut seen_ts: BTreeSet<(String, DateTime<Utc>)> = BTreeSet::new();
    let mut any = false;
    for rec in rdr.records() {
        let rec = rec?;
        any = true;
        let line = line_of(rec.position());
        let parse_err = |message: String| Error::Parse { line, message };
        let ts: DateTime<Utc> = rec
            .get(0)
            .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
            .map(|t| t.with_timezone(&Utc))
            .ok_or_else(|| parse_err(format!("bad RFC 3339 timestamp: {:?}", rec.get(0))))?;
        let symbol = rec
            .get(1)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| parse_err("missing symbol".into()))?
            .to_string();
        let bid: f64 = rec
            .get(2)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(format!("bad bid: {:?}", rec.get(2))))?;
        let ask: f64 = rec
            .get(3)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(format!("bad ask: {:?}", rec.get(3))))?;
        let mid = mid_price(bid, ask).map_err(|e| parse_err(e.to_string()))?;
        if is_crossed(bid, ask) {
            diag.crossed_quotes += 1;
        }
        if !seen_ts.insert((symbol.clone(), ts)) {
            diag.duplicates += 1;
        }
        let key = (symbol, ts.date_naive());
        match latest.get(&key) {
            // last occurrence wins on exact timestamp ties as well
            Some((prev, _)) if *prev > ts => {}
            _ => {
                latest.insert(key, (ts, mid));
            }
        }
    }
    diag.empty_input = !any;
    let mut by_symbol: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for ((symbol, date), (_, mid)) in latest {
        by_symbol.entry(symbol).or_default().push((date, mid));
    }
    let mut out = BTreeMap::new();
    for (symbol, obs) in by_symbol {
        out.insert(symbol.clone(), PriceSeries::new(symbol, obs)?);
    }
    Ok((out, diag))
}

/// Parse a daily-bar CSV (`date,symbol,close`, date `YYYY-MM-DD`).
pub fn parse_daily_bars<R: Read>(
    reader: R,
) -> Result<(BTreeMap<String, PriceSeries<f64>>, ParseDiagnostics)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr.headers()?;
        let expect = ["date", "symbol", "close"];
        if headers.iter().collect::<Vec<_>>() != expect {
            return Err(Error::Parse {
                line: 1,
                message: format!("daily-bar header must be {}", expect.join(",")),
            });
        }
    }
    let mut diag = ParseDiagnostics::default();
    let mut by_symbol: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    let mut any = false;
    for rec in rdr.records() {
        let rec = rec?;
        any = true;
        let line = line_of(rec.position());
        let date = rec
            .get(0)
            .and_then(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok())
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("bad date: {:?}", rec.get(0)),
            })?;
        let symbol = rec
            .get(1)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Parse { line, message: "missing symbol".into() })?
            .to_string();
        let close: f64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
            line,
            message: format!("bad close: {:?}", rec.get(2)),
        })?;
        if !close.is_finite() || close <= 0.0 {
            diag.skipped_rows += 1;
            continue;
        }
        if by_symbol.entry(symbol).or_default().insert(date, close).is_some() {
            diag.duplicates += 1;
        }
    }
    diag.empty_input = !any;
    let mut out = BTreeMap::new();
    for (symbol, prices) in by_symbol {
        out.insert(
            symbol.clone(),
            PriceSeries::new(symbol, prices.into_iter().collect())?,
        );
    }
    Ok((out, diag))
}

/// Apply the universe filters to a series map; returns retained series and
/// the drop log.
fn filter_universe(
    series: &BTreeMap<String, PriceSeries<f64>>,
    config: &UniverseConfig,
) -> Result<(BTreeMap<String, PriceSeries<f64>>, Vec<(String, String)>)> {
    config.validate()?;
    let mut dropped = Vec::new();
    let mut retained = BTreeMap::new();
    for (symbol, s) in series {
        if let Some(inc) = &config.include {
            if !inc.contains(symbol) {
                dropped.push((symbol.clone(), "not in include list".to_string()));
                continue;
            }
        }
        if let Some(rule) = config.exclude.iter().find(|r| &r.symbol == symbol) {
            dropped.push((symbol.clone(), rule.reason.clone()));
            continue;
        }
        let mut s = s.clone();
        if config.trim_first_year {
            if let Some(first) = s.first_date() {
                let cutoff = first + chrono::Days::new(365);
                s.observations.retain(|(d, _)| *d >= cutoff);
            }
        }
        if s.len() < config.min_history_days.max(2) {
            dropped.push((
                symbol.clone(),
                format!("only {} observations after filtering", s.len()),
            ));
            continue;
        }
        retained.insert(symbol.clone(), s);
    }
    Ok((retained, dropped))
}

/// Assemble a complete-case return panel: only dates where every retained
/// symbol has a price survive, and returns run between consecutive
/// surviving dates. No imputation ever occurs.
pub fn build_panel(
    series: &BTreeMap<String, PriceSeries<f64>>,
    config: &UniverseConfig,
    date_range: Option<(NaiveDate, NaiveDate)>,
) -> Result<PanelBuild> {
    let (retained, dropped) = filter_universe(series, config)?;
    if retained.is_empty() {
        return Err(Error::validation("no symbols survive universe filtering"));
    }
    let mut common: Option<BTreeSet<NaiveDate>> = None;
    for s in retained.values() {
        let dates: BTreeSet<NaiveDate> = s
            .observations
            .iter()
            .map(|(d, _)| *d)
            .filter(|d| date_range.map_or(true, |(lo, hi)| *d >= lo && *d <= hi))
            .collect();
        common = Some(match common {
            None => dates,
            Some(c) => c.intersection(&dates).copied().collect(),
        });
    }
    let common = common.unwrap();
    if common.len() < 2 {
        let coverage: Vec<String> = retained
            .values()
            .map(|s| {
                format!(
                    "{}: {} obs [{:?}..{:?}]",
                    s.asset,
                    s.len(),
                    s.first_date(),
                    s.observations.last().map(|(d, _)| *d)
                )
            })
            .collect();
        return Err(Error::validation(format!(
            "date intersection has {} dates, need >= 2; coverage: {}",
            common.len(),
            coverage.join("; ")
        )));
    }
    let mut assets = Vec::new();
    let mut rows = Vec::new();
    let mut dates = Vec::new();
    for (symbol, s) in &retained {
        let obs: Vec<(NaiveDate, f64)> = s
            .observations
            .iter()
            .filter(|(d, _)| common.contains(d))
            .copied()
            .collect();
        let rets = to_returns(&PriceSeries::new(symbol.clone(), obs)?)?;
        if dates.is_empty() {
            dates = rets.iter().map(|(d, _)| *d).collect();
        }
        assets.push(symbol.clone());
        rows.push(rets.into_iter().map(|(_, r)| r).collect());
    }
    Ok(PanelBuild { panel: ReturnPanel::new(assets, dates, rows)?, dropped })
}

/// Per-year full-universe statistics (Table 2) plus the stability summary
/// of `N*` over `summary_years` (default: all but the last year present).
pub fn yearly_report(
    series: &BTreeMap<String, PriceSeries<f64>>,
    config: &UniverseConfig,
    summary_years: Option<&[i32]>,
) -> Result<YearlyReport> {
    let (retained, _) = filter_universe(series, config)?;
    if retained.is_empty() {
        return Err(Error::validation("no symbols survive universe filtering"));
    }
    // per symbol: return date -> return, over its own consecutive dates
    let mut sym_returns: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    let mut years: BTreeSet<i32> = BTreeSet::new();
    for (symbol, s) in &retained {
        if s.len() < 2 {
            continue;
        }
        let rets = to_returns(s)?;
        for (d, _) in &rets {
            years.insert(d.year());
        }
        sym_returns.insert(symbol.clone(), rets.into_iter().collect());
    }
    let mut per_year = Vec::new();
    for year in years {
        // complete-case within the year across symbols active that year
        let active: Vec<&String> = sym_returns
            .iter()
            .filter(|(_, m)| m.keys().any(|d| d.year() == year))
            .map(|(s, _)| s)
            .collect();
        let mut common: Option<BTreeSet<NaiveDate>> = None;
        for sym in &active {
            let dates: BTreeSet<NaiveDate> =
                sym_returns[*sym].keys().filter(|d| d.year() == year).copied().collect();
            common = Some(match common {
                None => dates,
                Some(c) => c.intersection(&dates).copied().collect(),
            });
        }
        let common = common.unwrap_or_default();
        if common.len() < 2 {
            continue;
        }
        let n_max = active.len();
        let mut per_asset_variance = BTreeMap::new();
        let mut port: Vec<f64> = vec![0.0; common.len()];
        let mut sum_var = 0.0;
        for sym in &active {
            let series: Vec<f64> = common.iter().map(|d| sym_returns[*sym][d]).collect();
            let v = sample_variance(&series)?;
            per_asset_variance.insert((*sym).clone(), v);
            sum_var += v;
            for (p, r) in port.iter_mut().zip(&series) {
                *p += r;
            }
        }
        for p in &mut port {
            *p /= n_max as f64;
        }
        let v_portfolio = sample_variance(&port)?;
        let v_independent = sum_var / (n_max * n_max) as f64;
        let n_star = effective_dof(n_max, v_independent, v_portfolio)?;
        let rho = if n_max > 1 {
            (n_max as f64 / n_star - 1.0) / (n_max as f64 - 1.0)
        } else {
            0.0
        };
        per_year.push(YearlyStats {
            year,
            per_asset_variance,
            v_portfolio,
            v_independent,
            n_max,
            n_star,
            rho,
            n_obs: common.len(),
            flagged: common.len() < 30,
        });
    }
    if per_year.is_empty() {
        return Err(Error::validation("no year has enough overlapping observations"));
    }
    let default_years: Vec<i32> = if per_year.len() > 1 {
        per_year[..per_year.len() - 1].iter().map(|y| y.year).collect()
    } else {
        vec![per_year[0].year]
    };
    let years_used: Vec<i32> = summary_years.map(|y| y.to_vec()).unwrap_or(default_years);
    let selected: Vec<f64> = per_year
        .iter()
        .filter(|y| years_used.contains(&y.year))
        .map(|y| y.n_star)
        .collect();
    if selected.is_empty() {
        return Err(Error::validation("stability summary selects no years"));
    }
    let stability = stability_summary(&years_used, &selected);
    Ok(YearlyReport { per_year, stability })
}

pub fn stability_summary(years: &[i32], n_stars: &[f64]) -> StabilitySummary {
    let mean = n_stars.iter().sum::<f64>() / n_stars.len() as f64;
    if n_stars.len() < 2 {
        return StabilitySummary {
            years: years.to_vec(),
            mean,
            std_dev: 0.0,
            std_err: 0.0,
            degenerate: true,
        };
    }
    let std_dev = sample_variance(n_stars).expect("len >= 2").sqrt();
    StabilitySummary {
        years: years.to_vec(),
        mean,
        std_dev,
        std_err: std_dev / (n_stars.len() as f64).sqrt(),
        degenerate: false,
    }
}

/// Write a panel as CSV: `date,<symbol1>,<symbol2>,...`, cells in percent.
pub fn write_panel_csv<W: Write>(panel: &ReturnPanel<f64>, mut w: W) -> Result<()> {
    writeln!(w, "date,{}", panel.assets.join(","))?;
    for (t, date) in panel.dates.iter().enumerate() {
        write!(w, "{date}")?;
        for row in &panel.returns {
            write!(w, ",{}", row[t])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Read a panel CSV produced by [`write_panel_csv`] (or the generators).
pub fn read_panel_csv<R: Read>(reader: R) -> Result<ReturnPanel<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let assets: Vec<String> = {
        let headers = rdr.headers()?;
        if headers.get(0) != Some("date") {
            return Err(Error::Parse {
                line: 1,
                message: "panel header must start with 'date'".into(),
            });
        }
        headers.iter().skip(1).map(|s| s.to_string()).collect()
    };
    if assets.is_empty() {
        return Err(Error::Parse { line: 1, message: "panel has no asset columns".into() });
    }
    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); assets.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(rec.position());
        if rec.len() != assets.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} cells, got {}", assets.len() + 1, rec.len()),
            });
        }
        let date = rec
            .get(0)
            .and_then(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok())
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("bad date: {:?}", rec.get(0)),
            })?;
        dates.push(date);
        for (i, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad return cell: {cell:?}"),
            })?;
            rows[i].push(v);
        }
    }
    ReturnPanel::new(assets, dates, rows)
}
