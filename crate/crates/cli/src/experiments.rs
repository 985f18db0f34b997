//! The experiments behind each subcommand. Every function writes its
//! artifacts into `out` and also returns the numbers it wrote.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use covshift_core::dre::{estimate_density_ratio, truncation_exponent, DensityRatioEstimate};
use covshift_core::filters::{check_filter_conditions, linear_grid, log_grid, FilterCheckReport};
use covshift_core::metrics::{
    aggregate_by, excess_target_risk, fit_loglog_slope, l2_error_on, LogLogFit, ReplicationRecord,
    Summary,
};
use covshift_core::regression::{
    empirical_operator_norm, fit_iw_spectral, sample_size_diagnostic, schedule_lambda,
    select_exponent_s, LabeledSample, PointwiseWeights, SampleSizeInputs, SampleSizeReport,
    UnitWeights, WeightFunction,
};
use covshift_core::scenarios::Domain;
use covshift_core::{FilterFamily, FilterSpec, Points, ScenarioSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, WeightSource};
use crate::plot::{Plot, Series, Style};

/// Seed of the Monte-Carlo evaluation sample of a replication, disjoint from
/// the seed that drew its training data.
pub fn mc_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Seed of replication `rep`.
pub fn replication_seed(config: &ExperimentConfig, rep: usize) -> u64 {
    config.seed_base.wrapping_add(rep as u64)
}

fn pool(config: &ExperimentConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers())
        .build()
        .context("building worker pool")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rate-plot guide through `(ns[0], anchor)` with the given slope.
fn guide(ns: &[f64], anchor: f64, slope: f64) -> Vec<f64> {
    ns.iter().map(|n| anchor * (n / ns[0]).powf(slope)).collect()
}

// ---------------------------------------------------------------- filters

pub const CHECK_LAMBDAS: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, Serialize)]
pub struct FilterCheckRow {
    pub family: FilterFamily,
    pub tau: f64,
    pub e: f64,
    pub f: f64,
    pub passes: bool,
    pub worst_margin: f64,
    pub witness_condition: Option<String>,
    pub witness_lam: Option<f64>,
    pub witness_c: Option<f64>,
    pub witness_t: Option<f64>,
    pub witness_lhs: Option<f64>,
    pub witness_rhs: Option<f64>,
}

/// Grid check of one declared filter: `t` in `[1e-8, 1]` (200 log-spaced
/// points), 50 values of `c` on `[0, 1]` and 50 on `[0, tau]`.
pub fn check_declared(spec: &FilterSpec) -> FilterCheckReport {
    let t_grid = log_grid(1e-8, 1.0, 200);
    let mut c_grid = linear_grid(0.0, 1.0, 50);
    c_grid.extend(linear_grid(0.0, spec.tau, 50));
    check_filter_conditions(spec, &CHECK_LAMBDAS, &c_grid, &t_grid)
}

pub fn check_filters(config: &ExperimentConfig, out: &Path) -> Result<Vec<FilterCheckRow>> {
    let mut rows = Vec::new();
    for family in FilterFamily::ALL {
        let spec = if family == config.filter.family {
            config.filter.spec(1.0)?
        } else {
            FilterSpec::new(family, 1.0)?
        };
        let report = check_declared(&spec);
        let w = report.witness;
        rows.push(FilterCheckRow {
            family,
            tau: spec.tau,
            e: spec.e,
            f: spec.f,
            passes: report.passes,
            worst_margin: report.worst_margin,
            witness_condition: w.map(|w| format!("{:?}", w.condition).to_lowercase()),
            witness_lam: w.map(|w| w.lam),
            witness_c: w.map(|w| w.c),
            witness_t: w.map(|w| w.t),
            witness_lhs: w.map(|w| w.lhs),
            witness_rhs: w.map(|w| w.rhs),
        });
    }
    write_rows(&out.join("check_filters.csv"), &rows)?;
    Ok(rows)
}

// ---------------------------------------------------------------- figure 1

#[derive(Debug, Clone)]
pub struct CurveTable {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Plotting grid: `(0, 1]` without the singular endpoint, or `[-3, 5]`.
pub fn display_grid(scenario: &ScenarioSpec, n: usize) -> Vec<f64> {
    match scenario.domain() {
        Domain::UnitInterval => (1..=n).map(|i| i as f64 / n as f64).collect(),
        Domain::RealLine => linear_grid(-3.0, 5.0, n),
    }
}

pub fn figure1(config: &ExperimentConfig, out: &Path) -> Result<CurveTable> {
    let scenario = config.scenario_spec();
    let x = display_grid(&scenario, config.figure1_points);
    let theta = x.iter().map(|&v| scenario.theta(v)).collect::<covshift_core::Result<Vec<_>>>()?;
    let phi = x
        .iter()
        .map(|&v| scenario.phi(config.alpha, v))
        .collect::<covshift_core::Result<Vec<_>>>()?;
    let plot = Plot {
        title: format!("{}: density ratio and relative ratio (alpha = {})", scenario.name(), config.alpha),
        x_label: "x".into(),
        y_label: "ratio".into(),
        log_x: false,
        log_y: false,
        x: x.clone(),
        series: vec![
            Series {
                name: "theta".into(),
                values: theta.clone(),
                style: Style::Line,
            },
            Series {
                name: "phi".into(),
                values: phi.clone(),
                style: Style::Line,
            },
        ],
    };
    plot.write(out, &format!("figure1_{}", scenario.name()))?;
    Ok(CurveTable { x, theta, phi })
}

// ---------------------------------------------------------------- estimate-dre

fn estimate_for(
    config: &ExperimentConfig,
    scenario: &ScenarioSpec,
    n_theta: usize,
    seed: u64,
) -> covshift_core::Result<DensityRatioEstimate> {
    let source = scenario.sample_source(n_theta, seed);
    let target = scenario.sample_target(n_theta, seed);
    estimate_density_ratio(
        &source,
        &target,
        config.alpha,
        &config.kernel(),
        config.filter.family,
        config.filter.tau(),
        config.iota,
        config.m,
        config.factorization(),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct DreCurveRow {
    pub x: f64,
    pub theta: f64,
    pub theta_hat: f64,
    pub phi: f64,
    pub phi_hat: f64,
    pub phi_hat_truncated: f64,
}

#[derive(Debug, Clone)]
pub struct DreCurve {
    pub mu: f64,
    pub d: f64,
    pub rows: Vec<DreCurveRow>,
}

pub fn estimate_dre(config: &ExperimentConfig, out: &Path, n_theta: usize) -> Result<DreCurve> {
    ensure!(n_theta >= 1, "n_theta must be positive");
    let scenario = config.scenario_spec();
    let est = estimate_for(config, &scenario, n_theta, config.seed_base)?;
    let x = display_grid(&scenario, config.figure1_points);
    let values = est.evaluate(&Points::from_scalars(x.clone()))?;
    let rows: Vec<DreCurveRow> = x
        .iter()
        .zip(values)
        .map(|(&x, v)| {
            Ok(DreCurveRow {
                x,
                theta: scenario.theta(x)?,
                theta_hat: v.theta,
                phi: scenario.phi(config.alpha, x)?,
                phi_hat: v.relative,
                phi_hat_truncated: v.relative_truncated,
            })
        })
        .collect::<covshift_core::Result<_>>()?;
    let col = |f: fn(&DreCurveRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let series = [
        ("theta", col(|r| r.theta), Style::Line),
        ("theta_hat", col(|r| r.theta_hat), Style::Dashed),
        ("phi", col(|r| r.phi), Style::Line),
        ("phi_hat", col(|r| r.phi_hat), Style::Dashed),
        ("phi_hat_truncated", col(|r| r.phi_hat_truncated), Style::Dashed),
    ];
    Plot {
        title: format!(
            "{}: estimates from n_theta = {n_theta} (mu = {:.4}, D = {:.3})",
            scenario.name(),
            est.base.mu,
            est.d
        ),
        x_label: "x".into(),
        y_label: "ratio".into(),
        log_x: false,
        log_y: false,
        x,
        series: series
            .into_iter()
            .map(|(name, values, style)| Series {
                name: name.into(),
                values,
                style,
            })
            .collect(),
    }
    .write(out, &format!("estimate_dre_{}", scenario.name()))?;
    Ok(DreCurve {
        mu: est.base.mu,
        d: est.d,
        rows,
    })
}

// ---------------------------------------------------------------- rate-dre

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub guide_slope: f64,
}

impl RateFit {
    fn new(fit: LogLogFit, guide_slope: f64) -> Self {
        Self {
            slope: fit.slope,
            intercept: fit.intercept,
            r2: fit.r2,
            guide_slope,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateDreSummaryRow {
    pub n_theta: usize,
    #[serde(rename = "median_err_phi_rhoR")]
    pub median_err_phi_rho_r: f64,
    #[serde(rename = "iqr_err_phi_rhoR")]
    pub iqr_err_phi_rho_r: f64,
    #[serde(rename = "median_err_theta_rhoS")]
    pub median_err_theta_rho_s: f64,
    #[serde(rename = "iqr_err_theta_rhoS")]
    pub iqr_err_theta_rho_s: f64,
}

#[derive(Debug, Clone)]
pub struct RateDreOutcome {
    pub records: Vec<ReplicationRecord>,
    pub summary: Vec<RateDreSummaryRow>,
    pub phi_fit: RateFit,
    pub theta_fit: RateFit,
}

fn dre_record(
    config: &ExperimentConfig,
    scenario: &ScenarioSpec,
    n_theta: usize,
    seed: u64,
) -> Result<ReplicationRecord> {
    let est = estimate_for(config, scenario, n_theta, seed)?;
    let mc = mc_seed(seed);

    let mix = scenario.sample_mixture(config.alpha, config.n_mc, mc);
    let err_phi = l2_error_on(&est.base.evaluate(&mix)?, &scenario.phi_at(config.alpha, &mix)?)?;

    let src = scenario.sample_source(config.n_mc, mc);
    let err_theta = l2_error_on(&est.theta(&src)?, &scenario.theta_at(&src)?)?;

    Ok(ReplicationRecord {
        scenario: scenario.name().into(),
        n_theta: Some(n_theta),
        n_f: None,
        alpha: config.alpha,
        iota: config.iota,
        m: config.m,
        filter: config.filter.family.name().into(),
        seed,
        err_phi_rho_r: Some(err_phi),
        err_theta_rho_s: Some(err_theta),
        err_f_rho_t: None,
        excess_risk: None,
    })
}

fn medians(summary: &[(usize, Summary)]) -> (Vec<f64>, Vec<f64>) {
    summary.iter().map(|(n, s)| (*n as f64, s.median)).unzip()
}

fn loglog(ns: &[f64], errs: &[f64], guide_slope: f64) -> Result<RateFit> {
    let positive: Vec<(f64, f64)> = ns
        .iter()
        .zip(errs)
        .filter(|(_, e)| **e > 0.0)
        .map(|(n, e)| (*n, *e))
        .collect();
    let (ns, errs): (Vec<f64>, Vec<f64>) = positive.into_iter().unzip();
    Ok(RateFit::new(fit_loglog_slope(&ns, &errs)?, guide_slope))
}

pub fn rate_dre(config: &ExperimentConfig, out: &Path) -> Result<RateDreOutcome> {
    if config.replications < 5 {
        bail!(crate::config::UsageError("rate-dre needs at least 5 replications".into()));
    }
    let scenario = config.scenario_spec();
    let cells: Vec<(usize, usize)> = config
        .n_theta_grid
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |rep| (n, rep)))
        .collect();
    let records = pool(config)?.install(|| {
        cells
            .par_iter()
            .map(|&(n, rep)| {
                let seed = replication_seed(config, rep);
                dre_record(config, &scenario, n, seed)
                    .with_context(|| format!("rate-dre replication n_theta = {n}, seed = {seed}"))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_rows(&out.join("rate_dre.csv"), &records)?;

    let phi = aggregate_by(&records, |r| r.n_theta.unwrap_or(0), |r| r.err_phi_rho_r);
    let theta = aggregate_by(&records, |r| r.n_theta.unwrap_or(0), |r| r.err_theta_rho_s);
    let summary: Vec<RateDreSummaryRow> = phi
        .iter()
        .zip(&theta)
        .map(|((n, p), (_, t))| RateDreSummaryRow {
            n_theta: *n,
            median_err_phi_rho_r: p.median,
            iqr_err_phi_rho_r: p.iqr,
            median_err_theta_rho_s: t.median,
            iqr_err_theta_rho_s: t.iqr,
        })
        .collect();
    write_rows(&out.join("rate_dre_summary.csv"), &summary)?;

    let rate = config.iota / (2.0 * config.iota + 1.0);
    let nu = truncation_exponent(config.iota, config.m)?;
    let (ns, phi_med) = medians(&phi);
    let (_, theta_med) = medians(&theta);
    let phi_fit = loglog(&ns, &phi_med, -rate)?;
    let theta_fit = loglog(&ns, &theta_med, -(rate - 2.0 * nu))?;
    let mut fits = BTreeMap::new();
    fits.insert("err_phi_rhoR", &phi_fit);
    fits.insert("err_theta_rhoS", &theta_fit);
    write_json(&out.join("rate_dre_fit.json"), &fits)?;

    Plot {
        title: format!("{}: density-ratio error rates", scenario.name()),
        x_label: "n_theta".into(),
        y_label: "median L2 error".into(),
        log_x: true,
        log_y: true,
        x: ns.clone(),
        series: vec![
            Series {
                name: "err_phi_rhoR".into(),
                values: phi_med.clone(),
                style: Style::Markers,
            },
            Series {
                name: "guide_phi".into(),
                values: guide(&ns, phi_med[0], phi_fit.guide_slope),
                style: Style::Dashed,
            },
            Series {
                name: "err_theta_rhoS".into(),
                values: theta_med.clone(),
                style: Style::Markers,
            },
            Series {
                name: "guide_theta".into(),
                values: guide(&ns, theta_med[0], theta_fit.guide_slope),
                style: Style::Dashed,
            },
        ],
    }
    .write(out, "rate_dre_plot")?;

    Ok(RateDreOutcome {
        records,
        summary,
        phi_fit,
        theta_fit,
    })
}

// ---------------------------------------------------------------- regression

/// Weight function of a weight source for data drawn in replication `seed`.
enum Weights {
    Unit,
    True(ScenarioSpec),
    Estimated(Box<DensityRatioEstimate>),
}

impl WeightFunction for Weights {
    fn weights(&self, xs: &Points) -> covshift_core::Result<Vec<f64>> {
        match self {
            Weights::Unit => UnitWeights.weights(xs),
            Weights::True(s) => PointwiseWeights(|x: &[f64]| s.theta(x[0])).weights(xs),
            Weights::Estimated(est) => est.weights(xs),
        }
    }
}

fn weights_for(
    config: &ExperimentConfig,
    scenario: &ScenarioSpec,
    source: WeightSource,
    n_theta: usize,
    seed: u64,
) -> covshift_core::Result<Weights> {
    Ok(match source {
        WeightSource::Unit => Weights::Unit,
        WeightSource::True => Weights::True(*scenario),
        WeightSource::Dre => Weights::Estimated(Box::new(estimate_for(config, scenario, n_theta, seed)?)),
    })
}

/// Regularization of the regression step: the override, or `n_f^(-s)` with
/// `s` from the `(beta, iota, r, epsilon)` case analysis.
pub fn regression_lambda(config: &ExperimentConfig, n_f: usize) -> Result<(f64, Option<f64>)> {
    if let Some(lam) = config.filter.lam_override {
        return Ok((lam, None));
    }
    let s = select_exponent_s(config.beta, config.iota, config.r, config.epsilon)?;
    Ok((schedule_lambda(n_f, s)?, Some(s)))
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRegressionSummaryRow {
    pub weight_source: WeightSource,
    pub n_f: usize,
    pub n_theta: usize,
    pub lam: f64,
    #[serde(rename = "median_err_f_rhoT")]
    pub median_err_f_rho_t: f64,
    #[serde(rename = "iqr_err_f_rhoT")]
    pub iqr_err_f_rho_t: f64,
    pub median_excess_risk: f64,
    pub iqr_excess_risk: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub n_f: usize,
    pub weight_source: WeightSource,
    pub median_excess_risk: f64,
    pub unit_median_excess_risk: Option<f64>,
    pub ratio_to_unit: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RateRegressionOutcome {
    pub records: BTreeMap<WeightSource, Vec<ReplicationRecord>>,
    pub summary: Vec<RateRegressionSummaryRow>,
    pub comparison: Vec<ComparisonRow>,
    pub fits: BTreeMap<WeightSource, RateFit>,
}

impl RateRegressionOutcome {
    pub fn median_excess(&self, source: WeightSource, n_f: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.weight_source == source && r.n_f == n_f)
            .map(|r| r.median_excess_risk)
    }
}

fn regression_cell(
    config: &ExperimentConfig,
    scenario: &ScenarioSpec,
    n_f: usize,
    seed: u64,
) -> Result<Vec<(WeightSource, ReplicationRecord)>> {
    let n_theta = config.coupled_n_theta(n_f);
    let (lam, _) = regression_lambda(config, n_f)?;
    let filter = config.filter.spec(lam)?;
    let data: LabeledSample = scenario.sample_labeled(n_f, seed);
    let kernel = config.kernel();
    config
        .weight_sources
        .iter()
        .map(|&source| {
            let w = weights_for(config, scenario, source, n_theta, seed)?;
            let reg = fit_iw_spectral(&data, &w, &kernel, &filter)?;
            let excess = excess_target_risk(&reg, scenario, config.n_mc, mc_seed(seed))?;
            Ok((
                source,
                ReplicationRecord {
                    scenario: scenario.name().into(),
                    n_theta: Some(n_theta),
                    n_f: Some(n_f),
                    alpha: config.alpha,
                    iota: config.iota,
                    m: config.m,
                    filter: config.filter.family.name().into(),
                    seed,
                    err_phi_rho_r: None,
                    err_theta_rho_s: None,
                    err_f_rho_t: Some(excess.sqrt()),
                    excess_risk: Some(excess),
                },
            ))
        })
        .collect()
}

pub fn rate_regression(config: &ExperimentConfig, out: &Path) -> Result<RateRegressionOutcome> {
    let scenario = config.scenario_spec();
    let cells: Vec<(usize, usize)> = config
        .n_f_grid
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |rep| (n, rep)))
        .collect();
    let results = pool(config)?.install(|| {
        cells
            .par_iter()
            .map(|&(n_f, rep)| {
                let seed = replication_seed(config, rep);
                regression_cell(config, &scenario, n_f, seed)
                    .with_context(|| format!("rate-regression replication n_f = {n_f}, seed = {seed}"))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut records: BTreeMap<WeightSource, Vec<ReplicationRecord>> = BTreeMap::new();
    for (source, record) in results.into_iter().flatten() {
        records.entry(source).or_default().push(record);
    }

    let s = regression_lambda(config, config.n_f_grid[0])?.1;
    let guide_slope = s.map_or(f64::NAN, |s| -config.r * s);
    let mut summary = Vec::new();
    let mut fits = BTreeMap::new();
    let mut plot_series = Vec::new();
    let ns: Vec<f64> = config.n_f_grid.iter().map(|&n| n as f64).collect();
    for (&source, recs) in &records {
        write_rows(&out.join(format!("rate_regression_{source}.csv")), recs)?;
        let err = aggregate_by(recs, |r| r.n_f.unwrap_or(0), |r| r.err_f_rho_t);
        let excess = aggregate_by(recs, |r| r.n_f.unwrap_or(0), |r| r.excess_risk);
        for ((n_f, e), (_, x)) in err.iter().zip(&excess) {
            summary.push(RateRegressionSummaryRow {
                weight_source: source,
                n_f: *n_f,
                n_theta: config.coupled_n_theta(*n_f),
                lam: regression_lambda(config, *n_f)?.0,
                median_err_f_rho_t: e.median,
                iqr_err_f_rho_t: e.iqr,
                median_excess_risk: x.median,
                iqr_excess_risk: x.iqr,
            });
        }
        let (_, med) = medians(&err);
        if med.len() >= 2 {
            fits.insert(source, loglog(&ns, &med, guide_slope)?);
        }
        plot_series.push(Series {
            name: format!("err_f_rhoT ({source})"),
            values: med,
            style: Style::Markers,
        });
    }
    write_rows(&out.join("rate_regression_summary.csv"), &summary)?;

    let unit: BTreeMap<usize, f64> = summary
        .iter()
        .filter(|r| r.weight_source == WeightSource::Unit)
        .map(|r| (r.n_f, r.median_excess_risk))
        .collect();
    let mut comparison: Vec<ComparisonRow> = summary
        .iter()
        .map(|r| {
            let u = unit.get(&r.n_f).copied();
            ComparisonRow {
                n_f: r.n_f,
                weight_source: r.weight_source,
                median_excess_risk: r.median_excess_risk,
                unit_median_excess_risk: u,
                ratio_to_unit: u.map(|u| r.median_excess_risk / u),
            }
        })
        .collect();
    comparison.sort_by_key(|r| (r.n_f, r.weight_source));
    write_rows(&out.join("rate_regression_comparison.csv"), &comparison)?;
    write_json(&out.join("rate_regression_fit.json"), &fits)?;

    if let Some(first) = plot_series.first().and_then(|s| s.values.first()).copied() {
        plot_series.push(Series {
            name: "guide".into(),
            values: guide(&ns, first, guide_slope),
            style: Style::Dashed,
        });
    }
    Plot {
        title: format!("{}: target-risk error rates", scenario.name()),
        x_label: "n_f".into(),
        y_label: "median L2(rho_T) error".into(),
        log_x: true,
        log_y: true,
        x: ns,
        series: plot_series,
    }
    .write(out, "rate_regression_plot")?;

    Ok(RateRegressionOutcome {
        records,
        summary,
        comparison,
        fits,
    })
}

// ---------------------------------------------------------------- fit

/// Reads a CSV whose column `y` holds labels and whose other columns are the
/// input coordinates, in order.
pub fn read_labeled_csv(path: &Path) -> Result<LabeledSample> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let y_col = headers
        .iter()
        .position(|h| h.trim() == "y")
        .with_context(|| format!("{} has no `y` column", path.display()))?;
    ensure!(headers.len() >= 2, "{} needs at least one input column", path.display());
    let dim = headers.len() - 1;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .with_context(|| format!("{}: row {}: bad number `{field}`", path.display(), line + 2))?;
            if j == y_col {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    Ok(LabeledSample::new(Points::new(dim, xs)?, ys)?)
}

/// Reads a CSV of input coordinates (every column is an input).
pub fn read_points_csv(path: &Path) -> Result<Points> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let dim = r.headers()?.len();
    let mut xs = Vec::new();
    for rec in r.records() {
        for field in rec?.iter() {
            xs.push(field.trim().parse::<f64>()?);
        }
    }
    Ok(Points::new(dim, xs)?)
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub lam: f64,
    pub queries: Points,
    pub predictions: Vec<f64>,
}

pub fn fit(
    config: &ExperimentConfig,
    out: &Path,
    data: &LabeledSample,
    source: WeightSource,
    queries: Option<Points>,
) -> Result<FitOutcome> {
    ensure!(!data.is_empty(), "labeled data is empty");
    if source != WeightSource::Unit && data.xs.dim() != 1 {
        bail!("weight source `{source}` needs one-dimensional inputs");
    }
    let scenario = config.scenario_spec();
    let n_f = data.len();
    let (lam, _) = regression_lambda(config, n_f)?;
    let w = weights_for(config, &scenario, source, config.coupled_n_theta(n_f), config.seed_base)?;
    let reg = fit_iw_spectral(data, &w, &config.kernel(), &config.filter.spec(lam)?)?;
    let queries = queries.unwrap_or_else(|| data.xs.clone());
    let predictions = reg.predict(&queries)?;

    let path = out.join("fit_predictions.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    let mut header: Vec<String> = if queries.dim() == 1 {
        vec!["x".into()]
    } else {
        (1..=queries.dim()).map(|j| format!("x{j}")).collect()
    };
    header.push("prediction".into());
    w.write_record(&header)?;
    for (x, p) in queries.iter().zip(&predictions) {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(p.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(FitOutcome {
        lam,
        queries,
        predictions,
    })
}

// ---------------------------------------------------------------- diagnose

#[derive(Debug, Clone, Serialize)]
pub struct InequalityRow {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnosis {
    pub n_theta: usize,
    pub n_f: usize,
    pub s: f64,
    pub norm_source: f64,
    pub norm_target: f64,
    pub xi_m: f64,
    pub inequalities: Vec<InequalityRow>,
}

impl Diagnosis {
    fn new(inputs: &SampleSizeInputs, report: &SampleSizeReport) -> Self {
        let row = |name, q: covshift_core::regression::Inequality| InequalityRow {
            name,
            lhs: q.lhs,
            rhs: q.rhs,
            slack: q.slack,
            pass: q.pass,
        };
        Self {
            n_theta: inputs.n_theta,
            n_f: inputs.n_f,
            s: inputs.s,
            norm_source: inputs.norm_source,
            norm_target: inputs.norm_target,
            xi_m: inputs.xi_m,
            inequalities: vec![
                row("ratio_sample_size", report.ratio_condition),
                row("weight_error", report.weight_condition),
                row("labeled_sample_size", report.labeled_condition),
            ],
        }
    }
}

/// Operator norms of the source and target laws, approximated on a reference
/// sample that depends only on the config.
pub fn reference_norms(config: &ExperimentConfig) -> Result<(f64, f64)> {
    let scenario = config.scenario_spec();
    let kernel = config.kernel();
    let seed = mc_seed(config.seed_base);
    let ls = empirical_operator_norm(&scenario.sample_source(config.reference_size, seed), &kernel)?;
    let lt = empirical_operator_norm(&scenario.sample_target(config.reference_size, seed), &kernel)?;
    Ok((ls, lt))
}

pub fn diagnose(config: &ExperimentConfig, out: &Path, n_theta: usize, n_f: usize) -> Result<Diagnosis> {
    let (norm_source, norm_target) = reference_norms(config)?;
    diagnose_with_norms(config, out, n_theta, n_f, norm_source, norm_target)
}

pub fn diagnose_with_norms(
    config: &ExperimentConfig,
    out: &Path,
    n_theta: usize,
    n_f: usize,
    norm_source: f64,
    norm_target: f64,
) -> Result<Diagnosis> {
    let kernel = config.kernel();
    let inputs = SampleSizeInputs {
        n_theta,
        n_f,
        s: select_exponent_s(config.beta, config.iota, config.r, config.epsilon)?,
        iota: config.iota,
        m: config.m,
        r: config.r,
        alpha: config.alpha,
        kappa_sq: kernel.kappa_sq(),
        delta: config.delta,
        norm_source,
        norm_target,
        delta_phi: config.delta_phi,
        xi_m: config.scenario_spec().theta_moment(config.m),
    };
    let report = sample_size_diagnostic(&inputs)?;
    let diagnosis = Diagnosis::new(&inputs, &report);
    write_json(&out.join("diagnose.json"), &diagnosis)?;
    Ok(diagnosis)
}
