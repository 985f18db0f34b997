//! Command-line experiment driver for `covshift-core`.
//!
//! Each subcommand is a thin wrapper over a function in [`experiments`] that
//! writes CSV (and SVG) artifacts into the output directory.

pub mod config;
pub mod experiments;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, UsageError, WeightSource};
use covshift_core::ScenarioKind;

#[derive(Debug, Parser)]
#[command(name = "covshift", version, about = "Covariate-shift density-ratio and regression experiments")]
pub struct Cli {
    /// JSON experiment config; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed (overrides `seed_base`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Scenario name (overrides `scenario`).
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grid-check the filter conditions for all three filter families.
    CheckFilters,
    /// True density ratio and relative ratio on a grid.
    Figure1,
    /// Fit the density-ratio estimator once and tabulate it on a grid.
    EstimateDre {
        #[arg(long, default_value_t = 500)]
        n_theta: usize,
    },
    /// Importance-weighted regression on a labeled CSV (columns x..., y).
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// dre, true or unit
        #[arg(long, default_value = "unit")]
        weights: WeightSource,
        /// CSV of query inputs; defaults to the training inputs.
        #[arg(long)]
        query: Option<PathBuf>,
    },
    /// Error rates of the density-ratio estimator over the n_theta grid.
    RateDre,
    /// Target-risk rates of weighted regression over the n_f grid.
    RateRegression,
    /// Evaluate the sample-size conditions of the error bounds (exit 1 if any fails).
    Diagnose {
        #[arg(long)]
        n_theta: Option<usize>,
        #[arg(long)]
        n_f: Option<usize>,
    },
}

impl Cli {
    /// The config file (or defaults) with command-line overrides applied.
    pub fn resolve_config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            config.seed_base = seed;
        }
        if let Some(workers) = self.workers {
            config.workers = Some(workers);
        }
        if let Some(name) = &self.scenario {
            config.scenario = name
                .parse::<ScenarioKind>()
                .map_err(|e| UsageError(e.to_string()))?;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Exit status: 0 success, 1 failed check or runtime error, 2 usage error.
pub fn run(cli: &Cli) -> Result<i32> {
    covshift_core::operators::use_sequential_linalg();
    let config = cli.resolve_config()?;
    let out = config.out_dir.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    match &cli.command {
        Command::CheckFilters => {
            let rows = experiments::check_filters(&config, &out)?;
            let mut ok = true;
            for r in &rows {
                ok &= r.passes;
                print!(
                    "{:<16} tau={} E={} F={:.6}  {}  worst margin {:.3e}",
                    r.family.name(),
                    r.tau,
                    r.e,
                    r.f,
                    if r.passes { "PASS" } else { "FAIL" },
                    r.worst_margin
                );
                match (&r.witness_condition, r.witness_lam, r.witness_c, r.witness_t) {
                    (Some(cond), Some(lam), Some(c), Some(t)) => println!(
                        "  witness: {cond} at lambda={lam}, c={c:.4}, t={t:.3e} ({:.6} > {:.6})",
                        r.witness_lhs.unwrap_or(f64::NAN),
                        r.witness_rhs.unwrap_or(f64::NAN)
                    ),
                    _ => println!(),
                }
            }
            Ok(if ok { 0 } else { 1 })
        }
        Command::Figure1 => {
            let t = experiments::figure1(&config, &out)?;
            let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            println!(
                "{}: {} grid points, max theta {:.4}, max phi {:.4} (1/alpha = {})",
                config.scenario,
                t.x.len(),
                max(&t.theta),
                max(&t.phi),
                1.0 / config.alpha
            );
            Ok(0)
        }
        Command::EstimateDre { n_theta } => {
            let c = experiments::estimate_dre(&config, &out, *n_theta)?;
            println!("{}: n_theta {n_theta}, mu {:.6}, D {:.6}", config.scenario, c.mu, c.d);
            Ok(0)
        }
        Command::Fit {
            data,
            weights,
            query,
        } => {
            let data = experiments::read_labeled_csv(data)?;
            let queries = query.as_deref().map(experiments::read_points_csv).transpose()?;
            let f = experiments::fit(&config, &out, &data, *weights, queries)?;
            println!(
                "fitted {} points with {} weights, lambda {:.6}; {} predictions",
                data.len(),
                weights,
                f.lam,
                f.predictions.len()
            );
            Ok(0)
        }
        Command::RateDre => {
            let o = experiments::rate_dre(&config, &out)?;
            for row in &o.summary {
                println!(
                    "n_theta {:>6}  median err_phi_rhoR {:.5}  median err_theta_rhoS {:.5}",
                    row.n_theta, row.median_err_phi_rho_r, row.median_err_theta_rho_s
                );
            }
            println!(
                "slope phi {:.3} (guide {:.3}), slope theta {:.3} (guide {:.3})",
                o.phi_fit.slope, o.phi_fit.guide_slope, o.theta_fit.slope, o.theta_fit.guide_slope
            );
            Ok(0)
        }
        Command::RateRegression => {
            let o = experiments::rate_regression(&config, &out)?;
            for row in &o.summary {
                println!(
                    "{:<5} n_f {:>5}  n_theta {:>6}  median err_f_rhoT {:.5}  median excess {:.6}",
                    row.weight_source.name(),
                    row.n_f,
                    row.n_theta,
                    row.median_err_f_rho_t,
                    row.median_excess_risk
                );
            }
            for (source, fit) in &o.fits {
                println!("slope {source}: {:.3} (guide {:.3})", fit.slope, fit.guide_slope);
            }
            Ok(0)
        }
        Command::Diagnose { n_theta, n_f } => {
            let n_theta = n_theta.unwrap_or(*config.n_theta_grid.last().unwrap());
            let n_f = n_f.unwrap_or(*config.n_f_grid.last().unwrap());
            let d = experiments::diagnose(&config, &out, n_theta, n_f)?;
            println!(
                "n_theta {n_theta}, n_f {n_f}, s {:.4}, |L_S| ~ {:.4}, |L_T| ~ {:.4}",
                d.s, d.norm_source, d.norm_target
            );
            for q in &d.inequalities {
                println!(
                    "{:<20} {}  lhs {:.4e}  rhs {:.4e}  slack {:.4e}",
                    q.name,
                    if q.pass { "holds" } else { "fails" },
                    q.lhs,
                    q.rhs,
                    q.slack
                );
            }
            Ok(if d.inequalities.iter().all(|q| q.pass) { 0 } else { 1 })
        }
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}
