//! Monte-Carlo error norms, excess risk, RKHS-norm proxy, robust summaries
//! and log-log rate fits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::gram_symmetric;
use crate::operators::KernelExpansion;
use crate::points::Points;
use crate::regression::Regressor;
use crate::scenarios::ScenarioSpec;

/// Root mean square of `est - truth`.
pub fn l2_error_on(est: &[f64], truth: &[f64]) -> Result<f64> {
    Ok(mean_sq_diff(est, truth)?.sqrt())
}

fn mean_sq_diff(est: &[f64], truth: &[f64]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch {
            what: "estimate and truth",
            left: est.len(),
            right: truth.len(),
        });
    }
    if est.is_empty() {
        return Err(Error::Empty("Monte-Carlo sample"));
    }
    let mut acc = 0.0;
    for (index, (a, b)) in est.iter().zip(truth).enumerate() {
        if !a.is_finite() {
            return Err(Error::NonFinite {
                what: "estimate",
                index,
            });
        }
        if !b.is_finite() {
            return Err(Error::NonFinite {
                what: "truth",
                index,
            });
        }
        acc += (a - b) * (a - b);
    }
    Ok(acc / est.len() as f64)
}

/// `sqrt(mean (f_est - f_true)^2)` over `n_mc` fresh draws of `sampler`.
pub fn mc_l2_error<S, E, T>(f_est: E, f_true: T, sampler: S, n_mc: usize, seed: u64) -> Result<f64>
where
    S: Fn(usize, u64) -> Points,
    E: Fn(&Points) -> Result<Vec<f64>>,
    T: Fn(&Points) -> Result<Vec<f64>>,
{
    if n_mc == 0 {
        return Err(Error::Empty("Monte-Carlo sample"));
    }
    let xs = sampler(n_mc, seed);
    l2_error_on(&f_est(&xs)?, &f_true(&xs)?)
}

/// `E_T (f_hat - f_rho)^2` by Monte Carlo over the scenario's target law.
pub fn excess_target_risk(reg: &Regressor, spec: &ScenarioSpec, n_mc: usize, seed: u64) -> Result<f64> {
    if n_mc == 0 {
        return Err(Error::Empty("Monte-Carlo sample"));
    }
    let xs = spec.sample_target(n_mc, seed);
    mean_sq_diff(&reg.predict(&xs)?, &spec.f_rho_at(&xs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HNorm {
    Value(f64),
    /// The two functions are not expansions over the same points.
    Unavailable,
}

impl HNorm {
    pub fn value(self) -> Option<f64> {
        match self {
            HNorm::Value(v) => Some(v),
            HNorm::Unavailable => None,
        }
    }
}

/// `sqrt(c^T G c)`.
pub fn h_norm(expansion: &KernelExpansion) -> f64 {
    let g = gram_symmetric(&expansion.kernel, &expansion.points);
    quad_form(&g, &expansion.coeffs)
}

fn quad_form(g: &faer::Mat<f64>, c: &[f64]) -> f64 {
    let n = c.len();
    let mut acc = 0.0;
    for i in 0..n {
        if c[i] == 0.0 {
            continue;
        }
        let row: f64 = (0..n).map(|j| g[(i, j)] * c[j]).sum();
        acc += c[i] * row;
    }
    acc.max(0.0).sqrt()
}

/// RKHS norm of `a - b` when both live in the same span.
pub fn h_norm_proxy(a: &KernelExpansion, b: &KernelExpansion) -> HNorm {
    if a.kernel != b.kernel || a.points != b.points {
        return HNorm::Unavailable;
    }
    let diff: Vec<f64> = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect();
    let g = gram_symmetric(&a.kernel, &a.points);
    HNorm::Value(quad_form(&g, &diff))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares of `ln err` on `ln n`.
pub fn fit_loglog_slope(ns: &[f64], errs: &[f64]) -> Result<LogLogFit> {
    if ns.len() != errs.len() {
        return Err(Error::LengthMismatch {
            what: "sizes and errors",
            left: ns.len(),
            right: errs.len(),
        });
    }
    if ns.len() < 2 {
        return Err(Error::Empty("need at least two points for a slope"));
    }
    for (&n, &e) in ns.iter().zip(errs) {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid("n", n, "must be positive"));
        }
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::invalid("err", e, "must be positive"));
        }
    }
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("n", ns[0], "sizes must not all coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogLogFit {
        slope,
        intercept,
        r2,
    })
}

/// Type-7 sample quantile (linear interpolation between order statistics).
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub iqr: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    let median = quantile(values, 0.5)?;
    let q25 = quantile(values, 0.25)?;
    let q75 = quantile(values, 0.75)?;
    Some(Summary {
        count: values.len(),
        median,
        q25,
        q75,
        iqr: q75 - q25,
    })
}

/// Sample mean and its standard error `s / sqrt(n)`.
pub fn mean_and_se(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Some((mean, (var / n as f64).sqrt()))
}

/// Kolmogorov-Smirnov statistic `sup |F_n - F|` of `sample` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at level `alpha`:
/// `sqrt(-ln(alpha / 2) / 2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// One replication of one experiment cell. Fields that do not apply to the
/// experiment are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub scenario: String,
    pub n_theta: Option<usize>,
    pub n_f: Option<usize>,
    pub alpha: f64,
    pub iota: f64,
    pub m: f64,
    pub filter: String,
    pub seed: u64,
    #[serde(rename = "err_phi_rhoR")]
    pub err_phi_rho_r: Option<f64>,
    #[serde(rename = "err_theta_rhoS")]
    pub err_theta_rho_s: Option<f64>,
    #[serde(rename = "err_f_rhoT")]
    pub err_f_rho_t: Option<f64>,
    pub excess_risk: Option<f64>,
}

pub const RECORD_HEADER: &str =
    "scenario,n_theta,n_f,alpha,iota,m,filter,seed,err_phi_rhoR,err_theta_rhoS,err_f_rhoT,excess_risk";

/// Summaries of `value(record)` grouped by `key(record)`, in key order.
/// Records for which `value` is `None` are skipped.
pub fn aggregate_by<K, FK, FV>(records: &[ReplicationRecord], key: FK, value: FV) -> Vec<(K, Summary)>
where
    K: Ord + Copy,
    FK: Fn(&ReplicationRecord) -> K,
    FV: Fn(&ReplicationRecord) -> Option<f64>,
{
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(v) = value(r) {
            groups.entry(key(r)).or_default().push(v);
        }
    }
    groups
        .into_iter()
        .filter_map(|(k, vs)| summarize(&vs).map(|s| (k, s)))
        .collect()
}
