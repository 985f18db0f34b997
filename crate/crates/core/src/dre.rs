//! Three-step estimator for possibly unbounded density ratios.
//!
//! 1. Estimate the relative ratio `phi = d rho_T / d rho_R`, where
//!    `rho_R = (1 - alpha) rho_S + alpha rho_T`, as
//!    `phi_mu = g_mu(L_R) L_T 1`.
//! 2. Clip it to `[0, D / (alpha D + 1 - alpha)]`.
//! 3. Map back with `theta = (1 - alpha) phi / (1 - alpha phi)`, which sends
//!    the clip ceiling to exactly `D`.
//!
//! `mu = n^(-1/(2 iota + 1))` and `D = n^nu` with
//! `nu = (1/m) * 2 iota / (2 iota + 1)`. For large `iota` the exponent also
//! has to satisfy `1/(2 iota + 1) <= 1/(2 iota - 1)`, which this choice
//! always does.

use crate::error::{Error, Result};
use crate::filters::{FilterFamily, FilterSpec};
use crate::kernels::KernelSpec;
use crate::operators::{Factorization, KernelExpansion, OperatorRep};
use crate::points::Points;

/// `phi_mu` as a kernel expansion over the source points followed by the
/// target points.
#[derive(Debug, Clone)]
pub struct RelativeRatioEstimate {
    pub expansion: KernelExpansion,
    pub alpha: f64,
    pub mu: f64,
    pub n_theta: usize,
    pub filter: FilterSpec,
}

impl RelativeRatioEstimate {
    pub fn evaluate(&self, queries: &Points) -> Result<Vec<f64>> {
        self.expansion.evaluate(queries)
    }
}

/// Truncated and transformed estimate `theta_{mu, D}`.
#[derive(Debug, Clone)]
pub struct DensityRatioEstimate {
    pub base: RelativeRatioEstimate,
    pub d: f64,
}

/// All three stages of the estimate at one query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioValues {
    /// `phi_mu(x)`
    pub relative: f64,
    /// `phi_{mu, D}(x)`
    pub relative_truncated: f64,
    /// `theta_{mu, D}(x)`
    pub theta: f64,
}

impl DensityRatioEstimate {
    pub fn alpha(&self) -> f64 {
        self.base.alpha
    }

    /// Upper end of the truncated relative ratio, `D / (alpha D + 1 - alpha)`.
    pub fn relative_cap(&self) -> f64 {
        relative_cap(self.base.alpha, self.d)
    }

    pub fn evaluate(&self, queries: &Points) -> Result<Vec<RatioValues>> {
        let alpha = self.base.alpha;
        let cap = self.relative_cap();
        self.base
            .evaluate(queries)?
            .into_iter()
            .map(|relative| {
                let relative_truncated = truncate_to_cap(relative, cap);
                Ok(RatioValues {
                    relative,
                    relative_truncated,
                    // the cap maps to D exactly; drop the rounding excess
                    theta: to_standard_ratio(relative_truncated, alpha)?.min(self.d),
                })
            })
            .collect()
    }

    /// `theta_{mu, D}` at each query point.
    pub fn theta(&self, queries: &Points) -> Result<Vec<f64>> {
        Ok(self.evaluate(queries)?.into_iter().map(|v| v.theta).collect())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", alpha, "must lie in (0, 1)"));
    }
    Ok(())
}

/// `phi_mu = g_mu(L_R) L_T 1` from equally many source and target points,
/// with a dense operator.
pub fn estimate_relative_ratio(
    source: &Points,
    target: &Points,
    alpha: f64,
    kernel: &KernelSpec,
    filter: &FilterSpec,
) -> Result<RelativeRatioEstimate> {
    estimate_relative_ratio_with(source, target, alpha, kernel, filter, Factorization::Dense)
}

pub fn estimate_relative_ratio_with(
    source: &Points,
    target: &Points,
    alpha: f64,
    kernel: &KernelSpec,
    filter: &FilterSpec,
    factorization: Factorization,
) -> Result<RelativeRatioEstimate> {
    let n = source.len();
    if n == 0 {
        return Err(Error::Empty("source sample"));
    }
    if target.len() != n {
        return Err(Error::LengthMismatch {
            what: "source and target samples",
            left: n,
            right: target.len(),
        });
    }
    check_alpha(alpha)?;

    let points = source.concat(target)?;
    let nf = n as f64;
    let mut weights = vec![(1.0 - alpha) / nf; n];
    weights.extend(std::iter::repeat_n(alpha / nf, n));
    // L_T 1 = (1/n) sum_j K(., x'_j)
    let mut b = vec![0.0; n];
    b.extend(std::iter::repeat_n(1.0 / nf, n));

    let rep = OperatorRep::build(points, weights, *kernel, factorization)?;
    let coeffs = rep.apply_filter(filter, &b)?;
    let expansion = KernelExpansion::new(rep.points().clone(), coeffs, *kernel)?;
    Ok(RelativeRatioEstimate {
        expansion,
        alpha,
        mu: filter.lam,
        n_theta: n,
        filter: *filter,
    })
}

fn relative_cap(alpha: f64, d: f64) -> f64 {
    d / (alpha * d + (1.0 - alpha))
}

fn truncate_to_cap(value: f64, cap: f64) -> f64 {
    value.max(0.0).min(cap)
}

/// `min(max(value, 0), D / (alpha D + 1 - alpha))`.
pub fn truncate_relative(value: f64, alpha: f64, d: f64) -> f64 {
    truncate_to_cap(value, relative_cap(alpha, d))
}

/// `theta = (1 - alpha) phi / (1 - alpha phi)`, defined for `alpha phi < 1`.
pub fn to_standard_ratio(phi: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha * phi >= 1.0 {
        return Err(Error::invalid(
            "relative ratio",
            phi,
            "alpha * phi must be below 1",
        ));
    }
    Ok((1.0 - alpha) * phi / (1.0 - alpha * phi))
}

/// `phi = theta / (alpha theta + 1 - alpha)`; `theta = inf` maps to `1/alpha`.
pub fn relative_of_standard(theta: f64, alpha: f64) -> f64 {
    if theta.is_infinite() {
        return 1.0 / alpha;
    }
    theta / (alpha * theta + (1.0 - alpha))
}

fn check_iota(iota: f64) -> Result<()> {
    if !(iota.is_finite() && iota >= 0.5) {
        return Err(Error::invalid("iota", iota, "must be at least 1/2"));
    }
    Ok(())
}

/// `mu = n^(-1/(2 iota + 1))`.
pub fn schedule_mu(n_theta: usize, iota: f64) -> Result<f64> {
    check_iota(iota)?;
    if n_theta == 0 {
        return Err(Error::Empty("n_theta"));
    }
    Ok((n_theta as f64).powf(-1.0 / (2.0 * iota + 1.0)))
}

/// `nu = (1/m) * 2 iota / (2 iota + 1)`.
pub fn truncation_exponent(iota: f64, m: f64) -> Result<f64> {
    check_iota(iota)?;
    if m.is_nan() || m <= 2.0 {
        return Err(Error::invalid("m", m, "moment order must exceed 2"));
    }
    Ok((1.0 / m) * (2.0 * iota / (2.0 * iota + 1.0)))
}

/// `D = n^nu`.
pub fn schedule_truncation(n_theta: usize, iota: f64, m: f64) -> Result<f64> {
    let nu = truncation_exponent(iota, m)?;
    if n_theta == 0 {
        return Err(Error::Empty("n_theta"));
    }
    Ok((n_theta as f64).powf(nu))
}

/// Full pipeline with both schedules. `filter_family` and `tau` fix the
/// filter; its parameter is the scheduled `mu`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_density_ratio(
    source: &Points,
    target: &Points,
    alpha: f64,
    kernel: &KernelSpec,
    filter_family: FilterFamily,
    tau: f64,
    iota: f64,
    m: f64,
    factorization: Factorization,
) -> Result<DensityRatioEstimate> {
    let n = source.len();
    let mu = schedule_mu(n.max(1), iota)?;
    let d = schedule_truncation(n.max(1), iota, m)?;
    let filter = FilterSpec::with_tau(filter_family, mu, tau)?;
    let base = estimate_relative_ratio_with(source, target, alpha, kernel, &filter, factorization)?;
    Ok(DensityRatioEstimate { base, d })
}
