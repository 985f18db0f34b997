//! Spectral filter functions `g_lambda` and a numerical verifier of the two
//! filter conditions
//!
//! ```text
//! (1)  sup_t t^c g(t)           <= E lambda^(c-1)   for c in [0, 1]
//! (2)  sup_t t^c |1 - t g(t)|   <= F lambda^c       for c in [0, tau]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `t / lambda` the gradient-flow filter switches to its
/// Taylor series.
const GF_SERIES_CUTOFF: f64 = 1e-6;

/// Multiplicative slack allowed by [`check_filter_conditions`].
pub const CONDITION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterFamily {
    Krr,
    GradientFlow,
    SpectralCutoff,
}

impl FilterFamily {
    pub const ALL: [FilterFamily; 3] = [
        FilterFamily::Krr,
        FilterFamily::GradientFlow,
        FilterFamily::SpectralCutoff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterFamily::Krr => "krr",
            FilterFamily::GradientFlow => "gradient_flow",
            FilterFamily::SpectralCutoff => "spectral_cutoff",
        }
    }

    /// Qualification used when none is configured.
    pub fn default_tau(self) -> f64 {
        match self {
            FilterFamily::Krr => 1.0,
            FilterFamily::GradientFlow | FilterFamily::SpectralCutoff => 2.0,
        }
    }

    /// Smallest constants `(E, F)` for which both conditions hold at
    /// qualification `tau`.
    ///
    /// For gradient flow, `sup_u u^c e^(-u) = (c/e)^c`, whose maximum over
    /// `c in [0, tau]` is `max(1, (tau/e)^tau)`; the `c = 0` end is what
    /// forces the `1`.
    pub fn default_constants(self, tau: f64) -> (f64, f64) {
        match self {
            FilterFamily::Krr | FilterFamily::SpectralCutoff => (1.0, 1.0),
            FilterFamily::GradientFlow => (1.0, (tau / std::f64::consts::E).powf(tau).max(1.0)),
        }
    }
}

impl std::fmt::Display for FilterFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FilterFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "krr" => Ok(FilterFamily::Krr),
            "gradient_flow" => Ok(FilterFamily::GradientFlow),
            "spectral_cutoff" => Ok(FilterFamily::SpectralCutoff),
            other => Err(format!("unknown filter family `{other}`")),
        }
    }
}

/// A filter family at a fixed regularization parameter, together with the
/// qualification and constants it declares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub family: FilterFamily,
    pub lam: f64,
    pub tau: f64,
    pub e: f64,
    pub f: f64,
}

impl FilterSpec {
    /// A filter with its family's default qualification and constants.
    pub fn new(family: FilterFamily, lam: f64) -> Result<Self> {
        Self::with_tau(family, lam, family.default_tau())
    }

    pub fn krr(lam: f64) -> Result<Self> {
        Self::new(FilterFamily::Krr, lam)
    }

    pub fn gradient_flow(lam: f64, tau: f64) -> Result<Self> {
        Self::with_tau(FilterFamily::GradientFlow, lam, tau)
    }

    pub fn spectral_cutoff(lam: f64, tau: f64) -> Result<Self> {
        Self::with_tau(FilterFamily::SpectralCutoff, lam, tau)
    }

    pub fn with_tau(family: FilterFamily, lam: f64, tau: f64) -> Result<Self> {
        let (e, f) = family.default_constants(tau);
        Self::declared(family, lam, tau, e, f)
    }

    /// A filter with arbitrary declared `(tau, E, F)`; nothing checks that
    /// the declaration is true. See [`check_filter_conditions`].
    pub fn declared(family: FilterFamily, lam: f64, tau: f64, e: f64, f: f64) -> Result<Self> {
        if !(lam.is_finite() && lam > 0.0) {
            return Err(Error::invalid("lambda", lam, "must be positive and finite"));
        }
        if !(tau.is_finite() && tau >= 1.0) {
            return Err(Error::invalid("tau", tau, "qualification must be at least 1"));
        }
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::invalid("E", e, "must be non-negative"));
        }
        if !(f.is_finite() && f >= 0.0) {
            return Err(Error::invalid("F", f, "must be non-negative"));
        }
        Ok(Self {
            family,
            lam,
            tau,
            e,
            f,
        })
    }

    /// Same declaration at another regularization parameter.
    pub fn with_lam(&self, lam: f64) -> Result<Self> {
        Self::declared(self.family, lam, self.tau, self.e, self.f)
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        filter_value_at(self.family, self.lam, t)
    }
}

/// `g_lambda(t)` for the family of `spec`.
pub fn filter_value(spec: &FilterSpec, t: f64) -> f64 {
    spec.value(t)
}

#[inline]
fn filter_value_at(family: FilterFamily, lam: f64, t: f64) -> f64 {
    let t = t.max(0.0);
    match family {
        FilterFamily::Krr => 1.0 / (t + lam),
        FilterFamily::GradientFlow => {
            let u = t / lam;
            if u < GF_SERIES_CUTOFF {
                (1.0 - u / 2.0 + u * u / 6.0) / lam
            } else {
                -(-u).exp_m1() / t
            }
        }
        FilterFamily::SpectralCutoff => {
            if t >= lam {
                1.0 / t
            } else {
                0.0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// `t^c g(t) <= E lambda^(c-1)`
    Stability,
    /// `t^c |1 - t g(t)| <= F lambda^c`
    Qualification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub condition: Condition,
    pub lam: f64,
    pub c: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterCheckReport {
    pub passes: bool,
    /// `min (1 - lhs / rhs)` over every checked `(condition, lambda, c, t)`;
    /// negative means some inequality is violated.
    pub worst_margin: f64,
    /// The worst violating point, if any.
    pub witness: Option<Witness>,
}

/// Grid check of both filter conditions for the declared `(E, F, tau)` of
/// `spec`, swept over `lams`.
///
/// `c_grid` entries outside `[0, 1]` are skipped for the stability condition
/// and entries outside `[0, tau]` for the qualification condition.
pub fn check_filter_conditions(
    spec: &FilterSpec,
    lams: &[f64],
    c_grid: &[f64],
    t_grid: &[f64],
) -> FilterCheckReport {
    let mut worst_margin = f64::INFINITY;
    let mut worst: Option<Witness> = None;

    let mut consider = |w: Witness| {
        let margin = if w.rhs > 0.0 {
            1.0 - w.lhs / w.rhs
        } else if w.lhs <= 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        };
        if margin < worst_margin {
            worst_margin = margin;
            worst = Some(w);
        }
    };

    for &lam in lams {
        for &c in c_grid {
            if (0.0..=1.0).contains(&c) {
                let mut best = (0.0, 0.0);
                for &t in t_grid {
                    let v = t.powf(c) * filter_value_at(spec.family, lam, t);
                    if v > best.0 {
                        best = (v, t);
                    }
                }
                consider(Witness {
                    condition: Condition::Stability,
                    lam,
                    c,
                    t: best.1,
                    lhs: best.0,
                    rhs: spec.e * lam.powf(c - 1.0),
                });
            }
            if c >= 0.0 && c <= spec.tau {
                let mut best = (0.0, 0.0);
                for &t in t_grid {
                    let residual = (1.0 - t * filter_value_at(spec.family, lam, t)).abs();
                    let v = t.powf(c) * residual;
                    if v > best.0 {
                        best = (v, t);
                    }
                }
                consider(Witness {
                    condition: Condition::Qualification,
                    lam,
                    c,
                    t: best.1,
                    lhs: best.0,
                    rhs: spec.f * lam.powf(c),
                });
            }
        }
    }

    let passes = worst_margin >= -CONDITION_SLACK;
    FilterCheckReport {
        passes,
        worst_margin,
        witness: if passes { None } else { worst },
    }
}

/// `n` log-spaced points from `lo` to `hi`, both inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// `n` evenly spaced points from `lo` to `hi`, both inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
