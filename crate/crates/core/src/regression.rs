//! Importance-weighted spectral regression.
//!
//! Given labeled source data `(x_i, y_i)` and a weight function `w(x)`,
//! the estimator is `f = g_lambda(L_W) S_W^* y`, where `L_W` is the
//! integral operator with weights `u_i = w(x_i) / n_f`. In coefficient form
//! `c = U^(1/2) g_lambda(U^(1/2) G U^(1/2)) U^(1/2) y`.

use crate::dre::DensityRatioEstimate;
use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::kernels::KernelSpec;
use crate::operators::{Factorization, KernelExpansion, OperatorRep};
use crate::points::Points;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub xs: Points,
    pub ys: Vec<f64>,
}

impl LabeledSample {
    pub fn new(xs: Points, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                what: "inputs and labels",
                left: xs.len(),
                right: ys.len(),
            });
        }
        if let Some(index) = ys.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFinite {
                what: "label",
                index,
            });
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }
}

/// Source of importance weights `w(x) >= 0`.
pub trait WeightFunction {
    fn weights(&self, xs: &Points) -> Result<Vec<f64>>;
}

/// `w = 1`: ordinary (unweighted) spectral regression.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitWeights;

impl WeightFunction for UnitWeights {
    fn weights(&self, xs: &Points) -> Result<Vec<f64>> {
        Ok(vec![1.0; xs.len()])
    }
}

impl WeightFunction for DensityRatioEstimate {
    fn weights(&self, xs: &Points) -> Result<Vec<f64>> {
        self.theta(xs)
    }
}

/// Pointwise closure `x -> w(x)`.
pub struct PointwiseWeights<F>(pub F);

impl<F> WeightFunction for PointwiseWeights<F>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    fn weights(&self, xs: &Points) -> Result<Vec<f64>> {
        xs.iter().map(|x| (self.0)(x)).collect()
    }
}

impl<W: WeightFunction + ?Sized> WeightFunction for &W {
    fn weights(&self, xs: &Points) -> Result<Vec<f64>> {
        (**self).weights(xs)
    }
}

#[derive(Debug, Clone)]
pub struct Regressor {
    pub expansion: KernelExpansion,
    pub lam: f64,
    pub filter: FilterSpec,
    /// `w(x_i)` before division by `n_f`.
    pub weights_used: Vec<f64>,
}

impl Regressor {
    pub fn predict(&self, queries: &Points) -> Result<Vec<f64>> {
        self.expansion.evaluate(queries)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.expansion.coeffs
    }
}

/// Fits `g_lambda(L_W) S_W^* y` with a dense operator.
pub fn fit_iw_spectral<W: WeightFunction + ?Sized>(
    data: &LabeledSample,
    weight_fn: &W,
    kernel: &KernelSpec,
    filter: &FilterSpec,
) -> Result<Regressor> {
    fit_iw_spectral_with(data, weight_fn, kernel, filter, Factorization::Dense)
}

pub fn fit_iw_spectral_with<W: WeightFunction + ?Sized>(
    data: &LabeledSample,
    weight_fn: &W,
    kernel: &KernelSpec,
    filter: &FilterSpec,
    factorization: Factorization,
) -> Result<Regressor> {
    let n = data.len();
    if n == 0 {
        return Err(Error::Empty("labeled sample"));
    }
    let weights = weight_fn.weights(&data.xs)?;
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            what: "weights and labeled inputs",
            left: weights.len(),
            right: n,
        });
    }
    for (index, &w) in weights.iter().enumerate() {
        if !w.is_finite() {
            return Err(Error::NonFinite {
                what: "weight",
                index,
            });
        }
        if w < 0.0 {
            return Err(Error::NegativeWeight { index, value: w });
        }
    }
    let u: Vec<f64> = weights.iter().map(|w| w / n as f64).collect();
    let a: Vec<f64> = u.iter().zip(&data.ys).map(|(u, y)| u * y).collect();
    let op = OperatorRep::build(data.xs.clone(), u, *kernel, factorization)?;
    let coeffs = op.apply_filter(filter, &a)?;
    Ok(Regressor {
        expansion: KernelExpansion::new(data.xs.clone(), coeffs, *kernel)?,
        lam: filter.lam,
        filter: *filter,
        weights_used: weights,
    })
}

/// `lambda = n_f^(-s)`.
pub fn schedule_lambda(n_f: usize, s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid("s", s, "must be positive"));
    }
    if n_f == 0 {
        return Err(Error::Empty("n_f"));
    }
    Ok((n_f as f64).powf(-s))
}

/// Regularization exponent `s` for the coupling `n_theta = n_f^beta`.
pub fn select_exponent_s(beta: f64, iota: f64, r: f64, epsilon: f64) -> Result<f64> {
    if beta.is_nan() || beta < 1.0 {
        return Err(Error::invalid("beta", beta, "must be at least 1"));
    }
    if iota.is_nan() || iota < 0.5 {
        return Err(Error::invalid("iota", iota, "must be at least 1/2"));
    }
    if !r.is_finite() || r < 0.5 {
        return Err(Error::invalid("r", r, "must be at least 1/2"));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::invalid("epsilon", epsilon, "must be positive"));
    }
    let rate = iota / (2.0 * iota + 1.0);
    let optimal = 1.0 / (2.0 * r + 1.0);
    let s = if beta >= 1.0 + 1.0 / (2.0 * iota) {
        optimal
    } else {
        let t = (1.0 + 1.0 / (2.0 * iota)) / beta - 1.0;
        if r < 0.5 + t {
            beta * rate
        } else if r <= 0.5 + 1.0 / t {
            optimal
        } else {
            beta * rate * smoothness_factor(r)
        }
    } - epsilon;
    if s <= 0.0 {
        return Err(Error::invalid("epsilon", epsilon, "too large: exponent s is not positive"));
    }
    Ok(s)
}

/// `min(1, 2 / (2r - 1))`, equal to 1 at `r = 1/2`.
fn smoothness_factor(r: f64) -> f64 {
    if r <= 0.5 {
        1.0
    } else {
        (2.0 / (2.0 * r - 1.0)).min(1.0)
    }
}

/// Largest eigenvalue of the unweighted empirical operator with weights `1/n`.
pub fn empirical_operator_norm(points: &Points, kernel: &KernelSpec) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("reference sample"));
    }
    let n = points.len();
    let op = OperatorRep::build(
        points.clone(),
        vec![1.0 / n as f64; n],
        *kernel,
        Factorization::default(),
    )?;
    op.lambda_max()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSizeInputs {
    pub n_theta: usize,
    pub n_f: usize,
    pub s: f64,
    pub iota: f64,
    pub m: f64,
    pub r: f64,
    pub alpha: f64,
    pub kappa_sq: f64,
    pub delta: f64,
    pub norm_source: f64,
    pub norm_target: f64,
    /// Placeholder for the unobservable constant of the relative-ratio rate.
    pub delta_phi: f64,
    /// `E_S[theta^m]`.
    pub xi_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`.
    pub slack: f64,
    pub pass: bool,
}

impl Inequality {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            slack: lhs - rhs,
            pass: lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSizeReport {
    /// Sample size needed by the relative-ratio bound.
    pub ratio_condition: Inequality,
    /// Relative-ratio error against the regularization level.
    pub weight_condition: Inequality,
    /// Labeled sample size against the truncation level.
    pub labeled_condition: Inequality,
}

impl SampleSizeReport {
    pub fn all_pass(&self) -> bool {
        self.ratio_condition.pass && self.weight_condition.pass && self.labeled_condition.pass
    }
}

/// Evaluates the sample-size conditions of the error bounds. Diagnostic only.
pub fn sample_size_diagnostic(p: &SampleSizeInputs) -> Result<SampleSizeReport> {
    let nu = crate::dre::truncation_exponent(p.iota, p.m)?;
    let k2 = p.kappa_sq;
    let (ls, lt) = (p.norm_source, p.norm_target);
    let n_theta = p.n_theta as f64;
    let n_f = p.n_f as f64;

    let varsigma = 1.0 / (2.0 * p.iota + 1.0);
    let pow = 2.0 / (1.0 - varsigma);
    let inner = 1.0 + (6.0 * k2 * (ls + lt + 1.0) / (ls.min(lt) * p.delta)).ln() + pow;
    let ratio_condition = Inequality::new(n_theta, 85.0 * k2 * inner.powf(pow));

    let rate = p.iota / (2.0 * p.iota + 1.0) * smoothness_factor(p.r);
    let weight_rhs = 2.0 * k2 / lt.min(1.0)
        * ((1.0 - p.alpha).powf(-1.5) * p.delta_phi + p.xi_m.sqrt())
        * (36.0 / p.delta).ln()
        * n_f.powf(p.s);
    let weight_condition = Inequality::new(n_theta.powf(rate - 2.0 * nu), weight_rhs);

    let labeled_rhs = 14.0
        * k2
        * ((24.0 * k2 * (lt + 2.0) / (lt * p.delta)).ln() + 1.0 + 1.0 / (2.0 * p.r))
        * n_theta.powf(2.0 * nu);
    let labeled_condition =
        Inequality::new(n_f.powf(1.0 / (2.0 * p.r + 1.0) - p.s), labeled_rhs);

    Ok(SampleSizeReport {
        ratio_condition,
        weight_condition,
        labeled_condition,
    })
}
