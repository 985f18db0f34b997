//! Weighted empirical integral operators in finite form.
//!
//! For points `x_1..x_n` with weights `w_k >= 0`, the operator
//! `L f = sum_k w_k f(x_k) K(., x_k)` maps the kernel expansion with
//! coefficients `c` to the one with coefficients `W G c`. Spectral functions
//! are computed through the symmetric matrix `B = W^(1/2) G W^(1/2)`, using
//! `g(W G) = W^(1/2) g(B) W^(-1/2)` on the range of `W`.

use std::sync::OnceLock;

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::{FilterFamily, FilterSpec};
use crate::kernels::{gram_symmetric, KernelSpec};
use crate::points::Points;

/// Eigenvalues below `CLIP_RELATIVE * lambda_max` are treated as zero.
pub const CLIP_RELATIVE: f64 = 1e-10;

/// How the symmetric operator matrix is represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factorization {
    /// Full `n x n` Gram and symmetrized matrices with a dense eigensolver.
    Dense,
    /// Pivoted Cholesky `B ~ F F^T`, stopped once the trace of the neglected
    /// part is at most `rel_tol * trace(B)`.
    LowRank { rel_tol: f64, max_rank: usize },
    /// `Dense` up to `dense_limit` points, `LowRank` with default settings
    /// beyond.
    Auto { dense_limit: usize },
}

impl Factorization {
    pub const DEFAULT_DENSE_LIMIT: usize = 4000;

    pub fn low_rank() -> Self {
        Factorization::LowRank {
            rel_tol: 1e-12,
            max_rank: 3000,
        }
    }

    fn resolve(self, n: usize) -> Self {
        match self {
            Factorization::Auto { dense_limit } if n <= dense_limit => Factorization::Dense,
            Factorization::Auto { .. } => Factorization::low_rank(),
            other => other,
        }
    }
}

impl Default for Factorization {
    fn default() -> Self {
        Factorization::Auto {
            dense_limit: Self::DEFAULT_DENSE_LIMIT,
        }
    }
}

/// Eigenpairs of `B`, eigenvalues descending and clipped at zero.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// `n x k` orthonormal eigenvectors, one column per entry of `values`.
    pub vectors: Mat<f64>,
    /// Smallest eigenvalue before clipping.
    pub raw_min: f64,
    /// Whether `vectors` spans the whole space. When it does not, the
    /// orthogonal complement belongs to eigenvalue zero.
    pub complete: bool,
}

impl Spectrum {
    pub fn lambda_max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

#[derive(Debug)]
enum Form {
    Dense { gram: Mat<f64>, sym: Mat<f64> },
    LowRank { factor: Mat<f64>, residual_trace: f64 },
}

/// Runs the dense factorizations single-threaded, so that parallelism is
/// left to the caller (for example one replication per worker).
pub fn use_sequential_linalg() {
    faer::set_global_parallelism(faer::Par::Seq);
}

/// Finite-sample weighted integral operator.
#[derive(Debug)]
pub struct OperatorRep {
    points: Points,
    weights: Vec<f64>,
    sqrt_w: Vec<f64>,
    kernel: KernelSpec,
    form: Form,
    spectrum: OnceLock<std::result::Result<Spectrum, String>>,
}

/// Dense operator for `points` with `weights`.
pub fn build_operator(points: &Points, weights: &[f64], kernel: &KernelSpec) -> Result<OperatorRep> {
    OperatorRep::build(points.clone(), weights.to_vec(), *kernel, Factorization::Dense)
}

impl OperatorRep {
    pub fn build(
        points: Points,
        weights: Vec<f64>,
        kernel: KernelSpec,
        factorization: Factorization,
    ) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "points and weights",
                left: points.len(),
                right: weights.len(),
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
        let kernel = kernel.validated()?;
        let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let n = points.len();

        let rep = match factorization.resolve(n) {
            Factorization::Dense | Factorization::Auto { .. } => {
                let gram = gram_symmetric(&kernel, &points);
                let sym = Mat::from_fn(n, n, |i, j| sqrt_w[i] * gram[(i, j)] * sqrt_w[j]);
                OperatorRep {
                    points,
                    weights,
                    sqrt_w,
                    kernel,
                    form: Form::Dense { gram, sym },
                    spectrum: OnceLock::new(),
                }
            }
            Factorization::LowRank { rel_tol, max_rank } => {
                let (factor, residual_trace) =
                    pivoted_cholesky(&points, &sqrt_w, &kernel, rel_tol, max_rank)?;
                let spectrum = low_rank_spectrum(&factor, n)?;
                let rep = OperatorRep {
                    points,
                    weights,
                    sqrt_w,
                    kernel,
                    form: Form::LowRank {
                        factor,
                        residual_trace,
                    },
                    spectrum: OnceLock::new(),
                };
                let _ = rep.spectrum.set(Ok(spectrum));
                rep
            }
        };
        Ok(rep)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.form, Form::Dense { .. })
    }

    /// `G`, when stored.
    pub fn gram(&self) -> Option<MatRef<'_, f64>> {
        match &self.form {
            Form::Dense { gram, .. } => Some(gram.as_ref()),
            Form::LowRank { .. } => None,
        }
    }

    /// `B = W^(1/2) G W^(1/2)`, when stored.
    pub fn sym(&self) -> Option<MatRef<'_, f64>> {
        match &self.form {
            Form::Dense { sym, .. } => Some(sym.as_ref()),
            Form::LowRank { .. } => None,
        }
    }

    /// Trace of the part of `B` dropped by a low-rank factorization.
    pub fn residual_trace(&self) -> f64 {
        match &self.form {
            Form::Dense { .. } => 0.0,
            Form::LowRank { residual_trace, .. } => *residual_trace,
        }
    }

    /// Eigendecomposition of `B`, computed on first use.
    pub fn spectrum(&self) -> Result<&Spectrum> {
        let entry = self.spectrum.get_or_init(|| match &self.form {
            Form::Dense { sym, .. } => dense_spectrum(sym.as_ref()),
            Form::LowRank { factor, .. } => {
                low_rank_spectrum(factor, self.len()).map_err(|e| e.to_string())
            }
        });
        entry.as_ref().map_err(|msg| Error::Linalg(msg.clone()))
    }

    pub fn lambda_max(&self) -> Result<f64> {
        Ok(self.spectrum()?.lambda_max())
    }

    /// Coefficient action `c -> W G c` of the operator.
    pub fn action(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs.len())?;
        let n = self.len();
        let gc: Vec<f64> = match &self.form {
            Form::Dense { gram, .. } => (0..n)
                .map(|i| (0..n).map(|j| gram[(i, j)] * coeffs[j]).sum())
                .collect(),
            Form::LowRank { .. } => (0..n)
                .map(|i| {
                    let pi = self.points.row(i);
                    (0..n)
                        .map(|j| self.kernel.eval(pi, self.points.row(j)) * coeffs[j])
                        .sum()
                })
                .collect(),
        };
        Ok(gc.iter().zip(&self.weights).map(|(v, w)| v * w).collect())
    }

    /// Coefficients of `g(L)` applied to the expansion with coefficients `b`.
    ///
    /// Computes `c = W^(1/2) V g(Lambda) V^T W^(1/2)+ b`, where `W^(1/2)+`
    /// maps zero weights to zero. Exact whenever `b` lies in the range of `W`.
    pub fn apply_function<G: Fn(f64) -> f64>(&self, g: G, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b.len())?;
        let spectrum = self.spectrum()?;
        let g_zero = g(0.0);
        if !g_zero.is_finite() {
            return Err(Error::FilterUndefined { eigenvalue: 0.0 });
        }
        let gvals: Vec<f64> = spectrum
            .values
            .iter()
            .map(|&t| {
                let v = g(t);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::FilterUndefined { eigenvalue: t })
                }
            })
            .collect::<Result<_>>()?;

        let y = self.pseudo_sqrt_inverse(b);
        let v = &spectrum.vectors;
        let n = self.len();
        let k = spectrum.values.len();

        let z: Vec<f64> = (0..k)
            .map(|j| (0..n).map(|i| v[(i, j)] * y[i]).sum())
            .collect();
        let mut out = vec![0.0; n];
        for j in 0..k {
            let s = gvals[j] * z[j];
            if s != 0.0 {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += v[(i, j)] * s;
                }
            }
        }
        if !spectrum.complete && g_zero != 0.0 {
            // Complement of span(V) is the zero eigenspace.
            for i in 0..n {
                let proj: f64 = (0..k).map(|j| v[(i, j)] * z[j]).sum();
                out[i] += g_zero * (y[i] - proj);
            }
        }
        Ok(out
            .iter()
            .zip(&self.sqrt_w)
            .map(|(o, s)| o * s)
            .collect())
    }

    /// `g_lambda(L)` applied to the expansion with coefficients `b`.
    ///
    /// Kernel ridge regression on a dense operator is a linear solve with
    /// `B + lambda I` and skips the eigendecomposition.
    pub fn apply_filter(&self, filter: &FilterSpec, b: &[f64]) -> Result<Vec<f64>> {
        match (&self.form, filter.family) {
            (Form::Dense { sym, .. }, FilterFamily::Krr) => {
                self.check_len(b.len())?;
                let n = self.len();
                let mut shifted = sym.clone();
                for i in 0..n {
                    shifted[(i, i)] += filter.lam;
                }
                let llt = shifted
                    .llt(Side::Lower)
                    .map_err(|e| Error::Linalg(format!("{e:?}")))?;
                let y = self.pseudo_sqrt_inverse(b);
                let rhs = Mat::from_fn(n, 1, |i, _| y[i]);
                let z = llt.solve(&rhs);
                Ok((0..n).map(|i| self.sqrt_w[i] * z[(i, 0)]).collect())
            }
            _ => self.apply_function(|t| filter.value(t), b),
        }
    }

    fn pseudo_sqrt_inverse(&self, b: &[f64]) -> Vec<f64> {
        b.iter()
            .zip(&self.sqrt_w)
            .map(|(bi, s)| if *s > 0.0 { bi / s } else { 0.0 })
            .collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::LengthMismatch {
                what: "coefficient vector",
                left: len,
                right: self.len(),
            });
        }
        Ok(())
    }
}

/// Free-function form of [`OperatorRep::apply_function`].
pub fn apply_operator_function<G: Fn(f64) -> f64>(
    rep: &OperatorRep,
    g: G,
    b: &[f64],
) -> Result<Vec<f64>> {
    rep.apply_function(g, b)
}

fn clip_threshold(lambda_max: f64) -> f64 {
    CLIP_RELATIVE * lambda_max.max(0.0)
}

fn dense_spectrum(sym: MatRef<'_, f64>) -> std::result::Result<Spectrum, String> {
    let n = sym.nrows();
    if n == 0 {
        return Ok(Spectrum {
            values: Vec::new(),
            vectors: Mat::zeros(0, 0),
            raw_min: 0.0,
            complete: true,
        });
    }
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| format!("eigendecomposition failed: {e:?}"))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    // faer sorts ascending.
    let raw_min = s[0];
    let lambda_max = s[n - 1];
    let tol = clip_threshold(lambda_max);
    let values = (0..n)
        .rev()
        .map(|i| if s[i] < tol { 0.0 } else { s[i] })
        .collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok(Spectrum {
        values,
        vectors,
        raw_min,
        complete: true,
    })
}

/// Greedy pivoted Cholesky of `B_ij = s_i s_j K(x_i, x_j)`.
fn pivoted_cholesky(
    points: &Points,
    sqrt_w: &[f64],
    kernel: &KernelSpec,
    rel_tol: f64,
    max_rank: usize,
) -> Result<(Mat<f64>, f64)> {
    let n = points.len();
    let mut diag: Vec<f64> = (0..n)
        .map(|i| sqrt_w[i] * sqrt_w[i] * kernel.eval(points.row(i), points.row(i)))
        .collect();
    let trace0: f64 = diag.iter().sum();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut residual = trace0;

    while residual > rel_tol * trace0 && trace0 > 0.0 {
        if cols.len() == max_rank.min(n) {
            return Err(Error::Linalg(format!(
                "pivoted Cholesky reached rank {} with residual trace {residual:e}",
                cols.len()
            )));
        }
        let (p, &pivot) = diag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        if pivot <= 0.0 {
            break;
        }
        let root = pivot.sqrt();
        let xp = points.row(p);
        let sp = sqrt_w[p];
        let mut col: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                if sqrt_w[i] == 0.0 {
                    0.0
                } else {
                    sqrt_w[i] * sp * kernel.eval(points.row(i), xp)
                }
            })
            .collect();
        for prev in &cols {
            let lp = prev[p];
            if lp != 0.0 {
                for (c, l) in col.iter_mut().zip(prev) {
                    *c -= l * lp;
                }
            }
        }
        for c in col.iter_mut() {
            *c /= root;
        }
        for (d, c) in diag.iter_mut().zip(&col) {
            *d = (*d - c * c).max(0.0);
        }
        diag[p] = 0.0;
        cols.push(col);
        residual = diag.iter().sum();
    }

    let k = cols.len();
    Ok((Mat::from_fn(n, k, |i, j| cols[j][i]), residual))
}

/// Nonzero eigenpairs of `F F^T` from the small Gram matrix `F^T F`.
fn low_rank_spectrum(factor: &Mat<f64>, n: usize) -> Result<Spectrum> {
    let k = factor.ncols();
    if k == 0 {
        return Ok(Spectrum {
            values: Vec::new(),
            vectors: Mat::zeros(n, 0),
            raw_min: 0.0,
            complete: n == 0,
        });
    }
    let small = factor.transpose() * factor;
    let evd = small
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let lambda_max = s[k - 1];
    let tol = clip_threshold(lambda_max);
    let keep: Vec<usize> = (0..k).rev().filter(|&i| s[i] >= tol && s[i] > 0.0).collect();
    let values: Vec<f64> = keep.iter().map(|&i| s[i]).collect();
    // V = F U S^(-1/2)
    let fu = factor * u;
    let vectors = Mat::from_fn(n, keep.len(), |i, j| fu[(i, keep[j])] / values[j].sqrt());
    Ok(Spectrum {
        complete: values.len() == n,
        values,
        vectors,
        raw_min: s[0].min(0.0),
    })
}

/// `f(x) = sum_k c_k K(x, x_k)`.
#[derive(Debug, Clone)]
pub struct KernelExpansion {
    pub points: Points,
    pub coeffs: Vec<f64>,
    pub kernel: KernelSpec,
}

impl KernelExpansion {
    pub fn new(points: Points, coeffs: Vec<f64>, kernel: KernelSpec) -> Result<Self> {
        if points.len() != coeffs.len() {
            return Err(Error::LengthMismatch {
                what: "expansion points and coefficients",
                left: points.len(),
                right: coeffs.len(),
            });
        }
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                what: "expansion coefficient",
                index,
            });
        }
        Ok(Self {
            points,
            coeffs,
            kernel,
        })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval_one(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(p, c)| c * self.kernel.eval(x, p))
            .sum()
    }

    pub fn evaluate(&self, queries: &Points) -> Result<Vec<f64>> {
        if !self.points.is_empty() && queries.dim() != self.points.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.points.dim(),
                found: queries.dim(),
            });
        }
        let active: Vec<usize> = (0..self.len()).filter(|&k| self.coeffs[k] != 0.0).collect();
        if self.points.dim() == 1 {
            let xs: Vec<f64> = active.iter().map(|&k| self.points.row(k)[0]).collect();
            let cs: Vec<f64> = active.iter().map(|&k| self.coeffs[k]).collect();
            let kernel = self.kernel;
            return Ok(queries
                .as_slice()
                .par_iter()
                .with_min_len(64)
                .map(|&q| {
                    xs.iter()
                        .zip(&cs)
                        .map(|(x, c)| c * kernel.profile((q - x) * (q - x)))
                        .sum()
                })
                .collect());
        }
        let rows: Vec<&[f64]> = queries.iter().collect();
        Ok(rows
            .par_iter()
            .with_min_len(64)
            .map(|q| {
                active
                    .iter()
                    .map(|&k| self.coeffs[k] * self.kernel.eval(q, self.points.row(k)))
                    .sum()
            })
            .collect())
    }
}

/// Free-function form of [`KernelExpansion::evaluate`].
pub fn evaluate_expansion(expansion: &KernelExpansion, queries: &Points) -> Result<Vec<f64>> {
    expansion.evaluate(queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{gauss_solve, max_rel_diff};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalars(xs: &[f64]) -> Points {
        Points::from_scalars(xs.to_vec())
    }

    fn gauss(bw: f64) -> KernelSpec {
        KernelSpec::gaussian(bw).unwrap()
    }

    #[test]
    fn single_point_operator() {
        let rep = build_operator(&scalars(&[0.3]), &[1.0], &gauss(1.0)).unwrap();
        assert_eq!(rep.sym().unwrap()[(0, 0)], 1.0);
        let c = rep.apply_function(|t| t, &[1.0]).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coincident_pair_spectrum() {
        let rep = build_operator(&scalars(&[0.5, 0.5]), &[0.5, 0.5], &gauss(1.0)).unwrap();
        let b = rep.sym().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((b[(i, j)] - 0.5).abs() < 1e-15);
            }
        }
        let s = rep.spectrum().unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-14);
        assert_eq!(s.values[1], 0.0);
    }

    #[test]
    fn zero_weights_give_zero_operator() {
        let rep = build_operator(&scalars(&[0.0, 0.4, 0.9]), &[0.0; 3], &gauss(0.2)).unwrap();
        assert!(rep.spectrum().unwrap().values.iter().all(|&v| v == 0.0));
        let c = rep.apply_function(|t| 1.0 / (t + 0.1), &[0.0; 3]).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_weights() {
        let pts = scalars(&[0.0, 1.0]);
        assert!(matches!(
            build_operator(&pts, &[1.0, -0.1], &gauss(1.0)),
            Err(Error::NegativeWeight { index: 1, .. })
        ));
        assert!(matches!(
            build_operator(&pts, &[f64::NAN, 1.0], &gauss(1.0)),
            Err(Error::NonFinite { index: 0, .. })
        ));
        assert!(build_operator(&pts, &[1.0], &gauss(1.0)).is_err());
    }

    #[test]
    fn identity_function_is_identity_on_range_of_w() {
        let pts = scalars(&[0.1, 0.2, 0.5, 0.8]);
        let w = [0.3, 0.0, 0.2, 0.5];
        let rep = build_operator(&pts, &w, &gauss(0.3)).unwrap();
        let b: Vec<f64> = w.iter().zip([1.0, 7.0, -2.0, 0.5]).map(|(w, a)| w * a).collect();
        let c = rep.apply_function(|_| 1.0, &b).unwrap();
        assert!(max_rel_diff(&c, &b) < 1e-12);
    }

    #[test]
    fn undefined_function_is_reported() {
        let rep = build_operator(&scalars(&[0.0, 1.0]), &[0.5, 0.5], &gauss(1.0)).unwrap();
        let err = rep.apply_function(|t| 1.0 / (t - rep.lambda_max().unwrap()), &[0.5, 0.5]);
        assert!(matches!(err, Err(Error::FilterUndefined { .. })));
    }

    #[test]
    fn resolvent_of_two_point_mixture_matches_hand_solve() {
        // W = diag(1/2, 1/2), G = ones: (WG + mu I) c = (0, 1) has c1 + c2 = 1/(1 + mu).
        for mu in [0.01, 0.1, 1.0] {
            let rep = build_operator(&scalars(&[0.2, 0.2]), &[0.5, 0.5], &gauss(1.0)).unwrap();
            let b = [0.0, 1.0];
            for c in [
                rep.apply_function(|t| 1.0 / (t + mu), &b).unwrap(),
                rep.apply_filter(&FilterSpec::krr(mu).unwrap(), &b).unwrap(),
            ] {
                let exp = KernelExpansion::new(scalars(&[0.2, 0.2]), c, gauss(1.0)).unwrap();
                let v = exp.eval_one(&[0.2]);
                assert!((v - 1.0 / (1.0 + mu)).abs() < 1e-12, "mu={mu} v={v}");
            }
        }
    }

    #[test]
    fn krr_routes_agree_with_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = rng.random_range(2..=30);
            let pts = scalars(&(0..n).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<_>>());
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0) / n as f64).collect();
            let lam = 10f64.powf(rng.random_range(-2.0..0.0));
            let kernel = gauss(0.3);
            let rep = build_operator(&pts, &w, &kernel).unwrap();
            let b: Vec<f64> = w.iter().map(|wi| wi * rng.random_range(-1.0..1.0)).collect();

            let g = rep.gram().unwrap();
            let a: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| w[i] * g[(i, j)] + if i == j { lam } else { 0.0 })
                        .collect()
                })
                .collect();
            let direct = gauss_solve(&a, &b);
            let spectral = rep.apply_function(|t| 1.0 / (t + lam), &b).unwrap();
            let cholesky = rep.apply_filter(&FilterSpec::krr(lam).unwrap(), &b).unwrap();
            assert!(max_rel_diff(&spectral, &direct) < 1e-8);
            assert!(max_rel_diff(&cholesky, &direct) < 1e-8);
        }
    }

    #[test]
    fn appending_zero_weight_point_is_neutral() {
        let kernel = gauss(0.25);
        let pts = scalars(&[0.1, 0.35, 0.6, 0.9]);
        let w = [0.25, 0.25, 0.3, 0.2];
        let rep = build_operator(&pts, &w, &kernel).unwrap();
        let ext_pts = scalars(&[0.1, 0.35, 0.6, 0.9, 0.5]);
        let ext_w = [0.25, 0.25, 0.3, 0.2, 0.0];
        let ext = build_operator(&ext_pts, &ext_w, &kernel).unwrap();

        let a = &rep.spectrum().unwrap().values;
        let b = &ext.spectrum().unwrap().values;
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(b[4].abs() < 1e-10);

        let coef: Vec<f64> = w.iter().map(|wi| wi * 2.0).collect();
        let mut ext_coef = coef.clone();
        ext_coef.push(0.0);
        let g = |t: f64| (-(-t / 0.05f64).exp_m1()) / t.max(1e-300);
        let c = rep.apply_function(g, &coef).unwrap();
        let ce = ext.apply_function(g, &ext_coef).unwrap();
        assert_eq!(ce[4], 0.0);
        assert!(max_rel_diff(&ce[..4], &c) < 1e-10);
    }

    #[test]
    fn low_rank_route_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 300;
        let pts = scalars(&(0..n).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<_>>());
        let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0) / n as f64).collect();
        w[7] = 0.0;
        let kernel = gauss(0.2);
        let dense = OperatorRep::build(pts.clone(), w.clone(), kernel, Factorization::Dense).unwrap();
        let low = OperatorRep::build(pts, w.clone(), kernel, Factorization::low_rank()).unwrap();
        assert!(!low.is_dense());
        assert!(low.spectrum().unwrap().values.len() < 80);
        assert!(low.residual_trace() <= 1e-12 * w.iter().sum::<f64>());
        assert!((dense.lambda_max().unwrap() - low.lambda_max().unwrap()).abs() < 1e-12);

        let b: Vec<f64> = w.iter().map(|wi| wi * rng.random_range(-1.0..1.0)).collect();
        for filter in [
            FilterSpec::krr(0.01).unwrap(),
            FilterSpec::gradient_flow(0.01, 2.0).unwrap(),
        ] {
            let a = dense.apply_filter(&filter, &b).unwrap();
            let c = low.apply_filter(&filter, &b).unwrap();
            let pa = KernelExpansion::new(dense.points().clone(), a, kernel).unwrap();
            let pc = KernelExpansion::new(low.points().clone(), c, kernel).unwrap();
            let q = scalars(&(0..50).map(|i| i as f64 / 49.0).collect::<Vec<_>>());
            let va = pa.evaluate(&q).unwrap();
            let vc = pc.evaluate(&q).unwrap();
            assert!(max_rel_diff(&vc, &va) < 1e-6, "{:?}", filter.family);
        }
    }

    #[test]
    fn low_rank_rank_limit_is_an_error() {
        let pts = scalars(&(0..50).map(|i| i as f64).collect::<Vec<_>>());
        let w = vec![1.0 / 50.0; 50];
        let err = OperatorRep::build(
            pts,
            w,
            gauss(0.01),
            Factorization::LowRank {
                rel_tol: 1e-12,
                max_rank: 10,
            },
        );
        assert!(matches!(err, Err(Error::Linalg(_))));
    }

    #[test]
    fn expansion_examples() {
        let k = gauss(1.0);
        let e = KernelExpansion::new(scalars(&[0.0, 1.0]), vec![1.0, 1.0], k).unwrap();
        let v = evaluate_expansion(&e, &scalars(&[0.0])).unwrap();
        assert!((v[0] - (1.0 + (-0.5f64).exp())).abs() < 1e-15);
        assert!((v[0] - 1.60653).abs() < 1e-5);
        let zero = KernelExpansion::new(scalars(&[0.0, 1.0]), vec![0.0, 0.0], k).unwrap();
        assert_eq!(zero.evaluate(&scalars(&[0.3, 9.0])).unwrap(), vec![0.0, 0.0]);
        let one = KernelExpansion::new(scalars(&[0.4]), vec![1.0], k).unwrap();
        assert_eq!(one.evaluate(&scalars(&[0.4])).unwrap(), vec![1.0]);
        assert!(e.evaluate(&Points::new(2, vec![0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn multivariate_expansion_matches_pointwise() {
        let k = KernelSpec::laplacian(0.7).unwrap();
        let pts = Points::new(2, vec![0.0, 0.0, 1.0, 0.5, -0.3, 0.2]).unwrap();
        let e = KernelExpansion::new(pts, vec![0.5, -1.0, 2.0], k).unwrap();
        let q = Points::new(2, vec![0.1, 0.1, 2.0, -1.0]).unwrap();
        let v = e.evaluate(&q).unwrap();
        for (i, row) in q.iter().enumerate() {
            assert!((v[i] - e.eval_one(row)).abs() < 1e-15);
        }
    }
}
