//! Bounded translation-invariant Mercer kernels and Gram matrices.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::Points;

/// A bounded kernel. Both shipped families have `K(x, x) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `exp(-|x - y|^2 / (2 h^2))`
    Gaussian { bandwidth: f64 },
    /// `exp(-|x - y| / h)`
    Laplacian { bandwidth: f64 },
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::Gaussian { bandwidth }.validated()
    }

    pub fn laplacian(bandwidth: f64) -> Result<Self> {
        Self::Laplacian { bandwidth }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let bw = self.bandwidth();
        if !(bw.is_finite() && bw > 0.0) {
            return Err(Error::invalid("bandwidth", bw, "must be positive and finite"));
        }
        Ok(self)
    }

    pub fn bandwidth(&self) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth } | KernelSpec::Laplacian { bandwidth } => bandwidth,
        }
    }

    /// The uniform bound `sup_x K(x, x)`.
    pub fn kappa_sq(&self) -> f64 {
        1.0
    }

    /// Kernel value as a function of the squared Euclidean distance.
    #[inline]
    pub fn profile(&self, sq_dist: f64) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth } => (-sq_dist / (2.0 * bandwidth * bandwidth)).exp(),
            KernelSpec::Laplacian { bandwidth } => (-sq_dist.sqrt() / bandwidth).exp(),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.profile(sq)
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Gaussian { bandwidth: 0.2 }
    }
}

/// Uniform diagonal bound of `kernel`.
pub fn kappa_sq(kernel: &KernelSpec) -> f64 {
    kernel.kappa_sq()
}

/// `G[i][j] = K(rows_i, cols_j)`.
pub fn gram(kernel: &KernelSpec, rows: &Points, cols: &Points) -> Result<Mat<f64>> {
    if rows.dim() != cols.dim() {
        return Err(Error::DimensionMismatch {
            expected: rows.dim(),
            found: cols.dim(),
        });
    }
    Ok(Mat::from_fn(rows.len(), cols.len(), |i, j| {
        kernel.eval(rows.row(i), cols.row(j))
    }))
}

/// Gram matrix of a point set with itself; exactly symmetric.
pub fn gram_symmetric(kernel: &KernelSpec, points: &Points) -> Mat<f64> {
    let n = points.len();
    let mut g = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        let pj = points.row(j);
        for i in j..n {
            let v = kernel.eval(points.row(i), pj);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}
