//! Row-major point sets of a fixed dimension.

use crate::error::{Error, Result};

/// A list of `len()` points in `R^dim`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", 0.0, "must be at least 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "point coordinate",
                index: index / dim,
            });
        }
        Ok(Self { dim, data })
    }

    /// One-dimensional points. Panics on non-finite input; use [`Points::new`]
    /// for fallible construction.
    pub fn from_scalars(xs: Vec<f64>) -> Self {
        Self::new(1, xs).expect("scalar points must be finite")
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty("rows"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim: dim.max(1),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// First coordinate of every point.
    pub fn first_coords(&self) -> Vec<f64> {
        self.iter().map(|p| p[0]).collect()
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Points) -> Result<Points> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Points {
            dim: self.dim,
            data,
        })
    }

    /// Keeps the points whose index satisfies `keep`.
    pub fn select(&self, mut keep: impl FnMut(usize) -> bool) -> Points {
        let mut data = Vec::new();
        for (i, p) in self.iter().enumerate() {
            if keep(i) {
                data.extend_from_slice(p);
            }
        }
        Points {
            dim: self.dim,
            data,
        }
    }
}
