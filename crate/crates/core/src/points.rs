//! Point sets stored row-major.

use crate::error::{Error, Result};

/// `n` points in `dim` dimensions, row-major. All coordinates are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if data.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into points of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate at point {}, component {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("empty point sequence"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, dim)
    }

    /// One-dimensional points from scalars.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), 1)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Gathers the given rows (duplicates allowed) into a new point set.
    pub fn select(&self, indices: &[usize]) -> Points {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Points { data, dim: self.dim }
    }

    /// Concatenates two point sets of equal dimension.
    pub fn concat(&self, other: &Points) -> Result<Points> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Points { data, dim: self.dim })
    }
}

/// A named sample of points, optionally standardized column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub points: Points,
    pub name: String,
    pub standardized: bool,
}

impl Dataset {
    pub fn new(points: Points, name: impl Into<String>) -> Self {
        Self { points, name: name.into(), standardized: false }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Centers every column and scales it to unit population variance.
    ///
    /// A constant column cannot be reduced and is rejected.
    pub fn standardize(mut self) -> Result<Self> {
        let n = self.points.len();
        if n == 0 {
            return Err(Error::invalid("cannot standardize an empty dataset"));
        }
        let dim = self.points.dim();
        let mut data = self.points.data;
        for col in 0..dim {
            let mean = data.iter().skip(col).step_by(dim).sum::<f64>() / n as f64;
            let var = data
                .iter()
                .skip(col)
                .step_by(dim)
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / n as f64;
            if !(var > 0.0) {
                return Err(Error::invalid(format!("column {col} is constant")));
            }
            let std = var.sqrt();
            for v in data.iter_mut().skip(col).step_by(dim) {
                *v = (*v - mean) / std;
            }
        }
        self.points = Points { data, dim };
        self.standardized = true;
        Ok(self)
    }
}
