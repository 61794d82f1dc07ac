//! History segments: piecewise-linear functions on `[-tau, 0]`.
//!
//! A [`Segment`] stores values of a path restricted to the delay window
//! `[-tau, 0]` on a uniform grid and interpolates linearly between nodes.
//! All functionals in this crate consume segments, and the solver extracts a
//! segment of the partially-built path at every node it processes.

use crate::error::{Error, Result};

/// Relative tolerance used when checking that one step size divides another.
pub(crate) const GRID_REL_TOL: f64 = 1e-9;

/// A vector-valued piecewise-linear function on `[-tau, 0]`.
///
/// Values are stored row-major: node `j` (at abscissa `-tau + j*h`) occupies
/// `values[j*dim .. (j+1)*dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    tau: f64,
    grid_step: f64,
    dim: usize,
    values: Vec<f64>,
}

/// Round `x` to the nearest integer and complain if it is not close to one.
pub(crate) fn exact_steps(x: f64, h: f64, what: &str) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!(
            "{what}: grid step must be positive and finite, got {h}"
        )));
    }
    let ratio = x / h;
    let n = ratio.round();
    if n < 0.0 || (ratio - n).abs() > GRID_REL_TOL * (1.0 + ratio.abs()) {
        return Err(Error::InvalidInput(format!(
            "{what}: {x} is not a nonnegative integer multiple of the grid step {h}"
        )));
    }
    Ok(n as usize)
}

impl Segment {
    /// Build a segment from node values sampled on the uniform grid.
    ///
    /// `values[j]` is the (vector) value at `-tau + j*grid_step`; the slice
    /// must contain exactly `tau/grid_step + 1` nodes of common dimension.
    pub fn from_nodes(tau: f64, grid_step: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidInput(format!(
                "segment: delay horizon tau must be positive and finite, got {tau}"
            )));
        }
        let steps = exact_steps(tau, grid_step, "segment")?;
        if values.len() != steps + 1 {
            return Err(Error::InvalidInput(format!(
                "segment: expected {} node values for tau={tau}, step={grid_step}, got {}",
                steps + 1,
                values.len()
            )));
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("segment: dimension must be >= 1".into()));
        }
        let mut flat = Vec::with_capacity(dim * values.len());
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "segment node values",
                    expected: dim,
                    got: v.len(),
                });
            }
            flat.extend_from_slice(v);
        }
        Ok(Self { tau, grid_step, dim, values: flat })
    }

    /// Build a segment from a flat row-major value buffer.
    pub fn from_flat(tau: f64, grid_step: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        let steps = exact_steps(tau, grid_step, "segment")?;
        if dim == 0 {
            return Err(Error::InvalidInput("segment: dimension must be >= 1".into()));
        }
        if values.len() != (steps + 1) * dim {
            return Err(Error::InvalidInput(format!(
                "segment: expected {} values ({} nodes x dim {dim}), got {}",
                (steps + 1) * dim,
                steps + 1,
                values.len()
            )));
        }
        Ok(Self { tau, grid_step, dim, values })
    }

    /// Segment that is constant equal to `value`.
    pub fn constant(tau: f64, grid_step: f64, value: &[f64]) -> Result<Self> {
        let steps = exact_steps(tau, grid_step, "segment")?;
        let mut values = Vec::with_capacity((steps + 1) * value.len());
        for _ in 0..=steps {
            values.extend_from_slice(value);
        }
        Self::from_flat(tau, grid_step, value.len(), values)
    }

    /// Sample a scalar function at the grid nodes of `[-tau, 0]`.
    pub fn from_fn(tau: f64, grid_step: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let steps = exact_steps(tau, grid_step, "segment")?;
        let values = (0..=steps).map(|j| f(-tau + j as f64 * grid_step)).collect();
        Self::from_flat(tau, grid_step, 1, values)
    }

    /// Delay horizon `tau`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Grid step.
    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    /// Dimension of the values.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid nodes (including both endpoints).
    pub fn node_count(&self) -> usize {
        self.values.len() / self.dim
    }

    /// Value at node `j` (abscissa `-tau + j*grid_step`).
    pub fn node(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// Flat row-major view of all node values.
    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    /// Evaluate by linear interpolation at `s` in `[-tau, 0]`.
    ///
    /// The result is written into `out` (which must have length `dim`).
    /// Abscissae outside the window by more than a grid-rounding tolerance
    /// are rejected.
    pub fn eval_into(&self, s: f64, out: &mut [f64]) -> Result<()> {
        if out.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "segment evaluation output",
                expected: self.dim,
                got: out.len(),
            });
        }
        let slack = GRID_REL_TOL * (1.0 + self.tau);
        if s < -self.tau - slack || s > slack {
            return Err(Error::InvalidInput(format!(
                "segment: abscissa {s} outside [-{}, 0]",
                self.tau
            )));
        }
        let pos = ((s + self.tau) / self.grid_step).clamp(0.0, (self.node_count() - 1) as f64);
        let j = (pos.floor() as usize).min(self.node_count() - 2);
        let w = pos - j as f64;
        let a = self.node(j);
        let b = self.node(j + 1);
        for k in 0..self.dim {
            out[k] = a[k] + w * (b[k] - a[k]);
        }
        Ok(())
    }

    /// Evaluate by linear interpolation, allocating the result.
    pub fn eval(&self, s: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(s, &mut out)?;
        Ok(out)
    }

    /// Scalar evaluation shortcut for one-dimensional segments.
    pub fn eval_scalar(&self, s: f64) -> Result<f64> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch {
                context: "scalar segment evaluation",
                expected: 1,
                got: self.dim,
            });
        }
        let mut out = [0.0];
        self.eval_into(s, &mut out)?;
        Ok(out[0])
    }

    /// Euclidean norm of the value at node `j`.
    pub fn node_norm(&self, j: usize) -> f64 {
        self.node(j).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Supremum over `[-tau, 0]` of the Euclidean norm.
    ///
    /// For a piecewise-linear function the norm is convex on every cell, so
    /// the supremum is attained at a grid node.
    pub fn sup_norm(&self) -> f64 {
        (0..self.node_count()).map(|j| self.node_norm(j)).fold(0.0, f64::max)
    }

    /// Supremum of the Euclidean norm of `self - other` (same grid required).
    pub fn sup_norm_diff(&self, other: &Segment) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                context: "segment difference",
                expected: self.dim,
                got: other.dim,
            });
        }
        if self.values.len() != other.values.len()
            || (self.tau - other.tau).abs() > GRID_REL_TOL * (1.0 + self.tau)
        {
            return Err(Error::InvalidInput(
                "segment difference requires identical grids".into(),
            ));
        }
        let mut best = 0.0f64;
        for j in 0..self.node_count() {
            let a = self.node(j);
            let b = other.node(j);
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.max(d.sqrt());
        }
        Ok(best)
    }

    /// Replace the stored values without reallocating (same length required).
    pub(crate) fn overwrite_flat(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.values.len());
        self.values.copy_from_slice(values);
    }
}
