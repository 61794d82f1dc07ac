//! Discretised Brownian motion on a uniform grid.
//!
//! A [`BrownianPath`] stores i.i.d. Gaussian increments with variance equal
//! to the grid step.  Paths are reproducible: path `p` of seed `s` is always
//! the same, independent of how many other paths are generated, because the
//! increments come from the counter-based generator keyed by `(s, p)`.

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// One sampled Brownian path (possibly multidimensional) on a uniform grid.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    dim: usize,
    grid_step: f64,
    /// Flat increments, step-major: `increments[k * dim + c]`.
    increments: Vec<f64>,
}

impl BrownianPath {
    /// Sample path `path_index` of the stream identified by `seed`.
    pub fn sample(seed: u64, path_index: u64, dim: usize, grid_step: f64, n_steps: usize) -> Self {
        assert!(dim >= 1, "Brownian dimension must be >= 1");
        assert!(grid_step > 0.0, "Brownian grid step must be positive");
        let rng = CounterRng::new(seed, path_index);
        let sd = grid_step.sqrt();
        let mut increments = vec![0.0; n_steps * dim];
        rng.gaussian_fill(0, &mut increments);
        for v in &mut increments {
            *v *= sd;
        }
        Self { dim, grid_step, increments }
    }

    /// Build a path directly from raw increments (used by tests and by
    /// deterministic constructions).
    pub fn from_increments(dim: usize, grid_step: f64, increments: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("Brownian dimension must be >= 1".into()));
        }
        if !(grid_step > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Brownian grid step must be positive, got {grid_step}"
            )));
        }
        if increments.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                context: "Brownian increments",
                expected: dim,
                got: increments.len() % dim,
            });
        }
        Ok(Self { dim, grid_step, increments })
    }

    /// Number of grid steps.
    pub fn n_steps(&self) -> usize {
        self.increments.len() / self.dim
    }

    /// Value dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Grid step.
    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    /// Increment over step `k` (from node `k` to node `k + 1`).
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.dim..(k + 1) * self.dim]
    }

    /// All increments, flat and step-major.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Path values at the `n_steps + 1` grid nodes (starting from 0),
    /// flat and node-major.
    pub fn partial_sums(&self) -> Vec<f64> {
        let n = self.n_steps();
        let mut out = vec![0.0; (n + 1) * self.dim];
        for k in 0..n {
            let (prev, inc) = (k * self.dim, k * self.dim);
            for c in 0..self.dim {
                out[(k + 1) * self.dim + c] = out[prev + c] + self.increments[inc + c];
            }
        }
        out
    }

    /// The same Brownian path viewed on a grid coarsened by `factor`
    /// (adjacent increments are summed).  Requires `factor` to divide the
    /// step count.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_steps() % factor != 0 {
            return Err(Error::InvalidInput(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.n_steps()
            )));
        }
        let n_coarse = self.n_steps() / factor;
        let mut increments = vec![0.0; n_coarse * self.dim];
        for k in 0..n_coarse {
            for j in 0..factor {
                let src = (k * factor + j) * self.dim;
                for c in 0..self.dim {
                    increments[k * self.dim + c] += self.increments[src + c];
                }
            }
        }
        Ok(Self { dim: self.dim, grid_step: self.grid_step * factor as f64, increments })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_reproducible_per_path() {
        let a = BrownianPath::sample(9, 4, 1, 0.01, 100);
        let b = BrownianPath::sample(9, 4, 1, 0.01, 100);
        assert_eq!(a.increments(), b.increments());
        let c = BrownianPath::sample(9, 5, 1, 0.01, 100);
        assert_ne!(a.increments(), c.increments());
    }

    #[test]
    fn increment_variance_matches_the_grid_step() {
        let h = 0.02;
        let n = 50_000;
        let path = BrownianPath::sample(3, 0, 1, h, n);
        let mean: f64 = path.increments().iter().sum::<f64>() / n as f64;
        let var: f64 = path.increments().iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * (h / n as f64).sqrt(), "mean {mean}");
        // Relative SE of the variance estimate is sqrt(2/n) ~ 0.6%.
        assert!((var / h - 1.0).abs() < 0.03, "var ratio {}", var / h);
    }

    #[test]
    fn quadratic_variation_approximates_elapsed_time() {
        let path = BrownianPath::sample(17, 2, 1, 1e-3, 1000);
        let qv: f64 = path.increments().iter().map(|x| x * x).sum();
        assert!((qv - 1.0).abs() < 0.2, "qv {qv}");
    }

    #[test]
    fn partial_sums_start_at_zero_and_telescope() {
        let path = BrownianPath::sample(1, 0, 2, 0.1, 10);
        let vals = path.partial_sums();
        assert_eq!(vals.len(), 22);
        assert_eq!(&vals[..2], &[0.0, 0.0]);
        for k in 0..10 {
            for c in 0..2 {
                let diff = vals[(k + 1) * 2 + c] - vals[k * 2 + c];
                assert!((diff - path.increment(k)[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn coarsening_preserves_node_values() {
        let fine = BrownianPath::sample(21, 7, 1, 0.005, 64);
        let coarse = fine.coarsen(4).unwrap();
        assert_eq!(coarse.n_steps(), 16);
        assert!((coarse.grid_step() - 0.02).abs() < 1e-15);
        let fv = fine.partial_sums();
        let cv = coarse.partial_sums();
        for k in 0..=16 {
            assert!((cv[k] - fv[4 * k]).abs() < 1e-12);
        }
    }

    #[test]
    fn coarsening_requires_divisible_step_count() {
        let path = BrownianPath::sample(0, 0, 1, 0.1, 10);
        assert!(path.coarsen(3).is_err());
        assert!(path.coarsen(0).is_err());
    }
}
