//! Problem statements and Monte Carlo ensembles.
//!
//! A [`NeutralProblem`] bundles the three functionals of the equation
//! `d(X(t) - D(X_t)) = f(X_t) dt + g(X_t) dB(t)` with the deterministic
//! initial segment.  [`simulate_ensemble`] solves many independent driving
//! paths in parallel; each path is reproducible from `(seed, path_index)`
//! alone, so ensembles of different sizes agree on their common prefix.

use crate::brownian::BrownianPath;
use crate::error::{Error, Result};
use crate::functional::FunctionalSpec;
use crate::picard::{solve, PicardOptions, SolutionPath, SolveDiagnostics};
use crate::segment::Segment;
use rayon::prelude::*;

/// The data of one stochastic neutral equation.
#[derive(Debug, Clone)]
pub struct NeutralProblem {
    neutral: FunctionalSpec,
    drift: FunctionalSpec,
    diffusion: Vec<FunctionalSpec>,
    initial: Segment,
}

impl NeutralProblem {
    /// Assemble a problem, checking that all pieces share one delay horizon
    /// and one value dimension.
    ///
    /// `diffusion` holds one functional per driving Brownian component
    /// (empty for deterministic equations).
    pub fn new(
        neutral: FunctionalSpec,
        drift: FunctionalSpec,
        diffusion: Vec<FunctionalSpec>,
        initial: Segment,
    ) -> Result<Self> {
        let tau = initial.tau();
        let dim = initial.dim();
        let tol = 1e-12 * (1.0 + tau);
        for (name, spec) in std::iter::once(("neutral functional", &neutral))
            .chain(std::iter::once(("drift functional", &drift)))
            .chain(diffusion.iter().map(|s| ("diffusion functional", s)))
        {
            if (spec.tau() - tau).abs() > tol {
                return Err(Error::InvalidInput(format!(
                    "{name}: delay horizon {} differs from the initial segment's {}",
                    spec.tau(),
                    tau
                )));
            }
            if spec.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "problem functional dimension",
                    expected: dim,
                    got: spec.dim(),
                });
            }
        }
        Ok(Self { neutral, drift, diffusion, initial })
    }

    /// The neutral functional `D`.
    pub fn neutral(&self) -> &FunctionalSpec {
        &self.neutral
    }

    /// The drift functional `f`.
    pub fn drift(&self) -> &FunctionalSpec {
        &self.drift
    }

    /// The diffusion columns `g` (one per Brownian component).
    pub fn diffusion(&self) -> &[FunctionalSpec] {
        &self.diffusion
    }

    /// The initial segment on `[-tau, 0]`.
    pub fn initial(&self) -> &Segment {
        &self.initial
    }

    /// Value dimension `d`.
    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    /// Delay horizon `tau`.
    pub fn tau(&self) -> f64 {
        self.initial.tau()
    }

    /// Solver grid step (the initial segment's grid).
    pub fn grid_step(&self) -> f64 {
        self.initial.grid_step()
    }

    /// Number of driving Brownian components.
    pub fn noise_dim(&self) -> usize {
        self.diffusion.len()
    }

    /// Common Lipschitz constant of drift and diffusion with respect to the
    /// segment sup-norm (diffusion columns combine in Frobenius norm).
    pub fn lipschitz_k(&self) -> f64 {
        let g2: f64 = self.diffusion.iter().map(|c| c.lipschitz_bound().powi(2)).sum();
        self.drift.lipschitz_bound().max(g2.sqrt())
    }
}

/// A collection of solution paths driven by independent Brownian paths.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    seed: u64,
    paths: Vec<SolutionPath>,
    diagnostics: Vec<SolveDiagnostics>,
}

impl PathEnsemble {
    /// Number of paths.
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Seed the driving noise was drawn from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Path `i` (driven by noise stream `i` of the seed).
    pub fn path(&self, i: usize) -> &SolutionPath {
        &self.paths[i]
    }

    /// All paths.
    pub fn paths(&self) -> &[SolutionPath] {
        &self.paths
    }

    /// Per-path solver diagnostics.
    pub fn diagnostics(&self) -> &[SolveDiagnostics] {
        &self.diagnostics
    }

    /// Grid times shared by all paths (empty ensemble gives an empty list).
    pub fn times(&self) -> Vec<f64> {
        match self.paths.first() {
            Some(p) => (0..p.node_count()).map(|k| p.time(k)).collect(),
            None => Vec::new(),
        }
    }

    /// Monte Carlo estimate of `E |X(t)|^p` at every grid node, with the
    /// standard error of each mean.
    pub fn moment_curve(&self, p: f64) -> Vec<MomentPoint> {
        let n = self.n_paths();
        assert!(n > 1, "moment curve needs at least two paths");
        let nodes = self.paths[0].node_count();
        let mut out = Vec::with_capacity(nodes);
        let mut values = vec![0.0; n];
        for k in 0..nodes {
            for (v, path) in values.iter_mut().zip(&self.paths) {
                *v = path.norm_at(k).powf(p);
            }
            let mean = values.iter().sum::<f64>() / n as f64;
            // Two-pass variance: the textbook one-pass form cancels
            // catastrophically for deterministic ensembles.
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            out.push(MomentPoint {
                t: self.paths[0].time(k),
                mean,
                se: (var / (n - 1) as f64).sqrt(),
            });
        }
        out
    }
}

/// One point of a Monte Carlo moment curve.
#[derive(Debug, Clone, Copy)]
pub struct MomentPoint {
    /// Grid time.
    pub t: f64,
    /// Sample mean of `|X(t)|^p`.
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
}

/// Solve `n_paths` independent copies of the problem on `[0, horizon]`.
///
/// Path `i` is driven by Brownian stream `i` of `seed`; the result is
/// invariant under the degree of parallelism.
pub fn simulate_ensemble(
    problem: &NeutralProblem,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    options: &PicardOptions,
) -> Result<PathEnsemble> {
    let h = problem.grid_step();
    let n_steps = crate::segment::exact_steps(horizon, h, "simulation horizon")?;
    let m = problem.noise_dim();
    let solved: Result<Vec<(SolutionPath, SolveDiagnostics)>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let noise = if m > 0 {
                Some(BrownianPath::sample(seed, i as u64, m, h, n_steps))
            } else {
                None
            };
            solve(problem, noise.as_ref(), horizon, options)
        })
        .collect();
    let solved = solved?;
    let (paths, diagnostics) = solved.into_iter().unzip();
    Ok(PathEnsemble { seed, paths, diagnostics })
}
