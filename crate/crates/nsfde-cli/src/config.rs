//! JSON experiment configuration: schema, loading, command-line overrides,
//! and construction of the library objects a task needs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nsfde::ensemble::NeutralProblem;
use nsfde::functional::{FunctionalLiteral, FunctionalSpec, PointMap};
use nsfde::growth::GrowthBounds;
use nsfde::measure::{DelayMeasure, MeasureLiteral};
use nsfde::segment::Segment;
use serde::{Deserialize, Serialize};

/// Root of the experiment configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Equation description.
    pub problem: ProblemConfig,
    /// Discretization and sampling controls.
    pub numerics: NumericsConfig,
    /// What to do with the problem.
    pub task: Task,
    /// Where artifacts are written; defaults to the current directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Declared growth bounds; required by the `certify` task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifyConfig>,
    /// Witness parameters; required by the `counterexample` task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleConfig>,
}

/// The equation: functionals, history, horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Delay horizon `tau > 0`.
    pub tau: f64,
    /// State dimension (default 1).
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Simulation horizon `T > 0`.
    pub horizon: f64,
    /// Neutral functional `D` (default zero).
    #[serde(default)]
    pub neutral: FunctionalLiteral,
    /// Drift functional `f` (default zero).
    #[serde(default)]
    pub drift: FunctionalLiteral,
    /// One diffusion functional per Brownian component (default none).
    #[serde(default)]
    pub diffusion: Vec<FunctionalLiteral>,
    /// Initial history segment on `[-tau, 0]`.
    pub initial: InitialLiteral,
}

/// History segment literal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLiteral {
    /// Constant history, one value per component.
    Constant(Vec<f64>),
    /// Explicit node values from `-tau` to `0`, one row per grid node.
    Nodes(Vec<Vec<f64>>),
}

/// Discretization and sampling controls.  The seed is mandatory: runs are
/// reproducible by construction and there is no nondeterministic default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    /// Grid step `h`; must divide `tau` and the horizon.
    pub grid_step: f64,
    /// Picard stopping tolerance per window.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Iteration budget per window.
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Ensemble size for sampling tasks.
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    /// Root seed for all randomness.
    pub seed: u64,
}

/// Task selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Simulate an ensemble and write paths plus moment diagnostics.
    Solve,
    /// Simulate, then assemble and cross-check a growth-rate certificate.
    Certify,
    /// Solve a single noise draw and record per-iteration contraction data.
    PicardDiagnostics,
    /// Produce a non-existence witness.
    Counterexample,
    /// Demonstrate the integral comparison bound on a classical case.
    GronwallDemo,
}

impl Task {
    /// Stable lowercase name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::Certify => "certify",
            Task::PicardDiagnostics => "picard-diagnostics",
            Task::Counterexample => "counterexample",
            Task::GronwallDemo => "gronwall-demo",
        }
    }
}

/// Declared growth bounds for certification.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    /// Moment order `p >= 2`.
    pub p: f64,
    /// Young free parameter `epsilon > 0`.
    pub epsilon: f64,
    /// Linear-growth constant of the drift.
    #[serde(default)]
    pub c_f: f64,
    /// Linear-growth constant of the diffusion.
    #[serde(default)]
    pub c_g: f64,
    /// Linear-growth constant of the neutral part.
    #[serde(default)]
    pub c_d: f64,
    /// Drift memory measure `nu`.
    pub nu: MeasureLiteral,
    /// Diffusion memory measure `eta`.
    pub eta: MeasureLiteral,
    /// Neutral memory measure `mu`.
    pub mu: MeasureLiteral,
}

/// Witness parameters, one variant per witness family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CounterexampleConfig {
    /// Max-type neutral coefficient at or above one: martingale bound
    /// violation witness.
    MaxType(MaxTypeConfig),
    /// Distributed-delay family swept over the leading coefficient:
    /// solves every nonzero case and refutes the zero case.
    EpsilonSweep(EpsilonSweepConfig),
}

/// Parameters of the max-type witness.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxTypeConfig {
    /// Coefficient `kappa >= 1` of the running-maximum neutral term.
    pub kappa: f64,
    /// Lower bound on the squared diffusion coefficient.
    pub delta_lb: f64,
    /// Base horizon; the witness simulates `t_base * {1, 4, 16}`.
    pub t_base: f64,
}

/// Parameters of the coefficient sweep witness.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSweepConfig {
    /// Coefficients to sweep; zero refuses a solution, all others solve.
    pub epsilons: Vec<f64>,
    /// Moving-average weight measure on `[-tau, 0]`.
    pub weight: MeasureLiteral,
    /// Pointwise map under the moving average (default identity).
    #[serde(default = "identity_map")]
    pub map: PointMap,
    /// Drift functional (default zero).
    #[serde(default)]
    pub drift: FunctionalLiteral,
    /// Additive noise amplitude; must be nonzero for the witness.
    pub sigma: f64,
}

fn default_dim() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    64
}
fn default_n_paths() -> usize {
    100
}
fn identity_map() -> PointMap {
    PointMap::Identity
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    /// Replaces `numerics.seed`.
    pub seed: Option<u64>,
    /// Replaces `numerics.n_paths`.
    pub paths: Option<usize>,
    /// Replaces `numerics.grid_step`.
    pub grid_step: Option<f64>,
}

impl ExperimentConfig {
    /// Read and parse a configuration file, then apply overrides.
    pub fn load(path: &Path, overrides: Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(seed) = overrides.seed {
            config.numerics.seed = seed;
        }
        if let Some(paths) = overrides.paths {
            config.numerics.n_paths = paths;
        }
        if let Some(h) = overrides.grid_step {
            config.numerics.grid_step = h;
        }
        config.check()?;
        Ok(config)
    }

    /// Field-level sanity checks that do not need library objects.
    fn check(&self) -> anyhow::Result<()> {
        let p = &self.problem;
        if !(p.tau > 0.0) || !p.tau.is_finite() {
            bail!("problem.tau must be positive and finite, got {}", p.tau);
        }
        if !(p.horizon > 0.0) || !p.horizon.is_finite() {
            bail!("problem.horizon must be positive and finite, got {}", p.horizon);
        }
        if p.dim == 0 {
            bail!("problem.dim must be at least 1");
        }
        let n = &self.numerics;
        if !(n.grid_step > 0.0) || !n.grid_step.is_finite() {
            bail!("numerics.grid_step must be positive and finite, got {}", n.grid_step);
        }
        if !(n.tol > 0.0) || !n.tol.is_finite() {
            bail!("numerics.tol must be positive and finite, got {}", n.tol);
        }
        if n.max_iter == 0 {
            bail!("numerics.max_iter must be at least 1");
        }
        if n.n_paths == 0 {
            bail!("numerics.n_paths must be at least 1");
        }
        match self.task {
            Task::Certify if self.certify.is_none() => {
                bail!("task \"certify\" needs a [certify] section with bounds")
            }
            Task::Counterexample if self.counterexample.is_none() => {
                bail!("task \"counterexample\" needs a [counterexample] section")
            }
            _ => {}
        }
        Ok(())
    }

    /// Serialized form of the effective configuration (after overrides),
    /// used for hashing so the manifest pins what actually ran.
    pub fn canonical_json(&self) -> anyhow::Result<String> {
        serde_json::to_string_pretty(self).context("serializing effective config")
    }

    /// Build the initial history segment on the configured grid.
    pub fn build_initial(&self) -> nsfde::Result<Segment> {
        let p = &self.problem;
        let h = self.numerics.grid_step;
        match &p.initial {
            InitialLiteral::Constant(values) => Segment::constant(p.tau, h, values),
            InitialLiteral::Nodes(rows) => {
                let dim = p.dim;
                let mut flat = Vec::with_capacity(rows.len() * dim);
                for row in rows {
                    if row.len() != dim {
                        return Err(nsfde::Error::DimensionMismatch {
                            context: "initial segment node",
                            expected: dim,
                            got: row.len(),
                        });
                    }
                    flat.extend_from_slice(row);
                }
                Segment::from_flat(p.tau, h, dim, flat)
            }
        }
    }

    /// Assemble the neutral problem from the literals.
    pub fn build_problem(&self) -> nsfde::Result<NeutralProblem> {
        let p = &self.problem;
        let neutral = FunctionalSpec::from_literal(&p.neutral, p.tau, p.dim)?;
        let drift = FunctionalSpec::from_literal(&p.drift, p.tau, p.dim)?;
        let diffusion = p
            .diffusion
            .iter()
            .map(|lit| FunctionalSpec::from_literal(lit, p.tau, p.dim))
            .collect::<nsfde::Result<Vec<_>>>()?;
        let initial = self.build_initial()?;
        NeutralProblem::new(neutral, drift, diffusion, initial)
    }

    /// Assemble growth bounds from the `certify` section, if present.
    pub fn build_bounds(&self) -> nsfde::Result<Option<GrowthBounds>> {
        let Some(c) = &self.certify else { return Ok(None) };
        let tau = self.problem.tau;
        let nu = DelayMeasure::from_literal(&c.nu, tau)?;
        let eta = DelayMeasure::from_literal(&c.eta, tau)?;
        let mu = DelayMeasure::from_literal(&c.mu, tau)?;
        GrowthBounds::new(c.c_f, c.c_g, c.c_d, nu, eta, mu).map(Some)
    }
}
