//! Picard iteration solver for stochastic neutral equations.
//!
//! The equation `X(t) - D(X_t) = X(0) - D(X_0) + int f dt + int g dB` is
//! solved on successive windows of length `T_1` chosen by the decomposition
//! recipe: on each window the map
//!
//! `(P X)(t) = D(X^prev_t) + [X(a) - D(X_a)] + int_a^t f(X^prev) + g(X^prev) dB`
//!
//! is iterated to a fixed point, with the previous iterate appearing both in
//! the neutral term and under the integrals (left-endpoint rule for the
//! drift, left-point sums for the stochastic integral).  The recipe
//! guarantees mean-square contraction at an explicit rate `gamma < 1`; the
//! recorded per-iteration sup-norm differences expose the contraction.
//!
//! [`picard_probe`] runs the same map without any window chaining or
//! convergence requirement, which is how non-existence is demonstrated for
//! equations whose neutral part carries a full unit of instantaneous mass.

use crate::brownian::BrownianPath;
use crate::ensemble::NeutralProblem;
use crate::error::{DivergenceTrend, Error, Result};
use crate::functional::{decompose, default_mu, select_t1_alpha, IntervalSelection};
use crate::segment::{exact_steps, Segment};

/// A solved path on the grid from `-tau` to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    tau: f64,
    grid_step: f64,
    dim: usize,
    /// Flat node-major values; node `k` is time `-tau + k h`.
    values: Vec<f64>,
}

impl SolutionPath {
    /// Assemble a path from flat node values (node 0 at time `-tau`).
    pub fn from_parts(tau: f64, grid_step: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 || values.is_empty() {
            return Err(Error::DimensionMismatch {
                context: "solution path values",
                expected: dim.max(1),
                got: values.len(),
            });
        }
        exact_steps(tau, grid_step, "solution path delay horizon")?;
        Ok(Self { tau, grid_step, dim, values })
    }

    /// Number of grid nodes (including the initial window).
    pub fn node_count(&self) -> usize {
        self.values.len() / self.dim
    }

    /// Value dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Grid step.
    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    /// Delay horizon `tau`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Time of node `k` (node 0 sits at `-tau`).
    pub fn time(&self, k: usize) -> f64 {
        -self.tau + k as f64 * self.grid_step
    }

    /// Final grid time.
    pub fn horizon(&self) -> f64 {
        self.time(self.node_count() - 1)
    }

    /// Value at node `k`.
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// All values, flat and node-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Euclidean norm of the value at node `k`.
    pub fn norm_at(&self, k: usize) -> f64 {
        self.value(k).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Node index of a grid time (errors when `t` is off-grid).
    pub fn node_of_time(&self, t: f64) -> Result<usize> {
        let k = exact_steps(t + self.tau, self.grid_step, "path time lookup")?;
        if k >= self.node_count() {
            return Err(Error::InvalidInput(format!(
                "time {t} is beyond the solved horizon {}",
                self.horizon()
            )));
        }
        Ok(k)
    }

    /// The history segment `X_t` ending at node `k` (requires
    /// `time(k) >= 0` so the window is fully on the grid).
    pub fn segment_at_node(&self, k: usize) -> Result<Segment> {
        let steps_tau = exact_steps(self.tau, self.grid_step, "path delay horizon")?;
        if k < steps_tau || k >= self.node_count() {
            return Err(Error::InvalidInput(format!(
                "node {k} does not carry a full history window"
            )));
        }
        Segment::from_flat(
            self.tau,
            self.grid_step,
            self.dim,
            self.values[(k - steps_tau) * self.dim..(k + 1) * self.dim].to_vec(),
        )
    }
}

/// Options of the Picard solver.
#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    /// Per-window sup-norm convergence tolerance.
    pub tol: f64,
    /// Iteration budget per window.
    pub max_iter: usize,
    /// Tuning parameter for the interval selection; `None` uses
    /// [`default_mu`] of the decomposition's instantaneous mass.
    pub mu: Option<f64>,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 64, mu: None }
    }
}

/// Convergence record of one Picard window.
#[derive(Debug, Clone)]
pub struct IntervalDiagnostics {
    /// Window start time.
    pub start: f64,
    /// Window end time.
    pub end: f64,
    /// Iterations used to converge.
    pub iterations: usize,
    /// Final sup-norm difference between successive iterates.
    pub final_residual: f64,
    /// Sup-norm difference after every iteration.
    pub diffs: Vec<f64>,
}

/// Solver diagnostics: the selected contraction data plus one record per
/// window.
#[derive(Debug, Clone)]
pub struct SolveDiagnostics {
    /// Interval selection used for the chaining.
    pub selection: IntervalSelection,
    /// Instantaneous Lipschitz mass of the non-atomic part.
    pub rho_at_zero: f64,
    /// Separation gap of the pure-delay part.
    pub delta_gap: f64,
    /// Per-window convergence records.
    pub intervals: Vec<IntervalDiagnostics>,
}

/// Shared state of one Picard sweep over a window.
struct Sweep<'a> {
    problem: &'a NeutralProblem,
    noise: Option<&'a BrownianPath>,
    steps_tau: usize,
    h: f64,
    seg: Segment,
    fval: Vec<f64>,
    gval: Vec<f64>,
    dval: Vec<f64>,
    cum: Vec<f64>,
}

impl<'a> Sweep<'a> {
    fn new(problem: &'a NeutralProblem, noise: Option<&'a BrownianPath>) -> Result<Self> {
        let d = problem.dim();
        Ok(Self {
            problem,
            noise,
            steps_tau: problem.initial().node_count() - 1,
            h: problem.grid_step(),
            seg: problem.initial().clone(),
            fval: vec![0.0; d],
            gval: vec![0.0; d],
            dval: vec![0.0; d],
            cum: vec![0.0; d],
        })
    }

    fn load_window(&mut self, values: &[f64], k: usize) {
        let d = self.problem.dim();
        self.seg
            .overwrite_flat(&values[(k - self.steps_tau) * d..(k + 1) * d]);
    }

    /// `X(k) - D(X_k)` read from committed values.
    fn base_at(&mut self, values: &[f64], k: usize) -> Result<Vec<f64>> {
        let d = self.problem.dim();
        self.load_window(values, k);
        self.problem.neutral().evaluate_into(&self.seg, &mut self.dval)?;
        Ok((0..d).map(|c| values[k * d + c] - self.dval[c]).collect())
    }

    /// One application of the Picard map on nodes `(start, end]`, reading
    /// `prev` and writing `next`; returns the sup-norm difference.
    fn apply(
        &mut self,
        prev: &[f64],
        next: &mut [f64],
        base: &[f64],
        start: usize,
        end: usize,
    ) -> Result<f64> {
        let d = self.problem.dim();
        self.cum.iter_mut().for_each(|c| *c = 0.0);
        let mut diff = 0.0f64;
        for j in start + 1..=end {
            // Integral contribution of the cell [t_{j-1}, t_j], integrands
            // frozen at the cell's left endpoint on the previous iterate.
            self.load_window(prev, j - 1);
            self.problem.drift().evaluate_into(&self.seg, &mut self.fval)?;
            for c in 0..d {
                self.cum[c] += self.fval[c] * self.h;
            }
            if let Some(noise) = self.noise {
                let db = noise.increment(j - 1 - self.steps_tau);
                for (col, gspec) in self.problem.diffusion().iter().enumerate() {
                    gspec.evaluate_into(&self.seg, &mut self.gval)?;
                    for c in 0..d {
                        self.cum[c] += self.gval[c] * db[col];
                    }
                }
            }
            // Neutral term on the previous iterate's window at t_j.
            self.load_window(prev, j);
            self.problem.neutral().evaluate_into(&self.seg, &mut self.dval)?;
            let mut nd = 0.0;
            for c in 0..d {
                let v = self.dval[c] + base[c] + self.cum[c];
                next[j * d + c] = v;
                let e = v - prev[j * d + c];
                nd += e * e;
            }
            diff = diff.max(nd.sqrt());
        }
        Ok(diff)
    }
}

fn check_noise(problem: &NeutralProblem, noise: Option<&BrownianPath>, n_steps: usize) -> Result<()> {
    let m = problem.noise_dim();
    if m == 0 {
        return Ok(());
    }
    let noise = noise.ok_or_else(|| {
        Error::InvalidInput("the problem is stochastic but no driving path was given".into())
    })?;
    if noise.dim() != m {
        return Err(Error::DimensionMismatch {
            context: "driving path dimension",
            expected: m,
            got: noise.dim(),
        });
    }
    if (noise.grid_step() - problem.grid_step()).abs() > 1e-12 * problem.grid_step() {
        return Err(Error::InvalidInput(format!(
            "driving path grid step {} differs from the solver grid {}",
            noise.grid_step(),
            problem.grid_step()
        )));
    }
    if noise.n_steps() < n_steps {
        return Err(Error::InvalidInput(format!(
            "driving path covers {} steps but the horizon needs {n_steps}",
            noise.n_steps()
        )));
    }
    Ok(())
}

/// Solve the equation on `[0, horizon]` for one driving path.
///
/// The neutral functional is decomposed, a window length `T_1` and weight
/// `alpha` are selected, and the Picard map is iterated window by window
/// until the sup-norm residual drops below `options.tol`.  A window that
/// fails to converge within `options.max_iter` iterations aborts with a
/// divergence report classifying the trend of the residuals.
pub fn solve(
    problem: &NeutralProblem,
    noise: Option<&BrownianPath>,
    horizon: f64,
    options: &PicardOptions,
) -> Result<(SolutionPath, SolveDiagnostics)> {
    let h = problem.grid_step();
    let d = problem.dim();
    let n_steps = exact_steps(horizon, h, "solve horizon")?;
    check_noise(problem, noise, n_steps)?;
    let dec = decompose(problem.neutral())?;
    let mu = options.mu.unwrap_or_else(|| default_mu(dec.rho_at_zero));
    let sel = select_t1_alpha(&dec, problem.lipschitz_k(), mu, h)?;
    let spi = (sel.t1 / h).round() as usize;
    let mut sweep = Sweep::new(problem, noise)?;
    let steps_tau = sweep.steps_tau;
    let total_nodes = steps_tau + n_steps + 1;
    let mut committed = vec![0.0; total_nodes * d];
    committed[..(steps_tau + 1) * d].copy_from_slice(problem.initial().flat());

    let mut intervals = Vec::new();
    let mut start = steps_tau;
    let end_total = steps_tau + n_steps;
    while start < end_total {
        let end = (start + spi).min(end_total);
        let base = sweep.base_at(&committed, start)?;
        let mut prev = committed.clone();
        for j in start + 1..=end {
            let (lo, hi) = (j * d, (j + 1) * d);
            prev.copy_within(start * d..(start + 1) * d, lo);
            debug_assert!(hi <= prev.len());
        }
        let mut next = prev.clone();
        let mut diffs: Vec<f64> = Vec::new();
        let mut converged = false;
        for _ in 0..options.max_iter {
            let diff = sweep.apply(&prev, &mut next, &base, start, end)?;
            if !diff.is_finite() {
                return Err(Error::Divergence {
                    interval: intervals.len(),
                    iterations: diffs.len() + 1,
                    last_diff: diff,
                    trend: DivergenceTrend::NonDecreasing,
                });
            }
            diffs.push(diff);
            prev[(start + 1) * d..(end + 1) * d]
                .copy_from_slice(&next[(start + 1) * d..(end + 1) * d]);
            if diff <= options.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            let first = *diffs.first().unwrap_or(&f64::INFINITY);
            let last = *diffs.last().unwrap_or(&f64::INFINITY);
            let trend = if last < 0.999 * first {
                DivergenceTrend::SlowContraction
            } else {
                DivergenceTrend::NonDecreasing
            };
            return Err(Error::Divergence {
                interval: intervals.len(),
                iterations: diffs.len(),
                last_diff: last,
                trend,
            });
        }
        committed[(start + 1) * d..(end + 1) * d]
            .copy_from_slice(&prev[(start + 1) * d..(end + 1) * d]);
        intervals.push(IntervalDiagnostics {
            start: (start - steps_tau) as f64 * h,
            end: (end - steps_tau) as f64 * h,
            iterations: diffs.len(),
            final_residual: *diffs.last().unwrap(),
            diffs,
        });
        start = end;
    }

    let path = SolutionPath { tau: problem.tau(), grid_step: h, dim: d, values: committed };
    let diag = SolveDiagnostics {
        selection: sel,
        rho_at_zero: dec.rho_at_zero,
        delta_gap: dec.delta_gap,
        intervals,
    };
    Ok((path, diag))
}

/// Largest nodewise defect of the discretized integral relation
/// `X(t) - D(X_t) = X(0) - D(X_0) + sum f h + sum g dB` along a path.
///
/// The sums freeze the integrands at each cell's left endpoint, matching the
/// scheme of [`solve`], so a converged solution reports a defect on the
/// order of the window tolerance while an unrelated path reports the size
/// of its violation.
pub fn integral_residual(
    problem: &NeutralProblem,
    path: &SolutionPath,
    noise: Option<&BrownianPath>,
) -> Result<f64> {
    let h = problem.grid_step();
    let d = problem.dim();
    if path.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "residual path dimension",
            expected: d,
            got: path.dim(),
        });
    }
    if (path.grid_step() - h).abs() > 1e-12 * h || (path.tau() - problem.tau()).abs() > 1e-9 {
        return Err(Error::InvalidInput(
            "residual check: the path grid does not match the problem grid".into(),
        ));
    }
    let steps_tau = problem.initial().node_count() - 1;
    if path.node_count() < steps_tau + 1 {
        return Err(Error::InsufficientData(
            "residual check: the path does not cover the history window".into(),
        ));
    }
    let n_steps = path.node_count() - 1 - steps_tau;
    check_noise(problem, noise, n_steps)?;
    let mut fval = vec![0.0; d];
    let mut gval = vec![0.0; d];
    let mut dval = vec![0.0; d];
    let mut cum = vec![0.0; d];
    let mut base = vec![0.0; d];
    let mut worst = 0.0f64;
    for j in 0..=n_steps {
        let k = steps_tau + j;
        if j > 0 {
            // Cell [t_{j-1}, t_j] contribution, left-endpoint integrands.
            let seg = path.segment_at_node(k - 1)?;
            problem.drift().evaluate_into(&seg, &mut fval)?;
            for c in 0..d {
                cum[c] += fval[c] * h;
            }
            if let Some(noise) = noise {
                let db = noise.increment(j - 1);
                for (col, gspec) in problem.diffusion().iter().enumerate() {
                    gspec.evaluate_into(&seg, &mut gval)?;
                    for c in 0..d {
                        cum[c] += gval[c] * db[col];
                    }
                }
            }
        }
        let seg = path.segment_at_node(k)?;
        problem.neutral().evaluate_into(&seg, &mut dval)?;
        if j == 0 {
            for c in 0..d {
                base[c] = path.value(k)[c] - dval[c];
            }
            continue;
        }
        let mut defect = 0.0;
        for c in 0..d {
            let e = path.value(k)[c] - dval[c] - base[c] - cum[c];
            defect += e * e;
        }
        worst = worst.max(defect.sqrt());
    }
    Ok(worst)
}

/// Outcome of an open-loop Picard probe.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    /// Sup-norm difference after each iteration.
    pub diffs: Vec<f64>,
    /// The final iterate (a candidate path, not a verified solution).
    pub iterate: SolutionPath,
    /// False when the iteration left the range of finite doubles.
    pub finite: bool,
}

/// Run exactly `n_iter` Picard iterations on the whole of `[0, horizon]` as
/// a single window, with no decomposition, no convergence requirement and no
/// error on stagnation.
///
/// This bypasses every admissibility check on the neutral functional, which
/// is the point: for equations that violate uniform non-atomicity the
/// recorded residuals stay bounded away from zero, and the early iterates
/// serve as candidate paths for downstream refutation.
pub fn picard_probe(
    problem: &NeutralProblem,
    noise: Option<&BrownianPath>,
    horizon: f64,
    n_iter: usize,
) -> Result<ProbeReport> {
    let h = problem.grid_step();
    let d = problem.dim();
    let n_steps = exact_steps(horizon, h, "probe horizon")?;
    check_noise(problem, noise, n_steps)?;
    let mut sweep = Sweep::new(problem, noise)?;
    let steps_tau = sweep.steps_tau;
    let total_nodes = steps_tau + n_steps + 1;
    let mut committed = vec![0.0; total_nodes * d];
    committed[..(steps_tau + 1) * d].copy_from_slice(problem.initial().flat());
    let start = steps_tau;
    let end = steps_tau + n_steps;
    let base = sweep.base_at(&committed, start)?;
    let mut prev = committed;
    for j in start + 1..=end {
        prev.copy_within(start * d..(start + 1) * d, j * d);
    }
    let mut next = prev.clone();
    let mut diffs = Vec::with_capacity(n_iter);
    let mut finite = true;
    for _ in 0..n_iter {
        let diff = sweep.apply(&prev, &mut next, &base, start, end)?;
        diffs.push(diff);
        prev[(start + 1) * d..(end + 1) * d]
            .copy_from_slice(&next[(start + 1) * d..(end + 1) * d]);
        if !diff.is_finite() {
            finite = false;
            break;
        }
    }
    let iterate =
        SolutionPath { tau: problem.tau(), grid_step: h, dim: d, values: prev };
    Ok(ProbeReport { diffs, iterate, finite })
}

/// Independent day-by-day oracle for deterministic equations whose neutral
/// terms read history at least one grid step into the past.
///
/// Under that support condition the grid fixed-point relation
/// `X(t_j) = D(X_{t_j}) + X(0) - D(X_0) + h sum f(X_{t_k})` is an explicit
/// forward recursion (everything on the right is already known when node `j`
/// is computed), so no iteration is involved at all.  The Picard solver must
/// reproduce this recursion up to its convergence tolerance.
pub fn method_of_steps_oracle(problem: &NeutralProblem, horizon: f64) -> Result<SolutionPath> {
    if problem.noise_dim() != 0 {
        return Err(Error::Inapplicable(
            "the step-by-step oracle handles deterministic equations only".into(),
        ));
    }
    let h = problem.grid_step();
    for term in problem.neutral().terms() {
        if let Some(s) = term.sup_support() {
            if s > -h + 1e-12 * h {
                return Err(Error::Inapplicable(format!(
                    "the step-by-step oracle needs neutral support at or below -h; found {s}"
                )));
            }
        }
    }
    let d = problem.dim();
    let n_steps = exact_steps(horizon, h, "oracle horizon")?;
    let mut sweep = Sweep::new(problem, None)?;
    let steps_tau = sweep.steps_tau;
    let mut values = vec![0.0; (steps_tau + n_steps + 1) * d];
    values[..(steps_tau + 1) * d].copy_from_slice(problem.initial().flat());
    let base = sweep.base_at(&values, steps_tau)?;
    let mut s = vec![0.0; d];
    for j in steps_tau + 1..=steps_tau + n_steps {
        sweep.load_window(&values, j - 1);
        problem.drift().evaluate_into(&sweep.seg, &mut sweep.fval)?;
        for c in 0..d {
            s[c] += sweep.fval[c] * h;
        }
        // Placeholder at node j; the neutral window never reads it because
        // every neutral term looks at least one step into the past.
        values.copy_within((j - 1) * d..j * d, j * d);
        sweep.load_window(&values, j);
        problem.neutral().evaluate_into(&sweep.seg, &mut sweep.dval)?;
        for c in 0..d {
            values[j * d + c] = sweep.dval[c] + base[c] + s[c];
        }
    }
    Ok(SolutionPath { tau: problem.tau(), grid_step: h, dim: d, values })
}
