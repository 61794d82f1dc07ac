//! Numerical witnesses for parameter regimes with no solution.
//!
//! Three constructions are covered.
//!
//! * **Quadratic-variation mismatch.**  For the purely distributed equation
//!   (instantaneous weight zero) the candidate relation forces a moving
//!   average of the path — a function with vanishing quadratic variation —
//!   to equal a Brownian motion, whose quadratic variation over `[0, T]` is
//!   `sigma^2 T > 0`.  [`qv_witness`] measures realized quadratic variation
//!   at two nested meshes and flags the mismatch.
//! * **Instantaneous-weight sweep.**  [`epsilon_sweep`] walks a family of
//!   equations `eps X(t) + int w h(X(t+s)) ds = ...` over values of `eps`,
//!   solving every `eps != 0` (dividing the equation through by `eps` when
//!   the instantaneous weight falls outside `(0, 2)`) and producing the
//!   quadratic-variation refutation together with a Picard divergence record
//!   at `eps = 0`.
//! * **Martingale bound violation.**  For the max-type neutral term with
//!   coefficient `kappa >= 1`, any solution would force the martingale
//!   `M(t) = -int g dB` to stay below the constant
//!   `A = psi(0) + kappa * max |psi|`.  After the time change by its
//!   quadratic variation, which grows at least like `delta_lb * t`, this
//!   bounds a standard Brownian motion's running maximum by `A` on arbitrarily
//!   long intervals.  [`maxtype_witness`] samples that maximum and reports how
//!   often it exceeds `A`, against the reflection-principle probability.
//!
//! Non-existence is witnessed, not proved: each report produces falsifiable
//! numbers aligned with the contradiction mechanism of the corresponding
//! impossibility argument.

use crate::brownian::BrownianPath;
use crate::ensemble::NeutralProblem;
use crate::error::{Error, Result};
use crate::functional::{FunctionalSpec, PointMap, Term};
use crate::measure::DelayMeasure;
use crate::picard::{self, PicardOptions, SolutionPath};
use crate::segment::{exact_steps, Segment};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

/// Number of open-loop Picard iterations recorded for the divergence witness.
pub const PROBE_ITERATIONS: usize = 200;

/// Open-loop iterations behind the quadratic-variation candidate path.
///
/// The smoothness argument applies to any continuous candidate; a short run
/// already carries the full Brownian forcing, while long open-loop iteration
/// of the non-contractive map slowly amplifies grid-scale oscillation whose
/// quadrature jitter would blur the mesh-decay signal.
const CANDIDATE_ITERATIONS: usize = 2;

/// Sample count of the reported non-atomicity profile `s -> rho0(s)`.
const PROFILE_SAMPLES: usize = 64;

/// Ladder of horizon multipliers used by the martingale bound witness.
const HORIZON_LADDER: [f64; 3] = [1.0, 4.0, 16.0];

// ---------------------------------------------------------------------------
// Quadratic-variation witness
// ---------------------------------------------------------------------------

/// Calibration constants of the two-mesh quadratic-variation discriminator.
///
/// Refining the mesh by a factor of four scales the quadratic variation of a
/// continuously differentiable path by a factor of four (the ratio tends to
/// `1/4`) and leaves that of a Brownian path unchanged (the ratio tends to
/// `1`).  The default cut-offs are calibrated on those two closed-form cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QvThresholds {
    /// Largest fine/coarse ratio still classified as smooth.
    pub smooth_max: f64,
    /// Inclusive ratio band classified as Brownian-consistent.
    pub brownian: (f64, f64),
}

impl Default for QvThresholds {
    fn default() -> Self {
        Self { smooth_max: 0.35, brownian: (0.8, 1.25) }
    }
}

/// Classification of a candidate path by its two-mesh quadratic variation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QvVerdict {
    /// The candidate's quadratic variation decays like a differentiable
    /// path's while the equation demands `sigma^2 T > 0`: no solution is
    /// consistent with the relation.
    SmoothMismatch,
    /// The candidate's quadratic variation is mesh-stable, as a genuine
    /// Brownian right side requires.
    BrownianConsistent,
    /// Neither calibration band applies.
    Inconclusive,
}

impl QvVerdict {
    /// Stable lowercase label used in rendered reports.
    pub fn as_str(&self) -> &'static str {
        match self {
            QvVerdict::SmoothMismatch => "smooth mismatch - no solution consistent",
            QvVerdict::BrownianConsistent => "brownian consistent",
            QvVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Realized quadratic variation of one candidate path at two nested meshes.
#[derive(Debug, Clone)]
pub struct QvReport {
    /// Time span of the candidate.
    pub horizon: f64,
    /// Realized quadratic variation at the sampling mesh.
    pub qv_fine: f64,
    /// Realized quadratic variation on every fourth node (mesh coarsened by 4).
    pub qv_coarse: f64,
    /// `qv_fine / qv_coarse`; near `1/4` for smooth paths, near `1` for
    /// Brownian paths.
    pub ratio: f64,
    /// Quadratic variation demanded of a solution: `sigma^2 * horizon`.
    pub target: f64,
    /// Calibration used for the verdict.
    pub thresholds: QvThresholds,
    /// Classification of the candidate.
    pub verdict: QvVerdict,
}

impl QvReport {
    /// Render the report as stable line-oriented text.
    pub fn render(&self) -> String {
        let fl = |v: f64| format!("{v:.16e}");
        let mut out = String::new();
        out.push_str("quadratic-variation witness\n");
        out.push_str(&format!("horizon: {}\n", fl(self.horizon)));
        out.push_str(&format!("qv_fine: {}\n", fl(self.qv_fine)));
        out.push_str(&format!("qv_coarse: {}\n", fl(self.qv_coarse)));
        out.push_str(&format!("ratio: {}\n", fl(self.ratio)));
        out.push_str(&format!("target_sigma2_t: {}\n", fl(self.target)));
        out.push_str(&format!(
            "thresholds: smooth<={} brownian=[{}, {}]\n",
            fl(self.thresholds.smooth_max),
            fl(self.thresholds.brownian.0),
            fl(self.thresholds.brownian.1),
        ));
        out.push_str(&format!("verdict: {}\n", self.verdict.as_str()));
        out
    }
}

fn realized_qv(values: &[f64], stride: usize) -> f64 {
    let mut sum = 0.0;
    let mut j = stride;
    while j < values.len() {
        let d = values[j] - values[j - stride];
        sum += d * d;
        j += stride;
    }
    sum
}

/// Measure the quadratic variation of a candidate path at the sampling mesh
/// and at the mesh coarsened by four, and classify the result.
///
/// `candidate` holds grid values at spacing `grid_step`; its step count must
/// be a positive multiple of four so both meshes cover the same span.  A
/// solution of the contradicted relation would have to realize the Brownian
/// quadratic variation `sigma^2 T`; a smooth candidate instead shows the
/// `1/4` refinement decay.
pub fn qv_witness(
    candidate: &[f64],
    grid_step: f64,
    sigma: f64,
    thresholds: &QvThresholds,
) -> Result<QvReport> {
    if sigma == 0.0 {
        return Err(Error::Inapplicable(
            "with zero noise amplitude there is no roughness demand to contradict".into(),
        ));
    }
    if !sigma.is_finite() || !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(Error::InvalidInput(format!(
            "quadratic-variation witness: sigma {sigma} and grid step {grid_step} must be finite, the step positive"
        )));
    }
    if !(thresholds.smooth_max > 0.0 && thresholds.smooth_max < thresholds.brownian.0
        && thresholds.brownian.0 < thresholds.brownian.1)
    {
        return Err(Error::InvalidInput(format!(
            "quadratic-variation witness: thresholds must satisfy 0 < smooth <= band low < band high, got {thresholds:?}"
        )));
    }
    let steps = candidate.len().saturating_sub(1);
    if steps < 8 || steps % 4 != 0 {
        return Err(Error::InvalidInput(format!(
            "quadratic-variation witness: need at least 8 steps in a multiple of 4, got {steps}"
        )));
    }
    if candidate.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "quadratic-variation witness: candidate contains non-finite values".into(),
        ));
    }
    let qv_fine = realized_qv(candidate, 1);
    let qv_coarse = realized_qv(candidate, 4);
    let ratio = if qv_coarse == 0.0 {
        if qv_fine == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        qv_fine / qv_coarse
    };
    let horizon = steps as f64 * grid_step;
    let target = sigma * sigma * horizon;
    let verdict = if ratio <= thresholds.smooth_max {
        QvVerdict::SmoothMismatch
    } else if ratio >= thresholds.brownian.0 && ratio <= thresholds.brownian.1 {
        QvVerdict::BrownianConsistent
    } else {
        QvVerdict::Inconclusive
    };
    Ok(QvReport { horizon, qv_fine, qv_coarse, ratio, target, thresholds: *thresholds, verdict })
}

// ---------------------------------------------------------------------------
// Instantaneous-weight family and sweep
// ---------------------------------------------------------------------------

/// The scalar equation family
///
/// ```text
/// eps X(t) + int_{-tau}^0 w(ds) h(X(t+s)) = c0 + int_0^t f(X_u) du + sigma B(t)
/// ```
///
/// parametrized by the instantaneous weight `eps`; `c0` is the left side
/// evaluated on the initial segment.  In neutral form the pair is
/// `D(phi) = (1 - eps) phi(0) - int w(ds) h(phi(s))` with drift `f` and
/// constant noise `sigma`, and for `eps` outside `(0, 2)` the whole equation
/// is divided through by `eps` first so the retained instantaneous mass is
/// `|1 - eps| < 1` or zero.
#[derive(Debug, Clone)]
pub struct MovingAverageFamily {
    weight: DelayMeasure,
    map: PointMap,
    drift: FunctionalSpec,
    sigma: f64,
    initial: Segment,
}

impl MovingAverageFamily {
    /// Assemble the family from the averaging weight `w`, the pointwise map
    /// `h`, the drift functional `f`, the noise amplitude and the initial
    /// segment.  Scalar equations only.
    pub fn new(
        weight: DelayMeasure,
        map: PointMap,
        drift: FunctionalSpec,
        sigma: f64,
        initial: Segment,
    ) -> Result<Self> {
        if initial.dim() != 1 {
            return Err(Error::DimensionMismatch {
                context: "moving-average family state",
                expected: 1,
                got: initial.dim(),
            });
        }
        if drift.offset().len() != 1 {
            return Err(Error::DimensionMismatch {
                context: "moving-average family drift",
                expected: 1,
                got: drift.offset().len(),
            });
        }
        if (weight.support() - initial.tau()).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "moving-average family: weight support {} does not match the delay span {}",
                weight.support(),
                initial.tau()
            )));
        }
        if !sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "moving-average family: noise amplitude must be finite, got {sigma}"
            )));
        }
        Ok(Self { weight, map, drift, sigma, initial })
    }

    /// Noise amplitude of the undivided equation.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Initial segment shared by every member of the family.
    pub fn initial(&self) -> &Segment {
        &self.initial
    }

    /// True when the weight `eps` is handled by dividing the equation
    /// through by `eps` (instantaneous mass outside the contractive range).
    pub fn is_divided(epsilon: f64) -> bool {
        !(0.0..2.0).contains(&epsilon)
    }

    /// The drift functional rescaled by `k` (used by the divided form).
    fn scaled_drift(&self, k: f64) -> Result<FunctionalSpec> {
        let terms = self
            .drift
            .terms()
            .iter()
            .map(|t| match t {
                Term::PointDelay { lag, map } => {
                    Term::PointDelay { lag: *lag, map: scaled_map(map, k) }
                }
                Term::Distributed { measure, map } => {
                    Term::Distributed { measure: measure.scale(k), map: *map }
                }
                Term::MaxNorm { coeff, window } => {
                    Term::MaxNorm { coeff: coeff * k, window: *window }
                }
            })
            .collect();
        let offset = self.drift.offset().iter().map(|o| o * k).collect();
        FunctionalSpec::new(self.initial.tau(), 1, terms, offset)
    }

    /// Build the neutral-form problem for one instantaneous weight.
    pub fn problem(&self, epsilon: f64) -> Result<NeutralProblem> {
        if !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "moving-average family: the instantaneous weight must be finite, got {epsilon}"
            )));
        }
        let tau = self.initial.tau();
        let (neutral_terms, drift, sigma_eff) = if Self::is_divided(epsilon) {
            let terms = vec![Term::Distributed {
                measure: self.weight.scale(-1.0 / epsilon),
                map: self.map,
            }];
            (terms, self.scaled_drift(1.0 / epsilon)?, self.sigma / epsilon)
        } else {
            let mut terms = vec![Term::Distributed {
                measure: self.weight.scale(-1.0),
                map: self.map,
            }];
            if epsilon != 1.0 {
                terms.push(Term::PointDelay {
                    lag: 0.0,
                    map: PointMap::Affine { a: 1.0 - epsilon, b: 0.0 },
                });
            }
            (terms, self.drift.clone(), self.sigma)
        };
        let neutral = FunctionalSpec::new(tau, 1, neutral_terms, vec![0.0])?;
        let diffusion = vec![FunctionalSpec::constant(tau, vec![sigma_eff])?];
        NeutralProblem::new(neutral, drift, diffusion, self.initial.clone())
    }

    /// The smooth side of the weight-zero relation along a candidate path:
    /// `F(t) = int w h(X_t) - int w h(X_0) - sum f(X_u) h` at each grid node
    /// `t >= 0`.  A solution would force `F` to coincide with `sigma B`.
    fn smooth_side(&self, path: &SolutionPath, n_steps: usize) -> Result<Vec<f64>> {
        let tau = self.initial.tau();
        let h = self.initial.grid_step();
        let ma = FunctionalSpec::new(
            tau,
            1,
            vec![Term::Distributed { measure: self.weight.clone(), map: self.map }],
            vec![0.0],
        )?;
        let steps_tau = self.initial.node_count() - 1;
        let mut out = Vec::with_capacity(n_steps + 1);
        let mut drift_sum = 0.0;
        let mut ma0 = 0.0;
        for j in 0..=n_steps {
            let k = steps_tau + j;
            if j > 0 {
                let seg = path.segment_at_node(k - 1)?;
                drift_sum += self.drift.evaluate_scalar(&seg)? * h;
            }
            let seg = path.segment_at_node(k)?;
            let ma_t = ma.evaluate_scalar(&seg)?;
            if j == 0 {
                ma0 = ma_t;
            }
            out.push(ma_t - ma0 - drift_sum);
        }
        Ok(out)
    }
}

fn scaled_map(map: &PointMap, k: f64) -> PointMap {
    match *map {
        PointMap::Identity => PointMap::Affine { a: k, b: 0.0 },
        PointMap::Affine { a, b } => PointMap::Affine { a: k * a, b: k * b },
        PointMap::TanhSaturation { c } => PointMap::TanhSaturation { c: k * c },
    }
}

/// Evidence attached to one instantaneous weight of the sweep.
#[derive(Debug, Clone)]
pub enum EpsilonWitness {
    /// The equation was solved; `residual` is the largest nodewise defect of
    /// the discretized integral relation along the returned path.
    Solved {
        /// Integral-equation defect of the solved path.
        residual: f64,
        /// The solved path itself.
        path: SolutionPath,
    },
    /// No solution: the Picard residual floor stays bounded away from zero
    /// and the smooth side fails the quadratic-variation demand.
    NoSolution {
        /// Smallest sup-norm update over the recorded iterations.
        probe_floor: f64,
        /// Number of open-loop iterations recorded.
        iterations: usize,
        /// Two-mesh quadratic-variation report of the smooth side.
        qv: QvReport,
    },
}

/// One row of the instantaneous-weight sweep.
#[derive(Debug, Clone)]
pub struct EpsilonCase {
    /// Instantaneous weight of this row.
    pub epsilon: f64,
    /// True when the equation was divided through by `epsilon` first.
    pub divided: bool,
    /// Instantaneous Lipschitz mass of the analyzed neutral functional.
    pub rho0_at_zero: f64,
    /// Full-window Lipschitz mass (the global contraction constant).
    pub rho0_at_tau: f64,
    /// Samples `(s, rho0(s))` of the non-atomicity profile on `[0, tau]`.
    pub rho0_profile: Vec<(f64, f64)>,
    /// Whether a solution exists (every nonzero weight).
    pub exists: bool,
    /// The witness backing the verdict.
    pub witness: EpsilonWitness,
}

/// Walk the family over the given instantaneous weights with one shared
/// driving path.
///
/// Every `eps != 0` is solved and its path re-checked against the discretized
/// integral relation; `eps = 0` yields the divergence record of
/// [`PROBE_ITERATIONS`] open-loop Picard iterations together with the
/// quadratic-variation mismatch of the smooth side, evaluated along a short
/// open-loop candidate run.  The horizon must span a step count divisible by
/// four so the two-mesh comparison shares its endpoint.
pub fn epsilon_sweep(
    family: &MovingAverageFamily,
    epsilons: &[f64],
    horizon: f64,
    seed: u64,
) -> Result<Vec<EpsilonCase>> {
    let h = family.initial.grid_step();
    let n_steps = exact_steps(horizon, h, "sweep horizon")?;
    let noise = BrownianPath::sample(seed, 0, 1, h, n_steps);
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let problem = family.problem(eps)?;
        let neutral = problem.neutral();
        let tau = problem.tau();
        let rho0_profile: Vec<(f64, f64)> = (0..=PROFILE_SAMPLES)
            .map(|i| {
                let s = tau * i as f64 / PROFILE_SAMPLES as f64;
                (s, neutral.rho0(s))
            })
            .collect();
        let rho0_at_zero = neutral.rho0(0.0);
        let rho0_at_tau = neutral.rho0(tau);
        let (exists, witness) = if eps == 0.0 {
            let report = picard::picard_probe(&problem, Some(&noise), horizon, PROBE_ITERATIONS)?;
            let probe_floor = report.diffs.iter().cloned().fold(f64::INFINITY, f64::min);
            let early =
                picard::picard_probe(&problem, Some(&noise), horizon, CANDIDATE_ITERATIONS)?;
            let candidate = family.smooth_side(&early.iterate, n_steps)?;
            let qv = qv_witness(&candidate, h, family.sigma, &QvThresholds::default())?;
            let witness = EpsilonWitness::NoSolution {
                probe_floor,
                iterations: report.diffs.len(),
                qv,
            };
            (false, witness)
        } else {
            let (path, _) = picard::solve(&problem, Some(&noise), horizon, &PicardOptions::default())?;
            let residual = picard::integral_residual(&problem, &path, Some(&noise))?;
            (true, EpsilonWitness::Solved { residual, path })
        };
        out.push(EpsilonCase {
            epsilon: eps,
            divided: MovingAverageFamily::is_divided(eps),
            rho0_at_zero,
            rho0_at_tau,
            rho0_profile,
            exists,
            witness,
        });
    }
    Ok(out)
}

/// Render sweep rows as stable line-oriented text.
pub fn render_epsilon_table(cases: &[EpsilonCase]) -> String {
    let fl = |v: f64| format!("{v:.16e}");
    let mut out = String::from("instantaneous-weight sweep\n");
    for c in cases {
        out.push_str(&format!("case epsilon: {}\n", fl(c.epsilon)));
        out.push_str(&format!("  divided_by_epsilon: {}\n", c.divided));
        out.push_str(&format!("  rho0_at_zero: {}\n", fl(c.rho0_at_zero)));
        out.push_str(&format!("  rho0_at_tau: {}\n", fl(c.rho0_at_tau)));
        out.push_str(&format!("  exists: {}\n", c.exists));
        match &c.witness {
            EpsilonWitness::Solved { residual, .. } => {
                out.push_str(&format!("  integral_residual: {}\n", fl(*residual)));
            }
            EpsilonWitness::NoSolution { probe_floor, iterations, qv } => {
                out.push_str(&format!("  probe_iterations: {iterations}\n"));
                out.push_str(&format!("  probe_residual_floor: {}\n", fl(*probe_floor)));
                out.push_str(&format!("  qv_ratio: {}\n", fl(qv.ratio)));
                out.push_str(&format!("  qv_target: {}\n", fl(qv.target)));
                out.push_str(&format!("  qv_verdict: {}\n", qv.verdict.as_str()));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Max-type martingale bound witness
// ---------------------------------------------------------------------------

/// One rung of the martingale bound ladder.
#[derive(Debug, Clone)]
pub struct LadderPoint {
    /// Simulated time span of the bound process (already includes the
    /// diffusion floor: `delta_lb * T` for this rung).
    pub horizon: f64,
    /// Mean per-path probability that the running maximum exceeds the
    /// barrier on `[0, horizon]`.
    pub frequency: f64,
    /// Standard error of `frequency` over the path sample.
    pub se: f64,
    /// Reflection-principle probability `2 (1 - Phi(A / sqrt(horizon)))`.
    pub reference: f64,
    /// Grid maximum of the bound process per path.
    pub per_path_max: Vec<f64>,
}

/// Exceedance evidence against the pathwise bound demanded by the max-type
/// equation with a non-contractive coefficient.
#[derive(Debug, Clone)]
pub struct MartingaleBoundReport {
    /// Max-norm coefficient of the rejected equation.
    pub kappa: f64,
    /// Barrier `A = psi(0) + kappa * max |psi|` that the martingale would
    /// have to respect forever.
    pub barrier: f64,
    /// Lower bound on the squared diffusion coefficient.
    pub delta_lb: f64,
    /// Number of simulated paths per rung.
    pub n_paths: usize,
    /// One entry per rung of the horizon ladder `T, 4T, 16T`.
    pub levels: Vec<LadderPoint>,
}

impl MartingaleBoundReport {
    /// Render the report as stable line-oriented text.
    pub fn render(&self) -> String {
        let fl = |v: f64| format!("{v:.16e}");
        let mut out = String::from("max-type martingale bound witness\n");
        out.push_str(&format!("kappa: {}\n", fl(self.kappa)));
        out.push_str(&format!("barrier: {}\n", fl(self.barrier)));
        out.push_str(&format!("diffusion_floor: {}\n", fl(self.delta_lb)));
        out.push_str(&format!("paths: {}\n", self.n_paths));
        for level in &self.levels {
            out.push_str(&format!(
                "level horizon: {} frequency: {} se: {} reference: {}\n",
                fl(level.horizon),
                fl(level.frequency),
                fl(level.se),
                fl(level.reference),
            ));
        }
        out
    }
}

/// Sample the running maximum of the time-changed lower-bound process and
/// report how often it exceeds the barrier `A = psi(0) + kappa * max |psi|`.
///
/// A solution of the max-type equation with coefficient `kappa >= 1` would
/// confine the martingale `-int g dB` below `A` for all time; its quadratic
/// variation grows at least like `delta_lb * t`, so after the time change a
/// standard Brownian motion's maximum over `[0, delta_lb * T]` would have to
/// stay below `A` almost surely.  The witness simulates that maximum over the
/// horizon ladder `T, 4T, 16T` (each rung a prefix of the same paths, so the
/// reported frequencies are nondecreasing by construction) and compares the
/// exceedance frequency with the reflection-principle probability
/// `2 (1 - Phi(A / sqrt(delta_lb T)))`.
///
/// Between grid nodes the crossing probability is filled in from the Brownian
/// bridge, `exp(-2 (A - x_k)(A - x_{k+1}) / h)`, so each path contributes an
/// unbiased crossing probability rather than a grid maximum indicator; the
/// plain grid maxima are recorded alongside.
pub fn maxtype_witness(
    kappa: f64,
    delta_lb: f64,
    initial: &Segment,
    t_base: f64,
    n_paths: usize,
    grid_step: f64,
    seed: u64,
) -> Result<MartingaleBoundReport> {
    if !kappa.is_finite() || kappa < 1.0 {
        return Err(Error::Inapplicable(format!(
            "a max-norm coefficient below one ({kappa}) keeps the neutral part contractive and the equation solvable; the bound violation needs kappa >= 1"
        )));
    }
    if !(delta_lb > 0.0) || !delta_lb.is_finite() {
        return Err(Error::InvalidInput(format!(
            "martingale bound witness: the diffusion floor must be positive, got {delta_lb}"
        )));
    }
    if !(t_base > 0.0) || !t_base.is_finite() || !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(Error::InvalidInput(format!(
            "martingale bound witness: horizon {t_base} and grid step {grid_step} must be positive and finite"
        )));
    }
    if n_paths < 2 {
        return Err(Error::InvalidInput(format!(
            "martingale bound witness: need at least 2 paths, got {n_paths}"
        )));
    }
    if initial.dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "martingale bound witness initial segment",
            expected: 1,
            got: initial.dim(),
        });
    }
    let psi0 = initial.node(initial.node_count() - 1)[0];
    let barrier = psi0 + kappa * initial.sup_norm();
    let h = grid_step;
    let rung_steps: Vec<usize> = HORIZON_LADDER
        .iter()
        .map(|r| ((delta_lb * t_base * r / h).ceil() as usize).max(1))
        .collect();
    let n_total = *rung_steps.last().expect("ladder is nonempty");
    let sqrt_h = h.sqrt();

    let per_path: Vec<([f64; 3], [f64; 3])> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let rng = crate::rng::CounterRng::new(seed, i as u64);
            let mut x = 0.0f64;
            let mut survive = 1.0f64;
            let mut running_max = 0.0f64;
            let mut probs = [0.0f64; 3];
            let mut maxes = [0.0f64; 3];
            let mut rung = 0usize;
            for k in 0..n_total {
                let w = x + sqrt_h * rng.gaussian(k as u64);
                let p = if x >= barrier || w >= barrier {
                    1.0
                } else {
                    (-2.0 * (barrier - x) * (barrier - w) / h).exp()
                };
                survive *= 1.0 - p;
                running_max = running_max.max(w);
                x = w;
                while rung < 3 && k + 1 == rung_steps[rung] {
                    probs[rung] = 1.0 - survive;
                    maxes[rung] = running_max;
                    rung += 1;
                }
            }
            (probs, maxes)
        })
        .collect();

    let normal = Normal::new(0.0, 1.0).expect("standard normal parameters are valid");
    let mut levels = Vec::with_capacity(3);
    for (r, &steps) in rung_steps.iter().enumerate() {
        let horizon = steps as f64 * h;
        let vals: Vec<f64> = per_path.iter().map(|(p, _)| p[r]).collect();
        let frequency = vals.iter().sum::<f64>() / n_paths as f64;
        let var = vals.iter().map(|v| (v - frequency) * (v - frequency)).sum::<f64>()
            / (n_paths - 1) as f64;
        let se = (var / n_paths as f64).sqrt();
        let reference = 2.0 * (1.0 - normal.cdf(barrier / horizon.sqrt()));
        let per_path_max = per_path.iter().map(|(_, m)| m[r]).collect();
        levels.push(LadderPoint { horizon, frequency, se, reference, per_path_max });
    }
    Ok(MartingaleBoundReport { kappa, barrier, delta_lb, n_paths, levels })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
