//! Exponential growth-rate certification.
//!
//! For equations whose functionals admit affine bounds
//!
//! ```text
//! |f(phi)|  <= C_f + int nu(ds) |phi(s)|,
//! ||g(phi)|| <= C_g + int eta(ds) |phi(s)|,
//! |D(phi)|  <= C_D + int mu(ds) |phi(s)|,
//! ```
//!
//! the p-th moment of the solution grows at most exponentially, with a rate
//! `delta + beta_1` obtained from the root of a characteristic equation in
//! which the drift and diffusion measures combine into a single measure
//! `lambda` and the neutral measure `mu` enters tilted.  Pathwise growth is
//! bounded by `max(gamma/2, theta*)` when `mu` carries at least unit mass
//! (with `theta*` the tilt rate normalising `mu`) and by `gamma/2`
//! otherwise, where `gamma` is the mean-square rate minimized over the free
//! parameter `epsilon`.  Certificates carry the full set of beta constants
//! from the underlying integral-inequality argument and are cross-checked
//! against Monte Carlo moment curves and pathwise growth statistics.

use crate::ensemble::{MomentPoint, NeutralProblem, PathEnsemble};
use crate::error::{Error, Result};
use crate::functional::{FunctionalSpec, Term};
use crate::measure::DelayMeasure;
use crate::rng::CounterRng;
use crate::segment::Segment;

// ---------------------------------------------------------------------------
// Growth bounds
// ---------------------------------------------------------------------------

/// Affine growth bounds on the three functionals of a neutral equation.
#[derive(Debug, Clone)]
pub struct GrowthBounds {
    c_f: f64,
    c_g: f64,
    c_d: f64,
    nu: DelayMeasure,
    eta: DelayMeasure,
    mu: DelayMeasure,
}

impl GrowthBounds {
    /// Bundle declared constants and measures; the measures must be
    /// nonnegative and the constants finite and nonnegative.
    pub fn new(
        c_f: f64,
        c_g: f64,
        c_d: f64,
        nu: DelayMeasure,
        eta: DelayMeasure,
        mu: DelayMeasure,
    ) -> Result<Self> {
        for (name, c) in [("C_f", c_f), ("C_g", c_g), ("C_D", c_d)] {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "growth bound {name} must be finite and nonnegative, got {c}"
                )));
            }
        }
        for (name, m) in [("nu", &nu), ("eta", &eta), ("mu", &mu)] {
            if !m.is_nonnegative() {
                return Err(Error::InvalidInput(format!(
                    "growth bound measure {name} must be nonnegative"
                )));
            }
        }
        Ok(Self { c_f, c_g, c_d, nu, eta, mu })
    }

    /// Constant part of the drift bound.
    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    /// Constant part of the diffusion bound.
    pub fn c_g(&self) -> f64 {
        self.c_g
    }

    /// Constant part of the neutral bound.
    pub fn c_d(&self) -> f64 {
        self.c_d
    }

    /// Drift bound measure.
    pub fn nu(&self) -> &DelayMeasure {
        &self.nu
    }

    /// Diffusion bound measure.
    pub fn eta(&self) -> &DelayMeasure {
        &self.eta
    }

    /// Neutral bound measure.
    pub fn mu(&self) -> &DelayMeasure {
        &self.mu
    }

    /// Extract conservative bounds from the structure of a problem's
    /// functionals.
    ///
    /// Point and distributed terms contribute their pointwise linear-growth
    /// constants (split into an atom or a variation measure and an additive
    /// constant); windowed maximum terms admit no bound of the integral form
    /// and are rejected.  Diffusion columns combine additively, which
    /// dominates their Frobenius combination.
    pub fn derive(problem: &NeutralProblem) -> Result<Self> {
        let (c_f, nu) = affine_bound_of(problem.drift())?;
        let (c_d, mu) = affine_bound_of(problem.neutral())?;
        let mut c_g = 0.0;
        let mut eta = DelayMeasure::zero(problem.tau());
        for column in problem.diffusion() {
            let (c, m) = affine_bound_of(column)?;
            c_g += c;
            eta = eta.add(&m);
        }
        Self::new(c_f, c_g, c_d, nu, eta, mu)
    }

    /// Confirm the declared bounds against the problem's functionals on
    /// randomized segments.
    ///
    /// Draws `samples` piecewise-linear segments with log-spaced amplitudes,
    /// evaluates each functional and its declared bound, and returns the
    /// largest defect observed (negative when the bounds hold).  A defect
    /// beyond the quadrature tolerance reports a hypothesis violation.
    pub fn validate(&self, problem: &NeutralProblem, samples: usize, seed: u64) -> Result<f64> {
        let tau = problem.tau();
        let dim = problem.dim();
        // A modest validation grid keeps 10^4 samples cheap while matching
        // the trapezoid rule used by both sides of the inequality.
        let nodes = 32usize;
        let h = tau / nodes as f64;
        let rng = CounterRng::new(seed, 7);
        let mut worst = f64::NEG_INFINITY;
        let mut values = vec![0.0; (nodes + 1) * dim];
        for i in 0..samples {
            let base = (i * (values.len() + 1)) as u64;
            let amplitude = 10.0f64.powf(-2.0 + 4.0 * rng.uniform(base));
            for (k, v) in values.iter_mut().enumerate() {
                *v = amplitude * (2.0 * rng.uniform(base + 1 + k as u64) - 1.0);
            }
            let seg = Segment::from_flat(tau, h, dim, values.clone())?;
            let defect = self.sample_defect(problem, &seg)?;
            worst = worst.max(defect);
        }
        let tol = 1e-7;
        if worst > tol {
            return Err(Error::HypothesisViolated { max_defect: worst, tol });
        }
        Ok(worst)
    }

    /// Largest relative defect of the three bounds on one segment.
    fn sample_defect(&self, problem: &NeutralProblem, seg: &Segment) -> Result<f64> {
        let norm_of = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let weighted = |m: &DelayMeasure| -> Result<f64> {
            if m.is_zero() {
                return Ok(0.0);
            }
            Ok(m.integrate_segment_mapped(seg, 1, |x, out| {
                out[0] = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            })?[0])
        };
        let mut worst = f64::NEG_INFINITY;

        let f_val = norm_of(&problem.drift().evaluate(seg)?);
        let f_bound = self.c_f + weighted(&self.nu)?;
        worst = worst.max((f_val - f_bound) / (1.0 + f_bound));

        let d_val = norm_of(&problem.neutral().evaluate(seg)?);
        let d_bound = self.c_d + weighted(&self.mu)?;
        worst = worst.max((d_val - d_bound) / (1.0 + d_bound));

        if !problem.diffusion().is_empty() {
            let mut frob = 0.0;
            for column in problem.diffusion() {
                let v = column.evaluate(seg)?;
                frob += v.iter().map(|x| x * x).sum::<f64>();
            }
            let g_val = frob.sqrt();
            let g_bound = self.c_g + weighted(&self.eta)?;
            worst = worst.max((g_val - g_bound) / (1.0 + g_bound));
        }
        Ok(worst)
    }
}

/// Affine growth bound `(constant, measure)` of one functional.
fn affine_bound_of(spec: &FunctionalSpec) -> Result<(f64, DelayMeasure)> {
    let tau = spec.tau();
    let root_d = (spec.dim() as f64).sqrt();
    let mut constant = spec.offset().iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut measure = DelayMeasure::zero(tau);
    for term in spec.terms() {
        match term {
            Term::PointDelay { lag, map } => {
                let (slope, off) = map.linear_growth();
                constant += off * root_d;
                if slope != 0.0 {
                    measure = measure.add(&DelayMeasure::atom(tau, *lag, slope)?);
                }
            }
            Term::Distributed { measure: m, map } => {
                let (slope, off) = map.linear_growth();
                constant += off * root_d * m.total_variation();
                if slope != 0.0 {
                    measure = measure.add(&m.abs().scale(slope));
                }
            }
            Term::MaxNorm { coeff, .. } => {
                if *coeff != 0.0 {
                    return Err(Error::Inapplicable(
                        "windowed maximum terms admit no affine growth bound of the \
                         integral form"
                            .into(),
                    ));
                }
            }
        }
    }
    Ok((constant, measure))
}

// ---------------------------------------------------------------------------
// Characteristic equation
// ---------------------------------------------------------------------------

/// Combined drift/diffusion measure
/// `lambda = nu / eps^(p-1) + eta (p-1) / eps^((p-2)/2)`.
pub fn build_lambda(
    nu: &DelayMeasure,
    eta: &DelayMeasure,
    p: f64,
    epsilon: f64,
) -> Result<DelayMeasure> {
    check_p_epsilon(p, epsilon)?;
    let w_nu = epsilon.powf(1.0 - p);
    let w_eta = (p - 1.0) / epsilon.powf(0.5 * (p - 2.0));
    Ok(nu.scale(w_nu).add(&eta.scale(w_eta)))
}

/// Free-parameter exponent `beta_1 = eps p (p-1) / 2`.
pub fn beta1(p: f64, epsilon: f64) -> f64 {
    epsilon * p * (p - 1.0) / 2.0
}

/// The moment-comparison constant `C_p = [p^(p+1) / (2 (p-1)^(p-1))]^(p/2)`.
pub fn moment_constant(p: f64) -> f64 {
    (p.powf(p + 1.0) / (2.0 * (p - 1.0).powf(p - 1.0))).powf(0.5 * p)
}

fn check_p_epsilon(p: f64, epsilon: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::InvalidInput(format!("moment order p must be >= 2, got {p}")));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidInput(format!(
            "free parameter epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

/// Left side of the characteristic equation at explicit tilt rate `beta1`:
///
/// ```text
/// F(delta) = int e^((delta+beta1) s) mu(ds)
///          + (1/delta) int e^((delta+beta1) s) lambda(ds).
/// ```
///
/// The second summand collapses the outer integral
/// `int_0^tau e^(-delta s) Lambda(s) ds + e^(-delta tau)/delta Lambda(tau)`
/// (with `Lambda(s)` the partial tilted lambda mass) in closed form.
pub fn characteristic_value_with_beta1(
    delta: f64,
    beta1: f64,
    mu: &DelayMeasure,
    lambda: &DelayMeasure,
) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "characteristic function needs delta > 0, got {delta}"
        )));
    }
    let mu_part = mu.exp_tilt_mass(delta + beta1);
    let lambda_part = lambda.exp_tilt_mass(delta + beta1) / delta;
    Ok(mu_part + lambda_part)
}

/// Left side of the characteristic equation at the tilt rate implied by
/// `(p, epsilon)`.
pub fn characteristic_value(
    delta: f64,
    p: f64,
    epsilon: f64,
    mu: &DelayMeasure,
    lambda: &DelayMeasure,
    tau: f64,
) -> Result<f64> {
    check_p_epsilon(p, epsilon)?;
    check_support(mu, tau)?;
    check_support(lambda, tau)?;
    characteristic_value_with_beta1(delta, beta1(p, epsilon), mu, lambda)
}

fn check_support(m: &DelayMeasure, tau: f64) -> Result<()> {
    if m.support() > tau * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::InvalidInput(format!(
            "measure support [-{}, 0] exceeds the delay horizon {tau}",
            m.support()
        )));
    }
    Ok(())
}

/// Root of the characteristic equation together with its ingredients.
#[derive(Debug, Clone)]
pub struct DeltaSolve {
    /// Root of `F(delta) = 1`, or `0` for degenerate certificates.
    pub delta: f64,
    /// Tilt rate `beta_1(p, epsilon)`.
    pub beta1: f64,
    /// Combined measure the root was solved against.
    pub lambda: DelayMeasure,
    /// True when `F < 1` everywhere, so any positive `delta` certifies and
    /// the rate degenerates to `beta_1`.
    pub degenerate: bool,
    /// `|F(delta) - 1|` at the returned root (zero for degenerate solves).
    pub residual: f64,
    /// Certified p-th-mean rate `delta + beta_1`.
    pub rate: f64,
}

/// Smallest `delta` the bracketing ever evaluates; the `1/delta` term makes
/// `F` blow up there whenever `lambda` has mass.
const DELTA_FLOOR: f64 = 1e-8;

/// Solve the characteristic equation `F(delta) = 1` for the given moment
/// order and free parameter.
///
/// `F` is continuous and strictly decreasing, so a doubling search from the
/// floor brackets the root and bisection polishes it to `|F - 1| <= 1e-12`.
/// When `F` stays below 1 everywhere the certificate degenerates to the
/// rate `beta_1` (any positive `delta` works; the minimal bracketed value
/// is reported); when `F` stays at or above 1 (instantaneous `mu` mass of
/// at least 1) no root exists.
pub fn solve_delta(
    p: f64,
    epsilon: f64,
    bounds: &GrowthBounds,
    tau: f64,
) -> Result<DeltaSolve> {
    check_p_epsilon(p, epsilon)?;
    let b1 = beta1(p, epsilon);
    let lambda = build_lambda(&bounds.nu, &bounds.eta, p, epsilon)?;
    check_support(&bounds.mu, tau)?;
    check_support(&lambda, tau)?;
    if bounds.mu.is_zero() && lambda.is_zero() {
        return Err(Error::Degenerate { beta1: b1 });
    }
    if bounds.mu.atom_mass_at_zero() >= 1.0 {
        return Err(Error::NoRoot(format!(
            "instantaneous mu mass {} keeps the characteristic value at or above 1",
            bounds.mu.atom_mass_at_zero()
        )));
    }
    let f = |d: f64| characteristic_value_with_beta1(d, b1, &bounds.mu, &lambda);
    let mut lo = DELTA_FLOOR;
    if f(lo)? <= 1.0 {
        return Ok(DeltaSolve {
            delta: 0.0,
            beta1: b1,
            lambda,
            degenerate: true,
            residual: 0.0,
            rate: b1,
        });
    }
    let mut hi = 1.0;
    while f(hi)? >= 1.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::NoRoot(
                "characteristic value stays at or above 1 for all delta".into(),
            ));
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let val = f(mid)?;
        if (val - 1.0).abs() <= 1e-12 {
            break;
        }
        if val > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let residual = (f(mid)? - 1.0).abs();
    Ok(DeltaSolve { delta: mid, beta1: b1, lambda, degenerate: false, residual, rate: mid + b1 })
}

/// Outcome of minimizing the certified rate over the free parameter.
#[derive(Debug, Clone)]
pub struct EpsilonOptimum {
    /// Minimizing free parameter.
    pub epsilon: f64,
    /// Minimal certified rate `delta + beta_1`.
    pub rate: f64,
    /// The solve at the minimizer.
    pub solve: DeltaSolve,
}

/// Default search grid for the free parameter: 40 log-spaced points in
/// `[1e-3, 10]`.
pub fn default_epsilon_grid() -> Vec<f64> {
    let (lo, hi) = (1e-3f64.ln(), 10.0f64.ln());
    (0..40).map(|i| (lo + (hi - lo) * i as f64 / 39.0).exp()).collect()
}

/// Minimize `epsilon -> delta(p, epsilon) + beta_1(p, epsilon)` over a grid,
/// then refine around the best grid point by golden-section search in
/// log-space.
///
/// Grid points whose solve degenerates still certify the rate `beta_1` and
/// compete in the minimum; only when every point errors out as fully
/// degenerate (no measure mass at all) does the search fail.
pub fn minimize_over_epsilon(
    p: f64,
    bounds: &GrowthBounds,
    tau: f64,
    eps_grid: &[f64],
) -> Result<EpsilonOptimum> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidInput("epsilon grid is empty".into()));
    }
    let rate_at = |eps: f64| -> Result<Option<DeltaSolve>> {
        match solve_delta(p, eps, bounds, tau) {
            Ok(s) => Ok(Some(s)),
            Err(Error::Degenerate { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let mut best: Option<(f64, DeltaSolve)> = None;
    for &eps in eps_grid {
        if let Some(s) = rate_at(eps)? {
            if best.as_ref().map_or(true, |(_, b)| s.rate < b.rate) {
                best = Some((eps, s));
            }
        }
    }
    let Some((mut best_eps, mut best_solve)) = best else {
        let min_beta1 = eps_grid.iter().fold(f64::INFINITY, |m, &e| m.min(beta1(p, e)));
        return Err(Error::Degenerate { beta1: min_beta1 });
    };
    // Golden-section refinement between the neighbours of the best point.
    let idx = eps_grid
        .iter()
        .position(|&e| e == best_eps)
        .expect("best epsilon comes from the grid");
    let lo = eps_grid[idx.saturating_sub(1)].ln();
    let hi = eps_grid[(idx + 1).min(eps_grid.len() - 1)].ln();
    if hi > lo {
        let phi = 0.5 * (5.0f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let eval = |u: f64| -> Result<(f64, Option<DeltaSolve>)> {
            let eps = u.exp();
            Ok(match rate_at(eps)? {
                Some(s) => (s.rate, Some(s)),
                None => (f64::INFINITY, None),
            })
        };
        let (mut f1, mut s1) = eval(x1)?;
        let (mut f2, mut s2) = eval(x2)?;
        for _ in 0..48 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                s2 = s1.take();
                x1 = b - phi * (b - a);
                let r = eval(x1)?;
                f1 = r.0;
                s1 = r.1;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                s1 = s2.take();
                x2 = a + phi * (b - a);
                let r = eval(x2)?;
                f2 = r.0;
                s2 = r.1;
            }
        }
        for (u, f, s) in [(x1, f1, s1), (x2, f2, s2)] {
            if f < best_solve.rate {
                if let Some(s) = s {
                    best_eps = u.exp();
                    best_solve = s;
                }
            }
        }
    }
    let rate = best_solve.rate;
    Ok(EpsilonOptimum { epsilon: best_eps, rate, solve: best_solve })
}

/// Tilt rate normalising the neutral bound measure:
/// `int e^(theta* s) mu(ds) = 1`.
///
/// Returns `None` when the mass of `mu` is below 1 (the almost-sure rate is
/// then governed by the mean-square rate alone); errors when all mass sits
/// at lag 0 with total at least 1, because tilting cannot reduce it.
pub fn solve_theta_star(mu: &DelayMeasure, tau: f64) -> Result<Option<f64>> {
    if !mu.is_nonnegative() {
        return Err(Error::InvalidInput("theta* needs a nonnegative measure".into()));
    }
    check_support(mu, tau)?;
    let mass = mu.total_mass();
    if mass < 1.0 {
        return Ok(None);
    }
    if mass - mu.atom_mass_at_zero() <= 1e-15 {
        return Err(Error::NoRoot(format!(
            "all mu mass ({mass}) sits at lag 0; the tilt cannot bring it to 1"
        )));
    }
    if (mass - 1.0).abs() <= 1e-15 {
        return Ok(Some(0.0));
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while mu.exp_tilt_mass(hi) >= 1.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NoRoot(
                "tilted mu mass does not drop below 1 at any practical rate".into(),
            ));
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let val = mu.exp_tilt_mass(mid);
        if (val - 1.0).abs() <= 1e-12 {
            break;
        }
        if val > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            break;
        }
    }
    Ok(Some(mid))
}

// ---------------------------------------------------------------------------
// Monte Carlo estimates
// ---------------------------------------------------------------------------

/// Monte Carlo moment curve `t -> E|X(t)|^p` with standard errors.
///
/// Requires at least 500 paths for the errors to be meaningful.  The
/// reported standard error of each mean coincides with its jackknife
/// estimate (leave-one-out recombination reproduces `s/sqrt(n)` exactly for
/// a sample mean).
pub fn mc_moment_curve(ensemble: &PathEnsemble, p: f64) -> Result<Vec<MomentPoint>> {
    if ensemble.n_paths() < 500 {
        return Err(Error::PrecisionError(format!(
            "moment curve needs at least 500 paths, got {}",
            ensemble.n_paths()
        )));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidInput(format!("moment order must be positive, got {p}")));
    }
    Ok(ensemble.moment_curve(p))
}

/// Least-squares growth rate of a moment curve over a time window.
///
/// Fits `log m(t) ~ a + rate * t` on the nodes inside the window and
/// returns `(rate, standard error of the rate)`.  Nonpositive curve values
/// inside the window make the rate undefined.
pub fn empirical_mean_rate(curve: &[MomentPoint], window: (f64, f64)) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|q| q.t >= window.0 - 1e-12 && q.t <= window.1 + 1e-12)
        .map(|q| (q.t, q.mean))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "window [{}, {}] covers {} curve nodes; need at least 2",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if let Some((t, m)) = pts.iter().find(|(_, m)| !(*m > 0.0)) {
        return Err(Error::RateUndefined(format!(
            "moment curve is not positive at t = {t} (value {m})"
        )));
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mean_y = pts.iter().map(|(_, m)| m.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mean_t).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|(t, m)| (t - mean_t) * (m.ln() - mean_y)).sum();
    let rate = sxy / sxx;
    let rss: f64 = pts
        .iter()
        .map(|(t, m)| (m.ln() - mean_y - rate * (t - mean_t)).powi(2))
        .sum();
    let se = if pts.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok((rate, se))
}

/// Pathwise growth statistic: the 99th percentile over paths of
/// `max_{t in window} log|X(t)| / t`, with a crude standard error
/// (sample standard deviation over `sqrt(n)`).
///
/// Paths that vanish identically on the window make the rate undefined.
pub fn empirical_as_rate(ensemble: &PathEnsemble, window: (f64, f64)) -> Result<(f64, f64)> {
    if ensemble.n_paths() < 2 {
        return Err(Error::InsufficientData(
            "pathwise rate needs at least two paths".into(),
        ));
    }
    let mut stats = Vec::with_capacity(ensemble.n_paths());
    for path in ensemble.paths() {
        let mut best = f64::NEG_INFINITY;
        for k in 0..path.node_count() {
            let t = path.time(k);
            if t < window.0 - 1e-12 || t > window.1 + 1e-12 || t <= 0.0 {
                continue;
            }
            let norm = path.norm_at(k);
            if norm > 0.0 {
                best = best.max(norm.ln() / t);
            }
        }
        if best == f64::NEG_INFINITY {
            return Err(Error::RateUndefined(
                "a path has no positive values inside the window".into(),
            ));
        }
        stats.push(best);
    }
    stats.sort_by(|a, b| a.partial_cmp(b).expect("growth statistics are finite"));
    let n = stats.len();
    let idx = ((0.99 * n as f64).ceil() as usize).clamp(1, n) - 1;
    let value = stats[idx];
    let mean = stats.iter().sum::<f64>() / n as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((value, (var / n as f64).sqrt()))
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// The beta constants of the integral-inequality argument behind a
/// certificate.
#[derive(Debug, Clone, Copy)]
pub struct BetaConstants {
    /// `eps p (p-1) / 2`.
    pub beta1: f64,
    /// `C_f / eps^(p-1)`.
    pub beta2: f64,
    /// `C_g (p-1) / eps^((p-2)/2)`.
    pub beta3: f64,
    /// `(1 + eps^(1/(p-1)))^(p-1) / eps`.
    pub beta4: f64,
    /// `(beta2 + beta3) (1 + eps^(1/(p-1)))^(p-1) / beta1`.
    pub beta5: f64,
    /// `(1 + eps^(1/(p-1)))^(p-1) y(0) + beta4 C_D + beta5`.
    pub beta6: f64,
    /// `beta6 + (beta4 E_mu + 2 tau E_lambda) ||psi_e||`, with `E_m` the
    /// `beta1`-tilted masses and `psi_e` the tilted initial history.
    pub beta7: f64,
    /// Moment-comparison constant `C_p`.
    pub c_p: f64,
}

/// Compute the beta constants for one problem/bounds/parameter choice.
fn beta_constants(
    p: f64,
    epsilon: f64,
    bounds: &GrowthBounds,
    lambda: &DelayMeasure,
    problem: &NeutralProblem,
) -> Result<BetaConstants> {
    let b1 = beta1(p, epsilon);
    let amp = (1.0 + epsilon.powf(1.0 / (p - 1.0))).powf(p - 1.0);
    let beta2 = bounds.c_f / epsilon.powf(p - 1.0);
    let beta3 = bounds.c_g * (p - 1.0) / epsilon.powf(0.5 * (p - 2.0));
    let beta4 = amp / epsilon;
    let beta5 = (beta2 + beta3) * amp / b1;
    let psi = problem.initial();
    let d_psi = problem.neutral().evaluate(psi)?;
    let x0 = psi.node(psi.node_count() - 1);
    let y0 = x0
        .iter()
        .zip(&d_psi)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
        .powf(p);
    let beta6 = amp * y0 + beta4 * bounds.c_d + beta5;
    let tau = problem.tau();
    let psi_e_sup = (0..psi.node_count())
        .map(|j| {
            let s = -tau + j as f64 * psi.grid_step();
            (-b1 * s).exp() * psi.node_norm(j).powf(p)
        })
        .fold(0.0f64, f64::max);
    let e_mu = bounds.mu.exp_tilt_mass(b1);
    let e_lambda = lambda.exp_tilt_mass(b1);
    let beta7 = beta6 + (beta4 * e_mu + 2.0 * tau * e_lambda) * psi_e_sup;
    Ok(BetaConstants {
        beta1: b1,
        beta2,
        beta3,
        beta4,
        beta5,
        beta6,
        beta7,
        c_p: moment_constant(p),
    })
}

/// Empirical cross-checks attached to a certificate.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalChecks {
    /// Least-squares rate of the Monte Carlo `p`-th moment curve.
    pub mean_rate: f64,
    /// Standard error of that rate.
    pub mean_rate_se: f64,
    /// True when the empirical mean rate is below the certified one plus
    /// three standard errors.
    pub mean_ok: bool,
    /// 99th-percentile pathwise growth statistic.
    pub as_rate: f64,
    /// Standard error of that statistic.
    pub as_rate_se: f64,
    /// True when the pathwise statistic is below the certified almost-sure
    /// rate plus three standard errors.
    pub as_ok: bool,
    /// Time window the estimates were taken on.
    pub window: (f64, f64),
}

/// A complete growth-rate certificate.
#[derive(Debug, Clone)]
pub struct RateCertificate {
    /// Moment order the certificate was requested for.
    pub p: f64,
    /// Free parameter the certificate was requested for.
    pub epsilon: f64,
    /// Beta constants at `(p, epsilon)`.
    pub betas: BetaConstants,
    /// Combined drift/diffusion measure at `(p, epsilon)`.
    pub lambda: DelayMeasure,
    /// Characteristic root (0 when degenerate).
    pub delta: f64,
    /// True when the characteristic value stays below 1 and the rate
    /// degenerates to `beta_1`.
    pub degenerate: bool,
    /// `|F(delta) - 1|` at the root.
    pub residual: f64,
    /// Certified p-th-mean rate `delta + beta_1`.
    pub mean_rate: f64,
    /// Tilt rate normalising `mu`, present when `mu` has mass at least 1.
    pub theta_star: Option<f64>,
    /// Total mass of the neutral bound measure.
    pub mu_mass: f64,
    /// Mean-square rate minimized over the free parameter.
    pub gamma_mean: f64,
    /// Minimizing free parameter behind `gamma_mean`.
    pub epsilon_star: f64,
    /// True when the mean-square minimization itself degenerated.
    pub gamma_degenerate: bool,
    /// Certified almost-sure rate: `max(gamma/2, theta*)` when `mu` has
    /// mass at least 1, `gamma/2` otherwise.
    pub as_rate: f64,
    /// Monte Carlo cross-checks.
    pub checks: EmpiricalChecks,
}

impl RateCertificate {
    /// Render the certificate as a structured text record.
    pub fn render(&self) -> String {
        let fl = |v: f64| format!("{v:.16e}");
        let mut out = String::new();
        out.push_str("growth-rate certificate\n");
        out.push_str(&format!("p: {}\n", fl(self.p)));
        out.push_str(&format!("epsilon: {}\n", fl(self.epsilon)));
        out.push_str(&format!("degenerate: {}\n", self.degenerate));
        out.push_str(&format!("delta: {}\n", fl(self.delta)));
        out.push_str(&format!("characteristic_residual: {}\n", fl(self.residual)));
        let b = &self.betas;
        for (name, v) in [
            ("beta1", b.beta1),
            ("beta2", b.beta2),
            ("beta3", b.beta3),
            ("beta4", b.beta4),
            ("beta5", b.beta5),
            ("beta6", b.beta6),
            ("beta7", b.beta7),
            ("c_p", b.c_p),
        ] {
            out.push_str(&format!("{name}: {}\n", fl(v)));
        }
        out.push_str(&format!("lambda_mass: {}\n", fl(self.lambda.total_mass())));
        out.push_str(&format!("mu_mass: {}\n", fl(self.mu_mass)));
        match self.theta_star {
            Some(t) => out.push_str(&format!("theta_star: {}\n", fl(t))),
            None => out.push_str("theta_star: none\n"),
        }
        let case = if self.mu_mass >= 1.0 {
            "mu mass >= 1: as_rate = max(gamma_mean/2, theta_star)"
        } else {
            "mu mass < 1: as_rate = gamma_mean/2"
        };
        out.push_str(&format!("case: {case}\n"));
        out.push_str(&format!("mean_rate: {}\n", fl(self.mean_rate)));
        out.push_str(&format!("gamma_mean: {}\n", fl(self.gamma_mean)));
        out.push_str(&format!("epsilon_star: {}\n", fl(self.epsilon_star)));
        out.push_str(&format!("gamma_degenerate: {}\n", self.gamma_degenerate));
        out.push_str(&format!("as_rate: {}\n", fl(self.as_rate)));
        let c = &self.checks;
        out.push_str(&format!(
            "empirical_mean_rate: {} (se {}) -> {}\n",
            fl(c.mean_rate),
            fl(c.mean_rate_se),
            if c.mean_ok { "ok" } else { "FAIL" }
        ));
        out.push_str(&format!(
            "empirical_as_rate: {} (se {}) -> {}\n",
            fl(c.as_rate),
            fl(c.as_rate_se),
            if c.as_ok { "ok" } else { "FAIL" }
        ));
        out.push_str(&format!(
            "window: [{}, {}]\n",
            fl(c.window.0),
            fl(c.window.1)
        ));
        out
    }
}

/// Number of randomized segments used to confirm growth bounds inside
/// [`certify`].
const CERTIFY_VALIDATION_SAMPLES: usize = 10_000;

/// Assemble and cross-check a growth-rate certificate.
///
/// The declared bounds are first confirmed against the problem's
/// functionals on randomized segments.  The characteristic root at
/// `(p, epsilon)` gives the certified p-th-mean rate; the mean-square rate
/// minimized over the free parameter gives `gamma`, and the almost-sure
/// rate follows the mass case split on `mu`.  Monte Carlo moment and
/// pathwise estimates from the ensemble are attached, each compared against
/// its certified bound plus three standard errors.  Fully degenerate solves
/// (no measure mass) still certify the rate `beta_1` and are flagged.
pub fn certify(
    problem: &NeutralProblem,
    bounds: &GrowthBounds,
    p: f64,
    epsilon: f64,
    ensemble: &PathEnsemble,
) -> Result<RateCertificate> {
    bounds.validate(problem, CERTIFY_VALIDATION_SAMPLES, 0x5eed_20260823)?;
    let tau = problem.tau();
    let (delta, degenerate, residual, lambda) =
        match solve_delta(p, epsilon, bounds, tau) {
            Ok(s) => (s.delta, s.degenerate, s.residual, s.lambda),
            Err(Error::Degenerate { .. }) => {
                (0.0, true, 0.0, build_lambda(&bounds.nu, &bounds.eta, p, epsilon)?)
            }
            Err(e) => return Err(e),
        };
    let betas = beta_constants(p, epsilon, bounds, &lambda, problem)?;
    let mean_rate = delta + betas.beta1;
    let theta_star = solve_theta_star(&bounds.mu, tau)?;
    let (gamma_mean, epsilon_star, gamma_degenerate) =
        match minimize_over_epsilon(2.0, bounds, tau, &default_epsilon_grid()) {
            Ok(opt) => (opt.rate, opt.epsilon, opt.solve.degenerate),
            // With no measure mass at all the p = 2 rate is beta1 = epsilon,
            // minimized at the smallest epsilon considered.
            Err(Error::Degenerate { beta1 }) => (beta1, beta1, true),
            Err(e) => return Err(e),
        };
    let mu_mass = bounds.mu.total_mass();
    let as_rate = if mu_mass >= 1.0 {
        let t = theta_star.ok_or_else(|| {
            Error::NoRoot("mu mass at least 1 but theta* is unavailable".into())
        })?;
        (0.5 * gamma_mean).max(t)
    } else {
        0.5 * gamma_mean
    };
    let curve = mc_moment_curve(ensemble, p)?;
    let horizon = curve.last().map(|q| q.t).unwrap_or(0.0);
    let window = (0.5 * horizon, horizon);
    let (emp_mean, mean_se) = empirical_mean_rate(&curve, window)?;
    let (emp_as, as_se) = empirical_as_rate(ensemble, window)?;
    let checks = EmpiricalChecks {
        mean_rate: emp_mean,
        mean_rate_se: mean_se,
        mean_ok: emp_mean <= mean_rate + 3.0 * mean_se,
        as_rate: emp_as,
        as_rate_se: as_se,
        as_ok: emp_as <= as_rate + 3.0 * as_se,
        window,
    };
    Ok(RateCertificate {
        p,
        epsilon,
        betas,
        lambda,
        delta,
        degenerate,
        residual,
        mean_rate,
        theta_star,
        mu_mass,
        gamma_mean,
        epsilon_star,
        gamma_degenerate,
        as_rate,
        checks,
    })
}
