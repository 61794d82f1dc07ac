//! Delay functionals `C([-tau, 0]; R^d) -> R^d` and their contraction moduli.
//!
//! A [`FunctionalSpec`] is a sum of structured terms — point delays,
//! distributed delays against a [`DelayMeasure`], windowed maximum-norm
//! terms — each composed with a pointwise map from a small registry
//! ([`PointMap`]), plus a constant offset.
//!
//! Besides evaluation, the module computes the quantities that decide
//! solvability of the neutral equation:
//!
//! * [`FunctionalSpec::rho0`]: the non-atomicity modulus `rho_0(s)`, the best
//!   generic Lipschitz bound for pairs of segments that agree outside the
//!   final window `(-s, 0]`;
//! * [`FunctionalSpec::check_mao_contraction`]: the classical global
//!   contraction constant `kappa = rho_0(tau)`;
//! * [`decompose`]: the split `D = D_0 + D_1` into a pure-delay part (support
//!   separated from `0` by a gap) and a uniformly non-atomic remainder;
//! * [`select_t1_alpha`]: the interval length / weight pair `(T_1, alpha)`
//!   that makes the chained Picard iteration a contraction with explicit
//!   rate `gamma < 1`.

use crate::error::{Error, Result};
use crate::measure::{DelayMeasure, MeasureLiteral};
use crate::segment::Segment;
use serde::{Deserialize, Serialize};

/// Absolute tolerance for lag/window comparisons.
fn lag_tol(tau: f64) -> f64 {
    1e-12 * (1.0 + tau.abs())
}

// ---------------------------------------------------------------------------
// Pointwise map registry
// ---------------------------------------------------------------------------

/// Registry of pointwise maps applied componentwise inside functional terms.
///
/// Every map carries an exact Lipschitz constant and linear-growth constants
/// `|h(x)| <= slope |x| + offset` used by the growth certificates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointMap {
    /// `x -> x`.
    Identity,
    /// `x -> a x + b` componentwise.
    Affine {
        /// Slope.
        a: f64,
        /// Intercept.
        b: f64,
    },
    /// `x -> c tanh(x)` componentwise.
    TanhSaturation {
        /// Output scale.
        c: f64,
    },
}

impl PointMap {
    /// Apply the map componentwise (`out.len() == x.len()`).
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            PointMap::Identity => out.copy_from_slice(x),
            PointMap::Affine { a, b } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = a * xi + b;
                }
            }
            PointMap::TanhSaturation { c } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = c * xi.tanh();
                }
            }
        }
    }

    /// Exact Lipschitz constant of the map.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            PointMap::Identity => 1.0,
            PointMap::Affine { a, .. } => a.abs(),
            PointMap::TanhSaturation { c } => c.abs(),
        }
    }

    /// Linear growth constants `(slope, offset)` with
    /// `|h(x)| <= slope |x| + offset` per component.
    ///
    /// `|tanh(x)| <= |x|`, so the saturation map has zero offset.
    pub fn linear_growth(&self) -> (f64, f64) {
        match *self {
            PointMap::Identity => (1.0, 0.0),
            PointMap::Affine { a, b } => (a.abs(), b.abs()),
            PointMap::TanhSaturation { c } => (c.abs(), 0.0),
        }
    }

    /// Empirically confirm the declared constants on `n` random point pairs.
    ///
    /// Returns the largest observed ratio `|h(x)-h(y)| / |x-y|` and the
    /// largest defect of the growth bound (positive values would mean the
    /// declared constants are wrong).
    pub fn validate_constants(&self, n: usize, seed: u64) -> (f64, f64) {
        let key = crate::rng::CounterRng::new(seed, 0);
        let (slope, offset) = self.linear_growth();
        let lip = self.lipschitz();
        let mut worst_ratio = 0.0f64;
        let mut worst_defect = f64::NEG_INFINITY;
        let mut out_x = [0.0];
        let mut out_y = [0.0];
        for i in 0..n {
            // Mix scales so saturation behaviour is probed as well.
            let scale = 10.0f64.powf(-3.0 + 6.0 * key.uniform(3 * i as u64));
            let x = scale * (2.0 * key.uniform(3 * i as u64 + 1) - 1.0);
            let y = scale * (2.0 * key.uniform(3 * i as u64 + 2) - 1.0);
            self.apply(&[x], &mut out_x);
            self.apply(&[y], &mut out_y);
            if (x - y).abs() > 1e-12 {
                worst_ratio = worst_ratio.max((out_x[0] - out_y[0]).abs() / (x - y).abs() / lip.max(1e-300));
            }
            worst_defect = worst_defect.max(out_x[0].abs() - (slope * x.abs() + offset));
        }
        (worst_ratio, worst_defect)
    }
}

// ---------------------------------------------------------------------------
// Terms and specs
// ---------------------------------------------------------------------------

/// One structured term of a functional.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// `h(phi(lag))` with `lag` in `[-tau, 0]`.
    PointDelay {
        /// Evaluation abscissa (non-positive).
        lag: f64,
        /// Pointwise map applied to the evaluated value.
        map: PointMap,
    },
    /// `int m(ds) h(phi(s))`.
    Distributed {
        /// Signed measure on `[-tau, 0]`.
        measure: DelayMeasure,
        /// Pointwise map applied under the integral.
        map: PointMap,
    },
    /// `coeff * max_{s in [window.0, window.1]} |phi(s)|` (scalar only).
    MaxNorm {
        /// Scale coefficient.
        coeff: f64,
        /// Window `[-a, -b]` with `-tau <= -a <= -b <= 0`.
        window: (f64, f64),
    },
}

impl Term {
    /// Supremum of the support of the term within `[-tau, 0]`:
    /// the most recent history abscissa the term can read.
    /// Returns `None` when the term is identically zero.
    pub(crate) fn sup_support(&self) -> Option<f64> {
        match self {
            Term::PointDelay { lag, .. } => Some(*lag),
            Term::Distributed { measure, .. } => measure.sup_support(),
            Term::MaxNorm { coeff, window } => {
                if *coeff == 0.0 {
                    None
                } else {
                    Some(window.1)
                }
            }
        }
    }
}

/// A functional `C([-tau, 0]; R^d) -> R^d`: a sum of terms plus an offset.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSpec {
    tau: f64,
    dim: usize,
    terms: Vec<Term>,
    offset: Vec<f64>,
}

impl FunctionalSpec {
    /// Build a functional over windows `[-tau, 0]` acting on `R^dim` values.
    pub fn new(tau: f64, dim: usize, terms: Vec<Term>, offset: Vec<f64>) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidInput(format!(
                "functional: tau must be positive and finite, got {tau}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("functional: dimension must be >= 1".into()));
        }
        if offset.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "functional offset",
                expected: dim,
                got: offset.len(),
            });
        }
        let tol = lag_tol(tau);
        for t in &terms {
            match t {
                Term::PointDelay { lag, .. } => {
                    if *lag < -tau - tol || *lag > tol {
                        return Err(Error::InvalidInput(format!(
                            "functional: point delay lag {lag} outside [-{tau}, 0]"
                        )));
                    }
                }
                Term::Distributed { measure, .. } => {
                    if measure.support() > tau + tol {
                        return Err(Error::InvalidInput(format!(
                            "functional: distributed term support -{} exceeds tau {tau}",
                            measure.support()
                        )));
                    }
                }
                Term::MaxNorm { window, .. } => {
                    let (lo, hi) = *window;
                    if lo < -tau - tol || hi > tol || lo > hi {
                        return Err(Error::InvalidInput(format!(
                            "functional: max-norm window [{lo}, {hi}] is not inside [-{tau}, 0]"
                        )));
                    }
                    if dim != 1 {
                        return Err(Error::DimensionMismatch {
                            context: "max-norm term (scalar equations only)",
                            expected: 1,
                            got: dim,
                        });
                    }
                }
            }
        }
        Ok(Self { tau, dim, terms, offset })
    }

    /// The zero functional.
    pub fn zero(tau: f64, dim: usize) -> Self {
        Self { tau, dim, terms: Vec::new(), offset: vec![0.0; dim] }
    }

    /// A constant functional (offset only).
    pub fn constant(tau: f64, offset: Vec<f64>) -> Result<Self> {
        let dim = offset.len();
        Self::new(tau, dim, Vec::new(), offset)
    }

    /// Delay horizon.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Value dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The structured terms.
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// The constant offset.
    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// True when there are no terms and the offset vanishes.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.offset.iter().all(|&x| x == 0.0)
    }

    /// Evaluate the functional on a segment, writing into `out`.
    pub fn evaluate_into(&self, seg: &Segment, out: &mut [f64]) -> Result<()> {
        if seg.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "functional evaluation",
                expected: self.dim,
                got: seg.dim(),
            });
        }
        if seg.tau() < self.tau - lag_tol(self.tau) {
            return Err(Error::InvalidInput(format!(
                "functional window [-{}, 0] exceeds segment window [-{}, 0]",
                self.tau,
                seg.tau()
            )));
        }
        if out.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "functional evaluation output",
                expected: self.dim,
                got: out.len(),
            });
        }
        out.copy_from_slice(&self.offset);
        let mut point = vec![0.0; self.dim];
        let mut mapped = vec![0.0; self.dim];
        for term in &self.terms {
            match term {
                Term::PointDelay { lag, map } => {
                    seg.eval_into(lag.clamp(-seg.tau(), 0.0), &mut point)?;
                    map.apply(&point, &mut mapped);
                    for (o, &m) in out.iter_mut().zip(&mapped) {
                        *o += m;
                    }
                }
                Term::Distributed { measure, map } => {
                    let part = measure.integrate_segment_mapped(seg, self.dim, |x, o| {
                        map.apply(x, o)
                    })?;
                    for (o, &m) in out.iter_mut().zip(&part) {
                        *o += m;
                    }
                }
                Term::MaxNorm { coeff, window } => {
                    out[0] += coeff * windowed_max_abs(seg, window.0, window.1)?;
                }
            }
        }
        Ok(())
    }

    /// Evaluate the functional, allocating the result.
    pub fn evaluate(&self, seg: &Segment) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.evaluate_into(seg, &mut out)?;
        Ok(out)
    }

    /// Scalar evaluation shortcut.
    pub fn evaluate_scalar(&self, seg: &Segment) -> Result<f64> {
        if self.dim != 1 {
            return Err(Error::DimensionMismatch {
                context: "scalar functional evaluation",
                expected: 1,
                got: self.dim,
            });
        }
        Ok(self.evaluate(seg)?[0])
    }

    /// The non-atomicity modulus `rho_0(s)`.
    ///
    /// For any two segments that agree on `[-tau, -s]`,
    /// `|D(phi_1) - D(phi_2)| <= rho_0(s) sup |phi_1 - phi_2|`, with
    ///
    /// * point delays at lag `-s_0` contributing their Lipschitz constant
    ///   once `s_0 <= s` (so lag-0 terms always contribute),
    /// * distributed terms contributing `Lip(h) |m|([-s, 0])`,
    /// * max-norm terms over `[-a, -b]` contributing `|coeff|` once `b <= s`.
    ///
    /// `rho_0` is nondecreasing in `s` by construction, and `rho0(0)` is the
    /// instantaneous mass `lim_{s -> 0+} rho_0(s)`.
    pub fn rho0(&self, s: f64) -> f64 {
        let tol = lag_tol(self.tau);
        let mut total = 0.0;
        for term in &self.terms {
            match term {
                Term::PointDelay { lag, map } => {
                    if -lag <= s + tol {
                        total += map.lipschitz();
                    }
                }
                Term::Distributed { measure, map } => {
                    total += map.lipschitz() * measure.abs_mass_within(s);
                }
                Term::MaxNorm { coeff, window } => {
                    if -window.1 <= s + tol {
                        total += coeff.abs();
                    }
                }
            }
        }
        total
    }

    /// Global Lipschitz constant with respect to the segment sup-norm
    /// (`rho_0` evaluated over the whole window).
    pub fn lipschitz_bound(&self) -> f64 {
        self.rho0(self.tau)
    }

    /// Linear growth constants `(slope, offset)`:
    /// `|F(phi)| <= slope * sup|phi| + offset`.
    pub fn linear_growth_bound(&self) -> (f64, f64) {
        let sd = (self.dim as f64).sqrt();
        let mut slope = 0.0;
        let mut cst = self.offset.iter().map(|x| x * x).sum::<f64>().sqrt();
        for term in &self.terms {
            match term {
                Term::PointDelay { map, .. } => {
                    let (l, b) = map.linear_growth();
                    slope += l;
                    cst += b * sd;
                }
                Term::Distributed { measure, map } => {
                    let (l, b) = map.linear_growth();
                    let tv = measure.total_variation();
                    slope += l * tv;
                    cst += b * sd * tv;
                }
                Term::MaxNorm { coeff, .. } => slope += coeff.abs(),
            }
        }
        (slope, cst)
    }

    /// The classical global-contraction check for the neutral term:
    /// `kappa = rho_0(tau)`, contraction iff `kappa < 1`.
    pub fn check_mao_contraction(&self) -> MaoContraction {
        let kappa = self.lipschitz_bound();
        MaoContraction { kappa, holds: kappa < 1.0 }
    }
}

/// Result of the global-contraction check on a neutral functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaoContraction {
    /// Global Lipschitz constant of the neutral functional.
    pub kappa: f64,
    /// `kappa < 1`.
    pub holds: bool,
}

/// `max |phi|` over grid nodes inside `[lo, hi]`, including both window
/// endpoints, which is exact for piecewise-linear segments.
fn windowed_max_abs(seg: &Segment, lo: f64, hi: f64) -> Result<f64> {
    let h = seg.grid_step();
    let tau = seg.tau();
    let lo = lo.max(-tau);
    let hi = hi.min(0.0);
    let mut best = seg.eval(lo)?[0].abs().max(seg.eval(hi)?[0].abs());
    let first = ((lo + tau) / h).ceil() as usize;
    let last = ((hi + tau) / h).floor() as usize;
    for j in first..=last.min(seg.node_count() - 1) {
        best = best.max(seg.node_norm(j));
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Decomposition and interval selection
// ---------------------------------------------------------------------------

/// Split of a neutral functional into a pure-delay part `D_0` (support
/// separated from `0` by `delta_gap`) and a uniformly non-atomic part `D_1`.
#[derive(Debug, Clone)]
pub struct NeutralDecomposition {
    /// Pure-delay part: every term reads only history in `[-tau, -delta_gap]`.
    pub d0: FunctionalSpec,
    /// Uniformly non-atomic remainder.
    pub d1: FunctionalSpec,
    /// The separation gap of `d0` (equals `tau` for the trivial split).
    pub delta_gap: f64,
    /// Instantaneous Lipschitz mass `lim_{s -> 0+} rho_0^{D_1}(s)` (`< 1`).
    pub rho_at_zero: f64,
    /// Provisional window length with `rho_0^{D_1}(t1) = k < 1`.
    pub t1: f64,
    /// `rho_0^{D_1}(t1)`.
    pub k: f64,
    /// Provisional interpolation weight from the default tuning parameter.
    pub alpha: f64,
    /// Tuning parameter used for the provisional `t1` / `alpha`.
    pub mu_param: f64,
}

/// Largest `s` in `(0, s_max]` with `rho(s) < bound`, by bisection on the
/// nondecreasing modulus; `s_max` itself is returned when it satisfies the
/// bound.
fn rho_level_boundary(rho: &dyn Fn(f64) -> f64, bound: f64, s_max: f64) -> f64 {
    if rho(s_max) < bound {
        return s_max;
    }
    let mut lo = 0.0;
    let mut hi = s_max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rho(mid) < bound {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Decompose a neutral functional as `D = D_0 + D_1`.
///
/// `D_0` collects the terms whose support is separated from `0` by the
/// largest achievable gap; `D_1` keeps the rest and must have instantaneous
/// Lipschitz mass `rho_0(0+) < 1`, otherwise the functional fails uniform
/// non-atomicity and no small-interval contraction exists.
///
/// The returned provisional `(t1, k, alpha)` use the midpoint tuning
/// parameter `mu = (1 + rho_0(0+)) / 2`, which is always admissible;
/// [`select_t1_alpha`] refines them against the drift/diffusion Lipschitz
/// constant and the solver grid.
pub fn decompose(spec: &FunctionalSpec) -> Result<NeutralDecomposition> {
    let tau = spec.tau();
    let tol = lag_tol(tau);
    // Candidate gaps are the distances from 0 to each term's latest reading.
    let mut delta_gap = tau;
    let mut best = f64::NEG_INFINITY;
    for term in spec.terms() {
        if let Some(s) = term.sup_support() {
            best = best.max(s);
        }
    }
    if best.is_finite() && best < -tol {
        delta_gap = -best;
    }
    let mut d0_terms = Vec::new();
    let mut d1_terms = Vec::new();
    for term in spec.terms() {
        match term.sup_support() {
            Some(s) if s <= -delta_gap + tol => d0_terms.push(term.clone()),
            Some(_) => d1_terms.push(term.clone()),
            // Identically zero terms influence nothing; keep them out of D0
            // so the gap statement stays literally true.
            None => {}
        }
    }
    let d0 = FunctionalSpec::new(tau, spec.dim(), d0_terms, vec![0.0; spec.dim()])?;
    let d1 = FunctionalSpec::new(tau, spec.dim(), d1_terms, spec.offset().to_vec())?;
    let rho_at_zero = d1.rho0(0.0);
    if rho_at_zero >= 1.0 {
        return Err(Error::NonAtomicityFailure { rho_at_zero });
    }
    let mu_param = 0.5 * (1.0 + rho_at_zero);
    let boundary = rho_level_boundary(&|s| d1.rho0(s), mu_param, delta_gap);
    // Back off strictly inside the admissible region.
    let t1 = (0.9 * boundary).min(delta_gap * (1.0 - 1e-9)).max(boundary * 0.5);
    let k = d1.rho0(t1);
    let alpha = 0.5 * mu_param * mu_param + 0.5;
    Ok(NeutralDecomposition { d0, d1, delta_gap, rho_at_zero, t1, k, alpha, mu_param })
}

/// Output of [`select_t1_alpha`]: interval length, contraction data.
#[derive(Debug, Clone, Copy)]
pub struct IntervalSelection {
    /// Chosen Picard interval length (a grid multiple, `< delta_gap`).
    pub t1: f64,
    /// `rho_0^{D_1}(t1)`, strictly below `mu`.
    pub k: f64,
    /// Interpolation weight `alpha = mu^2/2 + 1/2`.
    pub alpha: f64,
    /// Tuning parameter in `(0, 1)`.
    pub mu: f64,
    /// Common Lipschitz constant of drift and diffusion used in the bound.
    pub k_lip: f64,
    /// Contraction rate `gamma = k^2/alpha + 2 K T_1 (T_1 + 4) / (1 - alpha)`.
    pub gamma: f64,
}

/// Choose the Picard interval length `T_1` and weight `alpha` from the
/// contraction recipe.
///
/// Given the tuning parameter `0 < mu < 1`, `T_1` is the largest grid
/// multiple strictly below `delta_gap` satisfying both
///
/// * `rho_0^{D_1}(T_1) < mu`, and
/// * `2 K T_1 (T_1 + 4) < (1 - mu^2)^2 / (2 (1 + mu^2))`,
///
/// where `K` is the common Lipschitz constant of drift and diffusion.  With
/// `alpha = mu^2/2 + 1/2` the iteration contracts at rate
/// `gamma = k^2 / alpha + 2 K T_1 (T_1 + 4) / (1 - alpha) < 1`.
pub fn select_t1_alpha(
    dec: &NeutralDecomposition,
    k_lip: f64,
    mu: f64,
    grid_step: f64,
) -> Result<IntervalSelection> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidInput(format!(
            "interval selection: tuning parameter mu must be in (0, 1), got {mu}"
        )));
    }
    if !(k_lip >= 0.0) || !k_lip.is_finite() {
        return Err(Error::InvalidInput(format!(
            "interval selection: Lipschitz constant must be nonnegative, got {k_lip}"
        )));
    }
    if !(grid_step > 0.0) {
        return Err(Error::InvalidInput(format!(
            "interval selection: grid step must be positive, got {grid_step}"
        )));
    }
    if dec.rho_at_zero >= mu {
        return Err(Error::SelectionFailed(format!(
            "instantaneous Lipschitz mass {} is not below mu = {mu}; choose mu in ({}, 1)",
            dec.rho_at_zero, dec.rho_at_zero
        )));
    }
    // Constraint from the modulus.
    let s_rho = rho_level_boundary(&|s| dec.d1.rho0(s), mu, dec.delta_gap);
    // Constraint from the quadratic: positive root of 2K T(T+4) = rhs.
    let rhs = (1.0 - mu * mu).powi(2) / (2.0 * (1.0 + mu * mu));
    let s_quad = if k_lip == 0.0 {
        f64::INFINITY
    } else {
        0.5 * (-4.0 + (16.0 + 2.0 * rhs / k_lip).sqrt())
    };
    let quad_ok = |t: f64| k_lip == 0.0 || 2.0 * k_lip * t * (t + 4.0) < rhs;
    let t_cap = s_rho.min(s_quad).min(dec.delta_gap);
    let mut steps = (t_cap / grid_step).floor() as i64;
    loop {
        if steps < 1 {
            return Err(Error::SelectionFailed(format!(
                "no admissible grid multiple of {grid_step} below cap {t_cap}; refine the grid"
            )));
        }
        let t1 = steps as f64 * grid_step;
        if t1 < dec.delta_gap && dec.d1.rho0(t1) < mu && quad_ok(t1) {
            let k = dec.d1.rho0(t1);
            let alpha = 0.5 * mu * mu + 0.5;
            let gamma = k * k / alpha + 2.0 * k_lip * t1 * (t1 + 4.0) / (1.0 - alpha);
            debug_assert!(gamma < 1.0, "the recipe guarantees gamma < 1, got {gamma}");
            return Ok(IntervalSelection { t1, k, alpha, mu, k_lip, gamma });
        }
        steps -= 1;
    }
}

/// Default tuning parameter: `0.5`, pushed up to the midpoint of
/// `(rho_0(0+), 1)` when the instantaneous mass is too large for `0.5`.
pub fn default_mu(rho_at_zero: f64) -> f64 {
    if rho_at_zero < 0.5 {
        0.5
    } else {
        0.5 * (1.0 + rho_at_zero)
    }
}

// ---------------------------------------------------------------------------
// Literals
// ---------------------------------------------------------------------------

/// JSON-facing shape of one functional term.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TermLiteral {
    /// `{"point_delay": {"lag": -1.0, "map": ...}}`
    PointDelay {
        /// Evaluation abscissa.
        lag: f64,
        /// Pointwise map (defaults to identity).
        #[serde(default = "default_map")]
        map: PointMap,
    },
    /// `{"distributed": {"measure": {...}, "map": ...}}`
    Distributed {
        /// Measure literal.
        measure: MeasureLiteral,
        /// Pointwise map (defaults to identity).
        #[serde(default = "default_map")]
        map: PointMap,
    },
    /// `{"max_norm": {"coeff": 0.9, "window": [-1.0, -0.5]}}`
    MaxNorm {
        /// Scale coefficient.
        coeff: f64,
        /// Window `[lo, hi]` with `-tau <= lo <= hi <= 0`.
        window: [f64; 2],
    },
}

fn default_map() -> PointMap {
    PointMap::Identity
}

/// JSON-facing shape of a whole functional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalLiteral {
    /// Term descriptors.
    #[serde(default)]
    pub terms: Vec<TermLiteral>,
    /// Constant offset; empty means zero.
    #[serde(default)]
    pub offset: Vec<f64>,
}

impl FunctionalSpec {
    /// Build a functional from its literal, resolving measures against `tau`.
    pub fn from_literal(lit: &FunctionalLiteral, tau: f64, dim: usize) -> Result<Self> {
        let mut terms = Vec::with_capacity(lit.terms.len());
        for t in &lit.terms {
            terms.push(match t {
                TermLiteral::PointDelay { lag, map } => Term::PointDelay { lag: *lag, map: *map },
                TermLiteral::Distributed { measure, map } => Term::Distributed {
                    measure: DelayMeasure::from_literal(measure, tau)?,
                    map: *map,
                },
                TermLiteral::MaxNorm { coeff, window } => Term::MaxNorm {
                    coeff: *coeff,
                    window: (window[0], window[1]),
                },
            });
        }
        let offset = if lit.offset.is_empty() {
            vec![0.0; dim]
        } else {
            lit.offset.clone()
        };
        Self::new(tau, dim, terms, offset)
    }

    /// Serialize back into the literal shape.
    pub fn to_literal(&self) -> FunctionalLiteral {
        FunctionalLiteral {
            terms: self
                .terms
                .iter()
                .map(|t| match t {
                    Term::PointDelay { lag, map } => {
                        TermLiteral::PointDelay { lag: *lag, map: *map }
                    }
                    Term::Distributed { measure, map } => TermLiteral::Distributed {
                        measure: measure.to_literal(),
                        map: *map,
                    },
                    Term::MaxNorm { coeff, window } => TermLiteral::MaxNorm {
                        coeff: *coeff,
                        window: [window.0, window.1],
                    },
                })
                .collect(),
            offset: self.offset.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DensityPiece;

    fn scalar_spec(tau: f64, terms: Vec<Term>) -> FunctionalSpec {
        FunctionalSpec::new(tau, 1, terms, vec![0.0]).unwrap()
    }

    #[test]
    fn evaluate_point_delays_on_constant_segment() {
        // D(phi) = 0.5 phi(0) + 0.3 phi(-1) on phi == 1 gives 0.8.
        let d = scalar_spec(
            1.0,
            vec![
                Term::PointDelay { lag: 0.0, map: PointMap::Affine { a: 0.5, b: 0.0 } },
                Term::PointDelay { lag: -1.0, map: PointMap::Affine { a: 0.3, b: 0.0 } },
            ],
        );
        let seg = Segment::constant(1.0, 0.25, &[1.0]).unwrap();
        assert!((d.evaluate_scalar(&seg).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn evaluate_distributed_term_against_exponential_segment() {
        let d = scalar_spec(
            1.0,
            vec![Term::Distributed {
                measure: DelayMeasure::constant_density(1.0, -1.0, 0.0, 2.0).unwrap(),
                map: PointMap::Identity,
            }],
        );
        let seg = Segment::from_fn(1.0, 1e-3, f64::exp).unwrap();
        let want = 2.0 * (1.0 - (-1.0f64).exp());
        assert!((d.evaluate_scalar(&seg).unwrap() - want).abs() < 1e-5);
    }

    #[test]
    fn max_norm_includes_off_grid_window_endpoints() {
        let d = scalar_spec(1.0, vec![Term::MaxNorm { coeff: 1.0, window: (-0.9, -0.5) }]);
        // phi(s) = s + 0.25 on a grid that misses the window endpoints:
        // |phi(-0.9)| = 0.65 beats every interior node.
        let seg = Segment::from_fn(1.0, 0.2, |s| s + 0.25).unwrap();
        assert!((d.evaluate_scalar(&seg).unwrap() - 0.65).abs() < 1e-12);
    }

    #[test]
    fn max_norm_requires_scalar_values() {
        let err = FunctionalSpec::new(
            1.0,
            2,
            vec![Term::MaxNorm { coeff: 1.0, window: (-1.0, 0.0) }],
            vec![0.0, 0.0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn evaluation_rejects_mismatched_segment_dimension() {
        let d = scalar_spec(1.0, vec![Term::PointDelay { lag: 0.0, map: PointMap::Identity }]);
        let seg = Segment::constant(1.0, 0.5, &[1.0, 2.0]).unwrap();
        assert!(matches!(
            d.evaluate(&seg).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn rho0_of_pure_point_delay_switches_on_at_the_lag() {
        let d = scalar_spec(
            1.0,
            vec![Term::PointDelay { lag: -1.0, map: PointMap::Affine { a: 0.8, b: 0.0 } }],
        );
        assert_eq!(d.rho0(0.5), 0.0);
        assert_eq!(d.rho0(1.0), 0.8);
        assert_eq!(d.check_mao_contraction().kappa, 0.8);
        assert!(d.check_mao_contraction().holds);
    }

    #[test]
    fn rho0_of_distributed_term_grows_linearly() {
        let d = scalar_spec(
            1.0,
            vec![Term::Distributed {
                measure: DelayMeasure::constant_density(1.0, -1.0, 0.0, 2.0).unwrap(),
                map: PointMap::Identity,
            }],
        );
        assert!((d.rho0(0.25) - 0.5).abs() < 1e-14);
        let mao = d.check_mao_contraction();
        assert!((mao.kappa - 2.0).abs() < 1e-14);
        assert!(!mao.holds);
    }

    #[test]
    fn rho0_mixed_instantaneous_and_max_terms() {
        // 0.2 phi(0) + 0.9 max over [-1, -0.5]: rho0 = 0.2 + 0.9 1{s >= 1/2}.
        let d = scalar_spec(
            1.0,
            vec![
                Term::PointDelay { lag: 0.0, map: PointMap::Affine { a: 0.2, b: 0.0 } },
                Term::MaxNorm { coeff: 0.9, window: (-1.0, -0.5) },
            ],
        );
        assert!((d.rho0(0.25) - 0.2).abs() < 1e-15);
        assert!((d.rho0(0.5) - 1.1).abs() < 1e-15);
        assert!((d.rho0(0.0) - 0.2).abs() < 1e-15);
        assert!(!d.check_mao_contraction().holds);
    }

    #[test]
    fn rho0_is_nondecreasing_on_a_probe_grid() {
        let d = scalar_spec(
            1.0,
            vec![
                Term::PointDelay { lag: -0.3, map: PointMap::TanhSaturation { c: 0.4 } },
                Term::Distributed {
                    measure: DelayMeasure::new(
                        1.0,
                        vec![(-0.7, -0.5)],
                        vec![DensityPiece { lo: -1.0, hi: 0.0, a: 1.0, b: 1.0 }],
                    )
                    .unwrap(),
                    map: PointMap::Identity,
                },
            ],
        );
        let mut prev = -1.0;
        for j in 0..=100 {
            let v = d.rho0(j as f64 / 100.0);
            assert!(v >= prev - 1e-12, "rho0 decreased at s={}", j as f64 / 100.0);
            prev = v;
        }
    }

    #[test]
    fn decompose_splits_pure_delay_from_instantaneous_part() {
        // 3 phi(-1) + 0.2 phi(0): gap 1, the big delay coefficient is
        // harmless in D0 and D1 keeps instantaneous mass 0.2.
        let d = scalar_spec(
            1.0,
            vec![
                Term::PointDelay { lag: -1.0, map: PointMap::Affine { a: 3.0, b: 0.0 } },
                Term::PointDelay { lag: 0.0, map: PointMap::Affine { a: 0.2, b: 0.0 } },
            ],
        );
        let dec = decompose(&d).unwrap();
        assert!((dec.delta_gap - 1.0).abs() < 1e-12);
        assert_eq!(dec.d0.terms().len(), 1);
        assert_eq!(dec.d1.terms().len(), 1);
        assert!((dec.rho_at_zero - 0.2).abs() < 1e-14);
        assert!(dec.t1 < dec.delta_gap && dec.k < 1.0);
    }

    #[test]
    fn decompose_puts_separated_max_term_entirely_into_d0() {
        let d = scalar_spec(1.0, vec![Term::MaxNorm { coeff: 7.0, window: (-1.0, -0.5) }]);
        let dec = decompose(&d).unwrap();
        assert_eq!(dec.d0.terms().len(), 1);
        assert!(dec.d1.terms().is_empty());
        assert_eq!(dec.rho_at_zero, 0.0);
        assert!((dec.delta_gap - 0.5).abs() < 1e-12);
        assert_eq!(dec.k, 0.0);
    }

    #[test]
    fn unit_instantaneous_mass_fails_non_atomicity() {
        let d = scalar_spec(1.0, vec![Term::PointDelay { lag: 0.0, map: PointMap::Identity }]);
        match decompose(&d) {
            Err(Error::NonAtomicityFailure { rho_at_zero }) => {
                assert!((rho_at_zero - 1.0).abs() < 1e-14)
            }
            other => panic!("expected non-atomicity failure, got {other:?}"),
        }
    }

    #[test]
    fn select_with_zero_lipschitz_uses_the_whole_gap() {
        let d = scalar_spec(
            1.0,
            vec![Term::PointDelay { lag: -1.0, map: PointMap::Affine { a: 1.2, b: 0.0 } }],
        );
        let dec = decompose(&d).unwrap();
        let sel = select_t1_alpha(&dec, 0.0, 0.5, 0.01).unwrap();
        assert!((sel.t1 - 0.99).abs() < 1e-12, "t1 = {}", sel.t1);
        assert_eq!(sel.k, 0.0);
        assert_eq!(sel.gamma, 0.0);
        assert!((sel.alpha - 0.625).abs() < 1e-15);
    }

    #[test]
    fn select_obeys_the_modulus_constraint() {
        // rho0(s) = 0.5 + s from 0.5 phi(0) + unit Lebesgue density; with
        // mu = 0.6 the modulus allows T1 < 0.1 only.
        let d = scalar_spec(
            1.0,
            vec![
                Term::PointDelay { lag: 0.0, map: PointMap::Affine { a: 0.5, b: 0.0 } },
                Term::Distributed {
                    measure: DelayMeasure::constant_density(1.0, -1.0, 0.0, 1.0).unwrap(),
                    map: PointMap::Identity,
                },
            ],
        );
        let dec = decompose(&d).unwrap();
        let sel = select_t1_alpha(&dec, 0.0, 0.6, 0.01).unwrap();
        assert!((sel.t1 - 0.09).abs() < 1e-12, "t1 = {}", sel.t1);
        assert!(sel.k < 0.6);
        assert!(sel.gamma < 1.0);
    }

    #[test]
    fn select_obeys_the_quadratic_constraint() {
        // Pure delay neutral part (k = 0), K = 1, mu = 0.5: the quadratic
        // 2 T (T + 4) < 0.225 caps T1 at its positive root.
        let d = scalar_spec(
            1.0,
            vec![Term::PointDelay { lag: -1.0, map: PointMap::Affine { a: 0.5, b: 0.0 } }],
        );
        let dec = decompose(&d).unwrap();
        let sel = select_t1_alpha(&dec, 1.0, 0.5, 1e-4).unwrap();
        // Independent bisection oracle for 2 T^2 + 8 T = 0.225.
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if 2.0 * mid * (mid + 4.0) < 0.225 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 0.027_93).abs() < 1e-4, "root {lo}");
        assert!(sel.t1 <= lo && lo < sel.t1 + 1e-4 + 1e-12, "t1 = {}, root = {lo}", sel.t1);
        assert!(2.0 * sel.t1 * (sel.t1 + 4.0) < 0.225);
        let expect_gamma = 2.0 * sel.t1 * (sel.t1 + 4.0) / 0.375;
        assert!((sel.gamma - expect_gamma).abs() < 1e-14);
        assert!(sel.gamma < 1.0);
    }

    #[test]
    fn select_rejects_unreachable_mu() {
        let d = scalar_spec(
            1.0,
            vec![Term::PointDelay { lag: 0.0, map: PointMap::Affine { a: 0.7, b: 0.0 } }],
        );
        let dec = decompose(&d).unwrap();
        let err = select_t1_alpha(&dec, 1.0, 0.5, 0.01).unwrap_err();
        assert!(matches!(err, Error::SelectionFailed(_)), "{err:?}");
        // A tuning parameter above the instantaneous mass works.
        assert!(select_t1_alpha(&dec, 1.0, 0.85, 0.001).is_ok());
        assert!((default_mu(0.7) - 0.85).abs() < 1e-15);
    }

    #[test]
    fn point_map_constants_survive_random_sampling() {
        for map in [
            PointMap::Identity,
            PointMap::Affine { a: -2.5, b: 0.7 },
            PointMap::TanhSaturation { c: 1.3 },
        ] {
            let (ratio, defect) = map.validate_constants(10_000, 7);
            assert!(ratio <= 1.0 + 1e-9, "{map:?}: ratio {ratio}");
            assert!(defect <= 1e-12, "{map:?}: defect {defect}");
        }
    }

    #[test]
    fn evaluation_is_lipschitz_in_the_segment() {
        let d = scalar_spec(
            1.0,
            vec![
                Term::PointDelay { lag: -0.5, map: PointMap::TanhSaturation { c: 0.8 } },
                Term::Distributed {
                    measure: DelayMeasure::constant_density(1.0, -1.0, 0.0, 1.5).unwrap(),
                    map: PointMap::Identity,
                },
                Term::MaxNorm { coeff: 0.3, window: (-0.75, -0.25) },
            ],
        );
        let lip = d.lipschitz_bound();
        let base = Segment::from_fn(1.0, 0.05, |s| (3.0 * s).sin()).unwrap();
        for amp in [1e-3, 0.1, 2.0] {
            let pert = Segment::from_fn(1.0, 0.05, |s| (3.0 * s).sin() + amp * (7.0 * s).cos())
                .unwrap();
            let diff = (d.evaluate_scalar(&pert).unwrap() - d.evaluate_scalar(&base).unwrap())
                .abs();
            let sup = pert.sup_norm_diff(&base).unwrap();
            assert!(diff <= lip * sup + 1e-10, "diff {diff} vs {lip} * {sup}");
        }
    }

    #[test]
    fn functional_literal_round_trips() {
        let text = r#"{
            "terms": [
                {"point_delay": {"lag": -1.0, "map": {"affine": {"a": 0.5, "b": 0.0}}}},
                {"distributed": {"measure": {"density": {"pieces": [[-1.0, 0.0, 0.3, 0.0]]}}}},
                {"max_norm": {"coeff": 0.2, "window": [-1.0, -0.5]}}
            ],
            "offset": [0.1]
        }"#;
        let lit: FunctionalLiteral = serde_json::from_str(text).unwrap();
        let spec = FunctionalSpec::from_literal(&lit, 1.0, 1).unwrap();
        assert_eq!(spec.terms().len(), 3);
        assert!((spec.lipschitz_bound() - (0.5 + 0.3 + 0.2)).abs() < 1e-14);
        let back = serde_json::to_string(&spec.to_literal()).unwrap();
        let spec2 =
            FunctionalSpec::from_literal(&serde_json::from_str(&back).unwrap(), 1.0, 1).unwrap();
        assert_eq!(spec, spec2);
    }

    #[test]
    fn linear_growth_bound_dominates_on_samples() {
        let d = scalar_spec(
            1.0,
            vec![
                Term::PointDelay { lag: 0.0, map: PointMap::Affine { a: 2.0, b: 0.5 } },
                Term::Distributed {
                    measure: DelayMeasure::constant_density(1.0, -1.0, 0.0, -1.0).unwrap(),
                    map: PointMap::Identity,
                },
            ],
        );
        let (slope, cst) = d.linear_growth_bound();
        for amp in [0.0, 0.5, 3.0] {
            let seg = Segment::from_fn(1.0, 0.1, |s| amp * (5.0 * s).cos()).unwrap();
            let val = d.evaluate_scalar(&seg).unwrap().abs();
            assert!(val <= slope * seg.sup_norm() + cst + 1e-10);
        }
    }
}
