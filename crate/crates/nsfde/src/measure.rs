//! Finite signed measures on the delay window and on the half line.
//!
//! Two measure classes cover everything the solver and the certificates need:
//!
//! * [`DelayMeasure`]: atoms plus piecewise-linear densities on `[-tau, 0]`.
//!   These encode distributed-delay terms of functionals and the bounding
//!   measures of growth certificates.
//! * [`HalfLineMeasure`]: atoms plus piecewise-quadratic densities with an
//!   exponential factor `e^{-decay t}` on `[0, infinity)`.  These encode
//!   Volterra/renewal kernels, including exponentially tilted reflections of
//!   delay measures.
//!
//! All one-dimensional integrals against these densities (mass, first
//! moment, exponential tilts) are evaluated in closed form through the
//! moment primitives `int_0^L u^k e^{-cu} du`, with series fallbacks so that
//! small exponents do not lose precision to cancellation.

use crate::error::{Error, Result};
use crate::segment::Segment;
use serde::{Deserialize, Serialize};

/// Absolute slack used when comparing measure locations against supports.
fn loc_tol(scale: f64) -> f64 {
    1e-12 * (1.0 + scale.abs())
}

// ---------------------------------------------------------------------------
// Moment primitives
// ---------------------------------------------------------------------------

/// `int_0^L u^k e^{-c u} du` for `k <= 5`; `L` may be infinite when `c > 0`.
///
/// Uses the closed form through a forward recurrence when `|c L|` is large
/// and a power series when it is small, so the result is accurate in both
/// regimes.
fn exp_moment(k: usize, c: f64, l: f64) -> f64 {
    assert!(k <= 5, "exp_moment supports k <= 5");
    if l == 0.0 {
        return 0.0;
    }
    if l.is_infinite() {
        assert!(c > 0.0, "infinite-range moments require positive decay");
        // k! / c^{k+1}
        let fact = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0][k];
        return fact / c.powi(k as i32 + 1);
    }
    let x = c * l;
    if x.abs() < 1.0 {
        // l^{k+1} * sum_j (-x)^j / (j! (k + j + 1))
        let mut term = 1.0;
        let mut sum = 1.0 / (k as f64 + 1.0);
        for j in 1..40 {
            term *= -x / j as f64;
            let add = term / (k + j + 1) as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1.0) {
                break;
            }
        }
        return l.powi(k as i32 + 1) * sum;
    }
    // M_0 = (1 - e^{-x}) / c, M_j = (j M_{j-1} - l^j e^{-x}) / c
    let e = (-x).exp();
    let mut m = -(-x).exp_m1() / c;
    for j in 1..=k {
        m = (j as f64 * m - l.powi(j as i32) * e) / c;
    }
    m
}

/// `int_{lo}^{hi} t^{extra} (c0 + c1 t + c2 t^2) e^{-decay t} dt`.
///
/// `hi` may be infinite when `decay > 0`.  Used with `extra = 0` for masses,
/// `extra = 1` for first moments / centroids.
fn poly_exp_integral(lo: f64, hi: f64, coeffs: [f64; 3], decay: f64, extra: usize) -> f64 {
    assert!(extra <= 2);
    if hi <= lo {
        return 0.0;
    }
    // Polynomial in t including the extra power: q_m = coeff of t^m.
    let mut q = [0.0f64; 6];
    for (i, &ci) in coeffs.iter().enumerate() {
        q[i + extra] += ci;
    }
    // Shift t = lo + u: r_j = sum_{m >= j} q_m C(m, j) lo^{m-j}.
    const BINOM: [[f64; 6]; 6] = [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0, 0.0],
        [1.0, 5.0, 10.0, 10.0, 5.0, 1.0],
    ];
    let mut r = [0.0f64; 6];
    for m in 0..6 {
        if q[m] == 0.0 {
            continue;
        }
        for j in 0..=m {
            r[j] += q[m] * BINOM[m][j] * lo.powi((m - j) as i32);
        }
    }
    let l = hi - lo;
    let scale = (-decay * lo).exp();
    let mut total = 0.0;
    for (j, &rj) in r.iter().enumerate() {
        if rj != 0.0 {
            total += rj * exp_moment(j, decay, l);
        }
    }
    scale * total
}

// ---------------------------------------------------------------------------
// DelayMeasure
// ---------------------------------------------------------------------------

/// One linear density piece of a [`DelayMeasure`]: value `a + b s` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPiece {
    /// Left end of the piece (within `[-tau, 0]`).
    pub lo: f64,
    /// Right end of the piece.
    pub hi: f64,
    /// Constant coefficient.
    pub a: f64,
    /// Linear coefficient.
    pub b: f64,
}

impl DensityPiece {
    fn value(&self, s: f64) -> f64 {
        self.a + self.b * s
    }

    fn mass(&self) -> f64 {
        self.a * (self.hi - self.lo) + 0.5 * self.b * (self.hi * self.hi - self.lo * self.lo)
    }

    /// `int_{lo'}^{hi} |a + b s| ds` with `lo' = max(lo, cut)`.
    fn abs_mass_from(&self, cut: f64) -> f64 {
        let lo = self.lo.max(cut);
        if lo >= self.hi {
            return 0.0;
        }
        let seg = |x0: f64, x1: f64| -> f64 {
            (self.a * (x1 - x0) + 0.5 * self.b * (x1 * x1 - x0 * x0)).abs()
        };
        if self.b != 0.0 {
            let root = -self.a / self.b;
            if root > lo && root < self.hi {
                return seg(lo, root) + seg(root, self.hi);
            }
        }
        seg(lo, self.hi)
    }
}

/// JSON-facing shape of a delay measure:
/// `{ "atoms": [[s, w], ...], "density": { "pieces": [[s0, s1, a, b], ...] } }`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureLiteral {
    /// Point masses `[location, weight]` with locations in `[-tau, 0]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<[f64; 2]>,
    /// Piecewise-linear density part.
    #[serde(default, skip_serializing_if = "DensityLiteral::is_empty")]
    pub density: DensityLiteral,
}

/// Density half of a [`MeasureLiteral`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityLiteral {
    /// Pieces `[s0, s1, a, b]` meaning value `a + b s` on `[s0, s1]`.
    #[serde(default)]
    pub pieces: Vec<[f64; 4]>,
}

impl DensityLiteral {
    fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }
}

/// A finite signed measure on `[-tau, 0]`: atoms plus a piecewise-linear
/// density with non-overlapping pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayMeasure {
    support: f64,
    atoms: Vec<(f64, f64)>,
    pieces: Vec<DensityPiece>,
}

/// Merge duplicate atom locations (summing weights) and sort by location.
fn normalize_atoms(mut atoms: Vec<(f64, f64)>, scale: f64) -> Vec<(f64, f64)> {
    atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
    let tol = loc_tol(scale);
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (loc, w) in atoms {
        match merged.last_mut() {
            Some(last) if (loc - last.0).abs() <= tol => last.1 += w,
            _ => merged.push((loc, w)),
        }
    }
    merged.retain(|&(_, w)| w != 0.0);
    merged
}

/// Split overlapping pieces at all boundaries and sum coefficients, so the
/// result is a sorted, non-overlapping cover of the same density.
fn normalize_pieces(pieces: &[DensityPiece], scale: f64) -> Vec<DensityPiece> {
    let tol = loc_tol(scale);
    let mut cuts: Vec<f64> = Vec::with_capacity(pieces.len() * 2);
    for p in pieces {
        cuts.push(p.lo);
        cuts.push(p.hi);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= tol);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        if x1 - x0 <= tol {
            continue;
        }
        let mid = 0.5 * (x0 + x1);
        let mut a = 0.0;
        let mut b = 0.0;
        for p in pieces {
            if p.lo - tol <= mid && mid <= p.hi + tol {
                a += p.a;
                b += p.b;
            }
        }
        if a != 0.0 || b != 0.0 {
            out.push(DensityPiece { lo: x0, hi: x1, a, b });
        }
    }
    out
}

impl DelayMeasure {
    /// Build a measure supported on `[-tau, 0]` from atoms and density pieces.
    ///
    /// Atoms at coinciding locations are merged by summing their weights;
    /// overlapping density pieces are split and summed.
    pub fn new(tau: f64, atoms: Vec<(f64, f64)>, pieces: Vec<DensityPiece>) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidInput(format!(
                "measure: support bound tau must be positive and finite, got {tau}"
            )));
        }
        let tol = loc_tol(tau);
        for &(loc, w) in &atoms {
            if !loc.is_finite() || !w.is_finite() {
                return Err(Error::InvalidInput("measure: non-finite atom".into()));
            }
            if loc < -tau - tol || loc > tol {
                return Err(Error::InvalidInput(format!(
                    "measure: atom location {loc} outside [-{tau}, 0]"
                )));
            }
        }
        for p in &pieces {
            if ![p.lo, p.hi, p.a, p.b].iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidInput("measure: non-finite density piece".into()));
            }
            if p.lo >= p.hi {
                return Err(Error::InvalidInput(format!(
                    "measure: density piece [{}, {}] has non-positive length",
                    p.lo, p.hi
                )));
            }
            if p.lo < -tau - tol || p.hi > tol {
                return Err(Error::InvalidInput(format!(
                    "measure: density piece [{}, {}] outside [-{tau}, 0]",
                    p.lo, p.hi
                )));
            }
        }
        Ok(Self {
            support: tau,
            atoms: normalize_atoms(atoms, tau),
            pieces: normalize_pieces(&pieces, tau),
        })
    }

    /// The zero measure on `[-tau, 0]`.
    pub fn zero(tau: f64) -> Self {
        Self { support: tau, atoms: Vec::new(), pieces: Vec::new() }
    }

    /// Single atom `w * delta_{loc}`.
    pub fn atom(tau: f64, loc: f64, w: f64) -> Result<Self> {
        Self::new(tau, vec![(loc, w)], Vec::new())
    }

    /// Constant density `value` on `[lo, hi]`.
    pub fn constant_density(tau: f64, lo: f64, hi: f64, value: f64) -> Result<Self> {
        Self::new(tau, Vec::new(), vec![DensityPiece { lo, hi, a: value, b: 0.0 }])
    }

    /// Build from the JSON-facing literal, validating against `tau`.
    pub fn from_literal(lit: &MeasureLiteral, tau: f64) -> Result<Self> {
        let atoms = lit.atoms.iter().map(|&[s, w]| (s, w)).collect();
        let pieces = lit
            .density
            .pieces
            .iter()
            .map(|&[s0, s1, a, b]| DensityPiece { lo: s0, hi: s1, a, b })
            .collect();
        Self::new(tau, atoms, pieces)
    }

    /// Serialize back into the literal shape.
    pub fn to_literal(&self) -> MeasureLiteral {
        MeasureLiteral {
            atoms: self.atoms.iter().map(|&(s, w)| [s, w]).collect(),
            density: DensityLiteral {
                pieces: self.pieces.iter().map(|p| [p.lo, p.hi, p.a, p.b]).collect(),
            },
        }
    }

    /// Support bound `tau`.
    pub fn support(&self) -> f64 {
        self.support
    }

    /// Atoms, sorted by location.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Density pieces, sorted and non-overlapping.
    pub fn pieces(&self) -> &[DensityPiece] {
        &self.pieces
    }

    /// True when the measure has neither atoms nor density.
    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.pieces.is_empty()
    }

    /// Total mass `m([-tau, 0])` (signed).
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum::<f64>()
            + self.pieces.iter().map(DensityPiece::mass).sum::<f64>()
    }

    /// Total variation `|m|([-tau, 0])`, with exact sign-change splitting of
    /// the linear density pieces.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w.abs()).sum::<f64>()
            + self.pieces.iter().map(|p| p.abs_mass_from(f64::NEG_INFINITY)).sum::<f64>()
    }

    /// `|m|([-s, 0])`: total variation mass within distance `s` of the
    /// evaluation point (closed interval, so atoms exactly at `-s` count).
    pub fn abs_mass_within(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let tol = loc_tol(self.support);
        self.atoms
            .iter()
            .filter(|&&(loc, _)| loc >= -s - tol)
            .map(|&(_, w)| w.abs())
            .sum::<f64>()
            + self.pieces.iter().map(|p| p.abs_mass_from(-s)).sum::<f64>()
    }

    /// Mass of the atom at location `0` (if any).
    pub fn atom_mass_at_zero(&self) -> f64 {
        let tol = loc_tol(self.support);
        self.atoms
            .iter()
            .filter(|&&(loc, _)| loc >= -tol)
            .map(|&(_, w)| w)
            .sum()
    }

    /// Most positive support point: `sup { s : m has mass near s }`.
    ///
    /// Returns `None` for the zero measure.
    pub fn sup_support(&self) -> Option<f64> {
        let from_atoms = self.atoms.last().map(|&(loc, _)| loc);
        let from_pieces = self.pieces.last().map(|p| p.hi);
        match (from_atoms, from_pieces) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(f64::NEG_INFINITY).max(b.unwrap_or(f64::NEG_INFINITY))),
        }
    }

    /// True when all atoms and the whole density are nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        let tol = 1e-12;
        self.atoms.iter().all(|&(_, w)| w >= -tol)
            && self
                .pieces
                .iter()
                .all(|p| p.value(p.lo) >= -tol && p.value(p.hi) >= -tol)
    }

    /// Multiply the measure by a scalar.
    pub fn scale(&self, c: f64) -> Self {
        Self {
            support: self.support,
            atoms: self.atoms.iter().map(|&(s, w)| (s, c * w)).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| DensityPiece { lo: p.lo, hi: p.hi, a: c * p.a, b: c * p.b })
                .collect(),
        }
    }

    /// Sum of two measures (supports are widened to the larger one).
    pub fn add(&self, other: &Self) -> Self {
        let support = self.support.max(other.support);
        let atoms: Vec<_> = self.atoms.iter().chain(&other.atoms).copied().collect();
        let pieces: Vec<_> = self.pieces.iter().chain(&other.pieces).copied().collect();
        Self {
            support,
            atoms: normalize_atoms(atoms, support),
            pieces: normalize_pieces(&pieces, support),
        }
    }

    /// Exponentially tilted mass `int_{[-tau,0]} e^{rate * s} m(ds)`, in
    /// closed form.
    pub fn exp_tilt_mass(&self, rate: f64) -> f64 {
        let atom_part: f64 = self.atoms.iter().map(|&(s, w)| w * (rate * s).exp()).sum();
        // Reflect t = -s so the density integral becomes a half-line moment:
        // int_{lo}^{hi} (a + b s) e^{rate s} ds
        //   = int_{-hi}^{-lo} (a - b t) e^{-rate t} dt.
        let dens_part: f64 = self
            .pieces
            .iter()
            .map(|p| poly_exp_integral(-p.hi, -p.lo, [p.a, -p.b, 0.0], rate, 0))
            .sum();
        atom_part + dens_part
    }

    /// Reflect onto the half line and tilt: the image of `e^{rate s} m(ds)`
    /// under `s -> -s`.  The result lives on `[0, tau]` and satisfies
    /// `reflect_tilted(m, r) = exp_tilt(reflect(m), r)` exactly.
    pub fn reflect_tilted(&self, rate: f64) -> HalfLineMeasure {
        let atoms = self
            .atoms
            .iter()
            .map(|&(s, w)| (-s, w * (rate * s).exp()))
            .collect();
        let pieces = self
            .pieces
            .iter()
            .map(|p| HalfLinePiece {
                lo: -p.hi,
                hi: -p.lo,
                coeffs: [p.a, -p.b, 0.0],
                decay: rate,
            })
            .collect();
        HalfLineMeasure::from_parts(atoms, pieces)
            .expect("reflected delay measure is always admissible")
    }

    /// Reflect onto the half line without tilting.
    pub fn reflect(&self) -> HalfLineMeasure {
        self.reflect_tilted(0.0)
    }

    /// Reflect the total-variation measure `|m|` onto the half line: atoms
    /// keep `|w|` and the linear density pieces are split at their sign
    /// changes, so the result is a nonnegative measure on `[0, tau]` with
    /// total mass equal to `total_variation()`.
    pub fn reflect_abs(&self) -> HalfLineMeasure {
        let atoms = self.atoms.iter().map(|&(s, w)| (-s, w.abs())).collect();
        let mut pieces = Vec::new();
        for p in &self.pieces {
            let mut push = |lo: f64, hi: f64| {
                if hi <= lo {
                    return;
                }
                let sign = if p.value(0.5 * (lo + hi)) >= 0.0 { 1.0 } else { -1.0 };
                pieces.push(HalfLinePiece {
                    lo: -hi,
                    hi: -lo,
                    coeffs: [sign * p.a, -sign * p.b, 0.0],
                    decay: 0.0,
                });
            };
            let root = if p.b != 0.0 { -p.a / p.b } else { f64::NAN };
            if root > p.lo && root < p.hi {
                push(p.lo, root);
                push(root, p.hi);
            } else {
                push(p.lo, p.hi);
            }
        }
        HalfLineMeasure::from_parts(atoms, pieces)
            .expect("reflected variation measure is always admissible")
    }

    /// Total-variation measure `|m|` on `[-tau, 0]`: atoms keep `|w|` and
    /// linear density pieces are split at their sign changes, so the result
    /// is nonnegative with total mass equal to `total_variation()`.
    pub fn abs(&self) -> DelayMeasure {
        let atoms = self.atoms.iter().map(|&(s, w)| (s, w.abs())).collect();
        let mut pieces = Vec::new();
        for p in &self.pieces {
            let mut push = |lo: f64, hi: f64| {
                if hi <= lo {
                    return;
                }
                let sign = if p.value(0.5 * (lo + hi)) >= 0.0 { 1.0 } else { -1.0 };
                pieces.push(DensityPiece { lo, hi, a: sign * p.a, b: sign * p.b });
            };
            let root = if p.b != 0.0 { -p.a / p.b } else { f64::NAN };
            if root > p.lo && root < p.hi {
                push(p.lo, root);
                push(root, p.hi);
            } else {
                push(p.lo, p.hi);
            }
        }
        DelayMeasure::new(self.support, atoms, pieces)
            .expect("variation measure is always admissible")
    }

    /// Pair the measure with a transformed segment:
    /// `sum_i w_i T(phi(s_i)) + int density(s) T(phi(s)) ds`.
    ///
    /// `map` writes the transformed value of dimension `out_dim`; the density
    /// integral uses composite Simpson on the segment grid refined so that
    /// every density breakpoint is a node.  Within each refined cell the
    /// density is linear and the segment is linear, so for affine `map` the
    /// integrand is quadratic and the rule is exact — in particular the value
    /// does not depend on how overlapping pieces were split, which makes the
    /// pairing exactly linear in the measure.  For nonlinear `map` the rule
    /// is second-order accurate.
    pub fn integrate_segment_mapped(
        &self,
        seg: &Segment,
        out_dim: usize,
        map: impl Fn(&[f64], &mut [f64]),
    ) -> Result<Vec<f64>> {
        let tol = loc_tol(self.support);
        if self.support > seg.tau() + tol {
            return Err(Error::InvalidInput(format!(
                "measure support [-{}, 0] exceeds segment window [-{}, 0]",
                self.support,
                seg.tau()
            )));
        }
        let mut acc = vec![0.0; out_dim];
        let mut point = vec![0.0; seg.dim()];
        let mut mapped = vec![0.0; out_dim];

        for &(loc, w) in &self.atoms {
            seg.eval_into(loc.clamp(-seg.tau(), 0.0), &mut point)?;
            map(&point, &mut mapped);
            for k in 0..out_dim {
                acc[k] += w * mapped[k];
            }
        }

        let h = seg.grid_step();
        let tau = seg.tau();
        let mut mapped_hi = vec![0.0; out_dim];
        let mut mapped_mid = vec![0.0; out_dim];
        for p in &self.pieces {
            let lo = p.lo.max(-tau);
            let hi = p.hi.min(0.0);
            if hi - lo <= tol {
                continue;
            }
            // Refined nodes: piece ends plus every grid node strictly inside.
            let first = ((lo + tau) / h).ceil() as isize;
            let last = ((hi + tau) / h).floor() as isize;
            let mut x0 = lo;
            seg.eval_into(x0, &mut point)?;
            map(&point, &mut mapped);
            let mut d0 = p.value(x0);
            let mut push_cell = |x1: f64,
                                 d0: &mut f64,
                                 mapped: &mut Vec<f64>,
                                 x0: &mut f64|
             -> Result<()> {
                if x1 - *x0 > tol {
                    let xm = 0.5 * (*x0 + x1);
                    seg.eval_into(xm, &mut point)?;
                    map(&point, &mut mapped_mid);
                    let dm = p.value(xm);
                    seg.eval_into(x1, &mut point)?;
                    map(&point, &mut mapped_hi);
                    let d1 = p.value(x1);
                    let sixth = (x1 - *x0) / 6.0;
                    for k in 0..out_dim {
                        acc[k] += sixth
                            * (*d0 * mapped[k]
                                + 4.0 * dm * mapped_mid[k]
                                + d1 * mapped_hi[k]);
                    }
                    std::mem::swap(mapped, &mut mapped_hi);
                    *d0 = d1;
                    *x0 = x1;
                }
                Ok(())
            };
            for j in first..=last {
                let x1 = (-tau + j as f64 * h).clamp(lo, hi);
                push_cell(x1, &mut d0, &mut mapped, &mut x0)?;
            }
            push_cell(hi, &mut d0, &mut mapped, &mut x0)?;
        }
        Ok(acc)
    }

    /// Pair the measure with the segment itself (identity transform).
    pub fn integrate_segment(&self, seg: &Segment) -> Result<Vec<f64>> {
        self.integrate_segment_mapped(seg, seg.dim(), |x, out| out.copy_from_slice(x))
    }
}

// ---------------------------------------------------------------------------
// HalfLineMeasure
// ---------------------------------------------------------------------------

/// One density piece of a [`HalfLineMeasure`]:
/// `(c0 + c1 t + c2 t^2) e^{-decay t}` on `[lo, hi]` (`hi` may be infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLinePiece {
    /// Left end (`>= 0`).
    pub lo: f64,
    /// Right end; `f64::INFINITY` is allowed when `decay > 0`.
    pub hi: f64,
    /// Polynomial coefficients `[c0, c1, c2]`.
    pub coeffs: [f64; 3],
    /// Exponential decay rate of the piece.
    pub decay: f64,
}

impl HalfLinePiece {
    fn value(&self, t: f64) -> f64 {
        let [c0, c1, c2] = self.coeffs;
        (c0 + c1 * t + c2 * t * t) * (-self.decay * t).exp()
    }

    fn mass_on(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(self.lo);
        let hi = hi.min(self.hi);
        if hi <= lo {
            return 0.0;
        }
        poly_exp_integral(lo, hi, self.coeffs, self.decay, 0)
    }

    fn moment_on(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(self.lo);
        let hi = hi.min(self.hi);
        if hi <= lo {
            return 0.0;
        }
        poly_exp_integral(lo, hi, self.coeffs, self.decay, 1)
    }
}

/// A finite measure on `[0, infinity)`: atoms plus piecewise
/// polynomial-times-exponential density.  Overlapping pieces are allowed and
/// mean summation of their densities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HalfLineMeasure {
    atoms: Vec<(f64, f64)>,
    pieces: Vec<HalfLinePiece>,
}

impl HalfLineMeasure {
    /// Build from atoms and pieces, validating finiteness of the总 mass.
    pub fn from_parts(atoms: Vec<(f64, f64)>, pieces: Vec<HalfLinePiece>) -> Result<Self> {
        for &(loc, w) in &atoms {
            if !loc.is_finite() || !w.is_finite() || loc < -1e-12 {
                return Err(Error::InvalidInput(format!(
                    "half-line measure: bad atom ({loc}, {w})"
                )));
            }
        }
        for p in &pieces {
            if !p.lo.is_finite() || p.lo < -1e-12 || p.hi <= p.lo {
                return Err(Error::InvalidInput(format!(
                    "half-line measure: bad piece range [{}, {}]",
                    p.lo, p.hi
                )));
            }
            if p.hi.is_infinite() && p.decay <= 0.0 {
                return Err(Error::InvalidInput(
                    "half-line measure: infinite piece needs positive decay for finite mass"
                        .into(),
                ));
            }
            if !p.coeffs.iter().all(|c| c.is_finite()) || !p.decay.is_finite() {
                return Err(Error::InvalidInput("half-line measure: non-finite piece".into()));
            }
        }
        let atoms = {
            let mut a = atoms;
            a.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut merged: Vec<(f64, f64)> = Vec::with_capacity(a.len());
            for (loc, w) in a {
                match merged.last_mut() {
                    Some(last) if (loc - last.0).abs() <= 1e-12 * (1.0 + loc.abs()) => {
                        last.1 += w
                    }
                    _ => merged.push((loc.max(0.0), w)),
                }
            }
            merged.retain(|&(_, w)| w != 0.0);
            merged
        };
        Ok(Self { atoms, pieces })
    }

    /// The zero measure.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Single atom `w * delta_t`.
    pub fn atom(t: f64, w: f64) -> Result<Self> {
        Self::from_parts(vec![(t, w)], Vec::new())
    }

    /// Constant density `value` on `[lo, hi]`.
    pub fn constant_density(lo: f64, hi: f64, value: f64) -> Result<Self> {
        Self::from_parts(
            Vec::new(),
            vec![HalfLinePiece { lo, hi, coeffs: [value, 0.0, 0.0], decay: 0.0 }],
        )
    }

    /// Density `c e^{-decay t}` on `[0, infinity)`.
    pub fn exponential_density(c: f64, decay: f64) -> Result<Self> {
        Self::from_parts(
            Vec::new(),
            vec![HalfLinePiece {
                lo: 0.0,
                hi: f64::INFINITY,
                coeffs: [c, 0.0, 0.0],
                decay,
            }],
        )
    }

    /// Atoms, sorted by location.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Density pieces.
    pub fn pieces(&self) -> &[HalfLinePiece] {
        &self.pieces
    }

    /// Total mass `m([0, infinity))`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum::<f64>()
            + self
                .pieces
                .iter()
                .map(|p| p.mass_on(0.0, f64::INFINITY))
                .sum::<f64>()
    }

    /// First moment `int t m(dt)`.
    pub fn first_moment(&self) -> f64 {
        self.atoms.iter().map(|&(t, w)| t * w).sum::<f64>()
            + self
                .pieces
                .iter()
                .map(|p| p.moment_on(0.0, f64::INFINITY))
                .sum::<f64>()
    }

    /// Cumulative mass `m([0, t])`, atoms at exactly `t` included.
    pub fn cumulative_mass(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let tol = 1e-12 * (1.0 + t.abs());
        self.atoms
            .iter()
            .filter(|&&(loc, _)| loc <= t + tol)
            .map(|&(_, w)| w)
            .sum::<f64>()
            + self.pieces.iter().map(|p| p.mass_on(0.0, t)).sum::<f64>()
    }

    /// Density value at `t` (sum over pieces containing `t`); atoms excluded.
    pub fn density_value(&self, t: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.lo <= t && t <= p.hi)
            .map(|p| p.value(t))
            .sum()
    }

    /// Mass of atoms at location `0`.
    pub fn atom_mass_at_zero(&self) -> f64 {
        self.atoms
            .iter()
            .take_while(|&&(loc, _)| loc <= 1e-12)
            .map(|&(_, w)| w)
            .sum()
    }

    /// Location of the earliest strictly positive atom, if any.
    pub fn first_positive_atom(&self) -> Option<f64> {
        self.atoms.iter().map(|&(t, _)| t).find(|&t| t > 1e-12)
    }

    /// Mass carried by the density part alone.
    pub fn density_mass(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.mass_on(0.0, f64::INFINITY))
            .sum()
    }

    /// Multiply by a scalar.
    pub fn scale(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|&(t, w)| (t, c * w)).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| HalfLinePiece {
                    lo: p.lo,
                    hi: p.hi,
                    coeffs: [c * p.coeffs[0], c * p.coeffs[1], c * p.coeffs[2]],
                    decay: p.decay,
                })
                .collect(),
        }
    }

    /// Sum of two half-line measures.
    pub fn add(&self, other: &Self) -> Self {
        let atoms: Vec<_> = self.atoms.iter().chain(&other.atoms).copied().collect();
        let pieces: Vec<_> = self.pieces.iter().chain(&other.pieces).copied().collect();
        Self::from_parts(atoms, pieces).expect("sum of admissible measures is admissible")
    }

    /// Exponential tilt: the measure `e^{-theta t} m(dt)`.
    ///
    /// Fails if the tilt makes an infinite piece non-integrable.
    pub fn exp_tilt(&self, theta: f64) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|&(t, w)| (t, w * (-theta * t).exp()))
            .collect();
        let pieces = self
            .pieces
            .iter()
            .map(|p| HalfLinePiece {
                lo: p.lo,
                hi: p.hi,
                coeffs: p.coeffs,
                decay: p.decay + theta,
            })
            .collect();
        Self::from_parts(atoms, pieces)
    }

    /// Tilted mass `int e^{-theta t} m(dt)` without materializing the tilt.
    pub fn exp_tilt_mass(&self, theta: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(t, w)| w * (-theta * t).exp())
            .sum::<f64>()
            + self
                .pieces
                .iter()
                .map(|p| {
                    poly_exp_integral(
                        p.lo,
                        p.hi,
                        p.coeffs,
                        p.decay + theta,
                        0,
                    )
                })
                .sum::<f64>()
    }

    /// True when atoms and density are everywhere nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        let tol = 1e-12;
        if !self.atoms.iter().all(|&(_, w)| w >= -tol) {
            return false;
        }
        self.pieces.iter().all(|p| {
            let [c0, c1, c2] = p.coeffs;
            // Endpoint values (or leading behaviour for infinite pieces)...
            let lo_ok = c0 + c1 * p.lo + c2 * p.lo * p.lo >= -tol;
            let hi_ok = if p.hi.is_finite() {
                c0 + c1 * p.hi + c2 * p.hi * p.hi >= -tol
            } else if c2 != 0.0 {
                c2 > 0.0
            } else if c1 != 0.0 {
                c1 > 0.0
            } else {
                c0 >= -tol
            };
            // ... plus the interior critical point of the quadratic.
            let vertex_ok = if c2 != 0.0 {
                let v = -c1 / (2.0 * c2);
                if v > p.lo && v < p.hi {
                    c0 + c1 * v + c2 * v * v >= -tol
                } else {
                    true
                }
            } else {
                true
            };
            lo_ok && hi_ok && vertex_ok
        })
    }

    /// Project onto the uniform grid `{0, h, ..., n h}` preserving mass and
    /// first moment.
    ///
    /// Atoms are assigned to their node when they sit on one, otherwise
    /// split linearly between the bracketing nodes.  Each density piece is
    /// integrated exactly cell by cell and the cell mass is split between
    /// the cell's endpoints according to its centroid.  Mass beyond `n h` is
    /// discarded (it cannot influence convolutions on the grid).
    pub fn grid_weights(&self, h: f64, n: usize) -> Result<Vec<f64>> {
        self.convolution_weights(h, n).map(|(full, _)| full)
    }

    /// Grid weights together with their "left" components, which make the
    /// convolution below exact for piecewise-linear integrands.
    ///
    /// `full[j]` aggregates all mass projected onto node `j` (from both
    /// adjacent cells).  `left[j]` keeps only the part coming from
    /// `[(j-1) h, j h]`: atoms at or below node `j` plus the upper share of
    /// the left cell's density.  At the moving upper limit of
    /// `int_{[0, t_n]}`, only the left part of node `n` lies inside the
    /// integration range, so the lag-`n` coefficient must be `left[n]`
    /// rather than `full[n]`.
    pub(crate) fn convolution_weights(&self, h: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid projection: step must be positive, got {h}"
            )));
        }
        let t_max = h * n as f64;
        let mut full = vec![0.0; n + 1];
        let mut left = vec![0.0; n + 1];
        for &(loc, mass) in &self.atoms {
            if loc > t_max + 1e-12 * (1.0 + t_max) {
                continue;
            }
            let pos = loc / h;
            let j = pos.floor() as usize;
            let frac = pos - j as f64;
            if frac.abs() <= 1e-9 * (1.0 + pos) {
                full[j.min(n)] += mass;
                left[j.min(n)] += mass;
            } else if (1.0 - frac).abs() <= 1e-9 * (1.0 + pos) {
                full[(j + 1).min(n)] += mass;
                left[(j + 1).min(n)] += mass;
            } else {
                full[j] += mass * (1.0 - frac);
                full[(j + 1).min(n)] += mass * frac;
                left[(j + 1).min(n)] += mass * frac;
            }
        }
        for p in &self.pieces {
            let lo = p.lo.max(0.0);
            let hi = p.hi.min(t_max);
            if hi <= lo {
                continue;
            }
            let j_start = (lo / h).floor() as usize;
            for j in j_start..n {
                let x0 = (j as f64 * h).max(lo);
                let x1 = ((j + 1) as f64 * h).min(hi);
                if x1 <= x0 {
                    if j as f64 * h >= hi {
                        break;
                    }
                    continue;
                }
                let mass = poly_exp_integral(x0, x1, p.coeffs, p.decay, 0);
                if mass == 0.0 {
                    continue;
                }
                let moment = poly_exp_integral(x0, x1, p.coeffs, p.decay, 1);
                let centroid = (moment / mass).clamp(x0, x1);
                let t_j = j as f64 * h;
                let frac = ((centroid - t_j) / h).clamp(0.0, 1.0);
                full[j] += mass * (1.0 - frac);
                full[j + 1] += mass * frac;
                left[j + 1] += mass * frac;
            }
        }
        Ok((full, left))
    }

    /// Discrete convolution of the measure with a grid function:
    /// `(m * f)(t_n) = int_{[0, t_n]} f(t_n - s) m(ds)` evaluated through the
    /// grid projection of the measure.
    ///
    /// The lag-`n` coefficient uses only the left weight component, which
    /// truncates the projection at the upper integration limit; the scheme
    /// is then exact for piecewise-linear `f` and density, and second-order
    /// accurate in general.
    pub fn convolve(&self, f: &[f64], h: f64) -> Result<Vec<f64>> {
        if f.is_empty() {
            return Err(Error::InvalidInput("convolve: empty grid function".into()));
        }
        let n = f.len() - 1;
        let (full, left) = self.convolution_weights(h, n)?;
        let mut out = vec![0.0; n + 1];
        for (i, oi) in out.iter_mut().enumerate() {
            let mut acc = left[i] * f[0];
            for j in 0..i {
                if full[j] != 0.0 {
                    acc += full[j] * f[i - j];
                }
            }
            *oi = acc;
        }
        Ok(out)
    }
}
