//! Shared randomized generators for the property suites.
//!
//! All strategies produce values that satisfy the constructor contracts by
//! construction, so `unwrap` inside a `prop_map` cannot fire.

#![allow(dead_code)]

use nsfde::measure::{DelayMeasure, DensityPiece};
use nsfde::segment::Segment;
use nsfde::functional::{FunctionalSpec, PointMap, Term};
use proptest::collection::vec;
use proptest::prelude::*;

/// Delay horizon shared by every strategy in this module.
pub const TAU: f64 = 1.0;
/// Node spacing of generated segments (nine nodes on `[-TAU, 0]`).
pub const STEP: f64 = 0.125;
/// Number of grid cells in a generated segment.
pub const STEPS: usize = 8;

/// A single finite-density piece strictly inside `[-TAU, 0]`.
pub fn density_piece() -> impl Strategy<Value = DensityPiece> {
    (-TAU..0.0f64, -TAU..0.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_filter_map(
        "piece needs positive width",
        |(p, q, a, b)| {
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            if hi - lo < 1e-2 {
                return None;
            }
            Some(DensityPiece { lo, hi, a, b })
        },
    )
}

/// A signed delay measure with up to three atoms and up to two density pieces.
pub fn delay_measure() -> impl Strategy<Value = DelayMeasure> {
    (
        vec((-TAU..=0.0f64, -2.0..2.0f64), 0..=3),
        vec(density_piece(), 0..=2),
    )
        .prop_map(|(atoms, pieces)| {
            DelayMeasure::new(TAU, atoms, pieces).expect("generated measure is valid")
        })
}

/// A nonnegative delay measure (absolute value of a random signed one) with
/// at least `min_mass` of total mass.
pub fn nonneg_delay_measure(min_mass: f64) -> impl Strategy<Value = DelayMeasure> {
    delay_measure().prop_filter_map("needs mass", move |m| {
        let a = m.abs();
        if a.total_mass() >= min_mass {
            Some(a)
        } else {
            None
        }
    })
}

/// A scalar history segment on `[-TAU, 0]` with nine grid nodes.
pub fn segment() -> impl Strategy<Value = Segment> {
    vec(-2.0..2.0f64, STEPS + 1).prop_map(|values| {
        Segment::from_flat(TAU, STEP, 1, values).expect("generated segment is valid")
    })
}

/// A pointwise map with moderate constants.
pub fn point_map() -> impl Strategy<Value = PointMap> {
    prop_oneof![
        Just(PointMap::Identity),
        (-1.5..1.5f64, -0.5..0.5f64).prop_map(|(a, b)| PointMap::Affine { a, b }),
        (-1.5..1.5f64).prop_map(|c| PointMap::TanhSaturation { c }),
    ]
}

/// A single functional term: point delay, distributed memory, or windowed max.
pub fn term() -> impl Strategy<Value = Term> {
    prop_oneof![
        (-TAU..=0.0f64, point_map()).prop_map(|(lag, map)| Term::PointDelay { lag, map }),
        (delay_measure(), point_map())
            .prop_map(|(measure, map)| Term::Distributed { measure, map }),
        (-0.8..0.8f64, 0.0..=TAU, 0.0..=TAU).prop_map(|(coeff, x, y)| {
            let (lo, hi) = if x >= y { (-x, -y) } else { (-y, -x) };
            Term::MaxNorm {
                coeff,
                window: (lo, hi),
            }
        }),
    ]
}

/// A scalar functional built from one to three random terms plus an offset.
pub fn functional() -> impl Strategy<Value = FunctionalSpec> {
    (vec(term(), 1..=3), vec(-0.5..0.5f64, 1)).prop_map(|(terms, offset)| {
        FunctionalSpec::new(TAU, 1, terms, offset).expect("generated functional is valid")
    })
}

/// Largest absolute entry of a slice.
pub fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}
