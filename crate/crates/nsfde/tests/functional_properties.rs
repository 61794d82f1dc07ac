//! Randomized invariants for the neutral-functional layer: the
//! non-atomicity modulus, the defining Lipschitz estimate, decomposability
//! under the global contraction condition, and the interval-selection rate.

mod common;

use common::{functional, segment, sup_abs, STEP, STEPS, TAU};
use nsfde::functional::{decompose, default_mu, select_t1_alpha};
use nsfde::rng::CounterRng;
use nsfde::segment::Segment;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// `s -> rho0(s)` starts nonnegative, never decreases, and reaches the
    /// global contraction constant at `s = tau`.
    #[test]
    fn modulus_is_monotone_and_tops_out_at_kappa(spec in functional()) {
        let kappa = spec.check_mao_contraction().kappa;
        let mut prev = spec.rho0(0.0);
        prop_assert!(prev >= -1e-15, "rho0(0) negative: {prev}");
        for i in 1..=32 {
            let s = TAU * i as f64 / 32.0;
            let value = spec.rho0(s);
            prop_assert!(value >= prev - 1e-12, "rho0 dipped at s = {s}");
            prev = value;
        }
        let top = spec.rho0(TAU);
        prop_assert!(
            (top - kappa).abs() <= 1e-12 * (1.0 + kappa),
            "rho0(tau) = {top} vs kappa = {kappa}"
        );
    }

    /// The modulus actually bounds the functional: segments agreeing on
    /// `[-tau, -s]` satisfy `|D(phi2) - D(phi1)| <= rho0(s) sup|phi2 - phi1|`.
    /// A thousand randomized pairs are driven through every generated spec.
    #[test]
    fn modulus_dominates_differences_of_agreeing_segments(
        spec in functional(),
        seed in any::<u64>(),
    ) {
        let rng = CounterRng::new(seed, 7);
        let mut ctr = 0u64;
        let mut draw = |lo: f64, hi: f64| {
            let u = rng.uniform(ctr);
            ctr += 1;
            lo + (hi - lo) * u
        };
        for _ in 0..1_000 {
            // Perturb only nodes strictly to the right of -s, where
            // s = s_idx * STEP, so the pair agrees on [-tau, -s].
            let s_idx = 1 + (draw(0.0, 1.0) * STEPS as f64) as usize;
            let s_idx = s_idx.min(STEPS);
            let s = s_idx as f64 * STEP;
            let mut base = vec![0.0; STEPS + 1];
            for v in base.iter_mut() {
                *v = draw(-1.5, 1.5);
            }
            let mut shifted = base.clone();
            for (j, v) in shifted.iter_mut().enumerate() {
                if j > STEPS - s_idx {
                    *v += draw(-1.0, 1.0);
                }
            }
            let delta: Vec<f64> = shifted
                .iter()
                .zip(&base)
                .map(|(x, y)| x - y)
                .collect();
            let sup = sup_abs(&delta);
            let phi1 = Segment::from_flat(TAU, STEP, 1, base)?;
            let phi2 = Segment::from_flat(TAU, STEP, 1, shifted)?;
            let diff =
                (spec.evaluate_scalar(&phi2)? - spec.evaluate_scalar(&phi1)?).abs();
            let bound = spec.rho0(s) * sup;
            prop_assert!(
                diff <= bound + 1e-9 * (1.0 + sup),
                "s = {s}: |D diff| = {diff} exceeds rho0(s) sup = {bound}"
            );
        }
    }

    /// Whenever the global contraction condition holds, the pure-delay /
    /// non-atomic decomposition must succeed and report a modulus at zero
    /// strictly below one.
    #[test]
    fn global_contraction_implies_decomposability(spec in functional()) {
        let mao = spec.check_mao_contraction();
        prop_assume!(mao.holds);
        let dec = decompose(&spec);
        prop_assert!(
            dec.is_ok(),
            "kappa = {} holds but decomposition failed: {:?}",
            mao.kappa,
            dec.err()
        );
        let dec = dec.unwrap();
        prop_assert!(dec.rho_at_zero < 1.0);
        prop_assert!(dec.delta_gap > 0.0);
    }

    /// Whenever interval selection succeeds it must deliver a genuine
    /// contraction: a window length on the grid and a rate below one.
    #[test]
    fn interval_selection_rate_is_below_one(
        spec in functional(),
        k_lip in 0.0..3.0f64,
    ) {
        let Ok(dec) = decompose(&spec) else { return Ok(()) };
        let mu = default_mu(dec.rho_at_zero);
        let grid_step = 1.0 / 64.0;
        if let Ok(sel) = select_t1_alpha(&dec, k_lip, mu, grid_step) {
            prop_assert!(sel.gamma < 1.0, "selected rate {} >= 1", sel.gamma);
            prop_assert!(sel.t1 > 0.0);
            let cells = sel.t1 / grid_step;
            prop_assert!(
                (cells - cells.round()).abs() <= 1e-9,
                "window {} is not a grid multiple",
                sel.t1
            );
            prop_assert!(sel.alpha > 0.5 && sel.alpha < 1.0);
        }
    }
}
