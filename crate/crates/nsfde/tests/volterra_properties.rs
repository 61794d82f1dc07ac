//! Randomized invariants for the discrete Volterra layer: comparison
//! monotonicity for nonnegative kernels, the sign of the resolvent, the
//! geometric closed form for a pure lag-zero kernel, and first-order grid
//! refinement on density kernels.

use nsfde::measure::HalfLineMeasure;
use nsfde::rng::CounterRng;
use nsfde::volterra::{resolvent, solve_volterra, VolterraProblem};

/// A random nonnegative kernel mixing an on-grid atom with a constant
/// density block, scaled to keep total mass below one so the renewal
/// iteration stays well-conditioned.
fn random_nonneg_kernel(rng: &CounterRng, base: u64, h: f64) -> HalfLineMeasure {
    let mut kernel = HalfLineMeasure::zero();
    let atom_lag_cells = 1 + (rng.uniform(base) * 6.0) as usize;
    let atom_mass = 0.6 * rng.uniform(base + 1);
    if atom_mass > 1e-3 {
        kernel = kernel.add(
            &HalfLineMeasure::atom(atom_lag_cells as f64 * h, atom_mass).expect("atom"),
        );
    }
    let lo = rng.uniform(base + 2) * 0.3;
    let width = 0.1 + rng.uniform(base + 3) * 0.8;
    let value = 0.5 * rng.uniform(base + 4);
    if value > 1e-3 {
        kernel = kernel.add(
            &HalfLineMeasure::constant_density(lo, lo + width, value).expect("density"),
        );
    }
    kernel
}

/// Increasing the forcing anywhere can only increase the renewal solution,
/// node by node, when the kernel is nonnegative.
#[test]
fn nonnegative_kernels_give_monotone_solutions_in_the_forcing() {
    let h = 0.05;
    let n = 60;
    let rng = CounterRng::new(0xA11CE, 1);
    let mut nontrivial = 0usize;
    for case in 0..100u64 {
        let base = case * 512;
        let kernel = random_nonneg_kernel(&rng, base, h);
        let forcing: Vec<f64> = (0..=n)
            .map(|i| 2.0 * rng.uniform(base + 16 + i as u64) - 1.0)
            .collect();
        let bump: Vec<f64> = (0..=n)
            .map(|i| rng.uniform(base + 128 + i as u64))
            .collect();
        let bumped: Vec<f64> = forcing.iter().zip(&bump).map(|(f, b)| f + b).collect();

        let z1 = solve_volterra(&VolterraProblem::new(kernel.clone(), forcing, h).expect("p1"))
            .expect("solve base");
        let z2 = solve_volterra(&VolterraProblem::new(kernel, bumped, h).expect("p2"))
            .expect("solve bumped");
        for (i, (a, b)) in z1.iter().zip(&z2).enumerate() {
            let scale = 1.0 + a.abs().max(b.abs());
            assert!(
                b >= &(a - 1e-12 * scale),
                "case {case}: solution dropped at node {i}: {a} -> {b}"
            );
        }
        if z1.iter().zip(&z2).any(|(a, b)| b - a > 1e-6) {
            nontrivial += 1;
        }
    }
    assert!(nontrivial >= 90, "only {nontrivial} cases moved the solution");
}

/// The resolvent of the negated kernel has only non-positive weights when
/// the kernel itself is nonnegative, and reproduces the identity it solves.
#[test]
fn resolvent_of_a_nonnegative_kernel_is_nonpositive()  {
    let h = 0.05;
    let rng = CounterRng::new(0xB0B, 2);
    for case in 0..40u64 {
        let kernel = random_nonneg_kernel(&rng, case * 512, h);
        let r = resolvent(&kernel, 2.0, h).expect("resolvent");
        assert!(
            r.identity_residual() <= 1e-8 * (1.0 + kernel.total_mass()),
            "case {case}: resolvent identity defect {}",
            r.identity_residual()
        );
        for (j, w) in r.lag_weights().iter().enumerate() {
            assert!(*w <= 1e-9, "case {case}: lag weight {j} positive: {w}");
        }
        for (j, w) in r.boundary_weights().iter().enumerate() {
            assert!(*w <= 1e-9, "case {case}: boundary weight {j} positive: {w}");
        }
    }
}

/// A pure lag-zero atom of mass `a < 1` with unit forcing has the exact
/// geometric solution `1 / (1 - a)` at every node.
#[test]
fn lag_zero_atom_reproduces_the_geometric_closed_form() {
    let h = 0.1;
    let n = 40;
    let rng = CounterRng::new(0xFEED, 3);
    for case in 0..20u64 {
        let a = 0.95 * rng.uniform(case);
        let kernel = HalfLineMeasure::atom(0.0, a).expect("atom");
        let forcing = vec![1.0; n + 1];
        let z = solve_volterra(&VolterraProblem::new(kernel, forcing, h).expect("p"))
            .expect("solve");
        let want = 1.0 / (1.0 - a);
        for (i, v) in z.iter().enumerate() {
            assert!(
                (v - want).abs() <= 1e-10 * (1.0 + want),
                "case {case}: node {i} gave {v}, want {want}"
            );
        }
    }
}

/// Halving the grid changes the solution by O(h) or better for kernels with
/// densities: three levels, each gap at most about half the previous one.
#[test]
fn density_kernels_refine_at_first_order_or_better() {
    let kernel = HalfLineMeasure::exponential_density(0.8, 1.2)
        .expect("exp density")
        .add(&HalfLineMeasure::constant_density(0.0, 0.5, 0.4).expect("flat density"));
    let t_max = 2.0f64;
    let solve_at = |h: f64| -> Vec<f64> {
        let n = (t_max / h).round() as usize;
        let forcing: Vec<f64> = (0..=n).map(|i| 1.0 + 0.5 * (i as f64 * h).sin()).collect();
        solve_volterra(&VolterraProblem::new(kernel.clone(), forcing, h).expect("p"))
            .expect("solve")
    };
    let z1 = solve_at(0.04);
    let z2 = solve_at(0.02);
    let z3 = solve_at(0.01);
    let gap = |coarse: &[f64], fine: &[f64], factor: usize| -> f64 {
        coarse
            .iter()
            .enumerate()
            .map(|(i, v)| (v - fine[i * factor]).abs())
            .fold(0.0f64, f64::max)
    };
    let e1 = gap(&z1, &z2, 2);
    let e2 = gap(&z2, &z3, 2);
    assert!(e1 > 0.0 && e2 > 0.0, "degenerate refinement gaps {e1} {e2}");
    assert!(
        e1 / e2 >= 1.5,
        "refinement gained only {} ({e1} vs {e2})",
        e1 / e2
    );
    assert!(e1 < 0.05, "absolute gap {e1} too large to be converging");
}
