//! Behavioral guarantees of the windowed Picard solver: determinism,
//! tolerance control, the integral-equation residual, strong grid
//! convergence under shared noise, and at-most-exponential moment growth.

mod common;

use nsfde::brownian::BrownianPath;
use nsfde::ensemble::{simulate_ensemble, NeutralProblem};
use nsfde::functional::{FunctionalSpec, PointMap, Term};
use nsfde::picard::{integral_residual, solve, PicardOptions};
use nsfde::segment::Segment;

/// Scalar problem with a point-delay neutral part, affine drift, and
/// state-dependent diffusion.
fn point_delay_problem(grid_step: f64) -> NeutralProblem {
    let tau = 0.5;
    let neutral = FunctionalSpec::new(
        tau,
        1,
        vec![Term::PointDelay {
            lag: -tau,
            map: PointMap::Affine { a: 0.35, b: 0.0 },
        }],
        vec![0.0],
    )
    .expect("neutral");
    let drift = FunctionalSpec::new(
        tau,
        1,
        vec![Term::PointDelay {
            lag: 0.0,
            map: PointMap::Affine { a: -0.8, b: 0.0 },
        }],
        vec![0.2],
    )
    .expect("drift");
    let diffusion = FunctionalSpec::new(
        tau,
        1,
        vec![Term::PointDelay {
            lag: -tau,
            map: PointMap::Affine { a: 0.3, b: 0.0 },
        }],
        vec![0.1],
    )
    .expect("diffusion");
    let initial = Segment::from_fn(tau, grid_step, |s| 0.6 + 0.4 * s).expect("initial");
    NeutralProblem::new(neutral, drift, vec![diffusion], initial).expect("problem")
}

/// Scalar problem with a distributed (density) neutral part, saturating
/// drift, and additive noise.
fn distributed_problem(grid_step: f64) -> NeutralProblem {
    let tau = 0.5;
    let neutral = FunctionalSpec::new(
        tau,
        1,
        vec![Term::Distributed {
            measure: nsfde::measure::DelayMeasure::constant_density(tau, -tau, 0.0, 0.5)
                .expect("density"),
            map: PointMap::Identity,
        }],
        vec![0.0],
    )
    .expect("neutral");
    let drift = FunctionalSpec::new(
        tau,
        1,
        vec![Term::PointDelay {
            lag: 0.0,
            map: PointMap::TanhSaturation { c: -0.45 },
        }],
        vec![0.0],
    )
    .expect("drift");
    let diffusion = FunctionalSpec::constant(tau, vec![0.5]).expect("diffusion");
    let initial = Segment::from_fn(tau, grid_step, |s| (2.0 * s).cos()).expect("initial");
    NeutralProblem::new(neutral, drift, vec![diffusion], initial).expect("problem")
}

/// Scalar problem with no neutral part and a running-maximum drift.
fn max_norm_problem(grid_step: f64) -> NeutralProblem {
    let tau = 0.5;
    let neutral = FunctionalSpec::zero(tau, 1);
    let drift = FunctionalSpec::new(
        tau,
        1,
        vec![Term::MaxNorm {
            coeff: -0.4,
            window: (-tau, 0.0),
        }],
        vec![0.3],
    )
    .expect("drift");
    let diffusion = FunctionalSpec::constant(tau, vec![0.25]).expect("diffusion");
    let initial = Segment::constant(tau, grid_step, &[0.8]).expect("initial");
    NeutralProblem::new(neutral, drift, vec![diffusion], initial).expect("problem")
}

#[test]
fn identical_inputs_reproduce_paths_bit_for_bit() {
    let h = 0.025f64;
    let horizon = 2.0f64;
    let problem = point_delay_problem(h);
    let steps = (horizon / h).round() as usize;
    let noise = BrownianPath::sample(42, 0, 1, h, steps);
    let opts = PicardOptions::default();

    let (a, _) = solve(&problem, Some(&noise), horizon, &opts).expect("first");
    let (b, _) = solve(&problem, Some(&noise), horizon, &opts).expect("second");
    assert_eq!(a.values().len(), b.values().len());
    for (x, y) in a.values().iter().zip(b.values()) {
        assert_eq!(x.to_bits(), y.to_bits(), "solver output is not reproducible");
    }

    let e1 = simulate_ensemble(&problem, horizon, 8, 99, &opts).expect("ensemble 1");
    let e2 = simulate_ensemble(&problem, horizon, 8, 99, &opts).expect("ensemble 2");
    for (p, q) in e1.paths().iter().zip(e2.paths()) {
        for (x, y) in p.values().iter().zip(q.values()) {
            assert_eq!(x.to_bits(), y.to_bits(), "ensemble is not reproducible");
        }
    }
}

#[test]
fn tightening_the_tolerance_moves_the_path_by_at_most_a_multiple_of_it() {
    let h = 0.025f64;
    let horizon = 2.0f64;
    let steps = (horizon / h).round() as usize;
    for (idx, problem) in [
        point_delay_problem(h),
        distributed_problem(h),
        max_norm_problem(h),
    ]
    .iter()
    .enumerate()
    {
        let noise = BrownianPath::sample(7 + idx as u64, 0, 1, h, steps);
        let tol = 1e-6;
        let loose = PicardOptions { tol, ..PicardOptions::default() };
        let tight = PicardOptions { tol: tol / 10.0, ..PicardOptions::default() };
        let (a, _) = solve(problem, Some(&noise), horizon, &loose).expect("loose");
        let (b, _) = solve(problem, Some(&noise), horizon, &tight).expect("tight");
        let sup = a
            .values()
            .iter()
            .zip(b.values())
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        assert!(
            sup <= 50.0 * tol,
            "problem {idx}: tolerance drop moved the path by {sup}"
        );
    }
}

#[test]
fn solutions_satisfy_the_integral_equation_at_every_node() {
    let h = 0.025f64;
    let horizon = 2.0f64;
    let steps = (horizon / h).round() as usize;
    for (idx, problem) in [
        point_delay_problem(h),
        distributed_problem(h),
        max_norm_problem(h),
    ]
    .iter()
    .enumerate()
    {
        let noise = BrownianPath::sample(1234 + idx as u64, 0, 1, h, steps);
        let opts = PicardOptions::default();
        let (path, diag) = solve(problem, Some(&noise), horizon, &opts).expect("solve");
        let residual = integral_residual(problem, &path, Some(&noise)).expect("residual");
        let budget: f64 = diag
            .intervals
            .iter()
            .map(|w| w.final_residual)
            .sum::<f64>()
            .max(opts.tol);
        assert!(
            residual <= (10.0 * budget).max(1e-8),
            "problem {idx}: integral defect {residual} exceeds budget {budget}"
        );
        assert!(residual <= 1e-8, "problem {idx}: integral defect {residual}");
    }
}

/// Shared-noise comparison of three nested grids. With additive noise the
/// scheme converges at strong order one, so halving the step should shrink
/// the gap to the next finer level by roughly half or better; order 1/2
/// (ratio about 1.4) is the guaranteed floor asserted here.
#[test]
fn halving_the_grid_shrinks_the_strong_error_at_order_at_least_one_half() {
    let horizon = 2.0f64;
    let fine = 0.0125f64;
    let mid = 0.025;
    let coarse = 0.05;
    let n_fine = (horizon / fine).round() as usize;

    let mut gap_coarse_mid = 0.0;
    let mut gap_mid_fine = 0.0;
    let n_seeds = 4;
    for seed in 0..n_seeds {
        let noise_fine = BrownianPath::sample(800 + seed, 0, 1, fine, n_fine);
        let noise_mid = noise_fine.coarsen(2).expect("coarsen 2");
        let noise_coarse = noise_fine.coarsen(4).expect("coarsen 4");

        let opts = PicardOptions::default();
        let (x_f, _) =
            solve(&distributed_problem(fine), Some(&noise_fine), horizon, &opts).expect("fine");
        let (x_m, _) =
            solve(&distributed_problem(mid), Some(&noise_mid), horizon, &opts).expect("mid");
        let (x_c, _) = solve(&distributed_problem(coarse), Some(&noise_coarse), horizon, &opts)
            .expect("coarse");

        let mut d_cm = 0.0f64;
        let mut d_mf = 0.0f64;
        for j in 0..=((horizon / coarse).round() as usize) {
            let t = j as f64 * coarse;
            let vc = x_c.value(x_c.node_of_time(t).expect("node c"))[0];
            let vm = x_m.value(x_m.node_of_time(t).expect("node m"))[0];
            let vf = x_f.value(x_f.node_of_time(t).expect("node f"))[0];
            d_cm = d_cm.max((vc - vm).abs());
            d_mf = d_mf.max((vm - vf).abs());
        }
        gap_coarse_mid += d_cm / n_seeds as f64;
        gap_mid_fine += d_mf / n_seeds as f64;
    }

    assert!(
        gap_coarse_mid < 0.1,
        "coarse-to-mid gap {gap_coarse_mid} is too large to be converging"
    );
    assert!(
        gap_mid_fine > 0.0,
        "mid-to-fine gap vanished; comparison is degenerate"
    );
    let ratio = gap_coarse_mid / gap_mid_fine;
    assert!(
        ratio >= 1.3,
        "strong error ratio {ratio} below the order-1/2 floor \
         (gaps {gap_coarse_mid} vs {gap_mid_fine})"
    );
}

/// The second moment of the running supremum stays finite and grows at most
/// exponentially: the log of the moment is roughly linear in the horizon.
#[test]
fn running_sup_second_moment_grows_at_most_exponentially() {
    let h = 0.025f64;
    let horizon = 4.0f64;
    let problem = point_delay_problem(h);
    let ensemble = simulate_ensemble(
        &problem,
        horizon,
        1_000,
        20260823,
        &PicardOptions::default(),
    )
    .expect("ensemble");

    let checkpoints = [1.0, 2.0, 4.0];
    let mut moments = [0.0f64; 3];
    for path in ensemble.paths() {
        let mut running = 0.0f64;
        let mut k0 = path.node_of_time(0.0).expect("origin node");
        for (slot, t) in checkpoints.iter().enumerate() {
            let k1 = path.node_of_time(*t).expect("checkpoint node");
            for k in k0..=k1 {
                running = running.max(path.norm_at(k));
            }
            moments[slot] += running * running / ensemble.n_paths() as f64;
            k0 = k1;
        }
    }

    for (t, m) in checkpoints.iter().zip(&moments) {
        assert!(m.is_finite() && *m > 0.0, "moment at T={t} degenerate: {m}");
    }
    // Least-squares slope of ln m against T.
    let n = checkpoints.len() as f64;
    let mean_t: f64 = checkpoints.iter().sum::<f64>() / n;
    let mean_y: f64 = moments.iter().map(|m| m.ln()).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, m) in checkpoints.iter().zip(&moments) {
        num += (t - mean_t) * (m.ln() - mean_y);
        den += (t - mean_t) * (t - mean_t);
    }
    let slope = num / den;
    assert!(
        slope.is_finite() && slope.abs() < 10.0,
        "moment growth rate {slope} is not moderate"
    );
    // The moments must be monotone in T (the running sup only grows) and the
    // three-point log curve must not bend upward faster than linearly.
    assert!(moments[0] <= moments[1] && moments[1] <= moments[2]);
    let first = (moments[1] / moments[0]).ln();
    let second = (moments[2] / moments[1]).ln() / 2.0;
    assert!(
        second <= first.max(0.05) * 1.5 + 0.1,
        "log-moment increments accelerate: {first} then {second} per unit time"
    );
}
