use dtnwave::dispersion::*;
use dtnwave::{DepthProfile, Error};
use proptest::prelude::*;

/// Plain bisection on `z tanh z - s`, independent of the library's Newton solver.
fn bisect_z(s: f64) -> f64 {
    let (mut a, mut b) = (0.0, s.sqrt().max(s) + 1.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m * m.tanh() < s {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn flat() -> DepthProfile {
    DepthProfile::constant(1.0).unwrap()
}

#[test]
fn z_root_reference_values() {
    assert_eq!(solve_z(0.0).unwrap(), 0.0);
    // frozen from bisection, cross-checked at 30 digits
    for (s, z) in [(1.0, 1.199_678_640_257_734), (0.01, 0.100_166_972_559_055_5), (50.0, 50.0)] {
        assert!((bisect_z(s) - z).abs() < 1e-12);
        assert!((solve_z(s).unwrap() - z).abs() < 1e-10, "s={s}");
    }
    let s: f64 = 0.01;
    assert!((solve_z(s).unwrap() - s.sqrt() * (1.0 + s / 6.0)).abs() < 1e-5);
}

#[test]
fn negative_argument_is_a_domain_error() {
    assert!(matches!(solve_z(-1e-3), Err(Error::Domain(_))));
}

#[test]
fn principal_symbol_values() {
    let p = flat();
    let at = |rho: f64| symbol_l0(&p, &PhasePoint::new([0.3, -2.0], [rho, 0.0])).unwrap();
    assert!((at(1.0) - 0.761_594_155_955_764_9).abs() < 1e-15);
    assert_eq!(at(0.0), 0.0);
    assert!((at(30.0) / 30.0 - 1.0).abs() < 1e-12);
    let small = at(0.01);
    assert!((small / (1e-4 * (1.0 - 1e-4 / 3.0)) - 1.0).abs() < 1e-8);
}

#[test]
fn bottom_multiplier_values() {
    let p = flat();
    let at = |rho: f64| symbol_q0(&p, &PhasePoint::new([0.0, 0.0], [0.0, rho])).unwrap();
    assert_eq!(at(0.0), 1.0);
    assert!((at(1.0) - 0.648_054_273_663_885_4).abs() < 1e-15);
    assert!(at(20.0) <= 5e-9);
}

#[test]
fn normal_form_reference_values() {
    let nf = normal_form(&flat(), [1.0, 2.0], 1.0).unwrap();
    assert!((nf.radius - 1.199_678_640_257_734).abs() < 1e-10);
    assert!((nf.conformal - 0.833_556_559_600_964_7).abs() < 1e-10);
    assert!((nf.potential - 1.439_228_839_890_645).abs() < 1e-10);
    assert!((nf.metric - nf.conformal.powi(2)).abs() < 1e-15);
    let shallow = normal_form_at_depth(1e-3, 1.0).unwrap();
    assert!((shallow.potential / 1e3 - 1.0).abs() < 1e-3);
}

#[test]
fn elliptic_factors_on_the_shell() {
    let r = 1.199_678_640_257_734;
    // the derivative quotient; r tanh r = 1 makes F0² exactly 2 here
    assert!((c0_squared(1.0, r, 1.0).unwrap() - 1.389_633_076_107_593).abs() < 1e-6);
    assert!((f0_squared(1.0, r, 1.0).unwrap() - 2.0).abs() < 1e-6);
    // central differences across the removable singularity
    let e = 1e-4;
    let fd = (c0_squared(1.0, r + e, 1.0).unwrap() + c0_squared(1.0, r - e, 1.0).unwrap()) / 2.0;
    assert!((fd - c0_squared(1.0, r, 1.0).unwrap()).abs() < 1e-6);
    let direct = (0.25 / (r * r) - 1.0) / (l0(1.0, 0.5) - 1.0);
    assert!((c0_squared(1.0, 0.5, 1.0).unwrap() - direct).abs() < 1e-14);
    let zero = elliptic_factor_c0(&flat(), &PhasePoint::new([0.0, 0.0], [0.0, 0.0]), 1.0);
    assert!(matches!(zero, Err(Error::Domain(_))));
}

#[test]
fn vertical_profile_traces() {
    let p = flat();
    let pt = PhasePoint::new([0.0, 0.0], [1.0, 0.0]);
    assert_eq!(symbol_r0(&p, &pt, 0.0).unwrap(), 1.0);
    assert!((symbol_r0(&p, &pt, -1.0).unwrap() - symbol_q0(&p, &pt).unwrap()).abs() < 1e-15);
    let still = PhasePoint::new([0.0, 0.0], [0.0, 0.0]);
    assert_eq!(symbol_r0(&p, &still, -0.4).unwrap(), 1.0);
    assert!(matches!(symbol_r0(&p, &pt, -1.5), Err(Error::Domain(_))));
    // R0'' = |p|² R0 by central differences
    let (z, e) = (-0.37, 1e-4);
    let d2 = (r0(1.0, 1.3, z + e) - 2.0 * r0(1.0, 1.3, z) + r0(1.0, 1.3, z - e)) / (e * e);
    assert!((d2 - 1.69 * r0(1.0, 1.3, z)).abs() < 1e-5);
    let dz = (r0(1.0, 1.3, -1.0 + e) - r0(1.0, 1.3, -1.0)) / e;
    assert!(dz.abs() < 1e-3);
}

#[test]
fn first_correction_on_a_ramp() {
    let z = uniform_z_grid(1.0, 201);
    let ramp = solve_r1_at(1.0, [0.1, 0.0], [1.0, 0.0], &z).unwrap();
    assert!(ramp.values.iter().any(|v| v.abs() > 1e-3));
    assert!(ramp.ode_residual <= 1e-8 && ramp.top_residual <= 1e-8 && ramp.bottom_residual <= 1e-8);
    let flipped = solve_r1_at(1.0, [0.1, 0.0], [-1.0, 0.0], &z).unwrap();
    for (a, b) in ramp.values.iter().zip(&flipped.values) {
        assert!((a + b).abs() < 1e-14);
    }
    let still = solve_r1(&flat(), &PhasePoint::new([0.0, 0.0], [1.0, 0.5]), &z).unwrap();
    assert!(still.values.iter().all(|v| *v == 0.0));
}

#[test]
fn sandwich_bounds_on_log_grid() {
    for i in 0..=300 {
        let s = 10f64.powf(-6.0 + 9.0 * i as f64 / 300.0);
        let z = solve_z(s).unwrap();
        if s <= 1.0 {
            assert!(z >= s.sqrt() / (1.0 + s / 6.0));
        } else {
            // z - s = 2z e^{-2z} / (1 + e^{-2z}), plus rounding of the subtraction
            assert!((z - s).abs() <= 2.0 * z * (-2.0 * z).exp() + 4.0 * f64::EPSILON * s, "s={s}");
        }
    }
}

proptest! {
    #[test]
    fn root_residual_and_monotonicity(s in 1e-6f64..1e3, ds in 1e-6f64..1.0) {
        let z = solve_z(s).unwrap();
        prop_assert!((z * z.tanh() - s).abs() <= 1e-12 * s.max(1.0));
        prop_assert!(solve_z(s + ds).unwrap() > z);
    }

    #[test]
    fn level_sets_coincide(depth in 0.05f64..5.0, energy in 0.05f64..5.0) {
        let nf = normal_form_at_depth(depth, energy).unwrap();
        prop_assert!((l0(depth, nf.radius) - energy).abs() <= 1e-10 * energy.max(1.0));
        prop_assert!((nf.metric * nf.radius * nf.radius - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn factors_are_positive_and_related(depth in 0.2f64..3.0, energy in 0.2f64..3.0, rho in 0.05f64..6.0) {
        let c = c0_squared(depth, rho, energy).unwrap();
        let f = f0_squared(depth, rho, energy).unwrap();
        let v = normal_form_at_depth(depth, energy).unwrap().potential;
        prop_assert!(c > 0.0);
        prop_assert!((f - v * c).abs() <= 1e-8 * f);
    }

    #[test]
    fn symbols_are_even_and_monotone(px in -5.0f64..5.0, py in -5.0f64..5.0, depth in 0.1f64..2.0) {
        let p = DepthProfile::constant(depth).unwrap();
        let a = PhasePoint::new([0.0, 0.0], [px, py]);
        let b = PhasePoint::new([0.0, 0.0], [-px, -py]);
        prop_assert_eq!(symbol_l0(&p, &a).unwrap(), symbol_l0(&p, &b).unwrap());
        prop_assert_eq!(symbol_q0(&p, &a).unwrap(), symbol_q0(&p, &b).unwrap());
        let rho = a.momentum_norm();
        prop_assert!(l0(depth, rho * 1.01 + 1e-3) > l0(depth, rho));
        prop_assert!(q0(depth, rho * 1.01 + 1e-3) < q0(depth, rho));
    }
}
