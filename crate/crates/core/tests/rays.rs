use dtnwave::dispersion::{solve_z, PhasePoint};
use dtnwave::rays::*;
use dtnwave::{DepthProfile, Error};
use proptest::prelude::*;

fn bump() -> DepthProfile {
    DepthProfile::radial_bump(1.0, 0.3, 1.0, [0.0, 0.0]).unwrap()
}

/// `∂ρ (ρ tanh ρ)` at unit depth.
fn group_speed(rho: f64) -> f64 {
    let t = rho.tanh();
    t + rho * (1.0 - t * t)
}

#[test]
fn constant_depth_l0_rays_move_at_the_group_speed() {
    let flat = DepthProfile::constant(1.0).unwrap();
    let start = shell_point(&flat, [0.2, -1.0], 1.0, 2.0).unwrap();
    let rho = solve_z(1.0).unwrap();
    assert!((start.momentum_norm() - rho).abs() < 1e-12);
    let tr = flow(&flat, Hamiltonian::L0, start, &FlowOptions::new(6.0, 5e-2)).unwrap();
    let v = group_speed(rho);
    for s in &tr.states {
        let expect = [0.2 + v * s.t * 2f64.cos(), -1.0 + v * s.t * 2f64.sin()];
        assert!((s.x[0] - expect[0]).abs() < 1e-10 && (s.x[1] - expect[1]).abs() < 1e-10);
        assert!((s.p[0] - start.p[0]).abs() < 1e-14);
    }
    assert!(tr.energy_drift < 1e-14);
}

#[test]
fn hamiltonians_share_the_shell() {
    let p = bump();
    let start = shell_point(&p, [0.3, 0.4], 1.0, 0.7).unwrap();
    for h in [Hamiltonian::L0, Hamiltonian::Finsler { energy: 1.0 }, Hamiltonian::Schrodinger { energy: 1.0 }] {
        assert!((h.value(&p, &start).unwrap() - h.shell_value(1.0)).abs() < 1e-12, "{h:?}");
    }
}

#[test]
fn three_flows_trace_one_curve_over_the_bump() {
    let p = bump();
    let start = shell_point(&p, [-2.5, 0.3], 1.0, 0.05).unwrap();
    let report = maupertuis_overlap(&p, 1.0, start, 6.0, 2e-3, 1e-6).unwrap();
    assert!(report.passes, "{report:?}");
    assert!(!report.shell_mismatch);
}

#[test]
fn off_shell_start_is_flagged() {
    let p = bump();
    let on = shell_point(&p, [-2.5, 0.3], 1.0, 0.05).unwrap();
    let off = PhasePoint::new(on.x, [1.1 * on.p[0], 1.1 * on.p[1]]);
    let report = maupertuis_overlap(&p, 1.0, off, 6.0, 1e-2, 1e-6).unwrap();
    assert!(report.shell_mismatch);
    assert!(!report.passes);
    assert!(report.distances.iter().any(|d| *d > 1e-3), "{report:?}");
}

#[test]
fn reversed_momentum_retraces_the_ray() {
    let p = bump();
    let start = shell_point(&p, [-2.0, 0.4], 1.0, 0.2).unwrap();
    let opts = FlowOptions::new(5.0, 1e-2);
    let out = flow(&p, Hamiltonian::L0, start, &opts).unwrap();
    let end = out.states.last().unwrap();
    let back = flow(&p, Hamiltonian::L0, PhasePoint::new(end.x, [-end.p[0], -end.p[1]]), &opts).unwrap();
    let home = back.states.last().unwrap();
    for a in 0..2 {
        assert!((home.x[a] - start.x[a]).abs() < 1e-8);
        assert!((home.p[a] + start.p[a]).abs() < 1e-8);
    }
}

#[test]
fn fan_needs_sixteen_angles() {
    let r = launch_fan(&bump(), [0.0, 0.0], 1.0, 15, Hamiltonian::L0, &FlowOptions::new(1.0, 1e-2));
    assert!(matches!(r, Err(Error::Precondition(_))));
}

#[test]
fn trench_fan_maslov_counts_match_neighbour_differences() {
    let trench = DepthProfile::sech_trench(1.0, -0.6, 1.0, 0.0).unwrap();
    let mut opts = FlowOptions::new(12.0, 1e-2);
    opts.stride = 2;
    let fan = launch_fan(&trench, [0.0, 0.0], 1.0, 512, Hamiltonian::Finsler { energy: 1.0 }, &opts).unwrap();
    let focused = fan.rays.iter().filter(|r| r.samples.last().unwrap().maslov > 0).count();
    assert!(focused > 0, "the shoal should focus some rays");
    let agree = (0..fan.rays.len())
        .filter(|&i| neighbour_sign_changes(&fan, i) == fan.rays[i].samples.last().unwrap().maslov)
        .count();
    assert!(agree as f64 >= 0.95 * fan.rays.len() as f64, "{agree}/{}", fan.rays.len());
    assert!(neighbour_spreading_mismatch(&fan, 0.2, 0.5) <= 0.01);
}

#[test]
fn constant_depth_escape_time_is_geometric() {
    let flat = DepthProfile::constant(1.0).unwrap();
    let (radius, dt) = (12.0, 1e-2);
    let report = nontrapping_check(&flat, 1.0, &[[1.0, 0.0]], 16, 40.0, dt, radius).unwrap();
    assert!(report.passes);
    // slowest launch is tangent to the offset, reaching the circle after sqrt(R² - 1)
    let expect = (radius * radius - 1.0f64).sqrt() / group_speed(solve_z(1.0).unwrap());
    assert!(report.slowest_escape >= expect - 1e-9 && report.slowest_escape < expect + dt, "{report:?}");
}

#[test]
fn annular_waveguide_traps_tangential_rays() {
    let ring = DepthProfile::ring_ridge(1.0, 0.8, 3.0, 0.5, [0.0, 0.0]).unwrap();
    let report = nontrapping_check(&ring, 1.0, &[[3.0, 0.0]], 16, 80.0, 1e-2, 12.0).unwrap();
    assert!(!report.passes);
    assert!(report.example_trapped.is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn flows_conserve_energy_and_volume(x in -3.0f64..3.0, y in -3.0f64..3.0, angle in 0.0f64..std::f64::consts::TAU) {
        let p = bump();
        let start = shell_point(&p, [x, y], 1.0, angle).unwrap();
        for h in [Hamiltonian::L0, Hamiltonian::Schrodinger { energy: 1.0 }] {
            let tr = flow(&p, h, start, &FlowOptions::new(8.0, 1e-2)).unwrap();
            prop_assert!(tr.energy_drift <= 1e-8, "{:?} drift {}", h, tr.energy_drift);
            prop_assert!(tr.symplectic_defect <= 1e-6);
        }
    }

    #[test]
    fn finsler_scales_with_momentum(x in -2.0f64..2.0, px in -3.0f64..3.0, py in 0.1f64..3.0, c in 0.1f64..5.0) {
        let p = bump();
        let h = Hamiltonian::Finsler { energy: 0.8 };
        let a = h.value(&p, &PhasePoint::new([x, 0.5], [px, py])).unwrap();
        let b = h.value(&p, &PhasePoint::new([x, 0.5], [c * px, c * py])).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-12 * b.abs().max(1.0));
    }
}
