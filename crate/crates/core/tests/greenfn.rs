use dtnwave::dispersion::{l0, q0};
use dtnwave::greenfn::*;
use dtnwave::pdo::{GridField, ResolventQuery};
use dtnwave::rays::{launch_fan, FlowOptions, Hamiltonian, LagrangianFan};
use dtnwave::{DepthProfile, Error, Point};
use num_complex::Complex64;
use std::f64::consts::PI;

fn flat() -> DepthProfile {
    DepthProfile::constant(1.0).unwrap()
}

fn fan_for(profile: &DepthProfile, model: &SourceModel, reach: f64, ham: Hamiltonian) -> LagrangianFan {
    let mut opts = FlowOptions::new(model.radius * reach, 1e-2);
    opts.stride = 2;
    launch_fan(profile, model.center, model.energy, 512, ham, &opts).unwrap()
}

#[test]
fn source_is_symmetric_under_axis_swap() {
    let m = SourceModel::new(&flat(), [0.0, 0.0], 1.0, 0.1).unwrap();
    let f = source_field(&m, &GridField::zeros(2, 128, 4.0, 0.1).unwrap()).unwrap();
    let peak = f.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..128 {
        for j in 0..128 {
            assert!((f.data[i * 128 + j] - f.data[j * 128 + i]).norm() <= 1e-12 * peak);
        }
    }
}

#[test]
fn source_translates_with_its_centre() {
    let g = GridField::zeros(2, 64, 3.2, 0.1).unwrap();
    let shift = 5usize;
    let c = shift as f64 * g.dx();
    let at_origin = source_field(&SourceModel::new(&flat(), [0.0, 0.0], 1.0, 0.1).unwrap(), &g).unwrap();
    let moved = source_field(&SourceModel::new(&flat(), [c, 0.0], 1.0, 0.1).unwrap(), &g).unwrap();
    let peak = at_origin.norm();
    for q in 0..g.len() {
        let x = g.node(q);
        // the partner node one shift back, wrapped periodically
        let r = (0..g.len())
            .find(|&k| {
                let y = g.node(k);
                (y[1] - x[1]).abs() < 1e-12 && {
                    let d = x[0] - c - y[0];
                    (d - (d / (2.0 * g.half_width)).round() * 2.0 * g.half_width).abs() < 1e-9
                }
            })
            .unwrap();
        assert!((moved.data[q] - at_origin.data[r]).norm() <= 1e-10 * peak.max(1.0));
    }
}

#[test]
fn source_norm_does_not_depend_on_h() {
    let norm = |h: f64, n: usize| {
        let m = SourceModel::new(&flat(), [0.0, 0.0], 1.0, h).unwrap();
        source_field(&m, &GridField::zeros(2, n, 4.0, h).unwrap()).unwrap().norm()
    };
    let (coarse, fine) = (norm(0.1, 128), norm(0.05, 256));
    assert!((coarse / fine - 1.0).abs() < 0.05, "{coarse} vs {fine}");
}

#[test]
fn source_grid_rejects_mismatched_h() {
    let m = SourceModel::new(&flat(), [0.0, 0.0], 1.0, 0.1).unwrap();
    let r = source_field(&m, &GridField::zeros(2, 128, 4.0, 0.2).unwrap());
    assert!(matches!(r, Err(Error::Precondition(_))));
}

#[test]
fn exact_kernel_is_radial() {
    let m = SourceModel::new(&flat(), [0.5, -0.3], 1.0, 0.1).unwrap();
    let pts: Vec<Point> = (0..6)
        .map(|k| {
            let a = k as f64;
            [0.5 + 2.0 * a.cos(), -0.3 + 2.0 * a.sin()]
        })
        .collect();
    let u = exact_green_constant_depth(&m, 0.0, &pts).unwrap();
    for q in &u[1..] {
        assert!((q.value - u[0].value).norm() <= 1e-9 * u[0].value.norm());
    }
}

#[test]
fn absorption_damps_the_exact_field() {
    let m = SourceModel::new(&flat(), [0.0, 0.0], 1.0, 0.1).unwrap();
    let ratio = |eps: f64| {
        let u = exact_green_constant_depth(&m, eps, &[[1.0, 0.0], [3.0, 0.0]]).unwrap();
        u[1].value.norm() / u[0].value.norm()
    };
    let outgoing = ratio(0.0);
    assert!((outgoing - 3f64.sqrt().recip()).abs() < 0.05, "{outgoing}");
    // the resonant part decays exponentially; the smooth remainder sets a floor
    // that is not monotone in ε
    for eps in [0.3, 1.0] {
        let damped = ratio(eps);
        assert!(damped < 0.2 * outgoing, "ε={eps}: {damped}");
    }
    assert!(matches!(exact_green_constant_depth(&m, -0.1, &[[1.0, 0.0]]), Err(Error::Domain(_))));
}

#[test]
fn assembled_field_decays_like_inverse_root_distance() {
    let p = flat();
    let m = SourceModel::new(&p, [0.0, 0.0], 1.0, 0.05).unwrap();
    let fan = fan_for(&p, &m, 5.0, Hamiltonian::Finsler { energy: 1.0 });
    let pts: Vec<Point> = (0..=6).map(|k| [(1.0 + 0.5 * k as f64) * 0.6, (1.0 + 0.5 * k as f64) * 0.8]).collect();
    let field = assemble_green(&p, &fan, &m, &pts, &GreenCutoffs::default(), Complex64::new(0.0, 1.0)).unwrap();
    let scaled: Vec<f64> = field
        .values()
        .iter()
        .zip(&pts)
        .map(|(u, x)| u.norm() * x[0].hypot(x[1]).sqrt())
        .collect();
    for s in &scaled {
        assert!((s / scaled[0] - 1.0).abs() < 0.03, "{scaled:?}");
    }
    assert!(field.flags.iter().all(|f| *f == PointFlag::Regular));
}

#[test]
fn assembly_is_linear_in_the_amplitude() {
    let p = flat();
    let m = SourceModel::new(&p, [0.0, 0.0], 1.0, 0.1).unwrap();
    let fan = fan_for(&p, &m, 3.0, Hamiltonian::Finsler { energy: 1.0 });
    let pts = [[1.5, 0.2], [0.3, 2.1]];
    let c = Complex64::new(0.1, 0.9);
    let one = assemble_green(&p, &fan, &m, &pts, &GreenCutoffs::default(), c).unwrap();
    let two = assemble_green(&p, &fan, &m.with_scale(2.0), &pts, &GreenCutoffs::default(), c).unwrap();
    for (a, b) in one.values().iter().zip(two.values()) {
        assert!((2.0 * a - b).norm() <= 1e-12 * b.norm());
    }
}

#[test]
fn assembly_needs_a_finsler_fan_from_the_source() {
    let p = flat();
    let m = SourceModel::new(&p, [0.0, 0.0], 1.0, 0.1).unwrap();
    let l0_fan = fan_for(&p, &m, 1.0, Hamiltonian::L0);
    let r = assemble_green(&p, &l0_fan, &m, &[[1.0, 0.0]], &GreenCutoffs::default(), Complex64::new(0.0, 1.0));
    assert!(matches!(r, Err(Error::Consistency(_))));
    let fan = fan_for(&p, &m, 1.0, Hamiltonian::Finsler { energy: 1.0 });
    let elsewhere = SourceModel::new(&p, [0.5, 0.0], 1.0, 0.1).unwrap();
    let r = assemble_green(&p, &fan, &elsewhere, &[[1.0, 0.0]], &GreenCutoffs::default(), Complex64::new(0.0, 1.0));
    assert!(matches!(r, Err(Error::Consistency(_))));
}

#[test]
fn absorption_schedule_is_validated() {
    let p = flat();
    let f = GridField::zeros(2, 32, 3.0, 0.3).unwrap();
    let run = |s: &[f64]| limiting_absorption_study(&p, &f, [0.0, 0.0], 1.0, s, None, 1e-8);
    assert!(matches!(run(&[0.1]), Err(Error::InsufficientData(_))));
    assert!(matches!(run(&[0.1, 0.2]), Err(Error::Precondition(_))));
    assert!(matches!(run(&[0.1, 0.0]), Err(Error::Precondition(_))));
}

#[test]
fn bottom_response_in_constant_depth_is_a_multiplier() {
    let p = flat();
    let (x, h, eps) = (4.0, 0.3, 0.1);
    let q = ResolventQuery::new(1.0, eps);
    let zero = GridField::zeros(2, 32, x, h).unwrap();
    assert!(bottom_to_surface_response(&p, &zero, &q).unwrap().data.iter().all(|z| z.norm() == 0.0));
    let mut gains = Vec::new();
    for k in [[3, 1], [12, 5]] {
        let bottom = GridField::from_fn(2, 32, x, h, |y| {
            Complex64::from_polar(1.0, PI / x * (k[0] as f64 * y[0] + k[1] as f64 * y[1]))
        })
        .unwrap();
        let u = bottom_to_surface_response(&p, &bottom, &q).unwrap();
        let rho = h * PI / x * (k[0] as f64).hypot(k[1] as f64);
        let expect = q0(1.0, rho) / Complex64::new(l0(1.0, rho) - 1.0, -eps);
        for (a, b) in u.data.iter().zip(&bottom.data) {
            assert!((a - b * expect).norm() <= 1e-9 * expect.norm().max(1e-3));
        }
        gains.push(expect.norm());
    }
    // short bottom wavelengths barely reach the surface
    assert!(gains[1] < 0.05 * gains[0], "{gains:?}");
}
