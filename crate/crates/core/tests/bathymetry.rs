use dtnwave::bathymetry::flatness_report;
use dtnwave::{AnalyticProfile, DepthProfile, Error, GriddedDepth, RawGridHeader};
use proptest::prelude::*;
use std::io::Write;

fn bump_header() -> RawGridHeader {
    RawGridHeader {
        nx: 81,
        ny: 81,
        x0: -4.0,
        y0: -4.0,
        dx: 0.1,
        dy: 0.1,
        d0: 1.0,
    }
}

fn analytic_bump() -> DepthProfile {
    DepthProfile::radial_bump(1.0, 0.3, 1.0, [0.0, 0.0]).unwrap()
}

#[test]
fn csv_grid_reproduces_the_analytic_bump() {
    let exact = analytic_bump();
    let h = bump_header();
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "x,y,depth").unwrap();
    for j in 0..h.ny {
        for i in 0..h.nx {
            let x = [h.x0 + i as f64 * h.dx, h.y0 + j as f64 * h.dy];
            writeln!(file, "{},{},{}", x[0], x[1], exact.depth(x).unwrap()).unwrap();
        }
    }
    file.flush().unwrap();
    let grid = GriddedDepth::from_csv(file.path(), Some(1.0)).unwrap();
    let gridded = DepthProfile::gridded(grid).unwrap();
    for x in [[0.05, 0.03], [0.77, -1.21], [-2.3, 1.9]] {
        let (a, b) = (gridded.sample(x).unwrap(), exact.sample(x).unwrap());
        assert!((a.depth - b.depth).abs() < 1e-5, "{x:?}");
        assert!((a.grad[0] - b.grad[0]).abs() < 1e-3 && (a.grad[1] - b.grad[1]).abs() < 1e-3);
    }
    assert!(matches!(gridded.depth([4.5, 0.0]), Err(Error::Domain(_))));
}

#[test]
fn raw_grid_round_trips_bit_for_bit() {
    let exact = analytic_bump();
    let grid = GriddedDepth::from_fn(bump_header(), |x| exact.depth(x).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (data, sidecar) = (dir.path().join("depth.f64"), dir.path().join("depth.json"));
    grid.write_raw(&data, &sidecar).unwrap();
    let back = GriddedDepth::from_raw(&data, &sidecar).unwrap();
    assert_eq!(back.header(), grid.header());
    assert_eq!(back.values(), grid.values());
}

#[test]
fn truncated_raw_file_is_a_parse_error() {
    let grid = GriddedDepth::from_fn(bump_header(), |_| 1.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (data, sidecar) = (dir.path().join("depth.f64"), dir.path().join("depth.json"));
    grid.write_raw(&data, &sidecar).unwrap();
    let mut bytes = std::fs::read(&data).unwrap();
    bytes.truncate(bytes.len() - 8);
    std::fs::write(&data, bytes).unwrap();
    assert!(matches!(GriddedDepth::from_raw(&data, &sidecar), Err(Error::Parse(_))));
}

#[test]
fn analytic_specs_round_trip_through_json() {
    let specs = [
        AnalyticProfile::Constant { d0: 2.0 },
        AnalyticProfile::SechTrench {
            d0: 1.0,
            amplitude: -0.6,
            width: 1.0,
            offset: 0.5,
        },
        AnalyticProfile::RingRidge {
            d0: 1.0,
            amplitude: 0.8,
            radius: 3.0,
            width: 0.5,
            center: [1.0, -1.0],
        },
    ];
    for spec in specs {
        let json = serde_json::to_string(&spec).unwrap();
        let back: AnalyticProfile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
    let parsed: AnalyticProfile = serde_json::from_str(r#"{"kind":"radial-bump","d0":1,"amplitude":0.3,"width":1}"#).unwrap();
    assert_eq!(parsed, AnalyticProfile::RadialBump { d0: 1.0, amplitude: 0.3, width: 1.0, center: [0.0, 0.0] });
}

#[test]
fn profiles_that_touch_the_bottom_are_rejected() {
    assert!(DepthProfile::radial_bump(1.0, 1.0, 1.0, [0.0, 0.0]).is_err());
    assert!(DepthProfile::sech_trench(1.0, -1.2, 1.0, 0.0).is_err());
    assert!(DepthProfile::constant(0.0).is_err());
}

#[test]
fn power_tail_flatness_recovers_its_exponent() {
    let p = DepthProfile::power_tail(1.0, 0.4, 1.0, 3.0, [0.0, 0.0]).unwrap();
    let radii: Vec<f64> = (0..6).map(|k| 20.0 * 2f64.powi(k)).collect();
    let report = flatness_report(&p, &radii, 2.5).unwrap();
    assert!((report.fitted_rho[0] - 3.0).abs() < 0.05, "{report:?}");
    assert!(report.passes);
    assert!(!flatness_report(&p, &radii, 3.5).unwrap().passes);
}

proptest! {
    #[test]
    fn bump_depth_stays_between_its_extremes(x in -10.0f64..10.0, y in -10.0f64..10.0) {
        let d = analytic_bump().depth([x, y]).unwrap();
        prop_assert!((0.7..=1.0).contains(&d));
    }

    #[test]
    fn trench_is_invariant_along_its_axis(x in -5.0f64..5.0, y in -50.0f64..50.0) {
        let p = DepthProfile::sech_trench(1.0, 0.3, 1.0, 0.0).unwrap();
        prop_assert_eq!(p.depth([x, y]).unwrap(), p.depth([x, 0.0]).unwrap());
        prop_assert_eq!(p.grad_depth([x, y]).unwrap()[1], 0.0);
    }
}
