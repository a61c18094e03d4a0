use dtnwave::dispersion::q0;
use dtnwave::strip::*;
use dtnwave::{DepthProfile, Error};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trench() -> DepthProfile {
    DepthProfile::sech_trench(1.0, 0.3, 1.0, 0.0).unwrap()
}

fn gaussian(g: &StripGrid, width: f64) -> Vec<f64> {
    (0..g.n).map(|q| (-(g.coordinate(q) / width).powi(2)).exp()).collect()
}

#[test]
fn grid_needs_eight_levels() {
    assert!(matches!(StripGrid::new(1, 4.0, 32, 7), Err(Error::Precondition(_))));
    assert!(matches!(StripGrid::new(3, 4.0, 32, 16), Err(Error::Precondition(_))));
}

#[test]
fn assembled_l11_reproduces_the_solver() {
    let g = StripGrid::new(1, 6.0, 32, 16).unwrap();
    let h = 0.5;
    let m = assemble_dtn(&trench(), g, h, DtnBasis::Delta).unwrap();
    let top = gaussian(&g, 1.2);
    let data = MixedData {
        top: top.clone(),
        bottom: vec![0.0; g.n],
        source: None,
    };
    let direct = solve_mixed(&trench(), g, h, &data, MixedProblem::DirichletTop).unwrap();
    let applied = &m.l11 * nalgebra::DVector::from_vec(top);
    for q in 0..g.n {
        assert!((applied[q] - direct.top_flux[q]).abs() <= 1e-8, "node {q}");
    }
}

#[test]
fn reciprocity_in_the_weighted_pairing() {
    let g = StripGrid::new(1, 6.0, 32, 24).unwrap();
    let m = assemble_dtn(&trench(), g, 0.5, DtnBasis::Delta).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a: Vec<f64> = (0..g.n).map(|_| rng.random::<f64>() - 0.5).collect();
    let b: Vec<f64> = (0..g.n).map(|_| rng.random::<f64>() - 0.5).collect();
    let la = &m.l11 * nalgebra::DVector::from_vec(a.clone());
    let lb = &m.l11 * nalgebra::DVector::from_vec(b.clone());
    let lhs: f64 = la.iter().zip(&b).map(|(x, y)| x * y).sum();
    let rhs: f64 = a.iter().zip(lb.iter()).map(|(x, y)| x * y).sum();
    assert!((lhs - rhs).abs() <= 5e-2 * lhs.abs().max(rhs.abs()));
}

#[test]
fn injected_asymmetry_fails_the_report() {
    let g = StripGrid::new(1, 14.0, 64, 24).unwrap();
    let mut m = assemble_dtn(&trench(), g, 0.5, DtnBasis::Fourier { max_mode: 4 }).unwrap();
    assert!(adjointness_report(&m, &m.weights.clone(), 5e-2).unwrap().passes);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = m.l11.nrows();
    let scale = m.l11.norm();
    let noise = DMatrix::from_fn(k, k, |_, _| rng.random::<f64>() - 0.5);
    m.l11 += noise * (0.5 * scale / k as f64);
    let r = adjointness_report(&m, &m.weights.clone(), 5e-2).unwrap();
    assert!(!r.passes, "{r:?}");
    assert!(matches!(adjointness_report(&m, &vec![0.0; k], 5e-2), Err(Error::Precondition(_))));
}

#[test]
fn nonnegative_surface_data_gives_nonnegative_potential() {
    let g = StripGrid::new(1, 6.0, 48, 20).unwrap();
    let data = MixedData {
        top: gaussian(&g, 0.8),
        bottom: vec![0.0; g.n],
        source: None,
    };
    let s = solve_mixed(&trench(), g, 0.4, &data, MixedProblem::DirichletTop).unwrap();
    let min = s.potential.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-10, "min {min}");
    assert!(s.residual <= 1e-10);
}

#[test]
fn bottom_coupling_decays_like_inverse_cosh() {
    let g = StripGrid::new(1, 4.0, 128, 48).unwrap();
    let flat = DepthProfile::constant(1.0).unwrap();
    let m = assemble_dtn(&flat, g, 0.4, DtnBasis::Fourier { max_mode: 6 }).unwrap();
    for (i, &p) in m.momenta.iter().enumerate() {
        let expect = q0(1.0, p);
        assert!((m.l12[(i, i)].abs() - expect).abs() <= 0.01 * expect, "mode {i}");
    }
}

#[test]
fn dense_assembly_is_capped() {
    let g = StripGrid::new(1, 4.0, 256, 8).unwrap();
    assert!(matches!(
        assemble_dtn(&trench(), g, 0.4, DtnBasis::Delta),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn residual_study_sits_at_the_floor_for_constant_depth() {
    let flat = DepthProfile::constant(1.0).unwrap();
    let study = symbol_residual_study(&flat, &[0.4, 0.2], &ResidualStudyConfig::default(), None).unwrap();
    for row in &study.rows {
        assert!(row.residual < 1e-4, "{row:?}");
    }
}

#[test]
fn residual_study_needs_two_values_of_h() {
    let flat = DepthProfile::constant(1.0).unwrap();
    let r = symbol_residual_study(&flat, &[0.2], &ResidualStudyConfig::default(), None);
    assert!(matches!(r, Err(Error::Precondition(_))));
}
