//! Closed-form symbols of the water-wave Dirichlet-to-Neumann operator.
//!
//! Gravity is normalized to one, so the energy is `E = ω²`. The dispersion
//! root `Z(s)` is the positive solution of `z tanh z = s`; the characteristic
//! momentum radius at depth `D` is `r = Z(E D) / D`.

use crate::bathymetry::{DepthProfile, Point};
use crate::error::{Error, Result};

/// A point of phase space: position and (scaled) momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: Point,
    pub p: [f64; 2],
}

impl PhasePoint {
    pub fn new(x: Point, p: [f64; 2]) -> Self {
        PhasePoint { x, p }
    }

    pub fn momentum_norm(&self) -> f64 {
        self.p[0].hypot(self.p[1])
    }
}

/// Positive root of `z tanh z = s`.
pub fn solve_z(s: f64) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("dispersion root needs finite s >= 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let tol = 1e-13 * s.max(1.0);
    let start = s.sqrt().max(s);
    let (mut lo, mut hi) = (0.0f64, start + 1.0);
    let mut z = start;
    for _ in 0..200 {
        let t = z.tanh();
        let f = z * t - s;
        if f.abs() <= tol {
            return Ok(z);
        }
        if f > 0.0 {
            hi = hi.min(z);
        } else {
            lo = lo.max(z);
        }
        let df = t + z * (1.0 - t * t);
        let mut next = z - f / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 4.0 * f64::EPSILON * z {
            return Ok(next);
        }
        z = next;
    }
    Err(Error::Numeric(format!("dispersion root for s={s} did not converge")))
}

/// `Z(s)` with its first two derivatives in `s`.
pub fn solve_z_derivatives(s: f64) -> Result<(f64, f64, f64)> {
    let z = solve_z(s)?;
    if z == 0.0 {
        // Z ~ sqrt(s) has unbounded derivatives at the origin
        return Err(Error::Domain("derivatives of Z are singular at s = 0".into()));
    }
    let t = z.tanh();
    let sech2 = 1.0 - t * t;
    let phi1 = t + z * sech2;
    let phi2 = 2.0 * sech2 * (1.0 - z * t);
    let z1 = 1.0 / phi1;
    let z2 = -phi2 * z1 * z1 * z1;
    Ok((z, z1, z2))
}

/// `|p| tanh(D|p|)` as a function of depth and momentum modulus.
pub fn l0(depth: f64, rho: f64) -> f64 {
    rho * (depth * rho).tanh()
}

/// `1 / cosh(D|p|)`, computed without overflow.
pub fn q0(depth: f64, rho: f64) -> f64 {
    let a = depth * rho;
    if a > 700.0 {
        0.0
    } else {
        1.0 / a.cosh()
    }
}

pub fn symbol_l0(profile: &DepthProfile, point: &PhasePoint) -> Result<f64> {
    Ok(l0(profile.depth(point.x)?, point.momentum_norm()))
}

pub fn symbol_q0(profile: &DepthProfile, point: &PhasePoint) -> Result<f64> {
    Ok(q0(profile.depth(point.x)?, point.momentum_norm()))
}

/// Data of the Maupertuis–Jacobi normal forms at one point and energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormData {
    pub energy: f64,
    /// Characteristic momentum radius: `L0(x, p) = E` iff `|p| = r`.
    pub radius: f64,
    /// Conformal factor of the Finsler Hamiltonian `g |p|`.
    pub conformal: f64,
    /// Metric coefficient `g²`.
    pub metric: f64,
    /// Effective potential `r²` of the Schrödinger form `|p|² - V`.
    pub potential: f64,
}

pub fn normal_form_at_depth(depth: f64, energy: f64) -> Result<NormalFormData> {
    if !(energy > 0.0) {
        return Err(Error::Domain(format!("energy must be positive, got {energy}")));
    }
    if !(depth > 0.0) {
        return Err(Error::Domain(format!("depth must be positive, got {depth}")));
    }
    let r = solve_z(energy * depth)? / depth;
    Ok(NormalFormData {
        energy,
        radius: r,
        conformal: 1.0 / r,
        metric: 1.0 / (r * r),
        potential: r * r,
    })
}

pub fn normal_form(profile: &DepthProfile, x: Point, energy: f64) -> Result<NormalFormData> {
    normal_form_at_depth(profile.depth(x)?, energy)
}

/// Relative distance to the characteristic set below which the removable
/// singularity of the factor quotients is resolved by derivatives.
const SHELL_SWITCH: f64 = 1e-6;

/// `(numerator)/(L0 - E)` where the numerator `N(ρ)` vanishes on the same
/// shell `ρ = r`; `n` returns `(N, N', N'')`.
fn shell_quotient(depth: f64, rho: f64, energy: f64, n: impl Fn(f64) -> (f64, f64, f64)) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain("elliptic factors are undefined at p = 0".into()));
    }
    let nf = normal_form_at_depth(depth, energy)?;
    let m = l0(depth, rho) - energy;
    let q = if m.abs() >= SHELL_SWITCH * energy {
        n(rho).0 / m
    } else {
        let r = nf.radius;
        let delta = rho - r;
        let t = (depth * r).tanh();
        let sech2 = 1.0 - t * t;
        let m1 = t + depth * r * sech2;
        let m2 = 2.0 * depth * sech2 * (1.0 - depth * r * t);
        let (_, n1, n2) = n(r);
        (n1 + 0.5 * n2 * delta) / (m1 + 0.5 * m2 * delta)
    };
    if !(q > 0.0) {
        return Err(Error::Consistency(format!(
            "factor quotient {q} is not positive at |p|={rho}, D={depth}, E={energy}"
        )));
    }
    Ok(q)
}

/// Square of the conformal factor `C0` in `G|p|² - 1 = C0² (L0 - E)`.
pub fn c0_squared(depth: f64, rho: f64, energy: f64) -> Result<f64> {
    let g = normal_form_at_depth(depth, energy)?.metric;
    shell_quotient(depth, rho, energy, |k| (g * k * k - 1.0, 2.0 * g * k, 2.0 * g))
}

/// Square of `F0` in `|p|² - V = F0² (L0 - E)`.
pub fn f0_squared(depth: f64, rho: f64, energy: f64) -> Result<f64> {
    let v = normal_form_at_depth(depth, energy)?.potential;
    shell_quotient(depth, rho, energy, |k| (k * k - v, 2.0 * k, 2.0))
}

pub fn elliptic_factor_c0(profile: &DepthProfile, point: &PhasePoint, energy: f64) -> Result<f64> {
    Ok(c0_squared(profile.depth(point.x)?, point.momentum_norm(), energy)?.sqrt())
}

pub fn elliptic_factor_f0(profile: &DepthProfile, point: &PhasePoint, energy: f64) -> Result<f64> {
    Ok(f0_squared(profile.depth(point.x)?, point.momentum_norm(), energy)?.sqrt())
}

/// Leading vertical profile `cosh((z+D)ρ) / cosh(Dρ)` at depth `D`.
pub fn r0(depth: f64, rho: f64, z: f64) -> f64 {
    // exp(zρ) (1 + e^{-2(z+D)ρ}) / (1 + e^{-2Dρ}) stays finite for large ρ
    let a = (z + depth) * rho;
    (z * rho).exp() * (1.0 + (-2.0 * a).exp()) / (1.0 + (-2.0 * depth * rho).exp())
}

/// Derivative of [`r0`] with respect to the depth at fixed `z`.
pub fn r0_depth_derivative(depth: f64, rho: f64, z: f64) -> f64 {
    let a = (z + depth) * rho;
    let b = depth * rho;
    // ρ [sinh(a) - cosh(a) tanh(b)] / cosh(b) = ρ sinh(a - b) / cosh²(b)
    let num = (a - b).sinh();
    let c = if b > 350.0 { 0.0 } else { 1.0 / b.cosh() };
    rho * num * c * c
}

fn check_z(depth: f64, z: f64) -> Result<()> {
    let slack = 1e-12 * depth;
    if z > slack || z < -depth - slack {
        return Err(Error::Domain(format!("z={z} outside [-{depth}, 0]")));
    }
    Ok(())
}

pub fn symbol_r0(profile: &DepthProfile, point: &PhasePoint, z: f64) -> Result<f64> {
    let d = profile.depth(point.x)?;
    check_z(d, z)?;
    Ok(r0(d, point.momentum_norm(), z))
}

/// First vertical correction on a z-grid, with the discrete residuals of
/// the solve.
#[derive(Debug, Clone)]
pub struct CorrectionProfile {
    pub z: Vec<f64>,
    pub values: Vec<f64>,
    /// Max-norm of the discrete ODE residual at interior nodes.
    pub ode_residual: f64,
    /// Residual of the surface condition `R1(0) = 0`.
    pub top_residual: f64,
    /// Residual of the bottom Neumann condition.
    pub bottom_residual: f64,
}

/// Solves `R1'' - |p|² R1 = 2 (p·∇D) ∂_D R0` on `[-D, 0]` with `R1(0) = 0`
/// and `R1'(-D) = (p·∇D) R0(-D)` by second-order finite differences on the
/// supplied (possibly nonuniform) increasing grid.
pub fn solve_r1_at(depth: f64, grad: [f64; 2], p: [f64; 2], z: &[f64]) -> Result<CorrectionProfile> {
    let n = z.len();
    if n < 4 {
        return Err(Error::InsufficientData("z-grid needs at least 4 nodes".into()));
    }
    if z.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("z-grid must be strictly increasing".into()));
    }
    let span_tol = 1e-9 * depth;
    if (z[0] + depth).abs() > span_tol || z[n - 1].abs() > span_tol {
        return Err(Error::Precondition(format!("z-grid must span [-{depth}, 0]")));
    }
    let rho = p[0].hypot(p[1]);
    if rho == 0.0 {
        return Err(Error::Domain("R1 requires p != 0".into()));
    }
    let pg = p[0] * grad[0] + p[1] * grad[1];
    let rhs: Vec<f64> = z.iter().map(|&zz| 2.0 * pg * r0_depth_derivative(depth, rho, zz)).collect();
    let neumann = pg * r0(depth, rho, -depth);

    // rows: 0 bottom (one-sided, three entries), 1..n-2 interior, n-1 Dirichlet
    let (h1, h2) = (z[1] - z[0], z[2] - z[1]);
    let bottom = [
        -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
        (h1 + h2) / (h1 * h2),
        -h1 / (h2 * (h1 + h2)),
    ];
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 1..n - 1 {
        let (hm, hp) = (z[i] - z[i - 1], z[i + 1] - z[i]);
        lower[i] = 2.0 / (hm * (hm + hp));
        upper[i] = 2.0 / (hp * (hm + hp));
        diag[i] = -lower[i] - upper[i] - rho * rho;
        b[i] = rhs[i];
    }
    diag[n - 1] = 1.0;
    // fold the third bottom entry into a tridiagonal row using row 1
    let f = bottom[2] / upper[1];
    diag[0] = bottom[0] - f * lower[1];
    upper[0] = bottom[1] - f * diag[1];
    b[0] = neumann - f * b[1];

    let values = crate::linalg::solve_tridiagonal(&lower, &diag, &upper, &b)
        .ok_or_else(|| Error::Numeric("singular R1 system".into()))?;

    let mut ode_residual: f64 = 0.0;
    for i in 1..n - 1 {
        let (hm, hp) = (z[i] - z[i - 1], z[i + 1] - z[i]);
        let d2 = 2.0 * (hm * values[i + 1] - (hm + hp) * values[i] + hp * values[i - 1]) / (hm * hp * (hm + hp));
        ode_residual = ode_residual.max((d2 - rho * rho * values[i] - rhs[i]).abs());
    }
    let d1 = bottom[0] * values[0] + bottom[1] * values[1] + bottom[2] * values[2];
    Ok(CorrectionProfile {
        z: z.to_vec(),
        top_residual: values[n - 1].abs(),
        bottom_residual: (d1 - neumann).abs(),
        values,
        ode_residual,
    })
}

pub fn solve_r1(profile: &DepthProfile, point: &PhasePoint, z: &[f64]) -> Result<CorrectionProfile> {
    let s = profile.sample(point.x)?;
    solve_r1_at(s.depth, s.grad, point.p, z)
}

/// Uniform grid of `n` nodes on `[-D, 0]`.
pub fn uniform_z_grid(depth: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| -depth + depth * j as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_values() {
        assert_eq!(solve_z(0.0).unwrap(), 0.0);
        assert!((solve_z(1.0).unwrap() - 1.199_678_640_257_734).abs() < 1e-12);
        assert!((solve_z(50.0).unwrap() - 50.0).abs() < 1e-10);
        let s = 0.01;
        let z = solve_z(s).unwrap();
        assert!((z - 0.100_167).abs() < 1e-6);
        assert!((z - s.sqrt() * (1.0 + s / 6.0)).abs() < 1e-5);
        assert!(matches!(solve_z(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn root_derivatives_match_differences() {
        for s in [0.05, 0.7, 3.0] {
            let (_, d1, d2) = solve_z_derivatives(s).unwrap();
            let e = 1e-5 * s;
            let fd1 = (solve_z(s + e).unwrap() - solve_z(s - e).unwrap()) / (2.0 * e);
            let fd2 = (solve_z_derivatives(s + e).unwrap().1 - solve_z_derivatives(s - e).unwrap().1) / (2.0 * e);
            assert!((d1 - fd1).abs() < 1e-7 * d1.abs());
            assert!((d2 - fd2).abs() < 1e-5 * d2.abs());
        }
    }

    #[test]
    fn factor_squares_on_shell() {
        // at D = E = 1 the shell radius satisfies r tanh r = 1, so the
        // derivative quotient collapses to C0² = 2/r², F0² = 2
        let r = solve_z(1.0).unwrap();
        let c2 = c0_squared(1.0, r, 1.0).unwrap();
        let f2 = f0_squared(1.0, r, 1.0).unwrap();
        assert!((c2 - 2.0 / (r * r)).abs() < 1e-12);
        assert!((f2 - 2.0).abs() < 1e-12);
        assert!((c2 - 1.389_7).abs() < 1e-3);
    }

    #[test]
    fn r0_depth_derivative_matches_difference() {
        let (d, rho, z) = (1.3, 0.8, -0.4);
        let e = 1e-6;
        let fd = (r0(d + e, rho, z) - r0(d - e, rho, z)) / (2.0 * e);
        assert!((fd - r0_depth_derivative(d, rho, z)).abs() < 1e-8);
    }
}
