//! Hamiltonian ray fields for the three equivalent forms of the water-wave
//! dispersion relation.
//!
//! Each Hamiltonian is written as `F(D(x), |p|)`; Hamilton's equations and
//! their variational equations follow from the chain rule with the profile's
//! analytic gradient and Hessian. Integration is classical RK4 with a fixed
//! step.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bathymetry::{DepthProfile, Point};
use crate::dispersion::{normal_form_at_depth, solve_z_derivatives, PhasePoint};
use crate::error::{Error, Result};

/// The Hamiltonians sharing the energy shell `{L0 = E}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Hamiltonian {
    /// `|p| tanh(D(x)|p|)`.
    L0,
    /// `g(x, E) |p|` with `g = D / Z(E D)`; the shell is `H = 1`.
    Finsler { energy: f64 },
    /// `|p|² - V(x, E)` with `V = Z(E D)² / D²`; the shell is `H = 0`.
    Schrodinger { energy: f64 },
}

/// `F` and its derivatives in `(D, ρ)` up to second order.
#[derive(Debug, Clone, Copy, Default)]
struct Radial {
    f: f64,
    f_d: f64,
    f_r: f64,
    f_dd: f64,
    f_dr: f64,
    f_rr: f64,
}

/// `Z(ED)` and its first two depth derivatives.
fn depth_root(energy: f64, depth: f64) -> Result<(f64, f64, f64)> {
    let (z, z1, z2) = solve_z_derivatives(energy * depth)?;
    Ok((z, energy * z1, energy * energy * z2))
}

impl Hamiltonian {
    fn radial(&self, d: f64, rho: f64) -> Result<Radial> {
        Ok(match *self {
            Hamiltonian::L0 => {
                let t = (d * rho).tanh();
                let s2 = 1.0 - t * t;
                Radial {
                    f: rho * t,
                    f_r: t + d * rho * s2,
                    f_d: rho * rho * s2,
                    f_dd: -2.0 * rho * rho * rho * s2 * t,
                    f_dr: 2.0 * rho * s2 * (1.0 - d * rho * t),
                    f_rr: 2.0 * d * s2 * (1.0 - d * rho * t),
                }
            }
            Hamiltonian::Finsler { energy } => {
                let (z, zd, zdd) = depth_root(energy, d)?;
                let g = d / z;
                let g1 = 1.0 / z - d * zd / (z * z);
                let g2 = -2.0 * zd / (z * z) - d * zdd / (z * z) + 2.0 * d * zd * zd / (z * z * z);
                Radial {
                    f: g * rho,
                    f_r: g,
                    f_d: g1 * rho,
                    f_dd: g2 * rho,
                    f_dr: g1,
                    f_rr: 0.0,
                }
            }
            Hamiltonian::Schrodinger { energy } => {
                let (z, zd, zdd) = depth_root(energy, d)?;
                let (d2, d3, d4) = (d * d, d * d * d, d * d * d * d);
                let v = z * z / d2;
                let v1 = 2.0 * z * zd / d2 - 2.0 * z * z / d3;
                let v2 = 2.0 * zd * zd / d2 + 2.0 * z * zdd / d2 - 8.0 * z * zd / d3 + 6.0 * z * z / d4;
                Radial {
                    f: rho * rho - v,
                    f_r: 2.0 * rho,
                    f_d: -v1,
                    f_dd: -v2,
                    f_dr: 0.0,
                    f_rr: 2.0,
                }
            }
        })
    }

    fn singular_at_zero(&self) -> bool {
        !matches!(self, Hamiltonian::Schrodinger { .. })
    }

    /// Value of the Hamiltonian on the common energy shell.
    pub fn shell_value(&self, energy: f64) -> f64 {
        match self {
            Hamiltonian::L0 => energy,
            Hamiltonian::Finsler { .. } => 1.0,
            Hamiltonian::Schrodinger { .. } => 0.0,
        }
    }

    pub fn value(&self, profile: &DepthProfile, point: &PhasePoint) -> Result<f64> {
        Ok(self.radial(profile.depth(point.x)?, point.momentum_norm())?.f)
    }

    /// Gradients `(∂_x H, ∂_p H)`.
    pub fn gradient(&self, profile: &DepthProfile, point: &PhasePoint) -> Result<([f64; 2], [f64; 2])> {
        let d = self.derivatives(profile, point.x, point.p)?;
        Ok((d.hx, d.hp))
    }

    fn derivatives(&self, profile: &DepthProfile, x: Point, p: [f64; 2]) -> Result<Derivatives> {
        let s = profile.sample(x)?;
        let rho = p[0].hypot(p[1]);
        if self.singular_at_zero() && rho < 1e-10 {
            return Err(Error::Singularity(format!("|p| = {rho:.2e} on a Hamiltonian singular at p = 0")));
        }
        let r = self.radial(s.depth, rho)?;
        let u = if rho > 0.0 { [p[0] / rho, p[1] / rho] } else { [0.0, 0.0] };
        let g = s.grad;
        let mut hxx = [[0.0; 2]; 2];
        let mut hxp = [[0.0; 2]; 2];
        let mut hpp = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let delta = if a == b { 1.0 } else { 0.0 };
                hxx[a][b] = r.f_dd * g[a] * g[b] + r.f_d * s.hess[a][b];
                hxp[a][b] = r.f_dr * g[a] * u[b];
                hpp[a][b] = if rho > 0.0 {
                    r.f_rr * u[a] * u[b] + r.f_r / rho * (delta - u[a] * u[b])
                } else {
                    r.f_rr * delta
                };
            }
        }
        Ok(Derivatives {
            h: r.f,
            hx: [r.f_d * g[0], r.f_d * g[1]],
            hp: [r.f_r * u[0], r.f_r * u[1]],
            rho_f_r: rho * r.f_r,
            hxx,
            hxp,
            hpp,
        })
    }
}

struct Derivatives {
    h: f64,
    hx: [f64; 2],
    hp: [f64; 2],
    /// `p · ∂_p H`, the action rate.
    rho_f_r: f64,
    hxx: [[f64; 2]; 2],
    hxp: [[f64; 2]; 2],
    hpp: [[f64; 2]; 2],
}

type Monodromy = [[f64; 4]; 4];

/// Integrated state: position, momentum, action and the 4×4 monodromy
/// matrix `∂(x, p) / ∂(x₀, p₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Phase {
    x: [f64; 2],
    p: [f64; 2],
    action: f64,
    m: Monodromy,
}

impl Phase {
    fn axpy(&self, k: &Phase, a: f64) -> Phase {
        let mut out = *self;
        for i in 0..2 {
            out.x[i] += a * k.x[i];
            out.p[i] += a * k.p[i];
        }
        out.action += a * k.action;
        for i in 0..4 {
            for j in 0..4 {
                out.m[i][j] += a * k.m[i][j];
            }
        }
        out
    }
}

fn rhs(ham: &Hamiltonian, profile: &DepthProfile, y: &Phase) -> Result<Phase> {
    let d = ham.derivatives(profile, y.x, y.p)?;
    // d/dt [δx; δp] = [H_px δx + H_pp δp; -H_xx δx - H_xp δp]
    let mut m = [[0.0; 4]; 4];
    for col in 0..4 {
        let dx = [y.m[0][col], y.m[1][col]];
        let dp = [y.m[2][col], y.m[3][col]];
        for a in 0..2 {
            let mut vx = 0.0;
            let mut vp = 0.0;
            for b in 0..2 {
                vx += d.hxp[b][a] * dx[b] + d.hpp[a][b] * dp[b];
                vp -= d.hxx[a][b] * dx[b] + d.hxp[a][b] * dp[b];
            }
            m[a][col] = vx;
            m[2 + a][col] = vp;
        }
    }
    Ok(Phase {
        x: d.hp,
        p: [-d.hx[0], -d.hx[1]],
        action: d.rho_f_r,
        m,
    })
}

fn rk4_step(ham: &Hamiltonian, profile: &DepthProfile, y: &Phase, dt: f64) -> Result<Phase> {
    let k1 = rhs(ham, profile, y)?;
    let k2 = rhs(ham, profile, &y.axpy(&k1, 0.5 * dt))?;
    let k3 = rhs(ham, profile, &y.axpy(&k2, 0.5 * dt))?;
    let k4 = rhs(ham, profile, &y.axpy(&k3, dt))?;
    let mut out = *y;
    out = out.axpy(&k1, dt / 6.0);
    out = out.axpy(&k2, dt / 3.0);
    out = out.axpy(&k3, dt / 3.0);
    out = out.axpy(&k4, dt / 6.0);
    Ok(out)
}

fn det4(m: &Monodromy) -> f64 {
    let a = nalgebra::Matrix4::from_fn(|i, j| m[i][j]);
    a.determinant()
}

const IDENTITY: Monodromy = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// One sample of a ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayState {
    pub t: f64,
    pub x: [f64; 2],
    pub p: [f64; 2],
    /// `∫ p · dx` from the launch point.
    pub action: f64,
    /// `∂_p H`, used for Hermite interpolation of the path.
    pub velocity: [f64; 2],
    pub hamiltonian: f64,
    #[serde(skip)]
    pub monodromy: [[f64; 4]; 4],
}

impl RayState {
    pub fn det_monodromy(&self) -> f64 {
        det4(&self.monodromy)
    }
}

/// Reason a trajectory ended before the requested time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    /// The profile could not be evaluated (outside a gridded box).
    LeftDomain,
    /// Stopped by an escape radius.
    Escaped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub hamiltonian: Hamiltonian,
    pub dt: f64,
    pub states: Vec<RayState>,
    pub termination: Termination,
    /// `max |H - H₀| / (1 + |H₀|)` over the stored states.
    pub energy_drift: f64,
    /// `max |det M - 1|`.
    pub symplectic_defect: f64,
}

/// Integration settings shared by the ray routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowOptions {
    pub t_max: f64,
    pub dt: f64,
    /// Keep every `stride`-th step (the last one is always kept).
    pub stride: usize,
    /// Stop once `|x| >= escape_radius`.
    pub escape_radius: Option<f64>,
}

impl FlowOptions {
    pub fn new(t_max: f64, dt: f64) -> Self {
        FlowOptions {
            t_max,
            dt,
            stride: 1,
            escape_radius: None,
        }
    }
}

fn make_state(ham: &Hamiltonian, profile: &DepthProfile, t: f64, y: &Phase) -> Result<RayState> {
    let d = ham.derivatives(profile, y.x, y.p)?;
    Ok(RayState {
        t,
        x: y.x,
        p: y.p,
        action: y.action,
        velocity: d.hp,
        hamiltonian: d.h,
        monodromy: y.m,
    })
}

fn is_domain_exit(e: &Error) -> bool {
    matches!(e, Error::Domain(_) | Error::Validity(_))
}

/// Integrates Hamilton's equations with the variational equations.
pub fn flow(profile: &DepthProfile, ham: Hamiltonian, initial: PhasePoint, opts: &FlowOptions) -> Result<Trajectory> {
    integrate(profile, ham, initial, opts, |_, _, _| Ok(()))
}

fn integrate(
    profile: &DepthProfile,
    ham: Hamiltonian,
    initial: PhasePoint,
    opts: &FlowOptions,
    mut on_step: impl FnMut(&Phase, &Phase, f64) -> Result<()>,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0 && opts.t_max >= 0.0) || opts.stride == 0 {
        return Err(Error::Precondition("flow needs dt > 0, t_max >= 0, stride >= 1".into()));
    }
    let mut y = Phase {
        x: initial.x,
        p: initial.p,
        action: 0.0,
        m: IDENTITY,
    };
    let first = make_state(&ham, profile, 0.0, &y)?;
    let h0 = first.hamiltonian;
    let mut states = vec![first];
    let steps = (opts.t_max / opts.dt).round() as usize;
    let mut termination = Termination::Completed;
    let mut drift: f64 = 0.0;
    let mut defect: f64 = 0.0;
    for k in 1..=steps {
        let next = match rk4_step(&ham, profile, &y, opts.dt) {
            Ok(v) => v,
            Err(e) if is_domain_exit(&e) => {
                termination = Termination::LeftDomain;
                break;
            }
            Err(e) => return Err(e),
        };
        on_step(&y, &next, opts.dt)?;
        y = next;
        let t = k as f64 * opts.dt;
        let escaped = opts.escape_radius.is_some_and(|r| y.x[0].hypot(y.x[1]) >= r);
        if k % opts.stride == 0 || k == steps || escaped {
            let s = match make_state(&ham, profile, t, &y) {
                Ok(s) => s,
                Err(e) if is_domain_exit(&e) => {
                    termination = Termination::LeftDomain;
                    break;
                }
                Err(e) => return Err(e),
            };
            drift = drift.max((s.hamiltonian - h0).abs() / (1.0 + h0.abs()));
            defect = defect.max((s.det_monodromy() - 1.0).abs());
            states.push(s);
        }
        if escaped {
            termination = Termination::Escaped;
            break;
        }
    }
    Ok(Trajectory {
        hamiltonian: ham,
        dt: opts.dt,
        states,
        termination,
        energy_drift: drift,
        symplectic_defect: defect,
    })
}

/// Launch point on the common shell: `|p| = r(x₀, E)` in direction `angle`.
pub fn shell_point(profile: &DepthProfile, x: Point, energy: f64, angle: f64) -> Result<PhasePoint> {
    let r = normal_form_at_depth(profile.depth(x)?, energy)?.radius;
    Ok(PhasePoint::new(x, [r * angle.cos(), r * angle.sin()]))
}

/// Cumulative arclength of a polyline.
fn arclength(points: &[[f64; 2]]) -> Vec<f64> {
    let mut s = vec![0.0; points.len()];
    for i in 1..points.len() {
        s[i] = s[i - 1] + (points[i][0] - points[i - 1][0]).hypot(points[i][1] - points[i - 1][1]);
    }
    s
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

/// Directed Hausdorff distance from `a` to polyline `b`, both truncated to
/// arclength `length`; nearest segments are searched in an arclength window.
fn directed_hausdorff(a: &[[f64; 2]], sa: &[f64], b: &[[f64; 2]], sb: &[f64], length: f64, window: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut lo = 0usize;
    for (p, &s) in a.iter().zip(sa) {
        if s > length {
            break;
        }
        while lo + 1 < sb.len() && sb[lo + 1] < s - window {
            lo += 1;
        }
        let mut best = f64::INFINITY;
        let mut j = lo;
        while j + 1 < b.len() && sb[j] <= s + window {
            best = best.min(point_segment_distance(*p, b[j], b[j + 1]));
            j += 1;
        }
        if best.is_finite() {
            worst = worst.max(best);
        }
    }
    worst
}

/// Symmetric Hausdorff distance between two position curves over their
/// common arclength.
pub fn curve_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let (sa, sb) = (arclength(a), arclength(b));
    let length = sa[sa.len() - 1].min(sb[sb.len() - 1]);
    let window = 0.05 * length.max(1e-12) + 1e-9;
    directed_hausdorff(a, &sa, b, &sb, length, window).max(directed_hausdorff(b, &sb, a, &sa, length, window))
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlapReport {
    /// Distances L0–Finsler, L0–Schrödinger, Finsler–Schrödinger.
    pub distances: [f64; 3],
    /// Whether the initial point lies off the energy shell.
    pub shell_mismatch: bool,
    pub shell_defect: f64,
    pub tolerance: f64,
    pub passes: bool,
}

/// Compares the position curves of the three Hamiltonian flows from one point.
pub fn maupertuis_overlap(
    profile: &DepthProfile,
    energy: f64,
    initial: PhasePoint,
    t_max: f64,
    dt: f64,
    tolerance: f64,
) -> Result<OverlapReport> {
    let opts = FlowOptions::new(t_max, dt);
    let hams = [
        Hamiltonian::L0,
        Hamiltonian::Finsler { energy },
        Hamiltonian::Schrodinger { energy },
    ];
    let mut curves = Vec::new();
    for h in hams {
        let tr = flow(profile, h, initial, &opts)?;
        curves.push(tr.states.iter().map(|s| s.x).collect::<Vec<_>>());
    }
    let shell_defect = (Hamiltonian::L0.value(profile, &initial)? - energy).abs() / energy;
    let distances = [
        curve_distance(&curves[0], &curves[1]),
        curve_distance(&curves[0], &curves[2]),
        curve_distance(&curves[1], &curves[2]),
    ];
    let shell_mismatch = shell_defect > 1e-8;
    Ok(OverlapReport {
        distances,
        shell_mismatch,
        shell_defect,
        tolerance,
        passes: !shell_mismatch && distances.iter().all(|d| *d <= tolerance),
    })
}

/// A stored sample of a fan ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FanSample {
    pub t: f64,
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub action: f64,
    pub velocity: [f64; 2],
    /// `∂x/∂θ` from the variational matrix.
    pub dx_dtheta: [f64; 2],
    /// `∂p/∂θ`.
    pub dp_dtheta: [f64; 2],
    /// `det[∂x/∂t, ∂x/∂θ]`.
    pub spreading: f64,
    pub maslov: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct FanRay {
    pub angle: f64,
    pub samples: Vec<FanSample>,
    pub termination: Termination,
    pub energy_drift: f64,
    pub symplectic_defect: f64,
}

/// Rays from one source point launched at uniform angles on the shell.
#[derive(Debug, Clone, Serialize)]
pub struct LagrangianFan {
    pub source: Point,
    pub energy: f64,
    pub hamiltonian: Hamiltonian,
    pub radius: f64,
    pub dt: f64,
    pub stride: usize,
    pub rays: Vec<FanRay>,
}

impl LagrangianFan {
    pub fn angle_step(&self) -> f64 {
        2.0 * PI / self.rays.len() as f64
    }

    /// Largest `|J|` over the fan.
    pub fn max_spreading(&self) -> f64 {
        self.rays
            .iter()
            .flat_map(|r| r.samples.iter())
            .fold(0.0f64, |m, s| m.max(s.spreading.abs()))
    }
}

fn spreading_of(y: &Phase, vel: [f64; 2], dp0: [f64; 2]) -> ([f64; 2], [f64; 2], f64) {
    let dx = [
        y.m[0][2] * dp0[0] + y.m[0][3] * dp0[1],
        y.m[1][2] * dp0[0] + y.m[1][3] * dp0[1],
    ];
    let dp = [
        y.m[2][2] * dp0[0] + y.m[2][3] * dp0[1],
        y.m[3][2] * dp0[0] + y.m[3][3] * dp0[1],
    ];
    (dx, dp, vel[0] * dx[1] - vel[1] * dx[0])
}

/// Launches `n_angles` rays from `x₀` with `|p| = r(x₀, E)` and tracks the
/// transverse spreading `J` and the Maslov count (sign changes of `J`).
pub fn launch_fan(
    profile: &DepthProfile,
    source: Point,
    energy: f64,
    n_angles: usize,
    hamiltonian: Hamiltonian,
    opts: &FlowOptions,
) -> Result<LagrangianFan> {
    if n_angles < 16 {
        return Err(Error::Precondition(format!("fan needs at least 16 angles, got {n_angles}")));
    }
    if !(energy > 0.0) {
        return Err(Error::Domain("energy must be positive".into()));
    }
    let radius = normal_form_at_depth(profile.depth(source)?, energy)?.radius;
    let mut rays = Vec::with_capacity(n_angles);
    for i in 0..n_angles {
        let angle = 2.0 * PI * i as f64 / n_angles as f64;
        let p0 = [radius * angle.cos(), radius * angle.sin()];
        let dp0 = [-p0[1], p0[0]];
        let mut maslov = 0u32;
        let mut last_j = 0.0f64;
        let mut peak_j = 0.0f64;
        let mut counts: Vec<(f64, u32)> = Vec::new();
        let mut t = 0.0;
        let tr = integrate(profile, hamiltonian, PhasePoint::new(source, p0), opts, |a, b, dt| {
            t += dt;
            let vel_b = hamiltonian.gradient(profile, &PhasePoint::new(b.x, b.p)).map(|g| g.1)?;
            let (_, _, jb) = spreading_of(b, vel_b, dp0);
            peak_j = peak_j.max(jb.abs());
            if last_j != 0.0 && jb != 0.0 {
                if last_j.signum() != jb.signum() {
                    maslov += 1;
                } else if jb.abs() < 1e-3 * peak_j && last_j.abs() < 1e-3 * peak_j {
                    // both ends near zero with one sign: retry the step in halves
                    let mid = rk4_step(&hamiltonian, profile, a, 0.5 * dt)?;
                    let vel_m = hamiltonian.gradient(profile, &PhasePoint::new(mid.x, mid.p))?.1;
                    let (_, _, jm) = spreading_of(&mid, vel_m, dp0);
                    if jm.signum() != jb.signum() {
                        maslov += 2;
                    }
                }
            }
            if jb != 0.0 {
                last_j = jb;
            }
            counts.push((t, maslov));
            Ok(())
        })?;
        let mut samples = Vec::with_capacity(tr.states.len());
        for s in &tr.states {
            let y = Phase {
                x: s.x,
                p: s.p,
                action: s.action,
                m: s.monodromy,
            };
            let (dx, dp, j) = spreading_of(&y, s.velocity, dp0);
            let m = if s.t == 0.0 {
                0
            } else {
                let idx = ((s.t / opts.dt).round() as usize).saturating_sub(1).min(counts.len().saturating_sub(1));
                counts.get(idx).map(|c| c.1).unwrap_or(0)
            };
            samples.push(FanSample {
                t: s.t,
                x: s.x,
                p: s.p,
                action: s.action,
                velocity: s.velocity,
                dx_dtheta: dx,
                dp_dtheta: dp,
                spreading: j,
                maslov: m,
            });
        }
        if samples.len() > 2 && samples[1..].iter().all(|s| s.spreading.abs() < 1e-300) {
            return Err(Error::Degenerate(format!("spreading vanishes identically on ray {i}")));
        }
        rays.push(FanRay {
            angle,
            samples,
            termination: tr.termination,
            energy_drift: tr.energy_drift,
            symplectic_defect: tr.symplectic_defect,
        });
    }
    Ok(LagrangianFan {
        source,
        energy,
        hamiltonian,
        radius,
        dt: opts.dt,
        stride: opts.stride,
        rays,
    })
}

/// Largest relative mismatch between the variational `∂x/∂θ` and central
/// differences of neighbouring rays, over samples whose `|J|` exceeds
/// `floor · max|J|` and whose time is at least `t_min`.
pub fn neighbour_spreading_mismatch(fan: &LagrangianFan, floor: f64, t_min: f64) -> f64 {
    let n = fan.rays.len();
    let dtheta = fan.angle_step();
    let jmax = fan.max_spreading();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let (prev, cur, next) = (&fan.rays[(i + n - 1) % n], &fan.rays[i], &fan.rays[(i + 1) % n]);
        let len = cur.samples.len().min(prev.samples.len()).min(next.samples.len());
        for k in 0..len {
            let s = &cur.samples[k];
            if s.t < t_min || s.spreading.abs() < floor * jmax {
                continue;
            }
            let fd = [
                (next.samples[k].x[0] - prev.samples[k].x[0]) / (2.0 * dtheta),
                (next.samples[k].x[1] - prev.samples[k].x[1]) / (2.0 * dtheta),
            ];
            let j_fd = s.velocity[0] * fd[1] - s.velocity[1] * fd[0];
            worst = worst.max((j_fd - s.spreading).abs() / s.spreading.abs());
        }
    }
    worst
}

/// Number of sign changes of the neighbour-differenced spreading along ray `i`.
pub fn neighbour_sign_changes(fan: &LagrangianFan, i: usize) -> u32 {
    let n = fan.rays.len();
    let dtheta = fan.angle_step();
    let (prev, cur, next) = (&fan.rays[(i + n - 1) % n], &fan.rays[i], &fan.rays[(i + 1) % n]);
    let len = cur.samples.len().min(prev.samples.len()).min(next.samples.len());
    let mut last = 0.0f64;
    let mut count = 0;
    for k in 1..len {
        let s = &cur.samples[k];
        let fd = [
            (next.samples[k].x[0] - prev.samples[k].x[0]) / (2.0 * dtheta),
            (next.samples[k].x[1] - prev.samples[k].x[1]) / (2.0 * dtheta),
        ];
        let j = s.velocity[0] * fd[1] - s.velocity[1] * fd[0];
        if last != 0.0 && j != 0.0 && last.signum() != j.signum() {
            count += 1;
        }
        if j != 0.0 {
            last = j;
        }
    }
    count
}

#[derive(Debug, Clone, Serialize)]
pub struct NontrappingReport {
    pub launches: usize,
    pub trapped: usize,
    /// Slowest escape time over launches that escaped (in the faster direction).
    pub slowest_escape: f64,
    /// A launch that failed to escape in both directions, if any.
    pub example_trapped: Option<([f64; 2], [f64; 2])>,
    pub passes: bool,
}

/// Checks that every `L0` ray through the launch set reaches
/// `|x| >= escape_radius` within `t_max` forward or backward in time.
pub fn nontrapping_check(
    profile: &DepthProfile,
    energy: f64,
    positions: &[Point],
    n_angles: usize,
    t_max: f64,
    dt: f64,
    escape_radius: f64,
) -> Result<NontrappingReport> {
    if positions.is_empty() || n_angles == 0 {
        return Err(Error::InsufficientData("no launch states".into()));
    }
    let mut opts = FlowOptions::new(t_max, dt);
    opts.stride = usize::MAX / 2;
    opts.escape_radius = Some(escape_radius);
    let mut trapped = 0;
    let mut slowest: f64 = 0.0;
    let mut example = None;
    let mut launches = 0;
    for &x in positions {
        for k in 0..n_angles {
            let angle = 2.0 * PI * k as f64 / n_angles as f64;
            let start = shell_point(profile, x, energy, angle)?;
            launches += 1;
            let mut best = f64::INFINITY;
            // backward in time equals forward from the reversed momentum (H is even in p)
            for sign in [1.0, -1.0] {
                let init = PhasePoint::new(x, [sign * start.p[0], sign * start.p[1]]);
                let tr = flow(profile, Hamiltonian::L0, init, &opts)?;
                let last = tr.states.last().expect("initial state stored");
                if matches!(tr.termination, Termination::Escaped | Termination::LeftDomain) {
                    best = best.min(last.t);
                }
            }
            if best.is_finite() {
                slowest = slowest.max(best);
            } else {
                trapped += 1;
                example.get_or_insert((start.x, start.p));
            }
        }
    }
    Ok(NontrappingReport {
        launches,
        trapped,
        slowest_escape: slowest,
        example_trapped: example,
        passes: trapped == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> DepthProfile {
        DepthProfile::radial_bump(1.0, 0.3, 1.0, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn radial_derivatives_match_differences() {
        let hams = [
            Hamiltonian::L0,
            Hamiltonian::Finsler { energy: 1.3 },
            Hamiltonian::Schrodinger { energy: 0.7 },
        ];
        for h in hams {
            for (d, rho) in [(0.8, 1.1), (1.3, 0.4), (0.5, 2.0)] {
                let r = h.radial(d, rho).unwrap();
                let e = 1e-5;
                let fd = |dd: f64, dr: f64| h.radial(d + dd, rho + dr).unwrap();
                let (pd, md) = (fd(e, 0.0), fd(-e, 0.0));
                let (pr, mr) = (fd(0.0, e), fd(0.0, -e));
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + b.abs());
                assert!(close((pd.f - md.f) / (2.0 * e), r.f_d));
                assert!(close((pr.f - mr.f) / (2.0 * e), r.f_r));
                assert!(close((pd.f_d - md.f_d) / (2.0 * e), r.f_dd));
                assert!(close((pr.f_d - mr.f_d) / (2.0 * e), r.f_dr));
                assert!(close((pr.f_r - mr.f_r) / (2.0 * e), r.f_rr));
            }
        }
    }

    #[test]
    fn finsler_straight_ray_in_constant_depth() {
        let p = DepthProfile::constant(1.0).unwrap();
        let start = shell_point(&p, [0.5, -0.2], 1.0, 0.3).unwrap();
        let tr = flow(&p, Hamiltonian::Finsler { energy: 1.0 }, start, &FlowOptions::new(5.0, 1e-2)).unwrap();
        let g = 1.0 / start.momentum_norm();
        let last = tr.states.last().unwrap();
        assert!((last.x[0] - (0.5 + 5.0 * g * 0.3f64.cos())).abs() < 1e-12);
        assert!((last.action - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ray_aimed_at_bump_centre_stays_on_axis() {
        let p = bump();
        let start = shell_point(&p, [-3.0, 0.0], 1.0, 0.0).unwrap();
        let tr = flow(&p, Hamiltonian::L0, start, &FlowOptions::new(6.0, 1e-2)).unwrap();
        assert!(tr.states.iter().all(|s| s.x[1].abs() < 1e-14 && s.p[1].abs() < 1e-14));
    }

    #[test]
    fn singular_momentum_is_reported() {
        let p = DepthProfile::constant(1.0).unwrap();
        let r = flow(&p, Hamiltonian::L0, PhasePoint::new([0.0, 0.0], [0.0, 0.0]), &FlowOptions::new(1.0, 0.1));
        assert!(matches!(r, Err(Error::Singularity(_))));
    }

    #[test]
    fn finsler_is_one_homogeneous() {
        let p = bump();
        let h = Hamiltonian::Finsler { energy: 1.0 };
        let a = PhasePoint::new([0.4, 0.3], [0.5, -0.7]);
        let b = PhasePoint::new([0.4, 0.3], [1.5, -2.1]);
        assert!((h.value(&p, &b).unwrap() - 3.0 * h.value(&p, &a).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn constant_depth_fan_spreads_linearly() {
        let p = DepthProfile::constant(1.0).unwrap();
        let mut opts = FlowOptions::new(4.0, 1e-2);
        opts.stride = 50;
        let fan = launch_fan(&p, [0.0, 0.0], 1.0, 16, Hamiltonian::Finsler { energy: 1.0 }, &opts).unwrap();
        let g = 1.0 / fan.radius;
        for ray in &fan.rays {
            for s in &ray.samples[1..] {
                assert!((s.spreading - g * g * s.t).abs() < 1e-10);
                assert_eq!(s.maslov, 0);
            }
        }
    }
}
