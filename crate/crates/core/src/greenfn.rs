//! Leading-order outgoing Green function for a localized source, the exact
//! constant-depth kernel used to check it, and limiting-absorption runs.
//!
//! The source is `f(x) = (2πh)^{-1} V((x - x₀)/h)` with
//! `V(y) = i ∫ e^{i p·y} A(|p|) dp` and `A` a smooth bump on an annulus
//! around the characteristic radius `r(x₀, E)`. The outgoing solution is
//! assembled from three pieces:
//!
//! * a non-characteristic part `K[(1 - ρ) A / (L0 - E)]`,
//! * a transitional part, the short-time propagator `(i/h) ∫ θ(t) e^{-itH/h} dt`
//!   applied to `ρ A / C0²` with coefficients frozen at `x₀`,
//! * a flow-out part, a WKB sum over the branches of the Finsler ray fan.
//!
//! The first two are radial Hankel integrals; the third carries one complex
//! calibration constant fitted against [`exact_green_constant_depth`].

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::bathymetry::{DepthProfile, Point};
use crate::dispersion::{l0, normal_form_at_depth, q0};
use crate::error::{Error, Result};
use crate::fft::GridFft;
use crate::numerics::{gauss_legendre, integrate, Quadrature};
use crate::pdo::{apply_symbol, Absorber, GridField, ResolventOperator, ResolventQuery, Symbol};
use crate::rays::{Hamiltonian, LagrangianFan};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `C∞` step from 0 (`u <= 0`) to 1 (`u >= 1`).
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// `exp(1 - 1/(1 - u²))` on `|u| < 1`, peak value 1.
fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// `∂_ρ L0(D, ρ)`.
fn l0_slope(depth: f64, rho: f64) -> f64 {
    let t = (depth * rho).tanh();
    t + depth * rho * (1.0 - t * t)
}

/// Localized source with a radial momentum amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceModel {
    pub center: Point,
    pub energy: f64,
    pub h: f64,
    /// Depth at the source.
    pub depth: f64,
    /// Characteristic momentum `r(x₀, E)`.
    pub radius: f64,
    /// Relative half-width of the amplitude's support around `radius`.
    pub support: f64,
    /// Peak value of `A`.
    pub scale: f64,
}

impl SourceModel {
    pub fn new(profile: &DepthProfile, center: Point, energy: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Domain(format!("h must be positive, got {h}")));
        }
        let depth = profile.depth(center)?;
        let radius = normal_form_at_depth(depth, energy)?.radius;
        Ok(SourceModel {
            center,
            energy,
            h,
            depth,
            radius,
            support: 0.6,
            scale: 1.0,
        })
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    /// `A(|p|)`.
    pub fn amplitude(&self, rho: f64) -> f64 {
        self.scale * bump((rho - self.radius) / (self.support * self.radius))
    }

    /// Momentum interval carrying `A`.
    pub fn momentum_range(&self) -> (f64, f64) {
        (self.radius * (1.0 - self.support), self.radius * (1.0 + self.support))
    }

    /// `f` at distance `distance` from the centre, by radial quadrature.
    pub fn value_at(&self, distance: f64) -> Result<Complex64> {
        let (a, b) = self.momentum_range();
        let q = integrate(
            |rho| Complex64::new(libm::j0(rho * distance / self.h) * self.amplitude(rho) * rho, 0.0),
            a,
            b,
            1e-14,
            1e-10,
            2000,
        )?;
        Ok(I * q.value / self.h)
    }
}

/// Samples the source on a periodic grid by lattice quadrature of `A`.
pub fn source_field(model: &SourceModel, template: &GridField) -> Result<GridField> {
    if template.dim != 2 {
        return Err(Error::Precondition("the localized source lives on 2-D grids".into()));
    }
    if (template.h - model.h).abs() > 1e-14 * model.h {
        return Err(Error::Precondition(format!("grid h {} differs from source h {}", template.h, model.h)));
    }
    template.check_resolution(model.momentum_range().1, 3.0)?;
    let n = template.n;
    let dp = template.h * PI / template.half_width;
    let norm = (n * n) as f64 * dp * dp / (2.0 * PI * template.h);
    let mut data = vec![Complex64::new(0.0, 0.0); template.len()];
    for (q, z) in data.iter_mut().enumerate() {
        let p = template.momentum(q);
        let a = model.amplitude(p[0].hypot(p[1]));
        if a == 0.0 {
            continue;
        }
        // node x_j = -X + j dx contributes the sign (-1)^{k1 + k2}
        let k = ((p[0] / dp).round() as i64 + (p[1] / dp).round() as i64).rem_euclid(2);
        let sign = if k == 0 { 1.0 } else { -1.0 };
        let phase = -(p[0] * model.center[0] + p[1] * model.center[1]) / template.h;
        *z = I * norm * sign * a * Complex64::from_polar(1.0, phase);
    }
    GridFft::new(2, n).inverse(&mut data);
    Ok(template.with_data(data))
}

/// Exact outgoing field of the source in constant depth `D(x₀)` at `E + iε`
/// (`ε = 0` is the limiting-absorption value), with quadrature error.
pub fn exact_green_constant_depth(model: &SourceModel, epsilon: f64, points: &[Point]) -> Result<Vec<Quadrature>> {
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let (a, b) = model.momentum_range();
    let (d, e, h, r) = (model.depth, model.energy, model.h, model.radius);
    let slope = l0_slope(d, r);
    // pole of 1/(L0 - E - iε) continued off the axis, to first order in ε
    let shift = epsilon / slope;
    let pole = Complex64::new(r, shift);
    // ∫_a^b dρ/(ρ - pole); the branch is fixed by approaching the axis from below
    let log_term = Complex64::new(
        ((b - r).hypot(shift) / (a - r).hypot(shift)).ln(),
        Complex64::new(b - r, -shift).arg() - Complex64::new(a - r, -shift).arg(),
    );
    points
        .iter()
        .map(|x| {
            let dist = (x[0] - model.center[0]).hypot(x[1] - model.center[1]);
            let g = |rho: f64| I / h * libm::j0(rho * dist / h) * model.amplitude(rho) * rho;
            let g_pole = g(r) / slope;
            let integrand = |rho: f64| {
                let denom = Complex64::new(l0(d, rho) - e, -epsilon);
                let sub = rho - pole;
                // the difference is bounded; at the pole itself use the limit value 0 of the
                // leading singular parts
                if denom.norm() < 1e-300 || sub.norm() < 1e-300 {
                    return Complex64::new(0.0, 0.0);
                }
                g(rho) / denom - g_pole / sub
            };
            let tol = 1e-9 * (g_pole.norm() + 1e-30);
            let lo = integrate(integrand, a, r, tol, 1e-9, 4000)?;
            let hi = integrate(integrand, r, b, tol, 1e-9, 4000)?;
            Ok(Quadrature {
                value: lo.value + hi.value + g_pole * log_term,
                error: lo.error + hi.error,
            })
        })
        .collect()
}

/// Cutoff parameters of the three-term decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenCutoffs {
    /// `ρ = 1` on `| |p|/r - 1 | <= band`, vanishing beyond `1.5·band`.
    pub band: f64,
    /// `θ(t)` falls from 1 at `t₀/2` to 0 at `t₀`; `t₀` is the Finsler
    /// travel time over this many multiples of `h`.
    pub travel_widths: f64,
}

impl Default for GreenCutoffs {
    fn default() -> Self {
        GreenCutoffs {
            band: 0.3,
            travel_widths: 10.0,
        }
    }
}

impl GreenCutoffs {
    pub fn scaled(&self, band: f64, travel: f64) -> Self {
        GreenCutoffs {
            band: self.band * band,
            travel_widths: self.travel_widths * travel,
        }
    }

    fn momentum_cut(&self, model: &SourceModel, rho: f64) -> f64 {
        let u = (rho / model.radius - 1.0).abs();
        1.0 - smooth_step((u - self.band) / (0.5 * self.band))
    }

    /// `t₀` for a source model: distance `travel_widths·h` at Finsler speed `1/r`.
    pub fn cutoff_time(&self, model: &SourceModel) -> f64 {
        self.travel_widths * model.h * model.radius
    }

    fn time_cut(&self, t0: f64, t: f64) -> f64 {
        1.0 - smooth_step((t - 0.5 * t0) / (0.5 * t0))
    }
}

/// `(L0 - E)/(g ρ - 1)` at the source depth.
fn finsler_factor_sq(model: &SourceModel, rho: f64) -> f64 {
    let g = 1.0 / model.radius;
    let den = g * rho - 1.0;
    if den.abs() < 1e-7 {
        l0_slope(model.depth, rho) / g
    } else {
        (l0(model.depth, rho) - model.energy) / den
    }
}

/// Radial table of the non-characteristic and transitional terms.
#[derive(Debug, Clone)]
struct NearField {
    step: f64,
    term1: Vec<Complex64>,
    term3: Vec<Complex64>,
}

impl NearField {
    fn new(model: &SourceModel, cutoffs: &GreenCutoffs, r_max: f64) -> Result<Self> {
        let (a, b) = model.momentum_range();
        let h = model.h;
        let t0 = cutoffs.cutoff_time(model);
        let g = 1.0 / model.radius;
        let (gx, gw) = gauss_legendre(16);
        let panels = 96;
        let (tx, tw) = gauss_legendre(48);
        let mut nodes = Vec::new();
        let mut w1 = Vec::new();
        let mut w3 = Vec::new();
        for k in 0..panels {
            let lo = a + (b - a) * k as f64 / panels as f64;
            let hi = a + (b - a) * (k + 1) as f64 / panels as f64;
            for (x, w) in gx.iter().zip(&gw) {
                let rho = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                let weight = 0.5 * (hi - lo) * w * model.amplitude(rho) * rho;
                let cut = cutoffs.momentum_cut(model, rho);
                let t1 = if cut < 1.0 {
                    (1.0 - cut) / (l0(model.depth, rho) - model.energy)
                } else {
                    0.0
                };
                // (i/h) ∫ θ(t) e^{-itH/h} dt with H = gρ - 1
                let big_h = g * rho - 1.0;
                let mut m3 = Complex64::new(0.0, 0.0);
                for (s, sw) in tx.iter().zip(&tw) {
                    let t = 0.5 * t0 * (1.0 + s);
                    m3 += 0.5 * t0 * sw * cutoffs.time_cut(t0, t) * Complex64::from_polar(1.0, -t * big_h / h);
                }
                m3 *= I / h;
                nodes.push(rho);
                w1.push(I / h * weight * t1);
                w3.push(I / h * weight * cut / finsler_factor_sq(model, rho) * m3);
            }
        }
        let step = h / 32.0;
        let count = (r_max / step).ceil() as usize + 4;
        let mut term1 = Vec::with_capacity(count);
        let mut term3 = Vec::with_capacity(count);
        for j in 0..count {
            let dist = j as f64 * step;
            let mut s1 = Complex64::new(0.0, 0.0);
            let mut s3 = Complex64::new(0.0, 0.0);
            for ((rho, a1), a3) in nodes.iter().zip(&w1).zip(&w3) {
                let j0 = libm::j0(rho * dist / h);
                s1 += a1 * j0;
                s3 += a3 * j0;
            }
            term1.push(s1);
            term3.push(s3);
        }
        Ok(NearField { step, term1, term3 })
    }

    /// Cubic Lagrange interpolation in the distance.
    fn eval(&self, dist: f64) -> Result<(Complex64, Complex64)> {
        let u = dist / self.step;
        let j = (u.floor() as isize).max(1) as usize;
        if j + 2 >= self.term1.len() {
            return Err(Error::Domain(format!("distance {dist} beyond the near-field table")));
        }
        let s = u - j as f64;
        let w = [
            -s * (s - 1.0) * (s - 2.0) / 6.0,
            (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
            -(s + 1.0) * s * (s - 2.0) / 2.0,
            (s + 1.0) * s * (s - 1.0) / 6.0,
        ];
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        for (k, wk) in w.iter().enumerate() {
            a += self.term1[j + k - 1] * wk;
            b += self.term3[j + k - 1] * wk;
        }
        Ok((a, b))
    }
}

/// Classification of an observation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointFlag {
    Regular,
    /// No ray branch reaches the point; only the near-field terms contribute.
    Shadow,
    /// Some branch has `|J| < 1e-3·max|J|`; excluded from acceptance norms.
    Caustic,
}

/// One WKB branch at an observation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Branch {
    pub t: f64,
    pub angle: f64,
    pub action: f64,
    pub spreading: f64,
    pub maslov: u32,
}

/// Assembled field at a list of observation points.
#[derive(Debug, Clone, Serialize)]
pub struct GreenField {
    pub points: Vec<Point>,
    pub energy: f64,
    pub h: f64,
    pub cutoffs: GreenCutoffs,
    pub cutoff_time: f64,
    pub calibration: Complex64,
    #[serde(skip)]
    pub term1: Vec<Complex64>,
    /// Flow-out term before calibration.
    #[serde(skip)]
    pub term2: Vec<Complex64>,
    #[serde(skip)]
    pub term3: Vec<Complex64>,
    pub branch_counts: Vec<usize>,
    pub flags: Vec<PointFlag>,
}

impl GreenField {
    pub fn value(&self, i: usize) -> Complex64 {
        self.term1[i] + self.calibration * self.term2[i] + self.term3[i]
    }

    pub fn values(&self) -> Vec<Complex64> {
        (0..self.points.len()).map(|i| self.value(i)).collect()
    }

    pub fn with_calibration(mut self, c: Complex64) -> Self {
        self.calibration = c;
        self
    }

    /// Least-squares `c` minimizing `Σ |t1 + c t2 + t3 - reference|²` over
    /// the selected points.
    pub fn fit_calibration(&self, reference: &[Complex64], mask: &[bool]) -> Result<Complex64> {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for i in 0..self.points.len() {
            if mask[i] {
                num += self.term2[i].conj() * (reference[i] - self.term1[i] - self.term3[i]);
                den += self.term2[i].norm_sqr();
            }
        }
        if !(den > 0.0) {
            return Err(Error::InsufficientData("no flow-out contribution on the calibration points".into()));
        }
        Ok(num / den)
    }
}

struct Triangle {
    vertices: [(usize, usize); 3],
}

/// Spatial hash of the fan's `(t, θ)` triangulation.
struct FanMesh<'a> {
    fan: &'a LagrangianFan,
    triangles: Vec<Triangle>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    cell: f64,
    sample_dt: f64,
}

impl<'a> FanMesh<'a> {
    fn new(fan: &'a LagrangianFan, t_min: f64) -> Self {
        let n = fan.rays.len();
        let mut triangles = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            let len = fan.rays[i].samples.len().min(fan.rays[j].samples.len());
            for k in 0..len.saturating_sub(1) {
                if fan.rays[i].samples[k + 1].t < t_min {
                    continue;
                }
                triangles.push(Triangle {
                    vertices: [(i, k), (i, k + 1), (j, k)],
                });
                triangles.push(Triangle {
                    vertices: [(i, k + 1), (j, k + 1), (j, k)],
                });
            }
        }
        let sample_dt = fan.dt * fan.stride as f64;
        let cell = 0.1;
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (id, tri) in triangles.iter().enumerate() {
            let xs: Vec<Point> = tri.vertices.iter().map(|&(i, k)| fan.rays[i].samples[k].x).collect();
            let lo = [xs.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min), xs.iter().map(|x| x[1]).fold(f64::INFINITY, f64::min)];
            let hi = [xs.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max), xs.iter().map(|x| x[1]).fold(f64::NEG_INFINITY, f64::max)];
            for a in (lo[0] / cell).floor() as i64..=(hi[0] / cell).floor() as i64 {
                for b in (lo[1] / cell).floor() as i64..=(hi[1] / cell).floor() as i64 {
                    buckets.entry((a, b)).or_default().push(id);
                }
            }
        }
        FanMesh {
            fan,
            triangles,
            buckets,
            cell,
            sample_dt,
        }
    }

    fn sample(&self, v: (usize, usize)) -> &crate::rays::FanSample {
        &self.fan.rays[v.0].samples[v.1]
    }

    /// Branches through `x`, each located to second order from the nearest
    /// vertex of a containing triangle.
    fn branches(&self, profile: &DepthProfile, x: Point) -> Result<Vec<Branch>> {
        let key = ((x[0] / self.cell).floor() as i64, (x[1] / self.cell).floor() as i64);
        let mut found: Vec<Branch> = Vec::new();
        let Some(ids) = self.buckets.get(&key) else {
            return Ok(found);
        };
        let dtheta = self.fan.angle_step();
        for &id in ids {
            let tri = &self.triangles[id];
            let [a, b, c] = tri.vertices.map(|v| self.sample(v).x);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            if det.abs() < 1e-300 {
                continue;
            }
            let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
            let l0w = 1.0 - l1 - l2;
            let tol = -1e-12;
            if l0w < tol || l1 < tol || l2 < tol {
                continue;
            }
            let weights = [l0w, l1, l2];
            let nearest = (0..3)
                .max_by(|&i, &j| weights[i].total_cmp(&weights[j]))
                .expect("three vertices");
            let (ri, k) = tri.vertices[nearest];
            let s = self.sample((ri, k));
            let angle_v = self.fan.rays[ri].angle;
            let d = [x[0] - s.x[0], x[1] - s.x[1]];
            let m = [[s.velocity[0], s.dx_dtheta[0]], [s.velocity[1], s.dx_dtheta[1]]];
            let det_m = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det_m.abs() < 1e-300 {
                continue;
            }
            let dt = (m[1][1] * d[0] - m[0][1] * d[1]) / det_m;
            let dth = (m[0][0] * d[1] - m[1][0] * d[0]) / det_m;
            let (_, force) = {
                let (hx, _) = self
                    .fan
                    .hamiltonian
                    .gradient(profile, &crate::dispersion::PhasePoint::new(s.x, s.p))?;
                ((), [-hx[0], -hx[1]])
            };
            let p_end = [
                s.p[0] + force[0] * dt + s.dp_dtheta[0] * dth,
                s.p[1] + force[1] * dt + s.dp_dtheta[1] * dth,
            ];
            let action = s.action + 0.5 * ((s.p[0] + p_end[0]) * d[0] + (s.p[1] + p_end[1]) * d[1]);
            let spreading: f64 = tri.vertices.iter().zip(&weights).map(|(&v, w)| w * self.sample(v).spreading).sum();
            let branch = Branch {
                t: s.t + dt,
                angle: angle_v + dth,
                action,
                spreading,
                maslov: s.maslov,
            };
            let duplicate = found.iter().any(|f| {
                let da = (f.angle - branch.angle).rem_euclid(2.0 * PI);
                let da = da.min(2.0 * PI - da);
                (f.t - branch.t).abs() < 0.5 * self.sample_dt && da < 0.5 * dtheta
            });
            if !duplicate {
                found.push(branch);
            }
        }
        Ok(found)
    }
}

/// Square of the Finsler factor on the shell at `x`: `∂_ρL0 · r`.
fn shell_factor_sq(profile: &DepthProfile, x: Point, energy: f64) -> Result<f64> {
    let d = profile.depth(x)?;
    let r = normal_form_at_depth(d, energy)?.radius;
    Ok(l0_slope(d, r) * r)
}

/// Assembles the three-term outgoing field at `points` from a Finsler fan.
pub fn assemble_green(
    profile: &DepthProfile,
    fan: &LagrangianFan,
    model: &SourceModel,
    points: &[Point],
    cutoffs: &GreenCutoffs,
    calibration: Complex64,
) -> Result<GreenField> {
    match fan.hamiltonian {
        Hamiltonian::Finsler { energy } if (energy - model.energy).abs() <= 1e-12 * energy => {}
        _ => {
            return Err(Error::Consistency(
                "the Green function needs a Finsler fan at the source energy".into(),
            ))
        }
    }
    if fan.source != model.center {
        return Err(Error::Consistency("fan and source model have different centres".into()));
    }
    let t0 = cutoffs.cutoff_time(model);
    let r_max = points
        .iter()
        .map(|x| (x[0] - model.center[0]).hypot(x[1] - model.center[1]))
        .fold(0.0, f64::max);
    let near = NearField::new(model, cutoffs, r_max + model.h)?;
    let mesh = FanMesh::new(fan, 0.5 * t0);
    let j_max = fan.max_spreading();
    let c_source = shell_factor_sq(profile, model.center, model.energy)?.sqrt();
    let prefactor = (Complex64::new(0.0, 2.0 * PI / model.h)).sqrt();
    let measure = model.radius * model.radius;
    let amp = model.amplitude(model.radius);
    let n = points.len();
    let mut field = GreenField {
        points: points.to_vec(),
        energy: model.energy,
        h: model.h,
        cutoffs: *cutoffs,
        cutoff_time: t0,
        calibration,
        term1: Vec::with_capacity(n),
        term2: Vec::with_capacity(n),
        term3: Vec::with_capacity(n),
        branch_counts: Vec::with_capacity(n),
        flags: Vec::with_capacity(n),
    };
    for &x in points {
        let dist = (x[0] - model.center[0]).hypot(x[1] - model.center[1]);
        let (t1, t3) = near.eval(dist)?;
        let branches = mesh.branches(profile, x)?;
        let mut t2 = Complex64::new(0.0, 0.0);
        let mut flag = PointFlag::Regular;
        if !branches.is_empty() {
            let c_here = shell_factor_sq(profile, x, model.energy)?.sqrt();
            for b in &branches {
                if b.spreading.abs() < 1e-3 * j_max {
                    flag = PointFlag::Caustic;
                    continue;
                }
                let weight = 1.0 - cutoffs.time_cut(t0, b.t);
                let phase = b.action / model.h - 0.5 * PI * b.maslov as f64;
                t2 += weight * amp / (c_source * c_here) * (measure / b.spreading.abs()).sqrt()
                    * Complex64::from_polar(1.0, phase);
            }
            t2 *= prefactor;
        } else if dist > cutoffs.travel_widths * model.h {
            flag = PointFlag::Shadow;
        }
        field.term1.push(t1);
        field.term2.push(t2);
        field.term3.push(t3);
        field.branch_counts.push(branches.len());
        field.flags.push(flag);
    }
    Ok(field)
}

/// Weighted Cauchy differences of `u_ε` along a decreasing `ε` schedule.
#[derive(Debug, Clone)]
pub struct AbsorptionReport {
    pub epsilons: Vec<f64>,
    /// `‖<x - x₀>^{-1}(u_{ε_j} - u_{ε_{j+1}})‖`.
    pub differences: Vec<f64>,
    pub iterations: Vec<usize>,
    pub monotone: bool,
    /// Last solution.
    pub last: GridField,
    /// Richardson extrapolation `2u(ε/2) - u(ε)` from the last two solutions
    /// when they differ by a factor two, else the last solution.
    pub extrapolated: GridField,
}

pub fn limiting_absorption_study(
    profile: &DepthProfile,
    f: &GridField,
    center: Point,
    energy: f64,
    schedule: &[f64],
    absorber: Option<Absorber>,
    tolerance: f64,
) -> Result<AbsorptionReport> {
    if schedule.len() < 2 {
        return Err(Error::InsufficientData("an epsilon schedule needs at least two entries".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) || !(schedule[schedule.len() - 1] > 0.0) {
        return Err(Error::Precondition("epsilon schedule must be positive and strictly decreasing".into()));
    }
    let weight: Vec<f64> = (0..f.len())
        .map(|q| {
            let x = f.node(q);
            let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
            1.0 / (1.0 + d2).sqrt()
        })
        .collect();
    let mut fields: Vec<GridField> = Vec::new();
    let mut iterations = Vec::new();
    let mut differences = Vec::new();
    for &eps in schedule {
        let mut q = ResolventQuery::new(energy, eps);
        q.tolerance = tolerance;
        q.absorber = absorber;
        let op = ResolventOperator::new(profile, f, q)?;
        let sol = op.solve(f, fields.last())?;
        if let Some(prev) = fields.last() {
            let d: f64 = prev
                .data
                .iter()
                .zip(&sol.field.data)
                .zip(&weight)
                .map(|((a, b), w)| ((a - b) * w).norm_sqr())
                .sum::<f64>()
                * f.weight();
            differences.push(d.sqrt());
        }
        iterations.push(sol.iterations);
        fields.push(sol.field);
    }
    let monotone = differences.windows(2).all(|w| w[1] < w[0]);
    let k = fields.len();
    let last = fields[k - 1].clone();
    let ratio = schedule[k - 2] / schedule[k - 1];
    let extrapolated = if (ratio - 2.0).abs() < 1e-9 {
        last.with_data(
            last.data
                .iter()
                .zip(&fields[k - 2].data)
                .map(|(a, b)| 2.0 * a - b)
                .collect(),
        )
    } else {
        last.clone()
    };
    Ok(AbsorptionReport {
        epsilons: schedule.to_vec(),
        differences,
        iterations,
        monotone,
        last,
        extrapolated,
    })
}

/// Surface response `(Op(L0) - E - iε)^{-1} Op(Q0) f⁻` to a bottom disturbance.
pub fn bottom_to_surface_response(profile: &DepthProfile, bottom: &GridField, query: &ResolventQuery) -> Result<GridField> {
    let forced = apply_symbol(
        bottom,
        Symbol::Depth {
            profile,
            f: Box::new(q0),
        },
    )?;
    Ok(ResolventOperator::new(profile, &forced, *query)?.solve(&forced, None)?.field)
}
