//! Pseudodifferential operators on periodic grids.
//!
//! A [`GridField`] samples a function on `[-X, X)^dim` with `N` nodes per
//! axis. Its discrete momentum lattice is `p_k = h (π / X) k`. Symbols are
//! quantized as `½ (Op_KN(a) + Op_KN(a)†)`, where `Op_KN` synthesizes
//! `Σ_k e^{i x ξ_k} a(x, p_k) û_k` at every node; the symmetrization makes
//! the operator self-adjoint for real symbols.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bathymetry::{DepthProfile, Point};
use crate::dispersion::{l0, normal_form_at_depth};
use crate::error::{Error, Result};
use crate::fft::{signed_index, GridFft};
use crate::linalg::gmres;

/// Complex samples on a periodic square grid, x1 varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridField {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
    pub h: f64,
    #[serde(skip)]
    pub data: Vec<Complex64>,
}

impl GridField {
    pub fn zeros(dim: usize, n: usize, half_width: f64, h: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Precondition(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if !n.is_power_of_two() || n < 4 {
            return Err(Error::Precondition(format!("grid size must be a power of two >= 4, got {n}")));
        }
        if !(half_width > 0.0 && h > 0.0) {
            return Err(Error::Domain("box half-width and h must be positive".into()));
        }
        Ok(GridField {
            dim,
            n,
            half_width,
            h,
            data: vec![Complex64::new(0.0, 0.0); n.pow(dim as u32)],
        })
    }

    pub fn from_fn(dim: usize, n: usize, half_width: f64, h: f64, f: impl Fn(Point) -> Complex64) -> Result<Self> {
        let mut g = Self::zeros(dim, n, half_width, h)?;
        for q in 0..g.len() {
            g.data[q] = f(g.node(q));
        }
        Ok(g)
    }

    /// Same grid, new samples.
    pub fn with_data(&self, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), self.len());
        GridField { data, ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn node(&self, q: usize) -> Point {
        let c = |i: usize| -self.half_width + i as f64 * self.dx();
        if self.dim == 1 {
            [c(q), 0.0]
        } else {
            [c(q % self.n), c(q / self.n)]
        }
    }

    /// Momentum of FFT bin `q`.
    pub fn momentum(&self, q: usize) -> [f64; 2] {
        let step = self.h * PI / self.half_width;
        let k1 = signed_index(q % self.n, self.n) as f64;
        let k2 = if self.dim == 2 {
            signed_index(q / self.n, self.n) as f64
        } else {
            0.0
        };
        [step * k1, step * k2]
    }

    /// Cell volume `dx^dim`.
    pub fn weight(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Discrete L² norm.
    pub fn norm(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.weight()).sqrt()
    }

    /// Discrete L² pairing `Σ conj(u) v dx^dim`.
    pub fn inner(&self, other: &GridField) -> Complex64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum::<Complex64>() * self.weight()
    }

    /// Errors unless a wave of momentum `rho` has at least `min_nodes` nodes per wavelength.
    pub fn check_resolution(&self, rho: f64, min_nodes: f64) -> Result<()> {
        let per_wavelength = 2.0 * PI * self.h / rho / self.dx();
        if per_wavelength < min_nodes {
            return Err(Error::Resolution(format!(
                "|p|={rho:.3} has {per_wavelength:.2} nodes per wavelength at h={}, dx={:.4} (need {min_nodes})",
                self.h,
                self.dx()
            )));
        }
        Ok(())
    }
}

/// Real symbols `a(x, p)` in the forms the quantizer can exploit.
pub enum Symbol<'a> {
    /// Independent of `x`.
    Multiplier(Box<dyn Fn([f64; 2]) -> f64 + 'a>),
    /// `F(D(x), |p|)`.
    Depth {
        profile: &'a DepthProfile,
        f: Box<dyn Fn(f64, f64) -> f64 + 'a>,
    },
    General(Box<dyn Fn(Point, [f64; 2]) -> f64 + 'a>),
}

impl<'a> Symbol<'a> {
    /// The principal symbol `|p| tanh(D(x)|p|)`.
    pub fn l0(profile: &'a DepthProfile) -> Self {
        Symbol::Depth {
            profile,
            f: Box::new(l0),
        }
    }
}

/// How a symbol was applied; recorded in run metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantizationMethod {
    Multiplier,
    /// Direct per-node synthesis over the momentum lattice.
    Direct,
    /// Interpolation over a table of depths with this many nodes.
    DepthTable(usize),
}

enum Plan<'a> {
    Multiplier(Vec<f64>),
    Direct(Box<dyn Fn(Point, [f64; 2]) -> f64 + 'a>),
    /// Direct synthesis with the symbol sampled once, row `q` per node.
    Sampled(Vec<f64>),
    Table {
        /// Lagrange weights `ℓ_j(D(x))` per table node.
        lagrange: Vec<Vec<f64>>,
        /// `F(D_j, |p_k|)` per table node.
        multipliers: Vec<Vec<f64>>,
    },
}

/// Largest grid for which the general direct synthesis is allowed.
const DIRECT_LIMIT_1D: usize = 8192;
const DIRECT_LIMIT_2D: usize = 128;
/// Largest grid whose sampled symbol matrix is cached.
const SAMPLED_LIMIT: usize = 2048;

/// A symbol prepared for repeated application on one grid.
pub struct QuantizedOperator<'a> {
    template: GridField,
    fft: GridFft,
    plan: Plan<'a>,
    pub method: QuantizationMethod,
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric("symbol is not finite on the momentum lattice".into()))
    }
}

/// Chebyshev points of the second kind on `[a, b]` with barycentric weights.
fn chebyshev_nodes(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let nodes = (0..n)
        .map(|j| 0.5 * (a + b) + 0.5 * (b - a) * (PI * j as f64 / (n - 1) as f64).cos())
        .collect();
    let weights = (0..n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect();
    (nodes, weights)
}

fn lagrange_values(nodes: &[f64], weights: &[f64], x: f64) -> Vec<f64> {
    if let Some(j) = nodes.iter().position(|&d| d == x) {
        let mut v = vec![0.0; nodes.len()];
        v[j] = 1.0;
        return v;
    }
    let terms: Vec<f64> = nodes.iter().zip(weights).map(|(d, w)| w / (x - d)).collect();
    let s: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / s).collect()
}

impl<'a> QuantizedOperator<'a> {
    pub fn new(template: &GridField, symbol: Symbol<'a>) -> Result<Self> {
        let fft = GridFft::new(template.dim, template.n);
        let len = template.len();
        let (plan, method) = match symbol {
            Symbol::Multiplier(a) => {
                let m = (0..len).map(|q| check_finite(a(template.momentum(q)))).collect::<Result<Vec<_>>>()?;
                (Plan::Multiplier(m), QuantizationMethod::Multiplier)
            }
            Symbol::General(a) => {
                let limit = if template.dim == 1 { DIRECT_LIMIT_1D } else { DIRECT_LIMIT_2D };
                if template.n > limit {
                    return Err(Error::Precondition(format!(
                        "direct synthesis is limited to {limit} nodes per axis"
                    )));
                }
                (Plan::Direct(a), QuantizationMethod::Direct)
            }
            Symbol::Depth { profile, f } => {
                let depths = (0..len).map(|q| profile.depth(template.node(q))).collect::<Result<Vec<_>>>()?;
                let (lo, hi) = depths.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| (a.min(*d), b.max(*d)));
                let rho: Vec<f64> = (0..len)
                    .map(|q| {
                        let p = template.momentum(q);
                        p[0].hypot(p[1])
                    })
                    .collect();
                if hi - lo <= 1e-14 * hi {
                    let m = rho.iter().map(|r| check_finite(f(lo, *r))).collect::<Result<Vec<_>>>()?;
                    (Plan::Multiplier(m), QuantizationMethod::Multiplier)
                } else if template.dim == 1 && len <= SAMPLED_LIMIT {
                    let mut m = Vec::with_capacity(len * len);
                    for d in &depths {
                        for r in &rho {
                            m.push(check_finite(f(*d, *r))?);
                        }
                    }
                    (Plan::Sampled(m), QuantizationMethod::Direct)
                } else if template.dim == 1 && template.n <= DIRECT_LIMIT_1D {
                    let direct: Box<dyn Fn(Point, [f64; 2]) -> f64 + 'a> = Box::new(move |x: Point, p: [f64; 2]| {
                        f(profile.depth(x).unwrap_or(f64::NAN), p[0].hypot(p[1]))
                    });
                    (Plan::Direct(direct), QuantizationMethod::Direct)
                } else {
                    let (plan, count) = build_table(&depths, &rho, lo, hi, &f)?;
                    (plan, QuantizationMethod::DepthTable(count))
                }
            }
        };
        Ok(QuantizedOperator {
            template: template.with_data(vec![Complex64::new(0.0, 0.0); len]),
            fft,
            plan,
            method,
        })
    }

    fn check_grid(&self, field: &GridField) -> Result<()> {
        let t = &self.template;
        if field.dim != t.dim || field.n != t.n || field.half_width != t.half_width || field.h != t.h {
            return Err(Error::Precondition("field grid differs from the operator grid".into()));
        }
        Ok(())
    }

    /// Applies the symmetrized quantization to raw samples.
    pub fn apply_raw(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let len = v.len();
        match &self.plan {
            Plan::Multiplier(m) => {
                let mut w = v.to_vec();
                self.fft.forward(&mut w);
                for (z, a) in w.iter_mut().zip(m) {
                    *z *= a;
                }
                self.fft.inverse(&mut w);
                Ok(w)
            }
            Plan::Table { lagrange, multipliers } => {
                let mut out = vec![Complex64::new(0.0, 0.0); len];
                let mut spectrum = v.to_vec();
                self.fft.forward(&mut spectrum);
                let mut w = vec![Complex64::new(0.0, 0.0); len];
                for (ell, mult) in lagrange.iter().zip(multipliers) {
                    // Op_KN: ℓ_j(D(x)) · T_{F_j} v
                    for q in 0..len {
                        w[q] = spectrum[q] * mult[q];
                    }
                    self.fft.inverse(&mut w);
                    for q in 0..len {
                        out[q] += 0.5 * ell[q] * w[q];
                    }
                    // adjoint: T_{F_j} (ℓ_j(D(x)) v)
                    for q in 0..len {
                        w[q] = ell[q] * v[q];
                    }
                    self.fft.forward(&mut w);
                    for q in 0..len {
                        w[q] *= mult[q];
                    }
                    self.fft.inverse(&mut w);
                    for q in 0..len {
                        out[q] += 0.5 * w[q];
                    }
                }
                Ok(out)
            }
            Plan::Direct(a) => {
                let t = &self.template;
                self.apply_direct(|q, k| check_finite(a(t.node(q), t.momentum(k))), v)
            }
            Plan::Sampled(m) => self.apply_direct(|q, k| Ok(m[q * v.len() + k]), v),
        }
    }

    fn apply_direct(&self, a: impl Fn(usize, usize) -> Result<f64>, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let t = &self.template;
        let len = v.len();
        let n = t.n;
        let roots: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).collect();
        let phase = |q: usize, k: usize| -> Complex64 {
            if t.dim == 1 {
                roots[(q * k) % n]
            } else {
                roots[((q % n) * (k % n) + (q / n) * (k / n)) % n]
            }
        };
        let mut spectrum = v.to_vec();
        self.fft.forward(&mut spectrum);
        let scale = 1.0 / len as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        let mut adjoint_spectrum = vec![Complex64::new(0.0, 0.0); len];
        for q in 0..len {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..len {
                let s = a(q, k)?;
                let e = phase(q, k);
                acc += s * spectrum[k] * e;
                adjoint_spectrum[k] += s * v[q] * e.conj();
            }
            out[q] = 0.5 * acc * scale;
        }
        self.fft.inverse(&mut adjoint_spectrum);
        for (o, w) in out.iter_mut().zip(&adjoint_spectrum) {
            *o += 0.5 * w;
        }
        Ok(out)
    }

    pub fn apply(&self, field: &GridField) -> Result<GridField> {
        self.check_grid(field)?;
        Ok(field.with_data(self.apply_raw(&field.data)?))
    }
}

fn build_table(
    depths: &[f64],
    rho: &[f64],
    lo: f64,
    hi: f64,
    f: &dyn Fn(f64, f64) -> f64,
) -> Result<(Plan<'static>, usize)> {
    // distinct lattice radii to validate the interpolant on
    let mut probe: Vec<f64> = rho.to_vec();
    probe.sort_by(|a, b| a.total_cmp(b));
    probe.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let stride = (probe.len() / 400).max(1);
    let probe: Vec<f64> = probe.into_iter().step_by(stride).collect();
    let scale = probe.iter().fold(0.0f64, |m, r| m.max(f(hi, *r).abs()).max(f(lo, *r).abs())).max(1e-300);
    let mut count = 8;
    loop {
        let (nodes, weights) = chebyshev_nodes(lo, hi, count);
        let mut err: f64 = 0.0;
        for t in 0..(2 * count) {
            let d = lo + (hi - lo) * (t as f64 + 0.5) / (2 * count) as f64;
            let ell = lagrange_values(&nodes, &weights, d);
            for &r in &probe {
                let approx: f64 = ell.iter().zip(&nodes).map(|(l, dj)| l * f(*dj, r)).sum();
                err = err.max((approx - f(d, r)).abs());
            }
        }
        if err <= 1e-11 * scale || count >= 256 {
            if err > 1e-6 * scale {
                return Err(Error::Numeric(format!("depth table did not converge (error {err:.2e})")));
            }
            let lagrange_by_node: Vec<Vec<f64>> = depths.iter().map(|d| lagrange_values(&nodes, &weights, *d)).collect();
            let lagrange = (0..count).map(|j| lagrange_by_node.iter().map(|l| l[j]).collect()).collect();
            let multipliers = nodes
                .iter()
                .map(|dj| rho.iter().map(|r| check_finite(f(*dj, *r))).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            return Ok((Plan::Table { lagrange, multipliers }, count));
        }
        count *= 2;
    }
}

/// One-shot application of a symbol.
pub fn apply_symbol(field: &GridField, symbol: Symbol<'_>) -> Result<GridField> {
    QuantizedOperator::new(field, symbol)?.apply(field)
}

/// Smooth absorbing layer `strength · ((d - start)/(X - start))²` for
/// sup-norm distance `d > start` from the box centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Absorber {
    pub start: f64,
    pub strength: f64,
}

impl Absorber {
    pub fn profile(&self, field: &GridField) -> Vec<f64> {
        let x_max = field.half_width;
        (0..field.len())
            .map(|q| {
                let x = field.node(q);
                let d = if field.dim == 1 { x[0].abs() } else { x[0].abs().max(x[1].abs()) };
                if d > self.start {
                    let u = (d - self.start) / (x_max - self.start);
                    self.strength * u * u
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Parameters of a resolvent computation at `E + iε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventQuery {
    pub energy: f64,
    pub epsilon: f64,
    /// Exponent `s` of the weight `<x>^{-s}`.
    pub weight_exponent: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Optional absorbing layer emulating the unbounded plane.
    pub absorber: Option<Absorber>,
}

impl ResolventQuery {
    pub fn new(energy: f64, epsilon: f64) -> Self {
        ResolventQuery {
            energy,
            epsilon,
            weight_exponent: 1.0,
            tolerance: 1e-8,
            max_iterations: 4000,
            absorber: None,
        }
    }
}

/// Outcome of a resolvent solve.
#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub field: GridField,
    pub iterations: usize,
    pub residual: f64,
    pub method: QuantizationMethod,
}

/// `Op(L0) - E - iε - iσ(x)` on one grid, with its Fourier preconditioner.
pub struct ResolventOperator<'a> {
    op: QuantizedOperator<'a>,
    fft: GridFft,
    shift: Vec<Complex64>,
    precond: Vec<Complex64>,
    query: ResolventQuery,
    /// `true` when the operator is a pure Fourier multiplier.
    diagonal: bool,
}

impl<'a> ResolventOperator<'a> {
    pub fn new(profile: &'a DepthProfile, template: &GridField, query: ResolventQuery) -> Result<Self> {
        if !(query.epsilon > 0.0) {
            return Err(Error::Precondition(format!("resolvent needs epsilon > 0, got {}", query.epsilon)));
        }
        let depths = (0..template.len()).map(|q| profile.depth(template.node(q))).collect::<Result<Vec<_>>>()?;
        let d_low = depths.iter().cloned().fold(f64::INFINITY, f64::min);
        template.check_resolution(normal_form_at_depth(d_low, query.energy)?.radius, 6.0)?;
        let op = QuantizedOperator::new(template, Symbol::l0(profile))?;
        let sigma = query.absorber.map(|a| a.profile(template)).unwrap_or_else(|| vec![0.0; template.len()]);
        let shift: Vec<Complex64> = sigma.iter().map(|s| Complex64::new(query.energy, query.epsilon + s)).collect();
        let mean_sigma = sigma.iter().sum::<f64>() / sigma.len() as f64;
        let d_ref = profile.d0();
        let precond = (0..template.len())
            .map(|q| {
                let p = template.momentum(q);
                1.0 / (Complex64::new(l0(d_ref, p[0].hypot(p[1])), 0.0) - Complex64::new(query.energy, query.epsilon + mean_sigma))
            })
            .collect();
        let diagonal = matches!(op.method, QuantizationMethod::Multiplier) && query.absorber.is_none();
        Ok(ResolventOperator {
            op,
            fft: GridFft::new(template.dim, template.n),
            shift,
            precond,
            query,
            diagonal,
        })
    }

    fn apply(&self, v: &[Complex64], out: &mut [Complex64], conjugate: bool) {
        let a = self.op.apply_raw(v).expect("symbol validated at construction");
        for q in 0..v.len() {
            let s = if conjugate { self.shift[q].conj() } else { self.shift[q] };
            out[q] = a[q] - s * v[q];
        }
    }

    fn precondition(&self, v: &[Complex64], out: &mut [Complex64], conjugate: bool) {
        out.copy_from_slice(v);
        self.fft.forward(out);
        for (z, p) in out.iter_mut().zip(&self.precond) {
            *z *= if conjugate { p.conj() } else { *p };
        }
        self.fft.inverse(out);
    }

    /// Solves `(Op(L0) - E - iε - iσ) u = f`, or the adjoint system
    /// `(Op(L0) - E + iε + iσ) u = f` when `adjoint` is set.
    pub fn solve_raw(&self, f: &[Complex64], guess: Option<&[Complex64]>, adjoint: bool) -> Result<(Vec<Complex64>, usize, f64)> {
        if self.diagonal {
            let mut u = f.to_vec();
            self.precondition(f, &mut u, adjoint);
            let mut r = vec![Complex64::new(0.0, 0.0); f.len()];
            self.apply(&u, &mut r, adjoint);
            let fnorm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let res = r.iter().zip(f).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / fnorm.max(f64::MIN_POSITIVE);
            return Ok((u, 0, if fnorm == 0.0 { 0.0 } else { res }));
        }
        let sol = gmres(
            |v, out| self.apply(v, out, adjoint),
            |v, out| self.precondition(v, out, adjoint),
            f,
            guess,
            60,
            self.query.tolerance,
            self.query.max_iterations,
        )?;
        Ok((sol.x, sol.iterations, sol.residual))
    }

    pub fn solve(&self, f: &GridField, guess: Option<&GridField>) -> Result<ResolventSolution> {
        self.op.check_grid(f)?;
        let (u, iterations, residual) = self.solve_raw(&f.data, guess.map(|g| g.data.as_slice()), false)?;
        Ok(ResolventSolution {
            field: f.with_data(u),
            iterations,
            residual,
            method: self.op.method,
        })
    }
}

pub fn resolvent_solve(profile: &DepthProfile, f: &GridField, query: &ResolventQuery) -> Result<ResolventSolution> {
    ResolventOperator::new(profile, f, *query)?.solve(f, None)
}

/// Grid used for one `h` of a scaling study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingGrid {
    pub h: f64,
    pub n: usize,
    pub half_width: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub grids: Vec<ScalingGrid>,
    pub norms: Vec<f64>,
    pub power_iterations: Vec<usize>,
    /// Slope of `log n(h)` against `log(1/h)`.
    pub slope: f64,
}

/// Estimates `||<x>^{-s} (Op(L0) - E - iε)^{-1} <x>^{-s}||` on each grid by
/// power iteration on `B* B`, and fits the growth exponent in `1/h`.
pub fn weighted_resolvent_norm(
    profile: &DepthProfile,
    dim: usize,
    query: &ResolventQuery,
    grids: &[ScalingGrid],
    seed: u64,
) -> Result<ScalingReport> {
    if !(query.weight_exponent > 0.5) {
        return Err(Error::Precondition(format!(
            "weight exponent must exceed 1/2, got {}",
            query.weight_exponent
        )));
    }
    if grids.len() < 2 {
        return Err(Error::InsufficientData("scaling fit needs at least two values of h".into()));
    }
    let mut norms = Vec::new();
    let mut counts = Vec::new();
    for g in grids {
        let template = GridField::zeros(dim, g.n, g.half_width, g.h)?;
        let q = ResolventQuery { epsilon: g.epsilon, ..*query };
        let op = ResolventOperator::new(profile, &template, q)?;
        let weight: Vec<f64> = (0..template.len())
            .map(|i| {
                let x = template.node(i);
                (1.0 + x[0] * x[0] + x[1] * x[1]).powf(-0.5 * query.weight_exponent)
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<Complex64> = (0..template.len())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= vn);
        let mut history: Vec<f64> = Vec::new();
        let mut estimate = 0.0;
        let mut forward_guess: Option<Vec<Complex64>> = None;
        let mut adjoint_guess: Option<Vec<Complex64>> = None;
        let mut converged = false;
        for it in 0..60 {
            let a: Vec<Complex64> = v.iter().zip(&weight).map(|(z, w)| z * w).collect();
            let (b, _, _) = op.solve_raw(&a, forward_guess.as_deref(), false)?;
            let c: Vec<Complex64> = b.iter().zip(&weight).map(|(z, w)| z * w * w).collect();
            let (d, _, _) = op.solve_raw(&c, adjoint_guess.as_deref(), true)?;
            let next: Vec<Complex64> = d.iter().zip(&weight).map(|(z, w)| z * w).collect();
            let lambda = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            estimate = lambda.sqrt();
            history.push(estimate);
            forward_guess = Some(b.iter().map(|z| z / lambda).collect());
            adjoint_guess = Some(d.iter().map(|z| z / lambda).collect());
            v = next.into_iter().map(|z| z / lambda).collect();
            if it >= 3 {
                let prev = history[history.len() - 2];
                if (estimate - prev).abs() <= 1e-4 * estimate {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: history.len(),
                achieved: history
                    .windows(2)
                    .last()
                    .map(|w| (w[1] - w[0]).abs() / w[1])
                    .unwrap_or(f64::NAN),
            });
        }
        norms.push(estimate);
        counts.push(history.len());
    }
    let inv_h: Vec<f64> = grids.iter().map(|g| 1.0 / g.h).collect();
    let slope = crate::numerics::log_log_slope(&inv_h, &norms);
    Ok(ScalingReport {
        grids: grids.to_vec(),
        norms,
        power_iterations: counts,
        slope,
    })
}
