//! Brute-force solver for the potential in the fluid strip `-D(x) < z < 0`.
//!
//! The strip is mapped to the rectangle `σ = z / D(x) ∈ [-1, 0]` and the
//! operator `-h² Δ_x - ∂_z²` is discretized in that frame with second-order
//! differences, periodic in the horizontal directions. The discrete system
//! is block tridiagonal along `x1` with cyclic corners and is factored once
//! per (profile, grid, h, boundary kind).
//!
//! Trace conventions: `ψ⁺ = ∂_zΦ` at the surface, and `ψ⁻` is the conormal
//! derivative `-(∂_zΦ + h² ∇D·∇_xΦ)` along the outward (downward) normal of
//! the bottom. With this orientation the Green formula reads
//! `a(u, v) = <ψ⁺_u, φ⁺_v> + <ψ⁻_u, φ⁻_v>`, which makes `L11`, `L22`
//! symmetric and `L21* = -L12`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::bathymetry::DepthProfile;
use crate::error::{Error, Result};
use crate::fft::GridFft;
use crate::linalg::CyclicBlockTridiagonal;

/// Periodic box `[-X, X)^dim` times the σ-interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripGrid {
    pub dim: usize,
    pub half_width: f64,
    pub n: usize,
    pub nz: usize,
}

impl StripGrid {
    pub fn new(dim: usize, half_width: f64, n: usize, nz: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Precondition(format!("strip dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 || nz < 8 {
            return Err(Error::Precondition(format!("strip grid needs n, nz >= 8, got {n}, {nz}")));
        }
        if !(half_width > 0.0) {
            return Err(Error::Domain("box half-width must be positive".into()));
        }
        Ok(StripGrid {
            dim,
            half_width,
            n,
            nz,
        })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn dsigma(&self) -> f64 {
        1.0 / (self.nz - 1) as f64
    }

    /// Number of horizontal nodes.
    pub fn surface_len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    /// Position of horizontal node `q` (x1 varies fastest).
    pub fn node(&self, q: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.coordinate(q), 0.0]
        } else {
            [self.coordinate(q % self.n), self.coordinate(q / self.n)]
        }
    }

    /// Quadrature weight of one horizontal node.
    pub fn weight(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }
}

/// Which pair of traces is prescribed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixedProblem {
    /// `φ⁺` at the surface and `ψ⁻` at the bottom.
    DirichletTop,
    /// `ψ⁺` at the surface and `φ⁻` at the bottom.
    NeumannTop,
}

/// Boundary data and interior source on the grid's horizontal nodes.
#[derive(Debug, Clone, Default)]
pub struct MixedData {
    pub top: Vec<f64>,
    pub bottom: Vec<f64>,
    /// Interior source sampled at every (node, σ) pair, node-major; `None` means zero.
    pub source: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StripSolution {
    pub grid: StripGrid,
    pub h: f64,
    pub problem: MixedProblem,
    /// `Φ` at node `q` and level `j` stored at `q * nz + j`.
    pub potential: Vec<f64>,
    pub top_value: Vec<f64>,
    pub top_flux: Vec<f64>,
    pub bottom_value: Vec<f64>,
    pub bottom_flux: Vec<f64>,
    /// Max-norm of the discrete residual relative to the data.
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl StripSolution {
    pub fn value(&self, q: usize, j: usize) -> f64 {
        self.potential[q * self.grid.nz + j]
    }
}

struct NodeCoefficients {
    depth: f64,
    grad: [f64; 2],
    laplacian: f64,
}

/// Factored strip operator for one boundary kind.
pub struct StripSolver {
    grid: StripGrid,
    h: f64,
    problem: MixedProblem,
    coeffs: Vec<NodeCoefficients>,
    lower: Vec<DMatrix<f64>>,
    diag: Vec<DMatrix<f64>>,
    upper: Vec<DMatrix<f64>>,
    factor: CyclicBlockTridiagonal,
}

impl StripSolver {
    pub fn new(profile: &DepthProfile, grid: StripGrid, h: f64, problem: MixedProblem) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Domain(format!("h must be positive, got {h}")));
        }
        let mut coeffs = Vec::with_capacity(grid.surface_len());
        for q in 0..grid.surface_len() {
            let s = profile.sample(grid.node(q))?;
            let (grad, laplacian) = if grid.dim == 1 {
                ([s.grad[0], 0.0], s.hess[0][0])
            } else {
                (s.grad, s.laplacian())
            };
            coeffs.push(NodeCoefficients {
                depth: s.depth,
                grad,
                laplacian,
            });
        }
        let (lower, diag, upper) = assemble_blocks(&grid, h, problem, &coeffs);
        let factor = CyclicBlockTridiagonal::factor(lower.clone(), diag.clone(), upper.clone())?;
        Ok(StripSolver {
            grid,
            h,
            problem,
            coeffs,
            lower,
            diag,
            upper,
            factor,
        })
    }

    pub fn grid(&self) -> &StripGrid {
        &self.grid
    }

    fn block_size(&self) -> usize {
        self.factor.block_size()
    }

    /// Global unknown index of node `q` at level `j`.
    fn index(&self, q: usize, j: usize) -> usize {
        let n = self.grid.n;
        let (i1, i2) = (q % n, q / n);
        i1 * self.block_size() + i2 * self.grid.nz + j
    }

    fn check_len(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.grid.surface_len() {
            return Err(Error::Precondition(format!(
                "{what} has {} samples, grid has {}",
                v.len(),
                self.grid.surface_len()
            )));
        }
        Ok(())
    }

    fn rhs_column(&self, data: &MixedData, out: &mut [f64]) -> Result<()> {
        self.check_len(&data.top, "top data")?;
        self.check_len(&data.bottom, "bottom data")?;
        let nz = self.grid.nz;
        if let Some(f) = &data.source {
            if f.len() != self.grid.surface_len() * nz {
                return Err(Error::Precondition("source has the wrong number of samples".into()));
            }
        }
        for q in 0..self.grid.surface_len() {
            out[self.index(q, nz - 1)] = data.top[q];
            out[self.index(q, 0)] = data.bottom[q];
            if let Some(f) = &data.source {
                for j in 1..nz - 1 {
                    out[self.index(q, j)] = f[q * nz + j];
                }
            }
        }
        Ok(())
    }

    fn apply_operator(&self, x: &[f64]) -> Vec<f64> {
        let (n, m) = (self.grid.n, self.block_size());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let next = (i + 1) % n;
            let xs = |b: usize| nalgebra::DVectorView::from_slice(&x[b * m..(b + 1) * m], m);
            let r = &self.lower[i] * xs(prev) + &self.diag[i] * xs(i) + &self.upper[i] * xs(next);
            out[i * m..(i + 1) * m].copy_from_slice(r.as_slice());
        }
        out
    }

    /// Solves for several data sets at once.
    pub fn solve_many(&self, data: &[MixedData]) -> Result<Vec<StripSolution>> {
        let rows = self.grid.n * self.block_size();
        let mut rhs = DMatrix::zeros(rows, data.len());
        for (c, d) in data.iter().enumerate() {
            let mut col = vec![0.0; rows];
            self.rhs_column(d, &mut col)?;
            rhs.column_mut(c).copy_from_slice(&col);
        }
        let sol = self.factor.solve(&rhs)?;
        let mut out = Vec::with_capacity(data.len());
        for (c, d) in data.iter().enumerate() {
            let x: Vec<f64> = sol.column(c).iter().cloned().collect();
            let b: Vec<f64> = rhs.column(c).iter().cloned().collect();
            let ax = self.apply_operator(&x);
            let scale = b.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
            let residual = ax.iter().zip(&b).fold(0.0f64, |a, (u, v)| a.max((u - v).abs())) / scale;
            if !residual.is_finite() {
                return Err(Error::Numeric("strip solve produced non-finite values".into()));
            }
            out.push(self.traces(x, residual, resolution_warnings(&self.grid, self.h, d)));
        }
        Ok(out)
    }

    pub fn solve(&self, data: &MixedData) -> Result<StripSolution> {
        Ok(self.solve_many(std::slice::from_ref(data))?.remove(0))
    }

    fn traces(&self, x: Vec<f64>, residual: f64, warnings: Vec<String>) -> StripSolution {
        let g = self.grid;
        let (nz, ds, dx, h2) = (g.nz, g.dsigma(), g.dx(), self.h * self.h);
        let len = g.surface_len();
        let mut potential = vec![0.0; len * nz];
        for q in 0..len {
            for j in 0..nz {
                potential[q * nz + j] = x[self.index(q, j)];
            }
        }
        let at = |q: usize, j: usize| potential[q * nz + j];
        let mut top_value = vec![0.0; len];
        let mut top_flux = vec![0.0; len];
        let mut bottom_value = vec![0.0; len];
        let mut bottom_flux = vec![0.0; len];
        for q in 0..len {
            let c = &self.coeffs[q];
            top_value[q] = at(q, nz - 1);
            top_flux[q] = (3.0 * at(q, nz - 1) - 4.0 * at(q, nz - 2) + at(q, nz - 3)) / (2.0 * ds * c.depth);
            bottom_value[q] = at(q, 0);
            let dsig = (-3.0 * at(q, 0) + 4.0 * at(q, 1) - at(q, 2)) / (2.0 * ds);
            let g2 = c.grad[0] * c.grad[0] + c.grad[1] * c.grad[1];
            let mut tangential = 0.0;
            for a in 0..g.dim {
                let (qp, qm) = neighbours(&g, q, a);
                tangential += c.grad[a] * (at(qp, 0) - at(qm, 0)) / (2.0 * dx);
            }
            bottom_flux[q] = -((1.0 + h2 * g2) * dsig / c.depth + h2 * tangential);
        }
        StripSolution {
            grid: g,
            h: self.h,
            problem: self.problem,
            potential,
            top_value,
            top_flux,
            bottom_value,
            bottom_flux,
            residual,
            warnings,
        }
    }
}

/// Periodic neighbours of node `q` along axis `a`.
fn neighbours(g: &StripGrid, q: usize, a: usize) -> (usize, usize) {
    let n = g.n;
    let (i1, i2) = (q % n, q / n);
    if a == 0 {
        (i2 * n + (i1 + 1) % n, i2 * n + (i1 + n - 1) % n)
    } else {
        (((i2 + 1) % n) * n + i1, ((i2 + n - 1) % n) * n + i1)
    }
}

type Blocks = (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);

fn assemble_blocks(g: &StripGrid, h: f64, problem: MixedProblem, coeffs: &[NodeCoefficients]) -> Blocks {
    let n = g.n;
    let nz = g.nz;
    let m = if g.dim == 1 { nz } else { n * nz };
    let mut lower = vec![DMatrix::zeros(m, m); n];
    let mut diag = vec![DMatrix::zeros(m, m); n];
    let mut upper = vec![DMatrix::zeros(m, m); n];
    let (dx, ds, h2) = (g.dx(), g.dsigma(), h * h);
    let local = |q: usize, j: usize| (q / n) * nz + j;

    let mut add = |row_q: usize, row_j: usize, col_q: usize, col_j: usize, v: f64| {
        let (bi, bj) = (row_q % n, col_q % n);
        let (r, c) = (local(row_q, row_j), local(col_q, col_j));
        if bj == bi {
            diag[bi][(r, c)] += v;
        } else if bj == (bi + n - 1) % n {
            lower[bi][(r, c)] += v;
        } else {
            upper[bi][(r, c)] += v;
        }
    };

    for q in 0..g.surface_len() {
        let c = &coeffs[q];
        let d = c.depth;
        let g2 = c.grad[0] * c.grad[0] + c.grad[1] * c.grad[1];
        for j in 1..nz - 1 {
            let sigma = -1.0 + j as f64 * ds;
            let c_ss = -h2 * sigma * sigma * g2 / (d * d) - 1.0 / (d * d);
            let c_s = -h2 * sigma * (2.0 * g2 - d * c.laplacian) / (d * d);
            add(q, j, q, j + 1, c_ss / (ds * ds) + c_s / (2.0 * ds));
            add(q, j, q, j - 1, c_ss / (ds * ds) - c_s / (2.0 * ds));
            add(q, j, q, j, -2.0 * c_ss / (ds * ds));
            for a in 0..g.dim {
                let (qp, qm) = neighbours(g, q, a);
                add(q, j, qp, j, -h2 / (dx * dx));
                add(q, j, qm, j, -h2 / (dx * dx));
                add(q, j, q, j, 2.0 * h2 / (dx * dx));
                let s_a = -sigma * c.grad[a] / d;
                let cross = -2.0 * h2 * s_a / (4.0 * dx * ds);
                add(q, j, qp, j + 1, cross);
                add(q, j, qp, j - 1, -cross);
                add(q, j, qm, j + 1, -cross);
                add(q, j, qm, j - 1, cross);
            }
        }
        let top = nz - 1;
        match problem {
            MixedProblem::DirichletTop => {
                add(q, top, q, top, 1.0);
                let k = -(1.0 + h2 * g2) / (d * 2.0 * ds);
                add(q, 0, q, 0, -3.0 * k);
                add(q, 0, q, 1, 4.0 * k);
                add(q, 0, q, 2, -k);
                for a in 0..g.dim {
                    let (qp, qm) = neighbours(g, q, a);
                    let t = -h2 * c.grad[a] / (2.0 * dx);
                    add(q, 0, qp, 0, t);
                    add(q, 0, qm, 0, -t);
                }
            }
            MixedProblem::NeumannTop => {
                let k = 1.0 / (2.0 * ds * d);
                add(q, top, q, top, 3.0 * k);
                add(q, top, q, top - 1, -4.0 * k);
                add(q, top, q, top - 2, k);
                add(q, 0, q, 0, 1.0);
            }
        }
    }
    (lower, diag, upper)
}

/// Flags boundary data whose spectrum has fewer than 8 nodes per wavelength.
fn resolution_warnings(g: &StripGrid, h: f64, data: &MixedData) -> Vec<String> {
    let mut warnings = Vec::new();
    let fft = GridFft::new(g.dim, g.n);
    for (name, v) in [("top", &data.top), ("bottom", &data.bottom)] {
        let mut c: Vec<Complex64> = v.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        fft.forward(&mut c);
        let peak = c.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if peak == 0.0 {
            continue;
        }
        let mut kmax = 0i64;
        for (idx, z) in c.iter().enumerate() {
            if z.norm() > 1e-8 * peak {
                let k1 = crate::fft::signed_index(idx % g.n, g.n).abs();
                let k2 = if g.dim == 2 {
                    crate::fft::signed_index(idx / g.n, g.n).abs()
                } else {
                    0
                };
                kmax = kmax.max(k1.max(k2));
            }
        }
        if kmax > 0 {
            let per_wavelength = g.n as f64 / kmax as f64;
            if per_wavelength < 8.0 {
                let p = h * std::f64::consts::PI * kmax as f64 / g.half_width;
                warnings.push(format!(
                    "{name} data reaches |p|={p:.3} with {per_wavelength:.1} nodes per wavelength (< 8)"
                ));
            }
        }
    }
    warnings
}

pub fn solve_mixed(
    profile: &DepthProfile,
    grid: StripGrid,
    h: f64,
    data: &MixedData,
    problem: MixedProblem,
) -> Result<StripSolution> {
    StripSolver::new(profile, grid, h, problem)?.solve(data)
}

/// Boundary basis used to assemble the DtN matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DtnBasis {
    /// Nodal unit vectors; the pairing has weight `dx^dim`.
    Delta,
    /// Real trigonometric functions orthonormal in the discrete L² pairing,
    /// with integer frequencies up to `max_mode` per axis.
    Fourier { max_mode: usize },
}

/// Discrete `L11, L12, L21, L22` in a boundary basis.
#[derive(Debug, Clone, Serialize)]
pub struct DtnMatrices {
    #[serde(skip)]
    pub l11: DMatrix<f64>,
    #[serde(skip)]
    pub l12: DMatrix<f64>,
    #[serde(skip)]
    pub l21: DMatrix<f64>,
    #[serde(skip)]
    pub l22: DMatrix<f64>,
    pub h: f64,
    pub grid: StripGrid,
    pub basis: DtnBasis,
    /// Momentum `|p|` associated with each basis function (Fourier basis).
    pub momenta: Vec<f64>,
    /// Pairing weights of the basis coefficients.
    pub weights: Vec<f64>,
}

/// Columns of the trigonometric basis sampled on the grid, with their momenta.
pub fn fourier_basis(g: &StripGrid, h: f64, max_mode: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if 2 * max_mode >= g.n {
        return Err(Error::Precondition(format!(
            "max_mode {max_mode} not below the Nyquist index {}",
            g.n / 2
        )));
    }
    let len = g.surface_len();
    let period = 2.0 * g.half_width;
    let kappa = std::f64::consts::PI / g.half_width;
    // 1-D orthonormal functions: (frequency, is_sine)
    let mut modes1 = vec![(0usize, false)];
    for k in 1..=max_mode {
        modes1.push((k, false));
        modes1.push((k, true));
    }
    let eval1 = |(k, sine): (usize, bool), x: f64| -> f64 {
        if k == 0 {
            1.0 / period.sqrt()
        } else {
            let arg = k as f64 * kappa * (x + g.half_width);
            let v = if sine { arg.sin() } else { arg.cos() };
            v * (2.0 / period).sqrt()
        }
    };
    let mut columns = Vec::new();
    let mut momenta = Vec::new();
    if g.dim == 1 {
        for &m in &modes1 {
            columns.push((0..len).map(|q| eval1(m, g.node(q)[0])).collect::<Vec<_>>());
            momenta.push(h * kappa * m.0 as f64);
        }
    } else {
        for &my in &modes1 {
            for &mx in &modes1 {
                columns.push((0..len).map(|q| {
                    let x = g.node(q);
                    eval1(mx, x[0]) * eval1(my, x[1])
                }).collect::<Vec<_>>());
                momenta.push(h * kappa * (mx.0 as f64).hypot(my.0 as f64));
            }
        }
    }
    let mat = DMatrix::from_fn(len, columns.len(), |r, c| columns[c][r]);
    Ok((mat, momenta))
}

/// Dense DtN matrices from one solve per basis function and boundary.
pub fn assemble_dtn(profile: &DepthProfile, grid: StripGrid, h: f64, basis: DtnBasis) -> Result<DtnMatrices> {
    if grid.n > 128 {
        return Err(Error::Precondition(format!(
            "dense assembly is capped at 128 nodes per axis, got {}",
            grid.n
        )));
    }
    let len = grid.surface_len();
    let (synth, momenta) = match basis {
        DtnBasis::Delta => (DMatrix::identity(len, len), Vec::new()),
        DtnBasis::Fourier { max_mode } => fourier_basis(&grid, h, max_mode)?,
    };
    let k = synth.ncols();
    let solver = StripSolver::new(profile, grid, h, MixedProblem::DirichletTop)?;
    let zero = vec![0.0; len];
    let mut data = Vec::with_capacity(2 * k);
    for c in 0..k {
        let col: Vec<f64> = synth.column(c).iter().cloned().collect();
        data.push(MixedData {
            top: col,
            bottom: zero.clone(),
            source: None,
        });
    }
    for c in 0..k {
        let col: Vec<f64> = synth.column(c).iter().cloned().collect();
        data.push(MixedData {
            top: zero.clone(),
            bottom: col,
            source: None,
        });
    }
    let sols = solver.solve_many(&data)?;
    // analysis: coefficients in the basis; for the delta basis this is the identity
    let w = grid.weight();
    let project = |trace: &[f64]| -> Vec<f64> {
        match basis {
            DtnBasis::Delta => trace.to_vec(),
            DtnBasis::Fourier { .. } => (0..k)
                .map(|r| synth.column(r).iter().zip(trace).map(|(a, b)| a * b).sum::<f64>() * w)
                .collect(),
        }
    };
    let mut l11 = DMatrix::zeros(k, k);
    let mut l21 = DMatrix::zeros(k, k);
    let mut l12 = DMatrix::zeros(k, k);
    let mut l22 = DMatrix::zeros(k, k);
    for c in 0..k {
        let a = &sols[c];
        let b = &sols[k + c];
        l11.column_mut(c).copy_from_slice(&project(&a.top_flux));
        l21.column_mut(c).copy_from_slice(&project(&a.bottom_value));
        l12.column_mut(c).copy_from_slice(&project(&b.top_flux));
        l22.column_mut(c).copy_from_slice(&project(&b.bottom_value));
    }
    let weights = match basis {
        DtnBasis::Delta => vec![w; k],
        DtnBasis::Fourier { .. } => vec![1.0; k],
    };
    Ok(DtnMatrices {
        l11,
        l12,
        l21,
        l22,
        h,
        grid,
        basis,
        momenta,
        weights,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AdjointnessReport {
    /// `||L11 - L11*|| / ||L11||`
    pub l11_ratio: f64,
    /// `||L22 - L22*|| / ||L22||`
    pub l22_ratio: f64,
    /// `||L21* + L12|| / ||L12||`
    pub cross_ratio: f64,
    pub tolerance: f64,
    pub passes: bool,
}

impl AdjointnessReport {
    pub fn worst(&self) -> f64 {
        self.l11_ratio.max(self.l22_ratio).max(self.cross_ratio)
    }
}

/// Adjoint in the pairing `<u, v> = Σ w_i u_i v_i`: `W^{-1} Aᵀ W`.
fn weighted_adjoint(a: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut t = a.transpose();
    for r in 0..t.nrows() {
        for c in 0..t.ncols() {
            t[(r, c)] *= w[c] / w[r];
        }
    }
    t
}

/// Frobenius norm in the weighted pairing.
fn weighted_norm(a: &DMatrix<f64>, w: &[f64]) -> f64 {
    let mut s = 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            s += a[(r, c)] * a[(r, c)] * w[r] / w[c];
        }
    }
    s.sqrt()
}

pub fn adjointness_report(m: &DtnMatrices, weights: &[f64], tolerance: f64) -> Result<AdjointnessReport> {
    if weights.len() != m.l11.nrows() || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Precondition("weights must be positive, one per basis function".into()));
    }
    let ratio = |num: DMatrix<f64>, den: &DMatrix<f64>| weighted_norm(&num, weights) / weighted_norm(den, weights);
    let l11_ratio = ratio(&m.l11 - weighted_adjoint(&m.l11, weights), &m.l11);
    let l22_ratio = ratio(&m.l22 - weighted_adjoint(&m.l22, weights), &m.l22);
    let cross_ratio = ratio(weighted_adjoint(&m.l21, weights) + &m.l12, &m.l12);
    let worst = l11_ratio.max(l22_ratio).max(cross_ratio);
    Ok(AdjointnessReport {
        l11_ratio,
        l22_ratio,
        cross_ratio,
        tolerance,
        passes: worst <= tolerance,
    })
}

/// Gaussian wave packet `exp(-(x1-c)²/(2w²)) cos(p0 (x1-c)/h)` used by the residual study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WavePacket {
    pub center: f64,
    pub width: f64,
    pub momentum: f64,
}

impl WavePacket {
    pub fn value(&self, x: f64, h: f64) -> f64 {
        let u = x - self.center;
        (-0.5 * (u / self.width).powi(2)).exp() * (self.momentum * u / h).cos()
    }
}

/// Settings for [`symbol_residual_study`] on the 1-D strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualStudyConfig {
    pub half_width: f64,
    pub packet: WavePacket,
    /// Horizontal nodes per wavelength `2πh/p0` on the coarser grid.
    pub nodes_per_wavelength: f64,
    /// Vertical levels per decay length `h/(p0 D_max)` on the coarser grid.
    pub levels_per_decay: f64,
}

impl Default for ResidualStudyConfig {
    fn default() -> Self {
        ResidualStudyConfig {
            half_width: 14.0,
            packet: WavePacket {
                center: 0.5,
                width: 1.5,
                momentum: 1.0,
            },
            nodes_per_wavelength: 12.0,
            levels_per_decay: 4.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub h: f64,
    pub n: usize,
    pub nz: usize,
    /// `‖L11φ − Op(a)φ‖ / ‖φ‖` with the Richardson-extrapolated `L11φ`.
    pub residual: f64,
    /// Same ratio for the coarse-minus-fine difference of `L11φ`.
    pub discretization: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualStudy {
    pub rows: Vec<ResidualRow>,
    /// Rows `fit.0 .. fit.1` entered the slope fit.
    pub fit: (usize, usize),
    pub monotone: bool,
    /// Slope of `log r` against `log h`.
    pub slope: f64,
}

/// Compares the strip operator `L11` with the quantized symbol `L0 + h·b` on
/// a wave packet for each `h`, in 1-D.
///
/// `L11φ` is computed on grids `(n, nz)` and `(2n, 2nz − 1)` and combined by
/// Richardson extrapolation at the coarse nodes. With `control = None` the
/// symbol is `L0` alone.
pub fn symbol_residual_study(
    profile: &DepthProfile,
    hs: &[f64],
    config: &ResidualStudyConfig,
    control: Option<&dyn Fn([f64; 2], [f64; 2]) -> f64>,
) -> Result<ResidualStudy> {
    use crate::dispersion::l0;
    use crate::pdo::{apply_symbol, GridField, Symbol};

    if hs.len() < 2 || hs.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::Precondition("need at least two positive values of h".into()));
    }
    let packet = config.packet;
    let x_max = config.half_width;
    if !(packet.width > 0.0 && packet.momentum > 0.0) || (packet.center.abs() + 8.0 * packet.width) > x_max {
        return Err(Error::Precondition("wave packet must be positive-width and fit well inside the box".into()));
    }
    let depth_max = (0..=400)
        .map(|i| -x_max + 2.0 * x_max * i as f64 / 400.0)
        .map(|x| profile.depth([x, 0.0]))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);

    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let dx_target = 2.0 * std::f64::consts::PI * h / packet.momentum / config.nodes_per_wavelength;
        let n = ((2.0 * x_max / dx_target).ceil() as usize).next_power_of_two().max(16);
        let levels = (config.levels_per_decay * packet.momentum * depth_max / h).ceil() as usize;
        let nz = levels.next_power_of_two().max(8) + 1;

        let coarse = StripGrid::new(1, x_max, n, nz)?;
        let fine = StripGrid::new(1, x_max, 2 * n, 2 * nz - 1)?;
        let flux = |g: StripGrid| -> Result<Vec<f64>> {
            let top: Vec<f64> = (0..g.n).map(|q| packet.value(g.coordinate(q), h)).collect();
            let data = MixedData {
                top,
                bottom: vec![0.0; g.n],
                source: None,
            };
            Ok(solve_mixed(profile, g, h, &data, MixedProblem::DirichletTop)?.top_flux)
        };
        let l_coarse = flux(coarse)?;
        let l_fine = flux(fine)?;

        let field = GridField::from_fn(1, n, x_max, h, |x| Complex64::new(packet.value(x[0], h), 0.0))?;
        let symbol = match control {
            None => Symbol::l0(profile),
            Some(b) => Symbol::General(Box::new(move |x, p| {
                let d = profile.depth(x).unwrap_or(f64::NAN);
                l0(d, (p[0] * p[0] + p[1] * p[1]).sqrt()) + h * b(x, p)
            })),
        };
        let op = apply_symbol(&field, symbol)?;

        let mut res = 0.0;
        let mut disc = 0.0;
        for q in 0..n {
            let extrapolated = (4.0 * l_fine[2 * q] - l_coarse[q]) / 3.0;
            res += (extrapolated - op.data[q].re).powi(2) + op.data[q].im.powi(2);
            disc += (l_fine[2 * q] - l_coarse[q]).powi(2);
        }
        let scale = field.norm() / coarse.weight().sqrt();
        rows.push(ResidualRow {
            h,
            n,
            nz,
            residual: res.sqrt() / scale,
            discretization: disc.sqrt() / scale,
        });
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|a, b| rows[*b].h.total_cmp(&rows[*a].h));
    let rows: Vec<ResidualRow> = order.into_iter().map(|i| rows[i].clone()).collect();
    let mut end = 1;
    while end < rows.len() && rows[end].residual < rows[end - 1].residual {
        end += 1;
    }
    let monotone = end == rows.len();
    let fit = (0, end.max(2));
    let hs: Vec<f64> = rows[fit.0..fit.1].iter().map(|r| r.h).collect();
    let rs: Vec<f64> = rows[fit.0..fit.1].iter().map(|r| r.residual).collect();
    let slope = crate::numerics::log_log_slope(&hs, &rs);
    Ok(ResidualStudy {
        rows,
        fit,
        monotone,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{l0, q0};

    fn flat() -> DepthProfile {
        DepthProfile::constant(1.0).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_potential() {
        let g = StripGrid::new(1, 3.0, 16, 12).unwrap();
        let z = vec![0.0; 16];
        let s = solve_mixed(&flat(), g, 0.3, &MixedData { top: z.clone(), bottom: z, source: None }, MixedProblem::DirichletTop)
            .unwrap();
        assert!(s.potential.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_depth_fourier_matrices_are_diagonal_symbols() {
        let h = 0.3;
        let g = StripGrid::new(1, 4.0, 128, 48).unwrap();
        let m = assemble_dtn(&flat(), g, h, DtnBasis::Fourier { max_mode: 4 }).unwrap();
        for (i, &p) in m.momenta.iter().enumerate() {
            let expect11 = l0(1.0, p);
            assert!((m.l11[(i, i)] - expect11).abs() <= 0.01 * expect11.max(1e-3), "{i}: {} vs {expect11}", m.l11[(i, i)]);
            assert!((m.l12[(i, i)] + q0(1.0, p)).abs() <= 0.01 * q0(1.0, p));
            assert!((m.l21[(i, i)] - q0(1.0, p)).abs() <= 0.01 * q0(1.0, p));
        }
        let off = m.l11.iter().enumerate().filter(|(k, _)| k % (m.l11.nrows() + 1) != 0).fold(0.0f64, |a, (_, v)| a.max(v.abs()));
        assert!(off < 1e-10);
        let r = adjointness_report(&m, &m.weights.clone(), 5e-2).unwrap();
        assert!(r.worst() < 1e-10, "{r:?}");
    }

    #[test]
    fn neumann_top_inverts_dirichlet_top() {
        let profile = DepthProfile::sech_trench(1.0, 0.3, 1.0, 0.0).unwrap();
        let h = 0.5;
        let g = StripGrid::new(1, 6.0, 32, 16).unwrap();
        let top: Vec<f64> = (0..32).map(|q| (-(g.node(q)[0]).powi(2)).exp()).collect();
        let bottom: Vec<f64> = (0..32).map(|q| 0.1 * (g.node(q)[0]).sin()).collect();
        let d = solve_mixed(&profile, g, h, &MixedData { top: top.clone(), bottom: bottom.clone(), source: None }, MixedProblem::DirichletTop).unwrap();
        assert!(d.residual < 1e-10);
        let n = solve_mixed(
            &profile,
            g,
            h,
            &MixedData { top: d.top_flux.clone(), bottom: d.bottom_value.clone(), source: None },
            MixedProblem::NeumannTop,
        )
        .unwrap();
        // same discrete solution up to the consistency of the one-sided stencils
        for q in 0..32 {
            assert!((n.top_value[q] - top[q]).abs() < 1e-2, "{q}: {} vs {}", n.top_value[q], top[q]);
        }
    }

    #[test]
    fn two_dimensional_constant_depth_mode() {
        let h = 0.4;
        let g = StripGrid::new(2, 3.0, 16, 10).unwrap();
        let kappa = std::f64::consts::PI / 3.0;
        let top: Vec<f64> = (0..g.surface_len())
            .map(|q| {
                let x = g.node(q);
                (kappa * x[0]).cos() * (kappa * x[1]).cos()
            })
            .collect();
        let s = solve_mixed(&flat(), g, h, &MixedData { top: top.clone(), bottom: vec![0.0; g.surface_len()], source: None }, MixedProblem::DirichletTop).unwrap();
        let p = h * kappa * 2f64.sqrt();
        let q = 5;
        assert!((s.top_flux[q] / top[q] - l0(1.0, p)).abs() < 0.02 * l0(1.0, p));
    }
}
