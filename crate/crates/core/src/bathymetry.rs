//! Bottom profiles `D(x)` on the horizontal plane.
//!
//! A [`DepthProfile`] is either one of a few analytic families or a gridded
//! field interpolated with tensor-product cubic Hermite patches. Every
//! profile tends to an asymptotic depth `D0` far from its feature and stays
//! above a positive floor `d_min`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the horizontal plane.
pub type Point = [f64; 2];

/// Depth together with its first and second derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub depth: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl DepthSample {
    fn flat(depth: f64) -> Self {
        DepthSample {
            depth,
            grad: [0.0; 2],
            hess: [[0.0; 2]; 2],
        }
    }

    pub fn laplacian(&self) -> f64 {
        self.hess[0][0] + self.hess[1][1]
    }
}

/// Parameters of the analytic profile families.
///
/// `amplitude` is signed where the family allows it: a positive trench
/// amplitude deepens the line, a negative one makes it a shallow ridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnalyticProfile {
    /// `D = d0`.
    Constant { d0: f64 },
    /// `D = d0 - amplitude * exp(-|x - center|^2 / width^2)`.
    RadialBump {
        d0: f64,
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Point,
    },
    /// `D = d0 + amplitude * sech((x1 - offset) / width)`, invariant along x2.
    SechTrench {
        d0: f64,
        amplitude: f64,
        width: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Shallow annulus `D = d0 - amplitude * exp(-(|x - center| - radius)^2 / width^2)`.
    RingRidge {
        d0: f64,
        amplitude: f64,
        radius: f64,
        width: f64,
        #[serde(default)]
        center: Point,
    },
    /// Algebraic tail `D = d0 + amplitude * (1 + |x - center|^2 / width^2)^(-exponent / 2)`.
    PowerTail {
        d0: f64,
        amplitude: f64,
        width: f64,
        exponent: f64,
        #[serde(default)]
        center: Point,
    },
}

impl AnalyticProfile {
    fn d0(&self) -> f64 {
        match *self {
            AnalyticProfile::Constant { d0 }
            | AnalyticProfile::RadialBump { d0, .. }
            | AnalyticProfile::SechTrench { d0, .. }
            | AnalyticProfile::RingRidge { d0, .. }
            | AnalyticProfile::PowerTail { d0, .. } => d0,
        }
    }

    /// Infimum of the depth over the plane.
    fn infimum(&self) -> f64 {
        match *self {
            AnalyticProfile::Constant { d0 } => d0,
            AnalyticProfile::RadialBump { d0, amplitude, .. }
            | AnalyticProfile::RingRidge { d0, amplitude, .. } => d0 - amplitude.max(0.0),
            AnalyticProfile::SechTrench { d0, amplitude, .. }
            | AnalyticProfile::PowerTail { d0, amplitude, .. } => d0 + amplitude.min(0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive, got {v}")))
            }
        };
        positive("d0", self.d0())?;
        match *self {
            AnalyticProfile::Constant { .. } => Ok(()),
            AnalyticProfile::RadialBump { width, .. } | AnalyticProfile::SechTrench { width, .. } => {
                positive("width", width)
            }
            AnalyticProfile::RingRidge { radius, width, .. } => {
                positive("radius", radius)?;
                positive("width", width)
            }
            AnalyticProfile::PowerTail { width, exponent, .. } => {
                positive("width", width)?;
                positive("exponent", exponent)
            }
        }
    }

    fn sample(&self, x: Point) -> DepthSample {
        match *self {
            AnalyticProfile::Constant { d0 } => DepthSample::flat(d0),
            AnalyticProfile::RadialBump {
                d0,
                amplitude,
                width,
                center,
            } => {
                let y = [x[0] - center[0], x[1] - center[1]];
                let w2 = width * width;
                let e = amplitude * (-(y[0] * y[0] + y[1] * y[1]) / w2).exp();
                let mut hess = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        let delta = if a == b { 2.0 / w2 } else { 0.0 };
                        hess[a][b] = e * (delta - 4.0 * y[a] * y[b] / (w2 * w2));
                    }
                }
                DepthSample {
                    depth: d0 - e,
                    grad: [2.0 * e * y[0] / w2, 2.0 * e * y[1] / w2],
                    hess,
                }
            }
            AnalyticProfile::SechTrench {
                d0,
                amplitude,
                width,
                offset,
            } => {
                let s = (x[0] - offset) / width;
                let sech = 1.0 / s.cosh();
                let tanh = s.tanh();
                let d1 = -amplitude * sech * tanh / width;
                let d2 = amplitude * sech * (tanh * tanh - sech * sech) / (width * width);
                DepthSample {
                    depth: d0 + amplitude * sech,
                    grad: [d1, 0.0],
                    hess: [[d2, 0.0], [0.0, 0.0]],
                }
            }
            AnalyticProfile::RingRidge {
                d0,
                amplitude,
                radius,
                width,
                center,
            } => {
                let w2 = width * width;
                radial_sample(d0, x, center, |rho| {
                    let u = rho - radius;
                    let e = amplitude * (-u * u / w2).exp();
                    (-e, 2.0 * e * u / w2, e * (2.0 / w2 - 4.0 * u * u / (w2 * w2)))
                })
            }
            AnalyticProfile::PowerTail {
                d0,
                amplitude,
                width,
                exponent,
                center,
            } => {
                let y = [x[0] - center[0], x[1] - center[1]];
                let w2 = width * width;
                let q = 1.0 + (y[0] * y[0] + y[1] * y[1]) / w2;
                let half = exponent / 2.0;
                let f = amplitude * q.powf(-half);
                let fq = -half * f / q;
                let fqq = -(half + 1.0) * fq / q;
                let mut hess = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        hess[a][b] = fq * 2.0 * delta / w2 + fqq * 4.0 * y[a] * y[b] / (w2 * w2);
                    }
                }
                DepthSample {
                    depth: d0 + f,
                    grad: [fq * 2.0 * y[0] / w2, fq * 2.0 * y[1] / w2],
                    hess,
                }
            }
        }
    }

    fn center(&self) -> Point {
        match *self {
            AnalyticProfile::Constant { .. } => [0.0, 0.0],
            AnalyticProfile::SechTrench { offset, .. } => [offset, 0.0],
            AnalyticProfile::RadialBump { center, .. }
            | AnalyticProfile::RingRidge { center, .. }
            | AnalyticProfile::PowerTail { center, .. } => center,
        }
    }
}

/// Depth of the form `d0 + f(|x - center|)` with `f` and its two radial
/// derivatives supplied by `radial`.
fn radial_sample(d0: f64, x: Point, center: Point, radial: impl Fn(f64) -> (f64, f64, f64)) -> DepthSample {
    let y = [x[0] - center[0], x[1] - center[1]];
    let rho = (y[0] * y[0] + y[1] * y[1]).sqrt();
    let (f, f1, f2) = radial(rho);
    if rho < 1e-12 {
        // the cone point at the centre; the families using this helper are flat there
        return DepthSample {
            depth: d0 + f,
            grad: [0.0; 2],
            hess: [[f2, 0.0], [0.0, f2]],
        };
    }
    let n = [y[0] / rho, y[1] / rho];
    let mut hess = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let delta = if a == b { 1.0 } else { 0.0 };
            hess[a][b] = f2 * n[a] * n[b] + f1 / rho * (delta - n[a] * n[b]);
        }
    }
    DepthSample {
        depth: d0 + f,
        grad: [f1 * n[0], f1 * n[1]],
        hess,
    }
}

/// Header of the raw little-endian float64 depth format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawGridHeader {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    #[serde(rename = "D0")]
    pub d0: f64,
}

/// Depth samples on a regular grid, row-major with x varying fastest.
///
/// Node derivatives are fourth-order finite differences; inside a cell the
/// field is the bicubic Hermite patch built from values, `D_x`, `D_y` and
/// `D_xy`, which is C¹ across cells.
#[derive(Debug, Clone)]
pub struct GriddedDepth {
    header: RawGridHeader,
    values: Vec<f64>,
    fx: Vec<f64>,
    fy: Vec<f64>,
    fxy: Vec<f64>,
}

/// Fourth-order first derivative of equally spaced samples.
fn derivative_4th(f: &[f64], step: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    let c = 12.0 * step;
    for i in 0..n {
        out[i] = if i >= 2 && i + 2 < n {
            (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / c
        } else if i == 0 {
            (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / c
        } else if i == 1 {
            (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / c
        } else if i == n - 2 {
            (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / c
        } else {
            (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / c
        };
    }
    out
}

/// Cubic Hermite basis on [0,1]: value basis `(h00, h01)` and slope basis
/// `(h10, h11)` with their first and second derivatives.
fn hermite_basis(u: f64) -> [[f64; 3]; 4] {
    let u2 = u * u;
    let u3 = u2 * u;
    [
        [2.0 * u3 - 3.0 * u2 + 1.0, 6.0 * u2 - 6.0 * u, 12.0 * u - 6.0],
        [-2.0 * u3 + 3.0 * u2, -6.0 * u2 + 6.0 * u, -12.0 * u + 6.0],
        [u3 - 2.0 * u2 + u, 3.0 * u2 - 4.0 * u + 1.0, 6.0 * u - 4.0],
        [u3 - u2, 3.0 * u2 - 2.0 * u, 6.0 * u - 2.0],
    ]
}

impl GriddedDepth {
    pub fn new(header: RawGridHeader, values: Vec<f64>) -> Result<Self> {
        let RawGridHeader { nx, ny, dx, dy, d0, .. } = header;
        if nx < 5 || ny < 5 {
            return Err(Error::InsufficientData(format!(
                "gridded depth needs at least 5x5 nodes, got {nx}x{ny}"
            )));
        }
        if values.len() != nx * ny {
            return Err(Error::Parse(format!(
                "expected {} depth samples, found {}",
                nx * ny,
                values.len()
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && d0 > 0.0) {
            return Err(Error::Domain("grid spacing and D0 must be positive".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::Validity(format!("nonpositive depth sample {bad}")));
        }
        let mut fx = vec![0.0; nx * ny];
        for j in 0..ny {
            let row = derivative_4th(&values[j * nx..(j + 1) * nx], dx);
            fx[j * nx..(j + 1) * nx].copy_from_slice(&row);
        }
        let column_derivative = |src: &[f64]| {
            let mut out = vec![0.0; nx * ny];
            let mut col = vec![0.0; ny];
            for i in 0..nx {
                for j in 0..ny {
                    col[j] = src[j * nx + i];
                }
                for (j, v) in derivative_4th(&col, dy).into_iter().enumerate() {
                    out[j * nx + i] = v;
                }
            }
            out
        };
        let fy = column_derivative(&values);
        let fxy = column_derivative(&fx);
        Ok(GriddedDepth {
            header,
            values,
            fx,
            fy,
            fxy,
        })
    }

    /// Samples an analytic profile on a grid, mostly for tests and tooling.
    pub fn from_fn(header: RawGridHeader, f: impl Fn(Point) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(header.nx * header.ny);
        for j in 0..header.ny {
            for i in 0..header.nx {
                values.push(f([
                    header.x0 + i as f64 * header.dx,
                    header.y0 + j as f64 * header.dy,
                ]));
            }
        }
        Self::new(header, values)
    }

    pub fn header(&self) -> &RawGridHeader {
        &self.header
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Evaluation box: node hull shrunk by one cell on every side.
    pub fn evaluation_box(&self) -> [[f64; 2]; 2] {
        let h = &self.header;
        [
            [h.x0 + h.dx, h.x0 + (h.nx as f64 - 2.0) * h.dx],
            [h.y0 + h.dy, h.y0 + (h.ny as f64 - 2.0) * h.dy],
        ]
    }

    fn sample(&self, x: Point) -> Result<DepthSample> {
        let b = self.evaluation_box();
        if !(x[0] >= b[0][0] && x[0] <= b[0][1] && x[1] >= b[1][0] && x[1] <= b[1][1]) {
            return Err(Error::Domain(format!(
                "point ({}, {}) outside gridded evaluation box [{}, {}] x [{}, {}]",
                x[0], x[1], b[0][0], b[0][1], b[1][0], b[1][1]
            )));
        }
        let h = &self.header;
        let gx = (x[0] - h.x0) / h.dx;
        let gy = (x[1] - h.y0) / h.dy;
        let i = (gx.floor() as usize).min(h.nx - 2);
        let j = (gy.floor() as usize).min(h.ny - 2);
        let bu = hermite_basis(gx - i as f64);
        let bv = hermite_basis(gy - j as f64);
        // out[du][dv]: derivative orders in local coordinates
        let mut out = [[0.0; 3]; 3];
        for (cy, jj) in [(0usize, j), (1, j + 1)] {
            for (cx, ii) in [(0usize, i), (1, i + 1)] {
                let k = jj * h.nx + ii;
                let coef = [
                    (cx, cy, self.values[k]),
                    (cx + 2, cy, self.fx[k] * h.dx),
                    (cx, cy + 2, self.fy[k] * h.dy),
                    (cx + 2, cy + 2, self.fxy[k] * h.dx * h.dy),
                ];
                for (bx, by, c) in coef {
                    for (du, row) in out.iter_mut().enumerate() {
                        for (dv, slot) in row.iter_mut().enumerate() {
                            if du + dv <= 2 {
                                *slot += c * bu[bx][du] * bv[by][dv];
                            }
                        }
                    }
                }
            }
        }
        Ok(DepthSample {
            depth: out[0][0],
            grad: [out[1][0] / h.dx, out[0][1] / h.dy],
            hess: [
                [out[2][0] / (h.dx * h.dx), out[1][1] / (h.dx * h.dy)],
                [out[1][1] / (h.dx * h.dy), out[0][2] / (h.dy * h.dy)],
            ],
        })
    }

    /// Reads `x,y,depth` rows covering a regular grid. A non-numeric first
    /// row is treated as a header. Without `d0` the mean of the outermost
    /// ring of samples is used.
    pub fn from_csv(path: &Path, d0: Option<f64>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let mut rows = Vec::new();
        for (n, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            if record.len() < 3 {
                return Err(Error::Parse(format!("row {n}: expected x,y,depth")));
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                (0..3).map(|c| record[c].parse::<f64>()).collect();
            match parsed {
                Ok(v) => rows.push([v[0], v[1], v[2]]),
                Err(_) if n == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("row {n}: {e}"))),
            }
        }
        let axis = |k: usize| -> Result<(f64, f64, usize)> {
            let mut v: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
            if v.len() < 2 {
                return Err(Error::InsufficientData("grid axis with fewer than 2 nodes".into()));
            }
            let step = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
            for w in v.windows(2) {
                if ((w[1] - w[0]) - step).abs() > 1e-6 * step {
                    return Err(Error::Parse("csv nodes are not equally spaced".into()));
                }
            }
            Ok((v[0], step, v.len()))
        };
        let (x0, dx, nx) = axis(0)?;
        let (y0, dy, ny) = axis(1)?;
        if rows.len() != nx * ny {
            return Err(Error::Parse(format!(
                "csv has {} rows but spans a {nx}x{ny} grid",
                rows.len()
            )));
        }
        let mut values = vec![f64::NAN; nx * ny];
        for r in &rows {
            let i = ((r[0] - x0) / dx).round() as usize;
            let j = ((r[1] - y0) / dy).round() as usize;
            values[j * nx + i] = r[2];
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("csv grid has missing nodes".into()));
        }
        let d0 = d0.unwrap_or_else(|| boundary_mean(&values, nx, ny));
        Self::new(
            RawGridHeader {
                nx,
                ny,
                x0,
                y0,
                dx,
                dy,
                d0,
            },
            values,
        )
    }

    /// Reads a raw little-endian float64 array with its JSON sidecar.
    pub fn from_raw(data: &Path, sidecar: &Path) -> Result<Self> {
        let header: RawGridHeader = serde_json::from_str(&fs::read_to_string(sidecar)?)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let bytes = fs::read(data)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Parse("raw depth file length is not a multiple of 8".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(header, values)
    }

    pub fn write_raw(&self, data: &Path, sidecar: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(data, bytes)?;
        let json = serde_json::to_string_pretty(&self.header).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(sidecar, json)?;
        Ok(())
    }
}

fn boundary_mean(values: &[f64], nx: usize, ny: usize) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in 0..ny {
        for i in 0..nx {
            if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                sum += values[j * nx + i];
                count += 1;
            }
        }
    }
    sum / count as f64
}

#[derive(Debug, Clone)]
enum Kind {
    Analytic(AnalyticProfile),
    Gridded(Box<GriddedDepth>),
}

/// Bathymetry `D(x)`; immutable once built.
#[derive(Debug, Clone)]
pub struct DepthProfile {
    kind: Kind,
    d_min: f64,
}

impl DepthProfile {
    pub fn analytic(spec: AnalyticProfile) -> Result<Self> {
        spec.validate()?;
        let d_min = 0.05 * spec.d0();
        let inf = spec.infimum();
        if inf < d_min {
            return Err(Error::Validity(format!(
                "profile reaches depth {inf} below the floor {d_min}"
            )));
        }
        Ok(DepthProfile {
            kind: Kind::Analytic(spec),
            d_min,
        })
    }

    pub fn constant(d0: f64) -> Result<Self> {
        Self::analytic(AnalyticProfile::Constant { d0 })
    }

    pub fn radial_bump(d0: f64, amplitude: f64, width: f64, center: Point) -> Result<Self> {
        Self::analytic(AnalyticProfile::RadialBump {
            d0,
            amplitude,
            width,
            center,
        })
    }

    pub fn sech_trench(d0: f64, amplitude: f64, width: f64, offset: f64) -> Result<Self> {
        Self::analytic(AnalyticProfile::SechTrench {
            d0,
            amplitude,
            width,
            offset,
        })
    }

    pub fn ring_ridge(d0: f64, amplitude: f64, radius: f64, width: f64, center: Point) -> Result<Self> {
        Self::analytic(AnalyticProfile::RingRidge {
            d0,
            amplitude,
            radius,
            width,
            center,
        })
    }

    pub fn power_tail(d0: f64, amplitude: f64, width: f64, exponent: f64, center: Point) -> Result<Self> {
        Self::analytic(AnalyticProfile::PowerTail {
            d0,
            amplitude,
            width,
            exponent,
            center,
        })
    }

    pub fn gridded(grid: GriddedDepth) -> Result<Self> {
        let d_min = 0.05 * grid.header.d0;
        if let Some(v) = grid.values.iter().find(|v| **v < d_min) {
            return Err(Error::Validity(format!("depth sample {v} below the floor {d_min}")));
        }
        Ok(DepthProfile {
            kind: Kind::Gridded(Box::new(grid)),
            d_min,
        })
    }

    /// Replaces the default floor `0.05 * D0`.
    pub fn with_d_min(mut self, d_min: f64) -> Result<Self> {
        if !(d_min > 0.0) {
            return Err(Error::Domain(format!("d_min must be positive, got {d_min}")));
        }
        let too_low = match &self.kind {
            Kind::Analytic(a) => a.infimum() < d_min,
            Kind::Gridded(g) => g.values.iter().any(|v| *v < d_min),
        };
        if too_low {
            return Err(Error::Validity(format!("profile dips below the floor {d_min}")));
        }
        self.d_min = d_min;
        Ok(self)
    }

    pub fn d0(&self) -> f64 {
        match &self.kind {
            Kind::Analytic(a) => a.d0(),
            Kind::Gridded(g) => g.header.d0,
        }
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, Kind::Analytic(AnalyticProfile::Constant { .. }))
    }

    pub fn analytic_spec(&self) -> Option<&AnalyticProfile> {
        match &self.kind {
            Kind::Analytic(a) => Some(a),
            Kind::Gridded(_) => None,
        }
    }

    /// Centre of the profile's feature (origin for gridded data).
    pub fn center(&self) -> Point {
        match &self.kind {
            Kind::Analytic(a) => a.center(),
            Kind::Gridded(_) => [0.0, 0.0],
        }
    }

    /// Region where the profile may be evaluated; `None` means the whole plane.
    pub fn evaluation_box(&self) -> Option<[[f64; 2]; 2]> {
        match &self.kind {
            Kind::Analytic(_) => None,
            Kind::Gridded(g) => Some(g.evaluation_box()),
        }
    }

    pub fn sample(&self, x: Point) -> Result<DepthSample> {
        let s = match &self.kind {
            Kind::Analytic(a) => a.sample(x),
            Kind::Gridded(g) => g.sample(x)?,
        };
        if !(s.depth >= self.d_min) {
            return Err(Error::Validity(format!(
                "depth {} at ({}, {}) below the floor {}",
                s.depth, x[0], x[1], self.d_min
            )));
        }
        Ok(s)
    }

    pub fn depth(&self, x: Point) -> Result<f64> {
        Ok(self.sample(x)?.depth)
    }

    pub fn grad_depth(&self, x: Point) -> Result<[f64; 2]> {
        Ok(self.sample(x)?.grad)
    }
}

/// Per-radius decay data of `D - D0` and its derivatives.
#[derive(Debug, Clone, Serialize)]
pub struct FlatnessReport {
    pub radii: Vec<f64>,
    pub sup_deviation: Vec<f64>,
    pub sup_gradient: Vec<f64>,
    pub sup_hessian: Vec<f64>,
    /// Fitted decay exponent per derivative order; `inf` when the data
    /// vanish identically or underflow.
    pub fitted_rho: [f64; 3],
    pub declared_rho: f64,
    pub passes: bool,
}

impl FlatnessReport {
    pub fn rho_hat(&self) -> f64 {
        self.fitted_rho.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Sup-norms of `D - D0`, `|grad D|` and `|hess D|` on circles around the
/// profile centre, and whether they decay like `<x>^{-|a| - rho}`.
pub fn flatness_report(profile: &DepthProfile, radii: &[f64], declared_rho: f64) -> Result<FlatnessReport> {
    if radii.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "flatness needs at least 3 radii, got {}",
            radii.len()
        )));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::Precondition("radii must be positive and increasing".into()));
    }
    const ANGLES: usize = 256;
    let c = profile.center();
    let d0 = profile.d0();
    let mut sups = [vec![], vec![], vec![]];
    for &r in radii {
        let mut m = [0.0f64; 3];
        for k in 0..ANGLES {
            let a = 2.0 * std::f64::consts::PI * k as f64 / ANGLES as f64;
            let s = profile.sample([c[0] + r * a.cos(), c[1] + r * a.sin()])?;
            let h = s.hess;
            let hess_norm = (h[0][0] * h[0][0] + h[1][1] * h[1][1] + 2.0 * h[0][1] * h[0][1]).sqrt();
            m[0] = m[0].max((s.depth - d0).abs());
            m[1] = m[1].max(s.grad[0].hypot(s.grad[1]));
            m[2] = m[2].max(hess_norm);
        }
        for a in 0..3 {
            sups[a].push(m[a]);
        }
    }
    let mut fitted = [f64::INFINITY; 3];
    for (order, values) in sups.iter().enumerate() {
        let pts: Vec<(f64, f64)> = radii
            .iter()
            .zip(values)
            .filter(|(_, v)| **v > 1e-290)
            .map(|(r, v)| ((1.0 + r * r).sqrt().ln(), v.ln()))
            .collect();
        if pts.len() >= 2 {
            let slope = crate::numerics::linear_fit_slope(&pts);
            fitted[order] = -slope - order as f64;
        }
    }
    let passes = fitted.iter().all(|r| *r >= declared_rho);
    let [sup_deviation, sup_gradient, sup_hessian] = sups;
    Ok(FlatnessReport {
        radii: radii.to_vec(),
        sup_deviation,
        sup_gradient,
        sup_hessian,
        fitted_rho: fitted,
        declared_rho,
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> DepthProfile {
        DepthProfile::radial_bump(1.0, 0.3, 1.0, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn constant_and_bump_closed_forms() {
        let c = DepthProfile::constant(1.0).unwrap();
        assert_eq!(c.depth([3.0, -7.0]).unwrap(), 1.0);
        assert_eq!(c.grad_depth([3.0, -7.0]).unwrap(), [0.0, 0.0]);
        assert!((bump().depth([0.0, 0.0]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(bump().grad_depth([0.0, 0.0]).unwrap(), [0.0, 0.0]);
    }

    fn check_derivatives(p: &DepthProfile, x: Point) {
        let step = 1e-4;
        let s = p.sample(x).unwrap();
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += step;
            xm[a] -= step;
            let (sp, sm) = (p.sample(xp).unwrap(), p.sample(xm).unwrap());
            let g = (sp.depth - sm.depth) / (2.0 * step);
            assert!((g - s.grad[a]).abs() <= 1e-6 * (1.0 + s.grad[a].abs()), "grad {a}: {g} vs {}", s.grad[a]);
            for b in 0..2 {
                let hb = (sp.grad[b] - sm.grad[b]) / (2.0 * step);
                assert!((hb - s.hess[a][b]).abs() <= 1e-6 * (1.0 + s.hess[a][b].abs()));
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_central_differences() {
        let profiles = [
            bump(),
            DepthProfile::sech_trench(1.0, 0.3, 1.0, 0.2).unwrap(),
            DepthProfile::sech_trench(1.0, -0.5, 0.8, 0.0).unwrap(),
            DepthProfile::ring_ridge(1.0, 0.8, 3.0, 0.5, [0.0, 0.0]).unwrap(),
            DepthProfile::power_tail(1.0, 0.4, 1.0, 0.5, [0.1, 0.0]).unwrap(),
        ];
        for p in &profiles {
            for x in [[1.0, 0.0], [0.3, -0.7], [2.9, 0.4], [-1.3, 2.2]] {
                check_derivatives(p, x);
            }
        }
    }

    fn bump_grid(n: usize, half: f64) -> GriddedDepth {
        let d = 2.0 * half / (n - 1) as f64;
        let header = RawGridHeader {
            nx: n,
            ny: n,
            x0: -half,
            y0: -half,
            dx: d,
            dy: d,
            d0: 1.0,
        };
        let b = bump();
        GriddedDepth::from_fn(header, |x| b.depth(x).unwrap()).unwrap()
    }

    #[test]
    fn gridded_bump_matches_closed_form() {
        let g = DepthProfile::gridded(bump_grid(257, 5.0)).unwrap();
        let b = bump();
        let x = [0.5, 0.0];
        assert!((g.depth(x).unwrap() - b.depth(x).unwrap()).abs() < 1e-6);
        let gx = g.grad_depth([1.0, 0.0]).unwrap();
        let bx = b.grad_depth([1.0, 0.0]).unwrap();
        assert!((gx[0] - bx[0]).abs() < 1e-5 * bx[0].abs());
    }

    #[test]
    fn gridded_interpolation_is_c1_across_cells() {
        let g = DepthProfile::gridded(bump_grid(41, 5.0)).unwrap();
        let node = -5.0 + 17.0 * 0.25;
        let eps = 1e-10;
        let l = g.sample([node - eps, 0.37]).unwrap();
        let r = g.sample([node + eps, 0.37]).unwrap();
        assert!((l.depth - r.depth).abs() < 1e-9);
        assert!((l.grad[0] - r.grad[0]).abs() < 1e-7);
        assert!((l.grad[1] - r.grad[1]).abs() < 1e-7);
    }

    #[test]
    fn gridded_rejects_points_outside_box() {
        let g = DepthProfile::gridded(bump_grid(21, 5.0)).unwrap();
        assert!(matches!(g.depth([4.9, 0.0]), Err(Error::Domain(_))));
        assert!(g.depth([4.4, 0.0]).is_ok());
    }

    #[test]
    fn nonpositive_depth_is_rejected() {
        assert!(matches!(
            DepthProfile::radial_bump(1.0, 1.2, 1.0, [0.0, 0.0]),
            Err(Error::Validity(_))
        ));
        let header = RawGridHeader {
            nx: 5,
            ny: 5,
            x0: 0.0,
            y0: 0.0,
            dx: 1.0,
            dy: 1.0,
            d0: 1.0,
        };
        let mut v = vec![1.0; 25];
        v[12] = -0.1;
        assert!(matches!(GriddedDepth::new(header, v), Err(Error::Validity(_))));
    }

    #[test]
    fn raw_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = bump_grid(21, 5.0);
        let (data, side) = (dir.path().join("d.f64"), dir.path().join("d.json"));
        g.write_raw(&data, &side).unwrap();
        let back = GriddedDepth::from_raw(&data, &side).unwrap();
        assert_eq!(back.values(), g.values());

        let csv_path = dir.path().join("d.csv");
        let mut text = String::from("x,y,depth\n");
        let h = g.header();
        for j in 0..h.ny {
            for i in 0..h.nx {
                let v = g.values()[j * h.nx + i];
                text.push_str(&format!("{},{},{}\n", h.x0 + i as f64 * h.dx, h.y0 + j as f64 * h.dy, v));
            }
        }
        std::fs::write(&csv_path, text).unwrap();
        let from_csv = GriddedDepth::from_csv(&csv_path, Some(1.0)).unwrap();
        let p = DepthProfile::gridded(from_csv).unwrap();
        let q = DepthProfile::gridded(back).unwrap();
        assert!((p.depth([0.3, 0.2]).unwrap() - q.depth([0.3, 0.2]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn flatness_constant_is_vacuous() {
        let r = flatness_report(&DepthProfile::constant(1.0).unwrap(), &[1.0, 2.0, 4.0], 1.0).unwrap();
        assert!(r.passes);
        assert!(r.sup_deviation.iter().all(|v| *v == 0.0));
        assert!(r.rho_hat().is_infinite());
    }

    #[test]
    fn flatness_gaussian_tail_passes_and_is_monotone() {
        let radii = [1.5, 2.0, 3.0, 4.0, 5.0];
        let r = flatness_report(&bump(), &radii, 1.0).unwrap();
        assert!(r.passes);
        assert!(r.rho_hat() > 5.0);
        for s in [&r.sup_deviation, &r.sup_gradient, &r.sup_hessian] {
            assert!(s.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn flatness_slow_tail_fails() {
        let slow = DepthProfile::power_tail(1.0, 0.4, 1.0, 0.5, [0.0, 0.0]).unwrap();
        let r = flatness_report(&slow, &[4.0, 8.0, 16.0, 32.0], 1.0).unwrap();
        assert!(!r.passes);
        assert!((r.fitted_rho[0] - 0.5).abs() < 0.05);
    }

    #[test]
    fn flatness_needs_three_radii() {
        assert!(matches!(
            flatness_report(&bump(), &[1.0, 2.0], 1.0),
            Err(Error::InsufficientData(_))
        ));
    }
}
