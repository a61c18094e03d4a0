//! Linear solvers: tridiagonal and cyclic block-tridiagonal direct solves,
//! and restarted complex GMRES.

use nalgebra::{DMatrix, LU, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return None;
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { upper[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

type Lu = LU<f64, Dyn, Dyn>;

/// Factorization of a periodic block-tridiagonal matrix
///
/// ```text
/// A_i x_{i-1} + B_i x_i + C_i x_{i+1} = r_i,   indices mod n,
/// ```
///
/// eliminating blocks `0..n-1` by block Thomas and closing the cycle with a
/// Schur complement on the last block. Factor once, solve many right-hand
/// sides.
pub struct CyclicBlockTridiagonal {
    n: usize,
    m: usize,
    lower: Vec<DMatrix<f64>>,
    upper: Vec<DMatrix<f64>>,
    pivots: Vec<Lu>,
    /// `D_i^{-1} C_i` for the open chain.
    gains: Vec<DMatrix<f64>>,
    /// Open-chain response to the corner couplings, one column per unknown of the last block.
    spike: Vec<DMatrix<f64>>,
    schur: Lu,
}

impl CyclicBlockTridiagonal {
    pub fn factor(lower: Vec<DMatrix<f64>>, diag: Vec<DMatrix<f64>>, upper: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = diag.len();
        if n < 3 || lower.len() != n || upper.len() != n {
            return Err(Error::Precondition("cyclic block system needs n >= 3 consistent blocks".into()));
        }
        let m = diag[0].nrows();
        let chain = n - 1;
        let mut pivots: Vec<Lu> = Vec::with_capacity(chain);
        let mut gains = Vec::with_capacity(chain);
        for i in 0..chain {
            let mut d = diag[i].clone();
            if i > 0 {
                d -= &lower[i] * &gains[i - 1];
            }
            let lu = d.lu();
            let g = if i + 1 < chain {
                lu.solve(&upper[i])
                    .ok_or_else(|| Error::Numeric(format!("singular pivot block {i}")))?
            } else {
                DMatrix::zeros(m, m)
            };
            if i + 1 == chain && !lu.is_invertible() {
                return Err(Error::Numeric(format!("singular pivot block {i}")));
            }
            pivots.push(lu);
            gains.push(g);
        }
        let mut solver = CyclicBlockTridiagonal {
            n,
            m,
            lower,
            upper,
            pivots,
            gains,
            spike: Vec::new(),
            schur: DMatrix::<f64>::identity(1, 1).lu(),
        };
        // corner couplings of the open chain to the last block
        let mut e: Vec<DMatrix<f64>> = vec![DMatrix::zeros(m, m); chain];
        e[0] += &solver.lower[0];
        e[chain - 1] += &solver.upper[chain - 1];
        let spike = solver.chain_solve(e)?;
        let last = n - 1;
        let s = &diag[last] - &solver.lower[last] * &spike[chain - 1] - &solver.upper[last] * &spike[0];
        let schur = s.lu();
        if !schur.is_invertible() {
            return Err(Error::Numeric("singular Schur complement".into()));
        }
        solver.spike = spike;
        solver.schur = schur;
        Ok(solver)
    }

    pub fn block_count(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    fn chain_solve(&self, mut r: Vec<DMatrix<f64>>) -> Result<Vec<DMatrix<f64>>> {
        let chain = self.n - 1;
        for i in 0..chain {
            if i > 0 {
                let prev = r[i - 1].clone();
                r[i] -= &self.lower[i] * prev;
            }
            r[i] = self.pivots[i]
                .solve(&r[i])
                .ok_or_else(|| Error::Numeric("singular pivot".into()))?;
        }
        for i in (0..chain - 1).rev() {
            let next = r[i + 1].clone();
            r[i] -= &self.gains[i] * next;
        }
        Ok(r)
    }

    /// Solves for a stacked right-hand side of `n*m` rows and any number of columns.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let (n, m) = (self.n, self.m);
        assert_eq!(rhs.nrows(), n * m);
        let k = rhs.ncols();
        let blocks: Vec<DMatrix<f64>> = (0..n - 1).map(|i| rhs.rows(i * m, m).into_owned()).collect();
        let y = self.chain_solve(blocks)?;
        let last = n - 1;
        let r_last = rhs.rows(last * m, m).into_owned()
            - &self.lower[last] * &y[last - 1]
            - &self.upper[last] * &y[0];
        let x_last = self
            .schur
            .solve(&r_last)
            .ok_or_else(|| Error::Numeric("singular Schur complement".into()))?;
        let mut out = DMatrix::zeros(n * m, k);
        for i in 0..last {
            let xi = &y[i] - &self.spike[i] * &x_last;
            out.rows_mut(i * m, m).copy_from(&xi);
        }
        out.rows_mut(last * m, m).copy_from(&x_last);
        Ok(out)
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct IterativeSolution {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    /// Final relative residual `||b - A x|| / ||b||`.
    pub residual: f64,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Right-preconditioned restarted GMRES for `A x = b`.
///
/// `apply` writes `A v` into its second argument, `precondition` writes an
/// approximation of `A^{-1} v`. The stopping test uses the true residual at
/// each restart.
pub fn gmres(
    mut apply: impl FnMut(&[Complex64], &mut [Complex64]),
    mut precondition: impl FnMut(&[Complex64], &mut [Complex64]),
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    restart: usize,
    tol: f64,
    max_iterations: usize,
) -> Result<IterativeSolution> {
    let n = b.len();
    let zero = Complex64::new(0.0, 0.0);
    let bnorm = norm(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![zero; n]);
    if bnorm == 0.0 {
        return Ok(IterativeSolution {
            x: vec![zero; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut tmp = vec![zero; n];
    let mut total = 0usize;
    loop {
        apply(&x, &mut tmp);
        let r: Vec<Complex64> = b.iter().zip(&tmp).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= tol {
            return Ok(IterativeSolution {
                x,
                iterations: total,
                residual: rel,
            });
        }
        if total >= max_iterations {
            return Err(Error::NonConvergence {
                iterations: total,
                achieved: rel,
            });
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut precond: Vec<Vec<Complex64>> = Vec::new();
        let mut hess: Vec<Vec<Complex64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<Complex64> = Vec::new();
        let mut g = vec![Complex64::new(beta, 0.0)];
        let mut z = vec![zero; n];
        let mut w = vec![zero; n];
        for j in 0..restart {
            precondition(&basis[j], &mut z);
            apply(&z, &mut w);
            precond.push(z.clone());
            let mut hcol = vec![zero; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                hcol[i] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let wn = norm(&w);
            hcol[j + 1] = Complex64::new(wn, 0.0);
            for i in 0..j {
                let t = cs[i] * hcol[i] + sn[i] * hcol[i + 1];
                hcol[i + 1] = -sn[i].conj() * hcol[i] + cs[i] * hcol[i + 1];
                hcol[i] = t;
            }
            let (a, bb) = (hcol[j], hcol[j + 1]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if den == 0.0 {
                (1.0, zero)
            } else if a.norm() == 0.0 {
                (0.0, Complex64::new(1.0, 0.0))
            } else {
                let c = a.norm() / den;
                (c, (a / a.norm()) * bb.conj() / den)
            };
            hcol[j] = c * a + s * bb;
            hcol[j + 1] = zero;
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g.push(-s.conj() * gj);
            g[j] = c * gj;
            hess.push(hcol);
            total += 1;
            let est = g[j + 1].norm() / bnorm;
            if wn == 0.0 || est <= 0.5 * tol || total >= max_iterations {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let k = hess.len();
        let mut y = vec![zero; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for l in i + 1..k {
                s -= hess[l][i] * y[l];
            }
            y[i] = s / hess[i][i];
        }
        for (yi, zi) in y.iter().zip(&precond) {
            for (xk, zk) in x.iter_mut().zip(zi) {
                *xk += yi * zk;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_dense() {
        let lower = [0.0, 1.0, -0.5, 0.3];
        let diag = [4.0, 5.0, 3.0, 2.0];
        let upper = [1.0, 0.2, 0.7, 0.0];
        let rhs = [1.0, 2.0, 3.0, 4.0];
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..4 {
            let mut s = diag[i] * x[i];
            if i > 0 {
                s += lower[i] * x[i - 1];
            }
            if i < 3 {
                s += upper[i] * x[i + 1];
            }
            assert!((s - rhs[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn cyclic_block_matches_dense_solve() {
        let (n, m) = (5, 3);
        let entry = |i: usize, j: usize, s: f64| ((i * 7 + j * 3) as f64 * s).sin();
        let mut lower = Vec::new();
        let mut diag = Vec::new();
        let mut upper = Vec::new();
        let mut dense = DMatrix::zeros(n * m, n * m);
        for b in 0..n {
            let a = DMatrix::from_fn(m, m, |i, j| 0.3 * entry(i + b, j, 1.1));
            let c = DMatrix::from_fn(m, m, |i, j| 0.3 * entry(i, j + b, 0.7));
            let d = DMatrix::from_fn(m, m, |i, j| entry(i, j, 1.3 + b as f64) + if i == j { 4.0 } else { 0.0 });
            let prev = (b + n - 1) % n;
            let next = (b + 1) % n;
            dense.view_mut((b * m, prev * m), (m, m)).copy_from(&a);
            dense.view_mut((b * m, next * m), (m, m)).copy_from(&c);
            dense.view_mut((b * m, b * m), (m, m)).copy_from(&d);
            lower.push(a);
            diag.push(d);
            upper.push(c);
        }
        let rhs = DMatrix::from_fn(n * m, 2, |i, j| (i as f64 + 0.5 * j as f64).cos());
        let solver = CyclicBlockTridiagonal::factor(lower, diag, upper).unwrap();
        let x = solver.solve(&rhs).unwrap();
        let residual = (&dense * &x - &rhs).abs().max();
        assert!(residual < 1e-12, "residual {residual}");
    }

    #[test]
    fn gmres_solves_complex_system() {
        let n = 40;
        let apply = |v: &[Complex64], out: &mut [Complex64]| {
            for i in 0..n {
                let mut s = Complex64::new(3.0 + i as f64 * 0.1, 0.5) * v[i];
                if i > 0 {
                    s += v[i - 1];
                }
                if i + 1 < n {
                    s -= 0.5 * v[i + 1];
                }
                out[i] = s;
            }
        };
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let sol = gmres(apply, |v, out| out.copy_from_slice(v), &b, None, 10, 1e-12, 500).unwrap();
        let mut check = vec![Complex64::new(0.0, 0.0); n];
        apply(&sol.x, &mut check);
        let err: f64 = check.iter().zip(&b).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-10 * norm(&b));
    }
}
