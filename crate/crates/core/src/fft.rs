//! Periodic 1-D / 2-D discrete Fourier transforms on square grids.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned transforms for a `n` or `n × n` grid stored row-major.
#[derive(Clone)]
pub struct GridFft {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridFft").field("dim", &self.dim).field("n", &self.n).finish()
    }
}

impl GridFft {
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim == 1 || dim == 2, "only 1-D and 2-D grids are supported");
        let mut planner = FftPlanner::new();
        GridFft {
            dim,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn apply(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len());
        plan.process(data);
        if self.dim == 2 {
            let n = self.n;
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for i in 0..n {
                for j in 0..n {
                    column[j] = data[j * n + i];
                }
                plan.process(&mut column);
                for j in 0..n {
                    data[j * n + i] = column[j];
                }
            }
        }
    }

    /// Unnormalized forward transform, `sum_x v(x) e^{-i k x}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(&self.forward, data);
    }

    /// Inverse transform including the `1/N^dim` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(&self.inverse, data);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Signed integer frequency of FFT bin `k` on `n` points.
pub fn signed_index(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}
