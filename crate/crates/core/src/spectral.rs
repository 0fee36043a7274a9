//! FFT plumbing shared by the operator, kernel and solver code.

use std::sync::{Arc, LazyLock, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

static PLANNER: LazyLock<Mutex<FftPlanner<f64>>> = LazyLock::new(|| Mutex::new(FftPlanner::new()));

/// Forward/inverse plan pair of length `n`. Plans are cached by the planner.
#[derive(Clone)]
pub struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = PLANNER.lock().unwrap_or_else(|e| e.into_inner());
        FftPair {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse transform including the 1/N normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let s = 1.0 / self.len as f64;
        for z in buf.iter_mut() {
            *z *= s;
        }
    }
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Angular wavenumber of FFT bin `j` for a periodic array of `len` samples at spacing `dx`.
pub fn wavenumber(j: usize, len: usize, dx: f64) -> f64 {
    let jj = if j <= len / 2 { j as f64 } else { j as f64 - len as f64 };
    2.0 * std::f64::consts::PI * jj / (len as f64 * dx)
}

/// Copies `values` into a zero-padded complex buffer of length `len`.
pub fn padded(values: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (b, &v) in buf.iter_mut().zip(values) {
        b.re = v;
    }
    buf
}
