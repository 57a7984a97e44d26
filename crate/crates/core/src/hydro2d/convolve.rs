//! Linear (non-circular) grid convolution with a radial kernel by
//! zero-padded FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::kernels::RadialKernel;

/// Precomputed transform of a radial kernel sampled on an `n x n` grid of
/// spacing `dx`, padded to `2n x 2n` so the cyclic product is a linear
/// convolution.
///
/// `convolve(f)[j n + i] = sum_{j', i'} phi(dx |(i - i', j - j')|) f[j' n + i'] dx^2`.
pub struct Convolver {
    n: usize,
    p: usize,
    kernel_hat: Vec<Complex<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver").field("n", &self.n).field("padded", &self.p).finish()
    }
}

fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], p: usize) {
    const B: usize = 32;
    for jb in (0..p).step_by(B) {
        for ib in (0..p).step_by(B) {
            for j in jb..(jb + B).min(p) {
                for i in ib..(ib + B).min(p) {
                    dst[i * p + j] = src[j * p + i];
                }
            }
        }
    }
}

impl Convolver {
    pub fn new<K: RadialKernel + ?Sized>(kernel: &K, n: usize, dx: f64) -> Self {
        let p = 2 * n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(p);
        let inv = planner.plan_fft_inverse(p);
        let offset = |a: usize| -> Option<f64> {
            if a < n {
                Some(a as f64)
            } else if a > p - n {
                Some(a as f64 - p as f64)
            } else {
                None
            }
        };
        let mut k = vec![Complex::new(0.0, 0.0); p * p];
        for b in 0..p {
            for a in 0..p {
                if let (Some(oa), Some(ob)) = (offset(a), offset(b)) {
                    k[b * p + a] = Complex::new(kernel.phi(dx * oa.hypot(ob)) * dx * dx, 0.0);
                }
            }
        }
        let mut conv = Convolver { n, p, kernel_hat: Vec::new(), fwd, inv };
        conv.forward(&mut k, p);
        conv.kernel_hat = k;
        conv
    }

    pub fn n(&self) -> usize {
        self.n
    }

    // In-place 2D forward transform of a padded buffer whose rows at or
    // beyond `live_rows` are zero. Leaves the result transposed.
    fn forward(&self, buf: &mut Vec<Complex<f64>>, live_rows: usize) {
        let p = self.p;
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fwd.get_inplace_scratch_len()];
        for row in buf.chunks_exact_mut(p).take(live_rows) {
            if row.iter().any(|z| z.re != 0.0 || z.im != 0.0) {
                self.fwd.process_with_scratch(row, &mut scratch);
            }
        }
        let mut t = vec![Complex::new(0.0, 0.0); p * p];
        transpose(buf, &mut t, p);
        self.fwd.process_with_scratch(&mut t, &mut scratch);
        *buf = t;
    }

    // Inverse of `forward` restricted to the first `n` rows of the result.
    fn inverse(&self, buf: &mut Vec<Complex<f64>>) {
        let p = self.p;
        let mut scratch = vec![Complex::new(0.0, 0.0); self.inv.get_inplace_scratch_len()];
        self.inv.process_with_scratch(buf, &mut scratch);
        let mut t = vec![Complex::new(0.0, 0.0); p * p];
        transpose(buf, &mut t, p);
        for row in t.chunks_exact_mut(p).take(self.n) {
            self.inv.process_with_scratch(row, &mut scratch);
        }
        *buf = t;
    }

    /// Convolves two real fields at once, packed as real and imaginary parts.
    pub fn convolve_pair(&self, f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (n, p) = (self.n, self.p);
        assert_eq!(f.len(), n * n);
        assert_eq!(g.len(), n * n);
        let mut buf = vec![Complex::new(0.0, 0.0); p * p];
        for j in 0..n {
            for i in 0..n {
                buf[j * p + i] = Complex::new(f[j * n + i], g[j * n + i]);
            }
        }
        self.forward(&mut buf, n);
        for (z, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *z *= k;
        }
        self.inverse(&mut buf);
        let scale = 1.0 / (p * p) as f64;
        let mut out_f = vec![0.0; n * n];
        let mut out_g = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let z = buf[j * p + i];
                out_f[j * n + i] = z.re * scale;
                out_g[j * n + i] = z.im * scale;
            }
        }
        (out_f, out_g)
    }

    pub fn convolve(&self, f: &[f64]) -> Vec<f64> {
        let zeros = vec![0.0; f.len()];
        self.convolve_pair(f, &zeros).0
    }
}
