//! Thin wrappers around rustfft used by the time-operator and learning modules.

use num_complex::Complex64;
use rustfft::{Fft as RustFft, FftPlanner};
use std::sync::Arc;

pub(crate) struct Fft {
    forward: Arc<dyn RustFft<f64>>,
    inverse: Arc<dyn RustFft<f64>>,
    len: usize,
}

impl Fft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
    }

    /// Unnormalized inverse transform (no 1/N factor).
    pub fn inverse_unscaled(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
    }
}

/// Causal (lower-triangular Toeplitz) convolution of real sequences through a
/// zero-padded FFT of length >= 2T.
pub(crate) struct CausalConvolver {
    fft: Fft,
    col_hat: Vec<Complex64>,
    t: usize,
}

impl CausalConvolver {
    pub fn new(col: &[f64]) -> Self {
        let t = col.len();
        let len = (2 * t.max(1)).next_power_of_two();
        let fft = Fft::new(len);
        let mut col_hat = vec![Complex64::ZERO; len];
        for (i, &c) in col.iter().enumerate() {
            col_hat[i] = Complex64::new(c, 0.0);
        }
        fft.forward(&mut col_hat);
        Self { fft, col_hat, t }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// First T samples of the linear convolution col * row.
    pub fn convolve(&self, row: &[f64]) -> Vec<f64> {
        assert_eq!(row.len(), self.t);
        let len = self.fft.len();
        let mut buf = vec![Complex64::ZERO; len];
        for (i, &x) in row.iter().enumerate() {
            buf[i] = Complex64::new(x, 0.0);
        }
        self.fft.forward(&mut buf);
        for (b, c) in buf.iter_mut().zip(&self.col_hat) {
            *b *= c;
        }
        self.fft.inverse_unscaled(&mut buf);
        let scale = 1.0 / len as f64;
        buf[..self.t].iter().map(|z| z.re * scale).collect()
    }
}

/// Circular convolution on a periodic grid of length T (any T).
pub(crate) struct CircularConvolver {
    fft: Fft,
    col_hat: Vec<Complex64>,
    t: usize,
}

impl CircularConvolver {
    pub fn new(col: &[f64]) -> Self {
        let t = col.len();
        let fft = Fft::new(t);
        let mut col_hat: Vec<Complex64> = col.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        fft.forward(&mut col_hat);
        Self { fft, col_hat, t }
    }

    pub fn convolve(&self, row: &[f64]) -> Vec<f64> {
        assert_eq!(row.len(), self.t);
        let mut buf: Vec<Complex64> = row.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft.forward(&mut buf);
        for (b, c) in buf.iter_mut().zip(&self.col_hat) {
            *b *= c;
        }
        self.fft.inverse_unscaled(&mut buf);
        let scale = 1.0 / self.t as f64;
        buf.iter().map(|z| z.re * scale).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn causal_convolver_matches_direct_sum() {
        let col = [0.5, -1.0, 2.0, 0.25];
        let row = [1.0, 2.0, 3.0, 4.0];
        let conv = CausalConvolver::new(&col);
        let got = conv.convolve(&row);
        for i in 0..col.len() {
            let want: f64 = (0..=i).map(|j| col[i - j] * row[j]).sum();
            assert!((got[i] - want).abs() < 1e-12, "bin {i}: {got:?}");
        }
    }

    #[test]
    fn circular_convolver_wraps() {
        let col = [1.0, 0.0, 0.0];
        let row = [3.0, 1.0, 2.0];
        let conv = CircularConvolver::new(&col);
        let got = conv.convolve(&row);
        for (g, w) in got.iter().zip(&row) {
            assert!((g - w).abs() < 1e-12);
        }
        // shift by one wraps the last sample around
        let shift = CircularConvolver::new(&[0.0, 1.0, 0.0]);
        let got = shift.convolve(&row);
        assert!((got[0] - 2.0).abs() < 1e-12);
        assert!((got[1] - 3.0).abs() < 1e-12);
        assert!((got[2] - 1.0).abs() < 1e-12);
    }
}
