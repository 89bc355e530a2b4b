//! Small 2D FFT helpers over row-major buffers.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place unnormalized 2D DFT (`inverse` selects the conjugate kernel).
pub fn fft2(data: &mut [Complex64], height: usize, width: usize, inverse: bool) {
    assert_eq!(data.len(), height * width);
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = if inverse { planner.plan_fft_inverse(width) } else { planner.plan_fft_forward(width) };
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = if inverse { planner.plan_fft_inverse(height) } else { planner.plan_fft_forward(height) };
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for j in 0..width {
        for i in 0..height {
            column[i] = data[i * width + j];
        }
        col_fft.process(&mut column);
        for i in 0..height {
            data[i * width + j] = column[i];
        }
    }
}

/// Signed frequency of DFT index `k` on an axis of length `n`, in cycles per sample.
pub fn frequency(k: usize, n: usize) -> f64 {
    let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    k / n as f64
}

/// Applies a real, even spectral multiplier: `real(IFFT(mult * FFT(x)))`.
pub fn filter_real(values: &[f64], height: usize, width: usize, multiplier: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut buf, height, width, false);
    for (b, m) in buf.iter_mut().zip(multiplier) {
        *b *= *m;
    }
    fft2(&mut buf, height, width, true);
    let n = (height * width) as f64;
    buf.iter().map(|c| c.re / n).collect()
}
