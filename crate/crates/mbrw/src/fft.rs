//! Two-dimensional FFT helpers over row-major complex buffers, built on
//! rustfft. Plans are cached per size and shared across threads.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            }
        })
        .clone()
}

fn transform_2d(data: &mut [Complex64], n: usize, forward: bool) {
    assert_eq!(data.len(), n * n);
    let plans = plans(n);
    let fft = if forward { &plans.forward } else { &plans.inverse };
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    // Rows.
    for row in data.chunks_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    // Columns via transpose, transform, transpose back.
    let mut col = vec![Complex64::default(); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        fft.process_with_scratch(&mut col, &mut scratch);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
}

pub fn fft2_forward(data: &mut [Complex64], n: usize) {
    transform_2d(data, n, true);
}

/// Unnormalized inverse; callers divide by `n²`.
pub fn fft2_inverse(data: &mut [Complex64], n: usize) {
    transform_2d(data, n, false);
}

/// Circular convolution of a real field with a real kernel on the `n x n`
/// torus grid, given the kernel's forward transform.
pub fn circular_convolve(field: &[f64], kernel_hat: &[Complex64], n: usize) -> Vec<f64> {
    assert_eq!(field.len(), n * n);
    assert_eq!(kernel_hat.len(), n * n);
    let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_forward(&mut buf, n);
    for (b, k) in buf.iter_mut().zip(kernel_hat) {
        *b *= k;
    }
    fft2_inverse(&mut buf, n);
    let norm = 1.0 / (n * n) as f64;
    buf.iter().map(|c| c.re * norm).collect()
}

/// Forward transform of a real kernel.
pub fn real_kernel_hat(kernel: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = kernel.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_forward(&mut buf, n);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn roundtrip_identity() {
        let n = 8;
        let field: Vec<f64> = (0..n * n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft2_forward(&mut buf, n);
        fft2_inverse(&mut buf, n);
        for (orig, c) in field.iter().zip(&buf) {
            assert_relative_eq!(c.re / (n * n) as f64, orig, epsilon = 1e-12);
            assert!(c.im.abs() < 1e-9);
        }
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let n = 8;
        let mut field = vec![0.0; n * n];
        let mut kernel = vec![0.0; n * n];
        field[3 * n + 2] = 1.5;
        field[7 * n + 7] = -0.5;
        // small cross-shaped kernel centered at the origin cell
        kernel[0] = 1.0;
        kernel[1] = 0.5;
        kernel[n - 1] = 0.5;
        kernel[n] = 0.25;
        kernel[(n - 1) * n] = 0.25;
        let hat = real_kernel_hat(&kernel, n);
        let conv = circular_convolve(&field, &hat, n);
        // direct circular convolution
        let mut direct = vec![0.0; n * n];
        for y in 0..n {
            for x in 0..n {
                let mut acc = 0.0;
                for ky in 0..n {
                    for kx in 0..n {
                        let fy = (y + n - ky) % n;
                        let fx = (x + n - kx) % n;
                        acc += field[fy * n + fx] * kernel[ky * n + kx];
                    }
                }
                direct[y * n + x] = acc;
            }
        }
        for (a, b) in conv.iter().zip(&direct) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
    }
}
