//! Independent reference implementations used as test oracles. Nothing
//! here calls into the FFT or the filtering code under test.
#![allow(dead_code)]

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// O(d^2) forward DFT straight from the definition.
pub fn naive_dft(x: &[f64]) -> Vec<Complex<f64>> {
    let d = x.len();
    (0..d)
        .map(|j| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| {
                    let a = -2.0 * std::f64::consts::PI * ((j * t) % d) as f64 / d as f64;
                    Complex::new(v * a.cos(), v * a.sin())
                })
                .sum()
        })
        .collect()
}

/// O(d^2) inverse DFT, real part only.
pub fn naive_idft_real(s: &[Complex<f64>]) -> Vec<f64> {
    let d = s.len();
    (0..d)
        .map(|t| {
            s.iter()
                .enumerate()
                .map(|(j, &b)| {
                    let a = 2.0 * std::f64::consts::PI * ((j * t) % d) as f64 / d as f64;
                    (b * Complex::new(a.cos(), a.sin())).re
                })
                .sum::<f64>()
                / d as f64
        })
        .collect()
}

/// Mask predicate evaluated with floating point halves.
pub fn mask_predicate(d: usize, k: usize, i: usize) -> bool {
    let half = k as f64 / 2.0;
    (i as f64) < half || (i as f64) > d as f64 - half
}

/// Low-pass filter through the naive DFT pair.
pub fn naive_lowpass(x: &[f64], k: usize) -> Vec<f64> {
    let d = x.len();
    let s: Vec<Complex<f64>> = naive_dft(x)
        .into_iter()
        .enumerate()
        .map(|(i, b)| if mask_predicate(d, k, i) { b } else { Complex::new(0.0, 0.0) })
        .collect();
    naive_idft_real(&s)
}

/// Explicit `1/n` sample covariance, row-major `d x d`.
pub fn explicit_covariance(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n as f64;
            }
        }
    }
    cov
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Sum of sinusoids at the given positive frequencies (all below d/2).
pub fn tones(d: usize, freqs: &[(usize, f64, f64)]) -> Vec<f64> {
    (0..d)
        .map(|t| {
            freqs
                .iter()
                .map(|&(f, amp, phase)| {
                    amp * (2.0 * std::f64::consts::PI * (f * t % d) as f64 / d as f64 + phase).cos()
                })
                .sum()
        })
        .collect()
}
