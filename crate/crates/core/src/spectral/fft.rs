//! Arbitrary-length complex FFT.
//!
//! Lengths whose prime factors are all `<= MAX_DIRECT_RADIX` run through a
//! recursive mixed-radix Cooley-Tukey decomposition; anything else goes
//! through Bluestein's chirp-z algorithm on a power-of-two convolution.
//! Plans own their twiddle tables and are immutable after construction.

use num_complex::Complex;

use crate::scalar::Scalar;

/// Largest prime handled as a direct butterfly before falling back to
/// Bluestein.
const MAX_DIRECT_RADIX: usize = 31;

#[derive(Debug, Clone)]
pub struct FftPlan<T> {
    len: usize,
    kind: PlanKind<T>,
}

#[derive(Debug, Clone)]
enum PlanKind<T> {
    MixedRadix {
        factors: Vec<usize>,
        /// `exp(-2 pi i j / len)` for `j in 0..len`.
        twiddles: Vec<Complex<T>>,
    },
    Bluestein {
        inner: Box<FftPlan<T>>,
        /// `exp(-pi i j^2 / len)` for `j in 0..len`.
        chirp: Vec<Complex<T>>,
        /// Forward transform of the conjugate chirp, zero-padded and wrapped.
        kernel: Vec<Complex<T>>,
    },
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn unit_root<T: Scalar>(num: usize, den: usize) -> Complex<T> {
    // angle = -2 pi num / den, with num reduced mod den for accuracy
    let num = num % den;
    let angle = -T::TAU() * T::from_usize_lossy(num) / T::from_usize_lossy(den);
    Complex::new(angle.cos(), angle.sin())
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1, "FFT length must be at least 1");
        let factors = prime_factors(len);
        let kind = if factors.iter().all(|&p| p <= MAX_DIRECT_RADIX) {
            PlanKind::MixedRadix {
                factors,
                twiddles: (0..len).map(|j| unit_root(j, len)).collect(),
            }
        } else {
            Self::bluestein(len)
        };
        FftPlan { len, kind }
    }

    fn bluestein(len: usize) -> PlanKind<T> {
        let m = (2 * len - 1).next_power_of_two();
        let inner = FftPlan::new(m);
        // j^2 mod 2*len keeps the chirp argument small
        let chirp: Vec<Complex<T>> = (0..len)
            .map(|j| unit_root((j * j) % (2 * len), 2 * len))
            .collect();
        let mut kernel = vec![Complex::new(T::zero(), T::zero()); m];
        kernel[0] = chirp[0].conj();
        for j in 1..len {
            kernel[j] = chirp[j].conj();
            kernel[m - j] = chirp[j].conj();
        }
        inner.forward_in_place(&mut kernel);
        PlanKind::Bluestein {
            inner: Box::new(inner),
            chirp,
            kernel,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform.
    pub fn forward_in_place(&self, buf: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.kind {
            PlanKind::MixedRadix { factors, twiddles } => {
                let input = buf.to_vec();
                let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.len];
                mixed_radix(&input, 1, buf, factors, twiddles, 1, &mut scratch);
            }
            PlanKind::Bluestein {
                inner,
                chirp,
                kernel,
            } => {
                let m = inner.len();
                let mut work = vec![Complex::new(T::zero(), T::zero()); m];
                for (w, (x, c)) in work.iter_mut().zip(buf.iter().zip(chirp)) {
                    *w = x * c;
                }
                inner.forward_in_place(&mut work);
                for (w, k) in work.iter_mut().zip(kernel) {
                    *w *= k;
                }
                inner.inverse_in_place(&mut work);
                for (out, (w, c)) in buf.iter_mut().zip(work.iter().zip(chirp)) {
                    *out = w * c;
                }
            }
        }
    }

    /// Inverse transform including the `1/len` factor.
    pub fn inverse_in_place(&self, buf: &mut [Complex<T>]) {
        for x in buf.iter_mut() {
            *x = x.conj();
        }
        self.forward_in_place(buf);
        let scale = T::one() / T::from_usize_lossy(self.len);
        for x in buf.iter_mut() {
            *x = x.conj() * scale;
        }
    }
}

/// Decimation-in-time step: `out` receives the DFT of
/// `input[0], input[stride], ...` (`out.len()` samples).
fn mixed_radix<T: Scalar>(
    input: &[Complex<T>],
    stride: usize,
    out: &mut [Complex<T>],
    factors: &[usize],
    twiddles: &[Complex<T>],
    tw_stride: usize,
    scratch: &mut [Complex<T>],
) {
    let n = out.len();
    if n == 1 {
        out[0] = input[0];
        return;
    }
    let p = factors[0];
    let m = n / p;
    for q in 0..p {
        mixed_radix(
            &input[q * stride..],
            stride * p,
            &mut out[q * m..(q + 1) * m],
            &factors[1..],
            twiddles,
            tw_stride * p,
            &mut scratch[..m],
        );
    }
    // out[q*m + k] holds Y_q[k]; combine into X[k + r*m] = sum_q W_n^{q(k + r m)} Y_q[k]
    let full = twiddles.len();
    let tmp = &mut scratch[..p];
    for k in 0..m {
        for (q, t) in tmp.iter_mut().enumerate() {
            *t = out[q * m + k];
        }
        for r in 0..p {
            let idx = k + r * m;
            let mut acc = tmp[0];
            for (q, &y) in tmp.iter().enumerate().skip(1) {
                let e = (q * idx) % n;
                acc += y * twiddles[(e * tw_stride) % full];
            }
            out[idx] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..n)
            .map(|j| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let a = -2.0 * std::f64::consts::PI * ((j * t) % n) as f64 / n as f64;
                        v * Complex::new(a.cos(), a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex<f64>> {
        (0..n)
            .map(|i| Complex::new((i as f64 * 0.37).sin() + 0.1 * i as f64, (i as f64 * 1.3).cos()))
            .collect()
    }

    #[test]
    fn factors() {
        assert_eq!(prime_factors(1), Vec::<usize>::new());
        assert_eq!(prime_factors(3584), vec![2, 2, 2, 2, 2, 2, 2, 2, 2, 7]);
        assert_eq!(prime_factors(97), vec![97]);
    }

    #[test]
    fn matches_naive_mixed_and_bluestein() {
        // 37, 74 and 97 exercise Bluestein, the rest mixed radix
        for n in [1, 2, 3, 4, 5, 6, 7, 8, 12, 30, 31, 37, 48, 60, 64, 74, 97, 210] {
            let x = signal(n);
            let mut y = x.clone();
            let plan = FftPlan::<f64>::new(n);
            plan.forward_in_place(&mut y);
            for (a, b) in y.iter().zip(naive(&x)) {
                assert!((a - b).norm() < 1e-9 * n as f64, "n={n}");
            }
            plan.inverse_in_place(&mut y);
            for (a, b) in y.iter().zip(&x) {
                assert!((a - b).norm() < 1e-12 * n as f64, "inverse n={n}");
            }
        }
    }

    #[test]
    fn single_precision_plan() {
        let x: Vec<Complex<f32>> = (0..12).map(|i| Complex::new(i as f32, 0.0)).collect();
        let mut y = x.clone();
        let plan = FftPlan::<f32>::new(12);
        plan.forward_in_place(&mut y);
        assert!((y[0].re - 66.0).abs() < 1e-4);
        plan.inverse_in_place(&mut y);
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).norm() < 1e-4);
        }
    }
}
