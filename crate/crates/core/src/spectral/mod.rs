//! Fourier-domain machinery: DFT, the symmetric low-pass mask, filtering,
//! frequency-domain resampling between lengths, and band-energy profiles.
//!
//! Conventions: the forward transform is unnormalized, the inverse carries
//! `1/d`, and bins are in standard order (bin 0 is DC, negative frequencies
//! occupy the upper half).

mod bands;
pub mod fft;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use bands::{band_energies, band_label, band_relative_error, BandProfile, RELATIVE_ERROR_FLOOR};
pub use fft::FftPlan;

/// Complex spectrum of length `d` in standard DFT bin order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    bins: Vec<Complex<T>>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn from_bins(bins: Vec<Complex<T>>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::Empty("spectrum needs at least one bin"));
        }
        Ok(Spectrum { bins })
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[Complex<T>] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.bins
    }

    /// Total spectral energy `sum |bin|^2`.
    pub fn energy(&self) -> T {
        self.bins.iter().map(|b| b.norm_sqr()).sum()
    }

    /// Checks `bins[i] == conj(bins[d - i])` up to `tol` relative to the
    /// largest bin magnitude.
    pub fn is_conjugate_symmetric(&self, tol: T) -> bool {
        let d = self.len();
        let scale = self
            .bins
            .iter()
            .map(|b| b.norm())
            .fold(T::zero(), T::max)
            .max(T::one());
        (1..d).all(|i| (self.bins[i] - self.bins[d - i].conj()).norm() <= tol * scale)
    }

    /// Zeroes every bin the mask rejects.
    pub fn apply_mask(&mut self, mask: &[bool]) {
        assert_eq!(mask.len(), self.len(), "mask length");
        for (b, &keep) in self.bins.iter_mut().zip(mask) {
            if !keep {
                *b = Complex::new(T::zero(), T::zero());
            }
        }
    }
}

fn check_finite<T: Scalar>(v: &[T]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(col) => Err(Error::NonFinite { row: 0, col }),
        None => Ok(()),
    }
}

/// Unnormalized forward DFT of a real vector.
pub fn dft_forward<T: Scalar>(v: &[T]) -> Result<Spectrum<T>> {
    if v.is_empty() {
        return Err(Error::Empty("cannot transform an empty vector"));
    }
    check_finite(v)?;
    let mut bins: Vec<Complex<T>> = v.iter().map(|&x| Complex::new(x, T::zero())).collect();
    FftPlan::new(v.len()).forward_in_place(&mut bins);
    Ok(Spectrum { bins })
}

/// Inverse DFT with `1/d` scaling; returns the real part and discards any
/// imaginary residue.
pub fn dft_inverse<T: Scalar>(s: &Spectrum<T>) -> Vec<T> {
    let mut bins = s.bins.clone();
    FftPlan::new(bins.len()).inverse_in_place(&mut bins);
    bins.into_iter().map(|c| c.re).collect()
}

/// Symmetric low-pass mask: bin `i` is kept iff `i < k/2` or `i > d - k/2`
/// with real-valued halves.
///
/// For even `k` this keeps `k - 1` bins (DC plus `k/2 - 1` conjugate pairs),
/// and bin `d/2` is never kept, not even at `k = d`. Use
/// [`Passband::Bypass`] to skip filtering entirely.
pub fn lowpass_mask(d: usize, k: usize) -> Result<Vec<bool>> {
    check_cutoff(k, d)?;
    // i < k/2  <=>  2i < k ;  i > d - k/2  <=>  2i > 2d - k
    Ok((0..d).map(|i| 2 * i < k || 2 * i > 2 * d - k).collect())
}

fn check_cutoff(k: usize, max: usize) -> Result<()> {
    if k == 0 || k > max {
        return Err(Error::OutOfRange {
            what: "cutoff k",
            value: k,
            min: 1,
            max,
        });
    }
    Ok(())
}

/// Which bins survive a filtering or resampling step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Passband {
    /// The symmetric low-pass mask with cutoff `k`.
    Cutoff(usize),
    /// Keep every bin (debug path; the mask alone cannot express this).
    Bypass,
}

impl Passband {
    fn masked_spectrum<T: Scalar>(self, v: &[T], max_k: usize) -> Result<Spectrum<T>> {
        if let Passband::Cutoff(k) = self {
            check_cutoff(k, max_k)?;
        }
        let mut s = dft_forward(v)?;
        if let Passband::Cutoff(k) = self {
            s.apply_mask(&lowpass_mask(v.len(), k)?);
        }
        Ok(s)
    }
}

/// `Re[IFFT(M_k . FFT(v))]`.
pub fn lowpass_filter<T: Scalar>(v: &[T], k: usize) -> Result<Vec<T>> {
    filter(v, Passband::Cutoff(k))
}

pub fn filter<T: Scalar>(v: &[T], band: Passband) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::Empty("cannot filter an empty vector"));
    }
    let s = band.masked_spectrum(v, v.len())?;
    Ok(dft_inverse(&s))
}

/// Moves a length-`d` spectrum onto `d_target` bins.
///
/// Positive frequency `j` stays at bin `j` and its conjugate partner moves
/// from `d - j` to `d_target - j`; frequencies the target cannot represent
/// are dropped. A source Nyquist bin is split evenly across `d/2` and
/// `d_target - d/2` when upsampling, and source frequencies landing exactly
/// on the target Nyquist bin are folded into it. The result is scaled by
/// `d_target / d` so time-domain amplitudes survive the length change.
pub fn resample_spectrum<T: Scalar>(s: &Spectrum<T>, d_target: usize) -> Result<Spectrum<T>> {
    if d_target == 0 {
        return Err(Error::OutOfRange {
            what: "d_target",
            value: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    let d = s.len();
    let src = s.bins();
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; d_target];
    out[0] = src[0];
    let mut j = 1;
    while 2 * j < d {
        if 2 * j < d_target {
            out[j] += src[j];
            out[d_target - j] += src[d - j];
        } else if 2 * j == d_target {
            out[j] += src[j] + src[d - j];
        }
        j += 1;
    }
    if d % 2 == 0 && d >= 2 {
        let nyq = d / 2;
        if d_target > d {
            let half = src[nyq] * T::lit(0.5);
            out[nyq] += half;
            out[d_target - nyq] += half;
        } else if d_target == d {
            out[nyq] += src[nyq];
        }
    }
    let scale = T::from_usize_lossy(d_target) / T::from_usize_lossy(d);
    for b in &mut out {
        *b = *b * scale;
    }
    Ok(Spectrum { bins: out })
}

/// Low-pass filters `v` at cutoff `k` and resamples it to `d_target`
/// coordinates in the frequency domain.
pub fn spectral_resample<T: Scalar>(v: &[T], d_target: usize, k: usize) -> Result<Vec<T>> {
    resample(v, d_target, Passband::Cutoff(k))
}

pub fn resample<T: Scalar>(v: &[T], d_target: usize, band: Passband) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::Empty("cannot resample an empty vector"));
    }
    if d_target == 0 {
        return Err(Error::OutOfRange {
            what: "d_target",
            value: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    let s = band.masked_spectrum(v, v.len().min(d_target))?;
    Ok(dft_inverse(&resample_spectrum(&s, d_target)?))
}
