use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::dft_forward;

/// Denominator floor for per-band relative errors.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-12;

/// Spectral energy split into contiguous frequency bands.
#[derive(Debug, Clone, PartialEq)]
pub struct BandProfile<T> {
    /// Symmetric frequency index ranges, covering `0..=d/2`.
    pub ranges: Vec<Range<usize>>,
    pub energies: Vec<T>,
}

impl<T: Scalar> BandProfile<T> {
    pub fn n_bands(&self) -> usize {
        self.energies.len()
    }

    pub fn label(&self, band: usize) -> String {
        band_label(band)
    }

    pub fn total(&self) -> T {
        self.energies.iter().copied().sum()
    }
}

/// Band 0 is the "DC&Low" band; the rest are numbered from 2 upward.
pub fn band_label(band: usize) -> String {
    if band == 0 {
        "DC&Low".to_string()
    } else {
        format!("Band {}", band + 1)
    }
}

fn band_ranges(n_freq: usize, n_bands: usize) -> Vec<Range<usize>> {
    let width = n_freq / n_bands;
    (0..n_bands)
        .map(|b| {
            let start = b * width;
            let end = if b + 1 == n_bands { n_freq } else { start + width };
            start..end
        })
        .collect()
}

/// Energy per band of symmetric frequencies `0..=d/2`.
///
/// Frequency `f` collects `|bin f|^2 + |bin d-f|^2`, so DC and the Nyquist
/// bin count once and the band energies sum to the full spectral energy.
/// Bands have width `(d/2 + 1) / n_bands` with the remainder going to the
/// last band.
pub fn band_energies<T: Scalar>(v: &[T], n_bands: usize) -> Result<BandProfile<T>> {
    if v.is_empty() {
        return Err(Error::Empty("cannot profile an empty vector"));
    }
    let d = v.len();
    let n_freq = d / 2 + 1;
    if n_bands == 0 || n_bands > n_freq {
        return Err(Error::OutOfRange {
            what: "n_bands",
            value: n_bands,
            min: 1,
            max: n_freq,
        });
    }
    let s = dft_forward(v)?;
    let bins = s.bins();
    let freq_energy = |f: usize| -> T {
        if f == 0 || 2 * f == d {
            bins[f].norm_sqr()
        } else {
            bins[f].norm_sqr() + bins[d - f].norm_sqr()
        }
    };
    let ranges = band_ranges(n_freq, n_bands);
    let energies = ranges
        .iter()
        .map(|r| r.clone().map(freq_energy).sum())
        .collect();
    Ok(BandProfile { ranges, energies })
}

/// Per-band `|E_a - E_b| / max(E_b, 1e-12)`, with `b` as the reference.
pub fn band_relative_error<T: Scalar>(a: &[T], b: &[T], n_bands: usize) -> Result<Vec<T>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            found: a.len(),
        });
    }
    let ea = band_energies(a, n_bands)?;
    let eb = band_energies(b, n_bands)?;
    let floor = T::lit(RELATIVE_ERROR_FLOOR);
    Ok(ea
        .energies
        .iter()
        .zip(&eb.energies)
        .map(|(&x, &y)| (x - y).abs() / y.max(floor))
        .collect())
}
