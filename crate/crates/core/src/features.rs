//! Projection histograms and their truncated DFT magnitude spectra.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::imaging::BinaryImage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("projection needs a square image, got {width}x{height}")]
    NotSquare { width: usize, height: usize },
    #[error("cannot transform an empty signal")]
    EmptySignal,
    #[error("coefficient count m = {m} violates 1 <= m <= n = {n}")]
    BadCoefficientCount { m: usize, n: usize },
}

pub type Result<T> = std::result::Result<T, FeatureError>;

/// Row and column ink counts of an `n x n` binary glyph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionPair {
    /// Row sums, indexed by row.
    pub h: Vec<u32>,
    /// Column sums, indexed by column.
    pub v: Vec<u32>,
}

impl ProjectionPair {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn ink_total(&self) -> u64 {
        self.h.iter().map(|&x| u64::from(x)).sum()
    }
}

pub fn project(img: &BinaryImage) -> Result<ProjectionPair> {
    if !img.is_square() {
        return Err(FeatureError::NotSquare {
            width: img.width(),
            height: img.height(),
        });
    }
    let n = img.width();
    let mut h = vec![0u32; n];
    let mut v = vec![0u32; n];
    for (i, row) in img.pixels().chunks(n).enumerate() {
        for (j, &p) in row.iter().enumerate() {
            let p = u32::from(p);
            h[i] += p;
            v[j] += p;
        }
    }
    Ok(ProjectionPair { h, v })
}

/// Complex DFT coefficients `S(k)`, `k = 0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm()).collect()
    }
}

/// `S(k) = sum_n s(n) exp(-j 2 pi k n / N)` by direct summation.
///
/// The exponent index `k*n` is reduced mod N before forming the angle, so each
/// twiddle factor is one of the N roots of unity computed once up front.
pub fn dft(signal: &[f64]) -> Result<Spectrum> {
    let n = signal.len();
    if n == 0 {
        return Err(FeatureError::EmptySignal);
    }
    let twiddles: Vec<Complex64> = (0..n)
        .map(|i| Complex64::from_polar(1.0, -2.0 * PI * i as f64 / n as f64))
        .collect();
    let coeffs = (0..n)
        .map(|k| {
            signal
                .iter()
                .enumerate()
                .fold(Complex64::new(0.0, 0.0), |acc, (t, &s)| {
                    acc + twiddles[(k * t) % n] * s
                })
        })
        .collect();
    Ok(Spectrum { coeffs })
}

/// Magnitudes of the lowest `m` coefficients.
pub fn truncate_spectrum(spec: &Spectrum, m: usize) -> Result<Vec<f64>> {
    if m == 0 || m > spec.len() {
        return Err(FeatureError::BadCoefficientCount { m, n: spec.len() });
    }
    Ok(spec.coeffs[..m].iter().map(|c| c.norm()).collect())
}

/// Spectral feature vector `[f_h1..f_hm, f_v1..f_vm]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    m: usize,
}

impl FeatureVector {
    /// Wraps raw values; `values.len()` must be even (two halves of `m`).
    pub fn from_values(values: Vec<f64>) -> Self {
        let m = values.len() / 2;
        Self { values, m }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn horizontal(&self) -> &[f64] {
        &self.values[..self.m]
    }

    pub fn vertical(&self) -> &[f64] {
        &self.values[self.m..]
    }

    /// Scales to unit Euclidean norm; the zero vector is returned unchanged.
    pub fn l2_normalized(mut self) -> Self {
        let norm = self.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            self.values.iter_mut().for_each(|x| *x /= norm);
        }
        self
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Projects, transforms both signals and keeps `m` magnitudes per axis.
pub fn extract_features(img: &BinaryImage, m: usize) -> Result<FeatureVector> {
    let proj = project(img)?;
    let n = proj.n();
    if m == 0 || m > n {
        return Err(FeatureError::BadCoefficientCount { m, n });
    }
    let to_f64 = |s: &[u32]| s.iter().map(|&x| f64::from(x)).collect::<Vec<_>>();
    let mut values = truncate_spectrum(&dft(&to_f64(&proj.h))?, m)?;
    values.extend(truncate_spectrum(&dft(&to_f64(&proj.v))?, m)?);
    Ok(FeatureVector { values, m })
}

/// Feature extraction settings shared by training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    pub n: usize,
    pub m: usize,
    pub normalize_l2: bool,
}

impl FeatureConfig {
    /// `m = n / 2` (at least 1), no normalization.
    pub fn with_side(n: usize) -> Self {
        Self {
            n,
            m: (n / 2).max(1),
            normalize_l2: false,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.m
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(FeatureError::BadCoefficientCount {
                m: self.m,
                n: self.n,
            });
        }
        Ok(())
    }

    /// Features of an already normalized `n x n` glyph.
    pub fn extract(&self, img: &BinaryImage) -> Result<FeatureVector> {
        let fv = extract_features(img, self.m)?;
        Ok(if self.normalize_l2 {
            fv.l2_normalized()
        } else {
            fv
        })
    }
}
