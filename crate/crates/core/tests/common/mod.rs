//! Independent oracles and generators shared by the integration tests.
//!
//! Nothing here calls into the code under test except to build inputs.
#![allow(dead_code)]

use std::f64::consts::PI;

use closematch::imaging::{BinaryImage, GrayImage};
use closematch::svm::{KernelParams, SmoSolution, TrainingSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `S(k) = sum s(n) (cos(2 pi k n / N) - j sin(2 pi k n / N))`, evaluated
/// literally with no index reduction or twiddle table.
pub fn naive_dft(s: &[f64]) -> Vec<(f64, f64)> {
    let n = s.len() as f64;
    (0..s.len())
        .map(|k| {
            s.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &x)| {
                let angle = 2.0 * PI * (k as f64) * (t as f64) / n;
                (re + x * angle.cos(), im - x * angle.sin())
            })
        })
        .collect()
}

pub fn random_signal(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-50.0..50.0)).collect()
}

/// Exhaustive Otsu: the smallest `t` maximising the between-class variance
/// of `{p <= t}` vs `{p > t}`, compared as exact rationals.
///
/// With `w0` pixels of total intensity `s0` at or below `t`, `N` pixels and
/// total `S`, the variance is proportional to
/// `(S*w0 - N*s0)^2 / (w0 * (N - w0))`. Returns 0 when no threshold splits
/// the image into two non-empty classes.
pub fn otsu_exhaustive(pixels: &[u8]) -> u8 {
    let n = pixels.len() as u128;
    let total: u128 = pixels.iter().map(|&p| u128::from(p)).sum();
    let mut best: Option<(u128, u128, u8)> = None;
    for t in 0..=255u8 {
        let w0 = pixels.iter().filter(|&&p| p <= t).count() as u128;
        if w0 == 0 || w0 == n {
            continue;
        }
        let s0: u128 = pixels
            .iter()
            .filter(|&&p| p <= t)
            .map(|&p| u128::from(p))
            .sum();
        let diff = (total * w0).abs_diff(n * s0);
        let num = diff * diff;
        let den = w0 * (n - w0);
        let better = match best {
            None => true,
            Some((bn, bd, _)) => num * bd > bn * den,
        };
        if better {
            best = Some((num, den, t));
        }
    }
    best.map_or(0, |(_, _, t)| t)
}

/// Gray image drawn from one of several intensity regimes.
pub fn random_gray(rng: &mut impl Rng) -> GrayImage {
    let w = rng.random_range(1..=48);
    let h = rng.random_range(1..=48);
    let regime = rng.random_range(0..4);
    let (a, b) = (rng.random_range(0..=255u8), rng.random_range(0..=255u8));
    let px = (0..w * h)
        .map(|_| match regime {
            0 => rng.random_range(0..=255u8),
            // bimodal with noise
            1 => {
                let centre = if rng.random_bool(0.3) { a } else { b };
                centre.saturating_add(rng.random_range(0..20))
            }
            // two exact levels, which produces many tied thresholds
            2 => {
                if rng.random_bool(0.5) {
                    a
                } else {
                    b
                }
            }
            _ => rng.random_range(a.min(b)..=a.max(b)),
        })
        .collect();
    GrayImage::new(w, h, px).expect("valid image")
}

pub fn random_binary(rng: &mut impl Rng, width: usize, height: usize) -> BinaryImage {
    let density = rng.random_range(0.0..=1.0);
    let px = (0..width * height)
        .map(|_| u8::from(rng.random_bool(density)))
        .collect();
    BinaryImage::new(width, height, px).expect("valid image")
}

pub fn rbf(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Dual objective `sum a - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)`.
pub fn dual(x: &[Vec<f64>], y: &[i8], alpha: &[f64], gamma: f64) -> f64 {
    let mut q = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            q += alpha[i] * alpha[j] * f64::from(y[i] * y[j]) * rbf(&x[i], &x[j], gamma);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * q
}

/// Checks `0 <= a <= C`, `|sum a y| <= 1e-6` and the three KKT bands.
/// Returns a description of the first violation.
pub fn check_dual_and_kkt(
    data: &TrainingSet,
    params: &KernelParams,
    sol: &SmoSolution,
) -> Result<(), String> {
    let (x, y) = (data.x(), data.y());
    let balance: f64 = sol
        .alpha
        .iter()
        .zip(y)
        .map(|(a, &yi)| a * f64::from(yi))
        .sum();
    if balance.abs() > 1e-6 {
        return Err(format!("sum alpha*y = {balance:e}"));
    }
    let tol = params.kkt_tol;
    for (i, &a) in sol.alpha.iter().enumerate() {
        if !(0.0..=params.c).contains(&a) {
            return Err(format!("alpha[{i}] = {a} outside [0, {}]", params.c));
        }
        let f: f64 = (0..x.len())
            .map(|j| sol.alpha[j] * f64::from(y[j]) * rbf(&x[j], &x[i], params.gamma))
            .sum::<f64>()
            + sol.bias;
        let margin = f64::from(y[i]) * f;
        let ok = if a == 0.0 {
            margin >= 1.0 - tol
        } else if a < params.c {
            (margin - 1.0).abs() <= tol
        } else {
            margin <= 1.0 + tol
        };
        if !ok {
            return Err(format!("sample {i}: alpha {a}, y*f = {margin}"));
        }
    }
    Ok(())
}

/// Linearly separable 2-D points with a margin of at least 0.1 around a
/// random line; at least one point per class.
pub fn separable_2d(rng: &mut impl Rng) -> (Vec<Vec<f64>>, Vec<i8>) {
    loop {
        let theta = rng.random_range(0.0..2.0 * PI);
        let (wx, wy) = (theta.cos(), theta.sin());
        let b = rng.random_range(-0.5..0.5);
        let count = rng.random_range(2..=20);
        let mut x = Vec::new();
        let mut y = Vec::new();
        while x.len() < count {
            let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let s = wx * p[0] + wy * p[1] + b;
            if s.abs() >= 0.1 {
                x.push(p.to_vec());
                y.push(if s > 0.0 { 1 } else { -1 });
            }
        }
        if y.contains(&1) && y.contains(&-1) {
            return (x, y);
        }
    }
}

pub fn xor() -> (Vec<Vec<f64>>, Vec<i8>) {
    (
        vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ],
        vec![1, 1, -1, -1],
    )
}

/// Best dual objective over a grid of step `step` on `[0, C]^4`, keeping only
/// points that satisfy `sum a y = 0` exactly.
pub fn xor_grid_optimum(gamma: f64, c: f64, step: f64) -> f64 {
    let (x, y) = xor();
    let k = (c / step).round() as usize;
    let grid: Vec<f64> = (0..=k).map(|i| i as f64 * step).collect();
    let mut best = f64::NEG_INFINITY;
    for &a0 in &grid {
        for &a1 in &grid {
            for &a2 in &grid {
                // y = (+, +, -, -), so a3 is fixed by the equality constraint
                let a3 = a0 + a1 - a2;
                if !(0.0..=c).contains(&a3) {
                    continue;
                }
                best = best.max(dual(&x, &y, &[a0, a1, a2, a3], gamma));
            }
        }
    }
    best
}
