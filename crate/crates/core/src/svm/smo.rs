//! Simplified sequential minimal optimization for the C-SVM dual
//!
//! ```text
//! max  W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij
//! s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! Each sweep visits every sample. A sample that violates the KKT conditions
//! is paired first with a randomly drawn partner; if that pair cannot move,
//! the remaining partners are tried in cyclic order from the random draw.
//! The solver stops after `max_passes` consecutive sweeps without an update.
//! The bias follows Platt's update rule during the sweeps and is recentred
//! on the KKT-feasible interval once the multipliers have converged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{rbf_unchecked, KernelParams, Result, SvmError, SvmModel, TrainingSet};

/// Hard cap on sweeps, reached only if the solver keeps making progress
/// without ever settling.
const MAX_SWEEPS: usize = 100_000;

/// Steps that move a multiplier by less than this (relative to C) are
/// rejected.
const MIN_STEP: f64 = 1e-12;

/// Full dual solution, one multiplier per training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Dual objective at the returned multipliers.
    pub objective: f64,
    pub sweeps: usize,
    pub updates: usize,
}

/// Dual objective `W(alpha)` for an explicit training set.
pub fn dual_objective(data: &TrainingSet, alpha: &[f64], gamma: f64) -> f64 {
    let (x, y) = (data.x(), data.y());
    let mut quad = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            quad += alpha[i]
                * alpha[j]
                * f64::from(y[i])
                * f64::from(y[j])
                * rbf_unchecked(&x[i], &x[j], gamma);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

struct Solver<'a> {
    y: Vec<f64>,
    gram: Vec<f64>,
    n: usize,
    params: &'a KernelParams,
    alpha: Vec<f64>,
    /// g_i = sum_j a_j y_j K_ij (decision value without bias)
    g: Vec<f64>,
    b: f64,
}

impl Solver<'_> {
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    fn error(&self, i: usize) -> f64 {
        self.g[i] + self.b - self.y[i]
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.y[i] * self.error(i);
        let tol = self.params.kkt_tol;
        (r < -tol && self.alpha[i] < self.params.c) || (r > tol && self.alpha[i] > 0.0)
    }

    /// O(n) objective using the cached g.
    fn objective(&self) -> f64 {
        let quad: f64 = (0..self.n)
            .map(|i| self.alpha[i] * self.y[i] * self.g[i])
            .sum();
        self.alpha.iter().sum::<f64>() - 0.5 * quad
    }

    fn snap(&self, a: f64) -> f64 {
        let c = self.params.c;
        let eps = MIN_STEP * c;
        if a < eps {
            0.0
        } else if a > c - eps {
            c
        } else {
            a
        }
    }

    /// Jointly optimizes `alpha[i]`, `alpha[j]`; returns whether they moved.
    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let c = self.params.c;
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai_old, aj_old) = (self.alpha[i], self.alpha[j]);
        let (ei, ej) = (self.error(i), self.error(j));

        let (lo, hi) = if yi != yj {
            ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
        } else {
            ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
        };
        if hi - lo < MIN_STEP * c {
            return false;
        }

        let (kii, kjj, kij) = (self.k(i, i), self.k(j, j), self.k(i, j));
        // second derivative of W along the constraint line
        let eta = 2.0 * kij - kii - kjj;
        let mut aj = if eta < -1e-12 {
            (aj_old - yj * (ei - ej) / eta).clamp(lo, hi)
        } else {
            // flat direction (duplicate points): W is linear, move to the
            // endpoint the slope favours
            let slope = yj * (ei - ej);
            if slope > 0.0 {
                hi
            } else if slope < 0.0 {
                lo
            } else {
                return false;
            }
        };
        aj = self.snap(aj);
        if (aj - aj_old).abs() < MIN_STEP * c.max(1.0) {
            return false;
        }
        let ai = self.snap(ai_old + yi * yj * (aj_old - aj));

        #[cfg(debug_assertions)]
        let before = self.objective();

        let (di, dj) = (ai - ai_old, aj - aj_old);
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        for t in 0..self.n {
            self.g[t] += di * yi * self.k(i, t) + dj * yj * self.k(j, t);
        }

        let b1 = self.b - ei - yi * di * kii - yj * dj * kij;
        let b2 = self.b - ej - yi * di * kij - yj * dj * kjj;
        self.b = if ai > 0.0 && ai < c {
            b1
        } else if aj > 0.0 && aj < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };

        #[cfg(debug_assertions)]
        {
            let after = self.objective();
            debug_assert!(
                after >= before - 1e-9 * before.abs().max(1.0),
                "SMO objective decreased: {before} -> {after}"
            );
        }
        true
    }

    /// Midpoint of the bias interval allowed by the KKT conditions.
    ///
    /// With `F_i = y_i - g_i`, samples that may still increase their margin
    /// (`y=+1, a<C` or `y=-1, a>0`) bound the bias from below and the others
    /// (`y=+1, a>0` or `y=-1, a<C`) bound it from above.
    fn centred_bias(&self) -> f64 {
        let c = self.params.c;
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for i in 0..self.n {
            let f = self.y[i] - self.g[i];
            let a = self.alpha[i];
            let pos = self.y[i] > 0.0;
            if (pos && a < c) || (!pos && a > 0.0) {
                lower = lower.max(f);
            }
            if (pos && a > 0.0) || (!pos && a < c) {
                upper = upper.min(f);
            }
        }
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => 0.5 * (lower + upper),
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => self.b,
        }
    }
}

/// Runs SMO and returns the full multiplier vector.
pub fn solve_smo(data: &TrainingSet, params: &KernelParams, seed: u64) -> Result<SmoSolution> {
    params.validate()?;
    let n = data.len();
    let has_pos = data.y().contains(&1);
    let has_neg = data.y().contains(&-1);
    if !(has_pos && has_neg) {
        return Err(SvmError::DegenerateTrainingSet);
    }
    let x = data.x();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        gram[i * n + i] = 1.0;
        for j in 0..i {
            let k = rbf_unchecked(&x[i], &x[j], params.gamma);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }
    let mut s = Solver {
        y: data.y().iter().map(|&l| f64::from(l)).collect(),
        gram,
        n,
        params,
        alpha: vec![0.0; n],
        g: vec![0.0; n],
        b: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut passes = 0;
    let mut sweeps = 0;
    let mut updates = 0;
    while passes < params.max_passes {
        if sweeps >= MAX_SWEEPS {
            return Err(SvmError::NotConverged(sweeps));
        }
        let mut changed = 0;
        for i in 0..n {
            if !s.violates_kkt(i) {
                continue;
            }
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let start = j;
            loop {
                if s.take_step(i, j) {
                    changed += 1;
                    break;
                }
                j = (j + 1) % n;
                if j == i {
                    j = (j + 1) % n;
                }
                if j == start {
                    break;
                }
            }
        }
        sweeps += 1;
        updates += changed;
        if changed == 0 {
            passes += 1;
        } else {
            passes = 0;
        }
    }

    s.b = s.centred_bias();
    Ok(SmoSolution {
        objective: s.objective(),
        alpha: s.alpha,
        bias: s.b,
        sweeps,
        updates,
    })
}

/// Trains a binary model; classes are named `"+1"` and `"-1"` until renamed
/// with [`SvmModel::with_classes`].
pub fn train_smo(data: &TrainingSet, params: &KernelParams, seed: u64) -> Result<SvmModel> {
    let sol = solve_smo(data, params, seed)?;
    let mut sx = Vec::new();
    let mut sy = Vec::new();
    let mut sa = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            sx.push(data.x()[i].clone());
            sy.push(data.y()[i]);
            sa.push(a);
        }
    }
    SvmModel::from_parts(sx, sy, sa, sol.bias, params.gamma, params.c, "+1", "-1")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(points: &[(&[f64], i8)]) -> TrainingSet {
        TrainingSet::new(
            points.iter().map(|(x, _)| x.to_vec()).collect(),
            points.iter().map(|&(_, y)| y).collect(),
        )
        .unwrap()
    }

    fn assert_kkt(data: &TrainingSet, params: &KernelParams, sol: &SmoSolution) {
        let tol = params.kkt_tol;
        let balance: f64 = sol
            .alpha
            .iter()
            .zip(data.y())
            .map(|(a, &y)| a * f64::from(y))
            .sum();
        assert!(balance.abs() <= 1e-6, "sum alpha*y = {balance}");
        for (i, &a) in sol.alpha.iter().enumerate() {
            assert!((0.0..=params.c).contains(&a));
            let f: f64 = (0..data.len())
                .map(|j| {
                    sol.alpha[j]
                        * f64::from(data.y()[j])
                        * rbf_unchecked(&data.x()[j], &data.x()[i], params.gamma)
                })
                .sum::<f64>()
                + sol.bias;
            let margin = f64::from(data.y()[i]) * f;
            if a == 0.0 {
                assert!(margin >= 1.0 - tol, "sample {i}: margin {margin}");
            } else if a < params.c {
                assert!((margin - 1.0).abs() <= tol, "sample {i}: margin {margin}");
            } else {
                assert!(margin <= 1.0 + tol, "sample {i}: margin {margin}");
            }
        }
    }

    #[test]
    fn separable_pair() {
        let data = set(&[(&[0.0], -1), (&[1.0], 1)]);
        let params = KernelParams::new(1.0, 100.0).unwrap();
        let model = train_smo(&data, &params, 7).unwrap();
        assert!(model.decision(&[0.0]).unwrap() < 0.0);
        assert!(model.decision(&[1.0]).unwrap() > 0.0);
        assert_kkt(&data, &params, &solve_smo(&data, &params, 7).unwrap());
    }

    #[test]
    fn xor_is_separated() {
        let data = set(&[
            (&[0.0, 0.0], -1),
            (&[1.0, 1.0], -1),
            (&[0.0, 1.0], 1),
            (&[1.0, 0.0], 1),
        ]);
        let params = KernelParams::new(1.0, 10.0).unwrap();
        let sol = solve_smo(&data, &params, 42).unwrap();
        assert_kkt(&data, &params, &sol);
        let model = train_smo(&data, &params, 42).unwrap();
        for (x, &y) in data.x().iter().zip(data.y()) {
            assert_eq!(model.decision(x).unwrap() >= 0.0, y == 1);
        }
        assert!((sol.objective - dual_objective(&data, &sol.alpha, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn single_class_rejected() {
        let data = set(&[(&[0.0], 1), (&[1.0], 1)]);
        let params = KernelParams::new(1.0, 1.0).unwrap();
        assert_eq!(
            train_smo(&data, &params, 0).unwrap_err(),
            SvmError::DegenerateTrainingSet
        );
    }

    #[test]
    fn duplicate_points_with_opposite_labels() {
        // not separable: both multipliers should hit C
        let data = set(&[(&[0.5], 1), (&[0.5], -1), (&[3.0], 1), (&[-3.0], -1)]);
        let params = KernelParams::new(1.0, 2.0).unwrap();
        let sol = solve_smo(&data, &params, 1).unwrap();
        assert_kkt(&data, &params, &sol);
    }

    #[test]
    fn overlapping_classes_hit_box() {
        let mut pts: Vec<(Vec<f64>, i8)> = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.37;
            pts.push((vec![t.sin(), t.cos()], if i % 3 == 0 { 1 } else { -1 }));
        }
        let data = TrainingSet::new(
            pts.iter().map(|p| p.0.clone()).collect(),
            pts.iter().map(|p| p.1).collect(),
        )
        .unwrap();
        let params = KernelParams::new(0.5, 1.0).unwrap();
        let sol = solve_smo(&data, &params, 3).unwrap();
        assert_kkt(&data, &params, &sol);
        assert!(sol.alpha.contains(&params.c));
    }

    #[test]
    fn deterministic_given_seed() {
        let data = set(&[
            (&[0.0, 0.0], -1),
            (&[1.0, 1.0], -1),
            (&[0.0, 1.0], 1),
            (&[1.0, 0.0], 1),
            (&[0.5, 0.4], 1),
        ]);
        let params = KernelParams::new(2.0, 10.0).unwrap();
        let a = solve_smo(&data, &params, 9).unwrap();
        let b = solve_smo(&data, &params, 9).unwrap();
        assert_eq!(a, b);
    }
}
