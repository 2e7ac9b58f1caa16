//! Self-paced-learning machinery: closed-form sample weights, a brute-force
//! oracle over the weight grid, and the equivalence between robust
//! minimization and the regularized joint problem
//! `min_w [w t + g(w; alpha)] = rho(t; alpha)`.
//!
//! The oracle is a plain grid search rather than anything clever: it stays
//! valid even if a convexity assumption were wrong, and the cost is trivial
//! at this scale. The grid lives on (0, 1] because `g` diverges for `w -> 0`
//! whenever `alpha < 2`.

use alloc::vec::Vec;
use serde::Serialize;

use crate::robust_loss::{g_reg, rho_canonical, rho_prime, s_ent, NormalizedLoss};
use crate::{Error, Result};

/// Sample weight in [0, 1] produced by the canonical closed form. Weights
/// from [`eata_closed_form_weight`] are exempt from the bound and are plain
/// `f64`s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightValue(f64);

impl WeightValue {
    pub fn new(w: f64) -> Result<Self> {
        if !w.is_finite() || !(0.0..=1.0).contains(&w) {
            return Err(Error::invalid("weight must lie in [0, 1]"));
        }
        Ok(WeightValue(w))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// One cell of the joint objective `w t + g(w; alpha)` to minimize over `w`.
#[derive(Debug, Clone, Copy)]
pub struct SplObjectiveSample {
    pub t: NormalizedLoss,
    pub alpha: f64,
    pub w_grid_resolution: f64,
}

impl SplObjectiveSample {
    pub fn new(t: NormalizedLoss, alpha: f64) -> Self {
        SplObjectiveSample { t, alpha, w_grid_resolution: 1e-4 }
    }

    pub fn with_resolution(mut self, resolution: f64) -> Result<Self> {
        if !resolution.is_finite() || resolution <= 0.0 || resolution > 0.01 {
            return Err(Error::invalid("grid resolution must lie in (0, 0.01]"));
        }
        self.w_grid_resolution = resolution;
        Ok(self)
    }
}

/// The minimizer of `w t + g(w; alpha)` over (0, 1] in closed form: `rho'(t)`.
pub fn closed_form_weight(t: NormalizedLoss, alpha: f64) -> Result<WeightValue> {
    WeightValue::new(rho_prime(t, alpha)?)
}

/// Closed-form weight of the L1-regularized joint problem; delegates to the
/// entropy-reliability weight.
pub fn eata_closed_form_weight(loss: f64, lambda: f64) -> f64 {
    s_ent(loss, lambda)
}

/// Exhaustively minimizes `w t + g(w; alpha)` over the grid
/// `{res, 2 res, ..., 1}` and returns the minimizing weight and value.
pub fn brute_force_weight(sample: &SplObjectiveSample) -> Result<(WeightValue, f64)> {
    let t = sample.t.value();
    let n = (1.0 / sample.w_grid_resolution).round() as u64;
    let mut best_w = 1.0;
    let mut best_val = f64::INFINITY;
    for k in 1..=n {
        let w = k as f64 / n as f64;
        let val = w * t + g_reg(w, sample.alpha)?;
        if val < best_val {
            best_val = val;
            best_w = w;
        }
    }
    Ok((WeightValue::new(best_w)?, best_val))
}

/// Outcome for one `(t, alpha)` grid cell of [`equivalence_check`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EquivalenceCell {
    pub t: f64,
    pub alpha: f64,
    pub value_dev: f64,
    pub w_dev: f64,
    pub pass: bool,
}

/// Aggregate result of the equivalence check. The serialized form carries the
/// grid dimensions, the maximum deviations and the verdict; per-cell results
/// stay in memory for diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub t_count: usize,
    pub alpha_count: usize,
    pub max_value_dev: f64,
    pub max_w_dev: f64,
    pub pass: bool,
    #[serde(skip)]
    pub cells: Vec<EquivalenceCell>,
}

/// Tolerances for [`equivalence_check`]. The weight criterion is fixed at
/// twice the grid resolution.
#[derive(Debug, Clone, Copy)]
pub struct EquivalenceConfig {
    pub tolerance: f64,
    pub resolution: f64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        EquivalenceConfig { tolerance: 1e-4, resolution: 1e-4 }
    }
}

/// Verifies, cell by cell, that the brute-force minimum matches
/// `rho_canonical(t, alpha)` within `tolerance` and the brute-force argmin
/// matches `rho_prime(t, alpha)` within `2 * resolution`. Never aborts
/// mid-grid; failures are collected into the report.
pub fn equivalence_check(
    t_grid: &[f64],
    alpha_grid: &[f64],
    config: &EquivalenceConfig,
) -> Result<EquivalenceReport> {
    if t_grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::invalid("grids must be non-empty"));
    }
    if !config.tolerance.is_finite() || config.tolerance <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut cells = Vec::with_capacity(t_grid.len() * alpha_grid.len());
    let mut max_value_dev = 0.0f64;
    let mut max_w_dev = 0.0f64;
    let mut pass = true;
    for &alpha in alpha_grid {
        for &tv in t_grid {
            let t = NormalizedLoss::new(tv)?;
            let sample = SplObjectiveSample::new(t, alpha).with_resolution(config.resolution)?;
            let (w_star, value) = brute_force_weight(&sample)?;
            let value_dev = (value - rho_canonical(t, alpha)?).abs();
            let w_dev = (w_star.value() - rho_prime(t, alpha)?).abs();
            let cell_pass = value_dev <= config.tolerance && w_dev <= 2.0 * config.resolution;
            pass &= cell_pass;
            max_value_dev = max_value_dev.max(value_dev);
            max_w_dev = max_w_dev.max(w_dev);
            cells.push(EquivalenceCell { t: tv, alpha, value_dev, w_dev, pass: cell_pass });
        }
    }
    Ok(EquivalenceReport {
        t_count: t_grid.len(),
        alpha_count: alpha_grid.len(),
        max_value_dev,
        max_w_dev,
        pass,
        cells,
    })
}

/// Default grid `t = 0, 0.1, ..., 10`.
pub fn default_t_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 * 0.1).collect()
}

/// Default shape grid spanning the usable range below 2.
pub fn default_alpha_grid() -> Vec<f64> {
    alloc::vec![0.15, 0.5, 1.0, 1.5, 1.9]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: f64) -> NormalizedLoss {
        NormalizedLoss::new(v).unwrap()
    }

    #[test]
    fn closed_form_weight_matches_rho_prime() {
        assert_eq!(closed_form_weight(t(0.0), 0.5).unwrap().value(), 1.0);
        let w = closed_form_weight(t(1.0), 1.0).unwrap().value();
        assert!((w - 1.0 / 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eata_weight_delegates() {
        for i in 0..50 {
            let loss = i as f64 * 0.05;
            assert_eq!(eata_closed_form_weight(loss, 0.8), s_ent(loss, 0.8));
        }
        assert_eq!(eata_closed_form_weight(1.2, 1.2), 0.0);
    }

    #[test]
    fn brute_force_at_zero_loss() {
        let sample = SplObjectiveSample::new(t(0.0), 1.0);
        let (w, val) = brute_force_weight(&sample).unwrap();
        assert_eq!(w.value(), 1.0);
        assert!(val.abs() <= 1e-12);
    }

    #[test]
    fn brute_force_recovers_canonical_value() {
        let sample = SplObjectiveSample::new(t(1.0), 1.0);
        let (w, val) = brute_force_weight(&sample).unwrap();
        assert!((val - (3.0f64.sqrt() - 1.0)).abs() < 1e-4);
        assert!((w.value() - 1.0 / 3.0f64.sqrt()).abs() < 2e-4);
    }

    #[test]
    fn single_cell_zero_loss_passes() {
        let report =
            equivalence_check(&[0.0], &[1.0], &EquivalenceConfig::default()).unwrap();
        assert!(report.pass);
        assert_eq!(report.cells.len(), 1);
    }

    #[test]
    fn zero_tolerance_fails_on_quantization() {
        let config = EquivalenceConfig { tolerance: 1e-300, resolution: 1e-2 };
        let report = equivalence_check(&[1.0, 2.0], &[1.0], &config).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(equivalence_check(&[], &[1.0], &EquivalenceConfig::default()).is_err());
    }

    #[test]
    fn first_order_condition_holds() {
        // t + g'(rho'(t)) = 0, with g' taken numerically.
        let h = 1e-6;
        for &alpha in &[0.15, 0.5, 1.0, 1.5] {
            for i in 0..=20 {
                let tv = i as f64 * 0.5;
                let w = rho_prime(t(tv), alpha).unwrap();
                if w - h <= 0.0 || w + h > 1.0 {
                    continue;
                }
                let g_prime =
                    (g_reg(w + h, alpha).unwrap() - g_reg(w - h, alpha).unwrap()) / (2.0 * h);
                assert!((tv + g_prime).abs() < 1e-3, "alpha={alpha} t={tv}: {}", tv + g_prime);
            }
        }
    }

    #[test]
    fn l1_regularizer_argmin_is_indicator() {
        // With g(w) = -lambda w the constrained argmin over [0, 1] is the
        // indicator part of the entropy-reliability weight.
        let lambda = 0.7;
        let argmin = |loss: f64| -> f64 {
            let mut best_w = 0.0;
            let mut best = f64::INFINITY;
            for k in 0..=10_000u32 {
                let w = k as f64 / 10_000.0;
                let val = w * loss - lambda * w;
                if val < best {
                    best = val;
                    best_w = w;
                }
            }
            best_w
        };
        assert_eq!(argmin(1.5), 0.0); // loss above threshold
        assert_eq!(argmin(0.2), 1.0); // loss below threshold
    }
}
