//! Runnable invariant suite: closed-form identities of the loss family, the
//! self-paced equivalence oracle, and finite-difference gradient checks. The
//! `check` CLI subcommand prints one line per property with the observed
//! maximum deviation.

use alloc::string::String;
use alloc::vec::Vec;
use serde::Serialize;

use crate::model::ToyClassifier;
use crate::rng::SplitMix64;
use crate::robust_loss::{
    self, NormalizedLoss, RobustGrad, RobustParams,
};
use crate::spl::{self, EquivalenceConfig};
use crate::Result;

/// Outcome of one property check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub max_dev: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn new(name: &str, max_dev: f64, tolerance: f64) -> Self {
        CheckResult {
            name: String::from(name),
            pass: max_dev.is_finite() && max_dev <= tolerance,
            max_dev,
            tolerance,
        }
    }
}

/// The functions under test, indirected so a fixture can inject a deliberate
/// bug and confirm the suite catches it.
#[derive(Clone, Copy)]
pub struct CheckOps {
    pub rho_canonical: fn(NormalizedLoss, f64) -> Result<f64>,
    pub rho_prime: fn(NormalizedLoss, f64) -> Result<f64>,
    pub rho_second: fn(NormalizedLoss, f64) -> Result<f64>,
    pub rho_prime_inv: fn(f64, f64) -> Result<NormalizedLoss>,
    pub g_reg: fn(f64, f64) -> Result<f64>,
    pub rho_grad: fn(f64, &RobustParams) -> Result<RobustGrad>,
}

impl Default for CheckOps {
    fn default() -> Self {
        CheckOps {
            rho_canonical: robust_loss::rho_canonical,
            rho_prime: robust_loss::rho_prime,
            rho_second: robust_loss::rho_second,
            rho_prime_inv: robust_loss::rho_prime_inv,
            g_reg: robust_loss::g_reg,
            rho_grad: robust_loss::rho_grad,
        }
    }
}

fn t(v: f64) -> NormalizedLoss {
    NormalizedLoss::new(v).unwrap()
}

const ALPHAS: [f64; 5] = [0.15, 0.5, 1.0, 1.5, 1.9];

/// Runs the full suite with the production implementations.
pub fn run_all() -> Vec<CheckResult> {
    run_all_with(&CheckOps::default())
}

/// Runs the full suite against the given function table.
pub fn run_all_with(ops: &CheckOps) -> Vec<CheckResult> {
    let mut results = Vec::new();
    results.push(rho_at_zero(ops));
    results.push(rho_prime_at_zero(ops));
    results.push(rho_prime_range(ops));
    results.push(rho_second_sign(ops));
    results.push(inverse_round_trip(ops));
    results.push(g_at_one(ops));
    results.push(g_convexity(ops));
    results.push(first_order_condition(ops));
    results.push(canonical_general_reconciliation(ops));
    results.push(eata_bounds());
    results.push(spl_equivalence());
    results.push(rho_grad_finite_difference(ops));
    results.push(rho_squared_grad_finite_difference());
    results.push(model_grad_finite_difference());
    results
}

fn rho_at_zero(ops: &CheckOps) -> CheckResult {
    let mut dev = 0.0f64;
    for &a in &ALPHAS {
        dev = dev.max((ops.rho_canonical)(t(0.0), a).map(f64::abs).unwrap_or(f64::NAN));
    }
    CheckResult::new("rho_zero_at_zero_loss", dev, 1e-15)
}

fn rho_prime_at_zero(ops: &CheckOps) -> CheckResult {
    let mut dev = 0.0f64;
    for &a in &ALPHAS {
        dev = dev.max((ops.rho_prime)(t(0.0), a).map(|v| (v - 1.0).abs()).unwrap_or(f64::NAN));
    }
    CheckResult::new("rho_prime_one_at_zero_loss", dev, 0.0)
}

fn rho_prime_range(ops: &CheckOps) -> CheckResult {
    // Violation distance from (0, 1] plus monotonicity.
    let mut dev = 0.0f64;
    for &a in &ALPHAS {
        let mut prev = f64::INFINITY;
        for i in 0..=400 {
            let tv = i as f64 * 0.25;
            match (ops.rho_prime)(t(tv), a) {
                Ok(w) => {
                    if w <= 0.0 {
                        dev = dev.max(-w + f64::MIN_POSITIVE);
                    }
                    if w > 1.0 {
                        dev = dev.max(w - 1.0);
                    }
                    if w >= prev && i > 0 {
                        dev = dev.max(w - prev + f64::MIN_POSITIVE);
                    }
                    prev = w;
                }
                Err(_) => dev = f64::NAN,
            }
        }
    }
    CheckResult::new("rho_prime_decreasing_in_unit_range", dev, 0.0)
}

fn rho_second_sign(ops: &CheckOps) -> CheckResult {
    let mut dev = 0.0f64;
    for &a in &ALPHAS {
        for i in 0..=200 {
            let tv = i as f64 * 0.5;
            match (ops.rho_second)(t(tv), a) {
                // Any non-negative value is a violation by its magnitude.
                Ok(v) if v >= 0.0 => dev = dev.max(v + f64::MIN_POSITIVE),
                Ok(_) => {}
                Err(_) => dev = f64::NAN,
            }
        }
    }
    CheckResult::new("rho_second_negative", dev, 0.0)
}

fn inverse_round_trip(ops: &CheckOps) -> CheckResult {
    let mut dev = 0.0f64;
    for &a in &ALPHAS {
        for i in 0..=100 {
            let tv = i as f64;
            let w = match (ops.rho_prime)(t(tv), a) {
                Ok(w) => w,
                Err(_) => return CheckResult::new("inverse_round_trip", f64::NAN, 1e-9),
            };
            match (ops.rho_prime_inv)(w, a) {
                Ok(back) => dev = dev.max((back.value() - tv).abs()),
                Err(_) => dev = f64::NAN,
            }
        }
    }
    CheckResult::new("inverse_round_trip", dev, 1e-9)
}

fn g_at_one(ops: &CheckOps) -> CheckResult {
    let mut dev = 0.0f64;
    for &a in &ALPHAS {
        dev = dev.max((ops.g_reg)(1.0, a).map(f64::abs).unwrap_or(f64::NAN));
    }
    CheckResult::new("regularizer_zero_at_full_weight", dev, 1e-12)
}

fn g_convexity(ops: &CheckOps) -> CheckResult {
    let h = 1e-4;
    let mut dev = 0.0f64;
    for &a in &ALPHAS {
        let mut w = 0.01;
        while w <= 1.0 - h {
            let second = match (
                (ops.g_reg)(w - h, a),
                (ops.g_reg)(w, a),
                (ops.g_reg)(w + h, a),
            ) {
                (Ok(lo), Ok(mid), Ok(hi)) => hi - 2.0 * mid + lo,
                _ => f64::NAN,
            };
            if !(second > 0.0) {
                dev = dev.max(if second.is_finite() { -second + f64::MIN_POSITIVE } else { f64::NAN });
            }
            w += 0.005;
        }
    }
    CheckResult::new("regularizer_convex", dev, 0.0)
}

fn first_order_condition(ops: &CheckOps) -> CheckResult {
    // t + g'(rho'(t)) = 0 with a numeric derivative of g.
    let h = 1e-6;
    let mut dev = 0.0f64;
    for &a in &[0.15, 0.5, 1.0, 1.5] {
        for i in 0..=20 {
            let tv = i as f64 * 0.5;
            let w = match (ops.rho_prime)(t(tv), a) {
                Ok(w) => w,
                Err(_) => return CheckResult::new("first_order_condition", f64::NAN, 1e-3),
            };
            if w - h <= 0.0 || w + h > 1.0 {
                continue;
            }
            match ((ops.g_reg)(w + h, a), (ops.g_reg)(w - h, a)) {
                (Ok(hi), Ok(lo)) => {
                    let g_prime = (hi - lo) / (2.0 * h);
                    dev = dev.max((tv + g_prime).abs());
                }
                _ => dev = f64::NAN,
            }
        }
    }
    CheckResult::new("first_order_condition", dev, 1e-3)
}

fn canonical_general_reconciliation(ops: &CheckOps) -> CheckResult {
    // rho_canonical(t) = rho_general(2 lambda t; alpha, lambda, C=1).
    let mut dev = 0.0f64;
    for &a in &ALPHAS {
        for &lambda in &[0.1, 0.44, 1.0, 3.0] {
            let params = match RobustParams::new(a, lambda, 1.0) {
                Ok(p) => p,
                Err(_) => return CheckResult::new("argument_convention_reconciliation", f64::NAN, 1e-10),
            };
            for i in 0..=50 {
                let tv = i as f64 * 0.2;
                let lhs = (ops.rho_canonical)(t(tv), a).unwrap_or(f64::NAN);
                let rhs =
                    robust_loss::rho_general(2.0 * lambda * tv, &params).unwrap_or(f64::NAN);
                dev = dev.max((lhs - rhs).abs());
            }
        }
    }
    CheckResult::new("argument_convention_reconciliation", dev, 1e-10)
}

fn eata_bounds() -> CheckResult {
    // Hard-capped loss never exceeds either the loss or the threshold.
    let mut dev = 0.0f64;
    for i in 0..=100 {
        let x = i as f64 * 0.05;
        for &lambda in &[0.1, 0.44, 1.0] {
            match robust_loss::rho_eata(x, lambda) {
                Ok(r) => {
                    dev = dev.max((r - x).max(0.0));
                    dev = dev.max((r - lambda).max(0.0));
                }
                Err(_) => dev = f64::NAN,
            }
        }
    }
    CheckResult::new("hard_cap_bounds", dev, 0.0)
}

fn spl_equivalence() -> CheckResult {
    let config = EquivalenceConfig::default();
    match spl::equivalence_check(&spl::default_t_grid(), &spl::default_alpha_grid(), &config) {
        Ok(report) => {
            let dev = report.max_value_dev.max(report.max_w_dev / 2.0);
            CheckResult::new("spl_equivalence", dev, config.tolerance)
        }
        Err(_) => CheckResult::new("spl_equivalence", f64::NAN, config.tolerance),
    }
}

/// Relative deviation with an absolute floor for near-zero references.
fn rel_dev(analytic: f64, reference: f64, abs_floor: f64) -> f64 {
    let diff = (analytic - reference).abs();
    if diff <= abs_floor {
        0.0
    } else {
        diff / reference.abs().max(abs_floor)
    }
}

fn grad_fd_dev(
    f: &dyn Fn(f64, f64, f64) -> f64,
    grad: impl Fn(f64, &RobustParams) -> Result<RobustGrad>,
) -> f64 {
    let h = 1e-6;
    let mut dev = 0.0f64;
    for &x in &[0.01, 0.1, 1.0, 5.0] {
        for &alpha in &[0.15, 0.5, 1.0, 1.5] {
            for &lambda in &[0.1, 1.0, 3.0] {
                for &c in &[1.0, 0.44] {
                    let params = match RobustParams::new(alpha, lambda, c) {
                        Ok(p) => p,
                        Err(_) => return f64::NAN,
                    };
                    let g = match grad(x, &params) {
                        Ok(g) => g,
                        Err(_) => return f64::NAN,
                    };
                    let fd_x = (f(x + h, alpha, lambda) * c - f(x - h, alpha, lambda) * c) / (2.0 * h);
                    let fd_a = (f(x, alpha + h, lambda) * c - f(x, alpha - h, lambda) * c) / (2.0 * h);
                    let fd_l = (f(x, alpha, lambda + h) * c - f(x, alpha, lambda - h) * c) / (2.0 * h);
                    dev = dev.max(rel_dev(g.d_loss, fd_x, 1e-8));
                    dev = dev.max(rel_dev(g.d_alpha, fd_a, 1e-8));
                    dev = dev.max(rel_dev(g.d_lambda, fd_l, 1e-8));
                }
            }
        }
    }
    dev
}

fn rho_grad_finite_difference(ops: &CheckOps) -> CheckResult {
    let f = |x: f64, alpha: f64, lambda: f64| -> f64 {
        let a = (alpha - 2.0).abs();
        a / alpha * (crate::math::powf(x / lambda / a + 1.0, alpha / 2.0) - 1.0)
    };
    CheckResult::new("rho_gradient_vs_finite_difference", grad_fd_dev(&f, ops.rho_grad), 1e-5)
}

fn rho_squared_grad_finite_difference() -> CheckResult {
    let f = |x: f64, alpha: f64, lambda: f64| -> f64 {
        let a = (alpha - 2.0).abs();
        let s = x / lambda;
        a / alpha * (crate::math::powf(s * s / a + 1.0, alpha / 2.0) - 1.0)
    };
    CheckResult::new(
        "rho_squared_gradient_vs_finite_difference",
        grad_fd_dev(&f, robust_loss::rho_squared_grad),
        1e-5,
    )
}

fn model_grad_finite_difference() -> CheckResult {
    let mut dev = 0.0f64;
    let h = 1e-5;
    let mut rng = SplitMix64::new(20240915);
    for pair in 0..100 {
        let mut model = match ToyClassifier::new(2, 12, 3, 1000 + pair) {
            Ok(m) => m,
            Err(_) => return CheckResult::new("model_entropy_gradient", f64::NAN, 1e-4),
        };
        model.gamma.iter_mut().for_each(|g| *g = 1.0 + 0.3 * rng.next_normal());
        model.beta.iter_mut().for_each(|b| *b = 0.2 * rng.next_normal());
        let x = [3.0 * rng.next_normal(), 3.0 * rng.next_normal()];
        let (_, grad) = match model.entropy_loss_and_grad(&x) {
            Ok(v) => v,
            Err(_) => return CheckResult::new("model_entropy_gradient", f64::NAN, 1e-4),
        };
        let mut slot = 0;
        for idx in 0..2 * model.d_feat {
            if !model.adapt_mask[idx] {
                continue;
            }
            let d = model.d_feat;
            let read = |m: &ToyClassifier| if idx < d { m.gamma[idx] } else { m.beta[idx - d] };
            let base = read(&model);
            let mut probe = model.clone();
            if idx < d {
                probe.gamma[idx] = base + h;
            } else {
                probe.beta[idx - d] = base + h;
            }
            let up = probe.entropy_loss_and_grad(&x).map(|(l, _)| l).unwrap_or(f64::NAN);
            if idx < d {
                probe.gamma[idx] = base - h;
            } else {
                probe.beta[idx - d] = base - h;
            }
            let down = probe.entropy_loss_and_grad(&x).map(|(l, _)| l).unwrap_or(f64::NAN);
            let fd = (up - down) / (2.0 * h);
            dev = dev.max(rel_dev(grad[slot], fd, 1e-7));
            slot += 1;
        }
    }
    CheckResult::new("model_entropy_gradient", dev, 1e-4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes_every_property() {
        let results = run_all();
        for r in &results {
            assert!(r.pass, "{} failed: max_dev {} > {}", r.name, r.max_dev, r.tolerance);
        }
    }

    #[test]
    fn injected_sign_error_is_caught() {
        fn broken_rho_second(t: NormalizedLoss, alpha: f64) -> Result<f64> {
            robust_loss::rho_second(t, alpha).map(|v| -v)
        }
        let ops = CheckOps { rho_second: broken_rho_second, ..CheckOps::default() };
        let results = run_all_with(&ops);
        let prop = results.iter().find(|r| r.name == "rho_second_negative").unwrap();
        assert!(!prop.pass);
    }

    #[test]
    fn gradient_deviation_is_small() {
        let results = run_all();
        let grad = results
            .iter()
            .find(|r| r.name == "rho_gradient_vs_finite_difference")
            .unwrap();
        assert!(grad.pass);
        assert!(grad.max_dev < 1e-5);
    }
}
