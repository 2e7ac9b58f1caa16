//! The general robust loss family applied to an entropy objective, together
//! with its derivatives, inverse derivative, explicit self-paced regularizer,
//! and the hard-threshold limiting cases.
//!
//! Two argument conventions exist for the same family and both are exposed:
//!
//! - [`rho_canonical`] works on the normalized loss `t = L / lambda` with the
//!   inner argument `2t/|alpha-2|`. All self-paced-learning identities
//!   (`rho_prime`, `rho_prime_inv`, `g_reg`, the first-order condition) are
//!   exact in this convention.
//! - [`rho_general`] works on the raw loss `x` with the inner argument
//!   `(x/lambda)/|alpha-2|` and a multiplicative constant `C`. The adaptation
//!   engine uses this form because the standard initial values
//!   (`alpha = 0.15`, `lambda = 0.4 ln K`) are tuned against it.
//!
//! The two reconcile exactly through
//! `rho_canonical(t, alpha) == rho_general(2 * lambda * t, alpha, lambda, C=1)`,
//! which the test suite asserts on a grid.

use serde::Serialize;

use crate::math::{exp, ln, powf};
use crate::{Error, Result};

/// Lower projection bound for the shape parameter.
pub const ALPHA_MIN: f64 = 1e-3;
/// Upper bound for the shape parameter (inclusive).
pub const ALPHA_MAX: f64 = 2.0;
/// Width of the band below `alpha = 2` treated as the degenerate limit.
pub const ALPHA_DEGEN: f64 = 1e-6;
/// Projection bounds for the loss scale.
pub const LAMBDA_MIN: f64 = 1e-4;
pub const LAMBDA_MAX: f64 = 100.0;

/// Learnable loss shape and scale plus the fixed gradient-scale constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustParams {
    /// Shape parameter, projected to `[ALPHA_MIN, 2]`.
    pub alpha: f64,
    /// Loss scale in the units of the loss (nats for entropy), projected to
    /// `[LAMBDA_MIN, LAMBDA_MAX]`.
    pub lambda: f64,
    /// Fixed multiplicative constant `C > 0`; not learned.
    pub scale_c: f64,
}

impl RobustParams {
    pub fn new(alpha: f64, lambda: f64, scale_c: f64) -> Result<Self> {
        if !alpha.is_finite() || !(ALPHA_MIN..=ALPHA_MAX).contains(&alpha) {
            return Err(Error::invalid("alpha must lie in [ALPHA_MIN, 2]"));
        }
        if !lambda.is_finite() || !(LAMBDA_MIN..=LAMBDA_MAX).contains(&lambda) {
            return Err(Error::invalid("lambda must lie in [LAMBDA_MIN, LAMBDA_MAX]"));
        }
        if !scale_c.is_finite() || scale_c <= 0.0 {
            return Err(Error::invalid("scale_c must be positive"));
        }
        Ok(RobustParams { alpha, lambda, scale_c })
    }

    /// Clamps shape and scale back into their projection bounds.
    pub fn project(&mut self) {
        self.alpha = self.alpha.clamp(ALPHA_MIN, ALPHA_MAX);
        self.lambda = self.lambda.clamp(LAMBDA_MIN, LAMBDA_MAX);
    }
}

/// A probability vector over `K >= 2` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(alloc::vec::Vec<f64>);

impl ProbVector {
    /// Validates non-negativity and normalization (sum within 1e-9 of 1).
    pub fn new(p: alloc::vec::Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::invalid("probability vector needs at least 2 classes"));
        }
        let mut sum = 0.0;
        for &v in &p {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid("probability entries must be finite and >= 0"));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("probability entries must sum to 1"));
        }
        Ok(ProbVector(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Dimensionless normalized loss `t = L / lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedLoss(f64);

impl NormalizedLoss {
    pub fn new(t: f64) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::invalid("normalized loss must be finite and >= 0"));
        }
        Ok(NormalizedLoss(t))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || !(ALPHA_MIN..=ALPHA_MAX).contains(&alpha) {
        return Err(Error::invalid("alpha must lie in [ALPHA_MIN, 2]"));
    }
    Ok(())
}

fn degenerate(alpha: f64) -> bool {
    alpha >= ALPHA_MAX - ALPHA_DEGEN
}

/// Shannon entropy in nats, with `0 ln 0 = 0`. Result lies in `[0, ln K]`.
pub fn entropy(p: &ProbVector) -> f64 {
    let mut h = 0.0;
    for &v in p.as_slice() {
        if v > 0.0 {
            h -= v * ln(v);
        }
    }
    h.max(0.0)
}

/// Canonical robust loss `rho(t) = (|a-2|/a) ((2t/|a-2| + 1)^(a/2) - 1)`.
///
/// Within `ALPHA_DEGEN` of `alpha = 2` the analytic limit `rho(t) = t` is
/// returned so the 0/0 form never evaluates.
pub fn rho_canonical(t: NormalizedLoss, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let t = t.value();
    if degenerate(alpha) {
        return Ok(t);
    }
    let a = (alpha - 2.0).abs();
    Ok(a / alpha * (powf(2.0 * t / a + 1.0, alpha / 2.0) - 1.0))
}

/// Robust loss on the raw loss scale:
/// `rho(x) = (|a-2|/a) C [((x/lambda)/|a-2| + 1)^(a/2) - 1]`.
///
/// The degenerate limit is `C x / (2 lambda)`, which keeps the reconciliation
/// with [`rho_canonical`] exact at every alpha.
pub fn rho_general(x: f64, params: &RobustParams) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::invalid("loss must be finite and >= 0"));
    }
    let RobustParams { alpha, lambda, scale_c } = *params;
    if degenerate(alpha) {
        return Ok(scale_c * x / (2.0 * lambda));
    }
    let a = (alpha - 2.0).abs();
    Ok(a / alpha * scale_c * (powf(x / lambda / a + 1.0, alpha / 2.0) - 1.0))
}

/// First derivative of the canonical loss:
/// `rho'(t) = (2t/|a-2| + 1)^((a-2)/2)`, strictly decreasing with range (0, 1].
/// Returns 1 for all `t` in the degenerate band.
pub fn rho_prime(t: NormalizedLoss, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if degenerate(alpha) {
        return Ok(1.0);
    }
    let a = (alpha - 2.0).abs();
    Ok(powf(2.0 * t.value() / a + 1.0, (alpha - 2.0) / 2.0))
}

/// Second derivative of the canonical loss, negative for every `alpha < 2`:
/// `rho''(t) = -(2t/|a-2| + 1)^(a/2 - 2)`. Returns 0 in the degenerate band.
pub fn rho_second(t: NormalizedLoss, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if degenerate(alpha) {
        return Ok(0.0);
    }
    let a = (alpha - 2.0).abs();
    Ok(-powf(2.0 * t.value() / a + 1.0, alpha / 2.0 - 2.0))
}

/// Inverse of [`rho_prime`]: `(rho')^{-1}(w) = (|a-2|/2)(w^(2/(a-2)) - 1)`.
///
/// Defined for `w` in (0, 1]; the degenerate band is rejected because there
/// `rho'` is constant and has no inverse.
pub fn rho_prime_inv(w: f64, alpha: f64) -> Result<NormalizedLoss> {
    check_alpha(alpha)?;
    if degenerate(alpha) {
        return Err(Error::invalid("rho' is constant near alpha = 2; no inverse"));
    }
    if !w.is_finite() || w <= 0.0 || w > 1.0 {
        return Err(Error::invalid("weight must lie in (0, 1]"));
    }
    let a = (alpha - 2.0).abs();
    let t = a / 2.0 * (powf(w, 2.0 / (alpha - 2.0)) - 1.0);
    // Guard roundoff: for w = 1 the exact value is 0.
    NormalizedLoss::new(t.max(0.0))
}

/// Explicit self-paced regularizer
/// `g(w; a) = (|a-2|/a) [w^(a/(a-2)) (1 - a/2) + (a/2) w - 1]`,
/// convex on (0, 1] with `g(1; a) = 0`.
pub fn g_reg(w: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if degenerate(alpha) {
        return Err(Error::invalid("regularizer undefined in the degenerate band"));
    }
    if !w.is_finite() || w <= 0.0 {
        return Err(Error::invalid("weight must be positive"));
    }
    let a = (alpha - 2.0).abs();
    Ok(a / alpha * (powf(w, alpha / (alpha - 2.0)) * (1.0 - alpha / 2.0) + alpha / 2.0 * w - 1.0))
}

/// Hard-capped (Talwar-style) loss: identity below the threshold, constant
/// above it.
pub fn rho_eata(x: f64, lambda: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::invalid("loss must be finite and >= 0"));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::invalid("lambda must be positive"));
    }
    Ok(if x <= lambda { x } else { lambda })
}

/// Entropy-reliability weight `exp(lambda - loss)` below the threshold, 0 at
/// and above it. The indicator is strict, so `loss == lambda` yields 0.
///
/// Note this weight exceeds 1 for `loss < lambda`; it is used verbatim, not
/// renormalized into [0, 1].
pub fn s_ent(loss: f64, lambda: f64) -> f64 {
    if loss < lambda {
        exp(lambda - loss)
    } else {
        0.0
    }
}

/// Partial derivatives of [`rho_general`] with respect to the loss, the shape
/// and the scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustGrad {
    pub d_loss: f64,
    pub d_alpha: f64,
    pub d_lambda: f64,
}

/// Closed-form gradient of [`rho_general`].
///
/// With `A = |alpha-2|`, `s = x/lambda` and `u = s/A + 1`:
///
/// ```text
/// d/dx      = (C / 2lambda) u^((a-2)/2)
/// d/dlambda = -(C x / 2lambda^2) u^((a-2)/2)
/// d/dalpha  = C [ -(2/a^2)(u^(a/2) - 1)
///                 + (A / 2a) u^(a/2) ln u
///                 + (s / 2A) u^((a-2)/2) ]
/// ```
///
/// In the degenerate band `d/dalpha` is 0 by convention and the other two
/// partials follow the limit `C x / (2 lambda)`.
pub fn rho_grad(x: f64, params: &RobustParams) -> Result<RobustGrad> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::invalid("loss must be finite and >= 0"));
    }
    let RobustParams { alpha, lambda, scale_c } = *params;
    if degenerate(alpha) {
        return Ok(RobustGrad {
            d_loss: scale_c / (2.0 * lambda),
            d_alpha: 0.0,
            d_lambda: -scale_c * x / (2.0 * lambda * lambda),
        });
    }
    let a = (alpha - 2.0).abs();
    let s = x / lambda;
    let u = s / a + 1.0;
    let u_half = powf(u, alpha / 2.0);
    let u_half_m1 = powf(u, (alpha - 2.0) / 2.0);
    let d_loss = scale_c / (2.0 * lambda) * u_half_m1;
    let d_lambda = -scale_c * x / (2.0 * lambda * lambda) * u_half_m1;
    let d_alpha = scale_c
        * (-(2.0 / (alpha * alpha)) * (u_half - 1.0)
            + a / (2.0 * alpha) * u_half * ln(u)
            + s / (2.0 * a) * u_half_m1);
    Ok(RobustGrad { d_loss, d_alpha, d_lambda })
}

/// Squared-argument variant of the loss family,
/// `rho0(x) = (|a-2|/a) C [((x/lambda)^2/|a-2| + 1)^(a/2) - 1]`,
/// whose degenerate limit is `C (x/lambda)^2 / 2`.
pub fn rho_squared(x: f64, params: &RobustParams) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::invalid("loss must be finite and >= 0"));
    }
    let RobustParams { alpha, lambda, scale_c } = *params;
    let s = x / lambda;
    if degenerate(alpha) {
        return Ok(scale_c * s * s / 2.0);
    }
    let a = (alpha - 2.0).abs();
    Ok(a / alpha * scale_c * (powf(s * s / a + 1.0, alpha / 2.0) - 1.0))
}

/// Closed-form gradient of [`rho_squared`]; same conventions as [`rho_grad`]
/// with `v = s^2/A + 1`:
///
/// ```text
/// d/dx      = (C s / lambda) v^((a-2)/2)
/// d/dlambda = -(C s^2 / lambda) v^((a-2)/2)
/// d/dalpha  = C [ -(2/a^2)(v^(a/2) - 1)
///                 + (A / 2a) v^(a/2) ln v
///                 + (s^2 / 2A) v^((a-2)/2) ]
/// ```
pub fn rho_squared_grad(x: f64, params: &RobustParams) -> Result<RobustGrad> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::invalid("loss must be finite and >= 0"));
    }
    let RobustParams { alpha, lambda, scale_c } = *params;
    let s = x / lambda;
    if degenerate(alpha) {
        return Ok(RobustGrad {
            d_loss: scale_c * s / lambda,
            d_alpha: 0.0,
            d_lambda: -scale_c * s * s / lambda,
        });
    }
    let a = (alpha - 2.0).abs();
    let v = s * s / a + 1.0;
    let v_half = powf(v, alpha / 2.0);
    let v_half_m1 = powf(v, (alpha - 2.0) / 2.0);
    Ok(RobustGrad {
        d_loss: scale_c * s / lambda * v_half_m1,
        d_lambda: -scale_c * s * s / lambda * v_half_m1,
        d_alpha: scale_c
            * (-(2.0 / (alpha * alpha)) * (v_half - 1.0)
                + a / (2.0 * alpha) * v_half * ln(v)
                + s * s / (2.0 * a) * v_half_m1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: f64) -> NormalizedLoss {
        NormalizedLoss::new(v).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_of_uniform_is_ln_k() {
        let p = ProbVector::new(vec![0.25; 4]).unwrap();
        assert!(close(entropy(&p), 4.0f64.ln(), 1e-12));
        let p2 = ProbVector::new(vec![0.5, 0.5]).unwrap();
        assert!(close(entropy(&p2), 2.0f64.ln(), 1e-12));
    }

    #[test]
    fn entropy_of_one_hot_is_zero() {
        let p = ProbVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(entropy(&p), 0.0);
    }

    #[test]
    fn prob_vector_rejects_bad_input() {
        assert!(ProbVector::new(vec![1.0]).is_err());
        assert!(ProbVector::new(vec![0.6, 0.6]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn rho_canonical_examples() {
        for &alpha in &[0.15, 0.5, 1.0, 1.9] {
            assert_eq!(rho_canonical(t(0.0), alpha).unwrap(), 0.0);
        }
        // alpha -> 2 limit is the identity.
        assert!(close(rho_canonical(t(3.7), 2.0).unwrap(), 3.7, 1e-15));
        // alpha = 1, t = 1: sqrt(3) - 1.
        let v = rho_canonical(t(1.0), 1.0).unwrap();
        assert!(close(v, 3.0f64.sqrt() - 1.0, 1e-12), "{v}");
    }

    #[test]
    fn rho_canonical_monotone_in_t() {
        for &alpha in &[0.15, 0.5, 1.0, 1.5, 1.9] {
            let mut prev = -1.0;
            for i in 0..200 {
                let v = rho_canonical(t(i as f64 * 0.1), alpha).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn rho_general_examples() {
        let p = RobustParams::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(rho_general(0.0, &p).unwrap(), 0.0);
        assert!(close(rho_general(2.0, &p).unwrap(), 3.0f64.sqrt() - 1.0, 1e-12));
        // C scales linearly.
        let p2 = RobustParams::new(1.0, 1.0, 2.0).unwrap();
        assert!(close(rho_general(2.0, &p2).unwrap(), 2.0 * (3.0f64.sqrt() - 1.0), 1e-12));
        assert!(rho_general(-0.5, &p).is_err());
    }

    #[test]
    fn canonical_matches_general_at_doubled_argument() {
        // rho_canonical(t) = rho_general(2 lambda t; alpha, lambda, C=1),
        // including the degenerate band.
        for &alpha in &[0.15, 0.5, 1.0, 1.5, 1.9, 2.0] {
            for &lambda in &[0.1, 0.4, 1.0, 3.0] {
                let p = RobustParams::new(alpha, lambda, 1.0).unwrap();
                for i in 0..=50 {
                    let tv = i as f64 * 0.2;
                    let lhs = rho_canonical(t(tv), alpha).unwrap();
                    let rhs = rho_general(2.0 * lambda * tv, &p).unwrap();
                    assert!(close(lhs, rhs, 1e-10), "alpha={alpha} t={tv}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn rho_prime_examples_and_range() {
        assert_eq!(rho_prime(t(0.0), 0.7).unwrap(), 1.0);
        assert!(close(rho_prime(t(1.0), 1.0).unwrap(), 1.0 / 3.0f64.sqrt(), 1e-12));
        assert!(rho_prime(t(1e6), 0.15).unwrap() < 1e-4);
        for &alpha in &[0.15, 0.5, 1.0, 1.5, 1.9] {
            let mut prev = 2.0;
            for i in 0..200 {
                let w = rho_prime(t(i as f64 * 0.5), alpha).unwrap();
                assert!(w > 0.0 && w <= 1.0);
                assert!(w < prev || (i == 0 && w == 1.0));
                prev = w;
            }
        }
        // Degenerate band: constant 1.
        assert_eq!(rho_prime(t(42.0), 2.0).unwrap(), 1.0);
    }

    #[test]
    fn rho_second_is_negative() {
        assert!(close(rho_second(t(0.0), 1.0).unwrap(), -1.0, 1e-15));
        for &alpha in &[0.15, 0.5, 1.0, 1.5, 1.9] {
            for i in 0..100 {
                assert!(rho_second(t(i as f64 * 0.3), alpha).unwrap() < 0.0);
            }
        }
        assert_eq!(rho_second(t(1.0), 2.0).unwrap(), 0.0);
    }

    #[test]
    fn rho_prime_inv_round_trip() {
        assert_eq!(rho_prime_inv(1.0, 1.0).unwrap().value(), 0.0);
        assert!(close(rho_prime_inv(1.0 / 3.0f64.sqrt(), 1.0).unwrap().value(), 1.0, 1e-12));
        for &alpha in &[0.15, 0.5, 1.0, 1.5] {
            for i in 1..=10 {
                let w = i as f64 * 0.1;
                let tv = rho_prime_inv(w, alpha).unwrap();
                let back = rho_prime(tv, alpha).unwrap();
                assert!(close(back, w, 1e-10), "alpha={alpha} w={w}: {back}");
            }
        }
        assert!(rho_prime_inv(0.0, 1.0).is_err());
        assert!(rho_prime_inv(1.5, 1.0).is_err());
        assert!(rho_prime_inv(0.5, 2.0).is_err());
    }

    #[test]
    fn g_reg_examples() {
        for &alpha in &[0.15, 0.5, 1.0, 1.5, 1.9] {
            assert!(g_reg(1.0, alpha).unwrap().abs() <= 1e-12);
        }
        // g(w; 1) = 1/(2w) + w/2 - 1.
        assert!(close(g_reg(0.5, 1.0).unwrap(), 0.25, 1e-12));
        assert!(g_reg(0.0, 1.0).is_err());
        assert!(g_reg(-0.2, 1.0).is_err());
    }

    #[test]
    fn g_reg_convex_by_second_difference() {
        let h = 1e-4;
        for &alpha in &[0.15, 0.5, 1.0, 1.5, 1.9] {
            let mut w = 0.01;
            while w <= 1.0 - h {
                let second = g_reg(w + h, alpha).unwrap() - 2.0 * g_reg(w, alpha).unwrap()
                    + g_reg(w - h, alpha).unwrap();
                assert!(second > 0.0, "alpha={alpha} w={w}");
                w += 0.01;
            }
        }
    }

    #[test]
    fn rho_eata_branches() {
        assert_eq!(rho_eata(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(rho_eata(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(rho_eata(1.0, 1.0).unwrap(), 1.0);
        // Upper bounds hold everywhere.
        for i in 0..100 {
            let x = i as f64 * 0.07;
            let r = rho_eata(x, 0.9).unwrap();
            assert!(r <= x && r <= 0.9);
        }
    }

    #[test]
    fn s_ent_examples() {
        assert_eq!(s_ent(1.0, 1.0), 0.0);
        assert_eq!(s_ent(1.5, 1.0), 0.0);
        let two = s_ent(1.0 - 2.0f64.ln(), 1.0);
        assert!(close(two, 2.0, 1e-12));
        assert!(close(s_ent(0.0, 1.0), core::f64::consts::E, 1e-12));
    }

    #[test]
    fn rho_grad_trivial_at_zero() {
        let p = RobustParams::new(0.5, 0.7, 1.3).unwrap();
        let g = rho_grad(0.0, &p).unwrap();
        // At x = 0 the main-text chain rule gives C / (2 lambda).
        assert!(close(g.d_loss, 1.3 / (2.0 * 0.7), 1e-12));
        assert_eq!(g.d_alpha, 0.0);
        assert_eq!(g.d_lambda, 0.0);
    }

    #[test]
    fn rho_squared_examples() {
        let p = RobustParams::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(rho_squared(0.0, &p).unwrap(), 0.0);
        assert!(close(rho_squared(1.0, &p).unwrap(), 2.0f64.sqrt() - 1.0, 1e-12));
        // Degenerate limit is the squared form.
        let p2 = RobustParams::new(2.0, 2.0, 3.0).unwrap();
        assert!(close(rho_squared(4.0, &p2).unwrap(), 3.0 * 4.0 / 2.0, 1e-12));
    }

    #[test]
    fn params_projection_clamps() {
        let mut p = RobustParams::new(1.0, 1.0, 1.0).unwrap();
        p.alpha = 5.0;
        p.lambda = -3.0;
        p.project();
        assert_eq!(p.alpha, ALPHA_MAX);
        assert_eq!(p.lambda, LAMBDA_MIN);
    }
}
