//! Toy differentiable classifier mirroring the "adapt only the normalization
//! layers" setup: a frozen random feature map (Gaussian matrix + tanh), an
//! adaptable per-feature affine modulation `gamma ⊙ h + beta`, and a linear
//! softmax head. The head and feature bias train during the pretraining
//! phase; at adaptation time only the masked entries of `(gamma ‖ beta)`
//! ever change.
//!
//! All gradients are hand-derived closed forms; the test suite checks them
//! against central finite differences.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math::{exp, ln, tanh};
use crate::rng::SplitMix64;
use crate::robust_loss::ProbVector;
use crate::{Error, Result};

/// A labeled input; `label` indexes a class in `[0, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub label: usize,
}

/// The classifier. `w1`/`w2` are row-major (`d_feat x d_in`, `k x d_feat`).
/// `adapt_mask` covers the concatenation `(gamma ‖ beta)`; only entries where
/// it is true may change after pretraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyClassifier {
    pub d_in: usize,
    pub d_feat: usize,
    pub k: usize,
    pub seed: u64,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub adapt_mask: Vec<bool>,
}

/// Each random feature reads at most this many input dimensions.
pub const FEATURE_FAN_IN: usize = 4;

impl ToyClassifier {
    /// Seeded initialization. The feature map is a sparse random Gaussian
    /// matrix: each row reads `min(FEATURE_FAN_IN, d_in)` randomly chosen
    /// input dims with `N(0, 1/fan_in)` entries (dense when `d_in` is small),
    /// so individual features specialize to small subsets of the input. The
    /// head is dense `N(0, 1/d_feat)`; biases start at zero, `gamma = 1`,
    /// `beta = 0`, and the adaptation mask covers all of `(gamma ‖ beta)`.
    pub fn new(d_in: usize, d_feat: usize, k: usize, seed: u64) -> Result<Self> {
        if d_in == 0 || d_feat == 0 || k < 2 {
            return Err(Error::invalid("dims must satisfy d_in, d_feat >= 1 and k >= 2"));
        }
        let mut rng = SplitMix64::new(seed);
        let fan_in = FEATURE_FAN_IN.min(d_in);
        let w1_scale = 1.0 / crate::math::sqrt(fan_in as f64);
        let mut w1 = vec![0.0; d_feat * d_in];
        let mut dims: Vec<usize> = (0..d_in).collect();
        for row in w1.chunks_mut(d_in) {
            rng.shuffle(&mut dims);
            for &i in &dims[..fan_in] {
                row[i] = rng.next_normal() * w1_scale;
            }
        }
        let w2_scale = 1.0 / crate::math::sqrt(d_feat as f64);
        let w2 = (0..k * d_feat).map(|_| rng.next_normal() * w2_scale).collect();
        Ok(ToyClassifier {
            d_in,
            d_feat,
            k,
            seed,
            w1,
            b1: vec![0.0; d_feat],
            gamma: vec![1.0; d_feat],
            beta: vec![0.0; d_feat],
            w2,
            b2: vec![0.0; k],
            adapt_mask: vec![true; 2 * d_feat],
        })
    }

    /// Checks internal consistency; used after deserializing a model file.
    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 || self.d_feat == 0 || self.k < 2 {
            return Err(Error::invalid("dims must satisfy d_in, d_feat >= 1 and k >= 2"));
        }
        let checks = [
            (self.w1.len(), self.d_feat * self.d_in),
            (self.b1.len(), self.d_feat),
            (self.gamma.len(), self.d_feat),
            (self.beta.len(), self.d_feat),
            (self.w2.len(), self.k * self.d_feat),
            (self.b2.len(), self.k),
            (self.adapt_mask.len(), 2 * self.d_feat),
        ];
        for (got, expected) in checks {
            if got != expected {
                return Err(Error::DimensionMismatch { expected, got });
            }
        }
        let finite = self
            .w1
            .iter()
            .chain(&self.b1)
            .chain(&self.gamma)
            .chain(&self.beta)
            .chain(&self.w2)
            .chain(&self.b2)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(())
    }

    /// Freezes the shift half of the modulation, the analog of not updating
    /// the last block.
    pub fn freeze_beta(&mut self) {
        for m in &mut self.adapt_mask[self.d_feat..] {
            *m = false;
        }
    }

    /// Number of trainable entries under the current mask.
    pub fn masked_len(&self) -> usize {
        self.adapt_mask.iter().filter(|&&m| m).count()
    }

    pub(crate) fn forward_parts(&self, x: &[f64]) -> Result<ForwardParts> {
        if x.len() != self.d_in {
            return Err(Error::DimensionMismatch { expected: self.d_in, got: x.len() });
        }
        let mut hidden = vec![0.0; self.d_feat];
        for (j, h) in hidden.iter_mut().enumerate() {
            let mut a = self.b1[j];
            for (i, &xi) in x.iter().enumerate() {
                a += self.w1[j * self.d_in + i] * xi;
            }
            *h = tanh(a);
        }
        let modulated: Vec<f64> =
            (0..self.d_feat).map(|j| self.gamma[j] * hidden[j] + self.beta[j]).collect();
        let mut logits = vec![0.0; self.k];
        for (c, l) in logits.iter_mut().enumerate() {
            let mut acc = self.b2[c];
            for (j, &z) in modulated.iter().enumerate() {
                acc += self.w2[c * self.d_feat + j] * z;
            }
            *l = acc;
        }
        let probs = softmax(&logits);
        Ok(ForwardParts { hidden, modulated, logits, probs })
    }

    /// Runs the network on one input, returning logits and a valid
    /// probability vector.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ProbVector)> {
        let parts = self.forward_parts(x)?;
        let probs = ProbVector::new(parts.probs)?;
        Ok((parts.logits, probs))
    }

    /// Entropy of the prediction and its gradient with respect to the masked
    /// entries of `(gamma ‖ beta)`, in mask order.
    pub fn entropy_loss_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let parts = self.forward_parts(x)?;
        Ok(self.entropy_and_masked_grad(&parts))
    }

    pub(crate) fn entropy_and_masked_grad(&self, parts: &ForwardParts) -> (f64, Vec<f64>) {
        // A numerically blown-up forward pass must surface as a non-finite
        // loss, not silently as zero.
        if parts.probs.iter().any(|p| !p.is_finite()) {
            return (f64::NAN, vec![0.0; self.masked_len()]);
        }
        let mut loss = 0.0;
        for &p in &parts.probs {
            if p > 0.0 {
                loss -= p * ln(p);
            }
        }
        let loss = loss.max(0.0);
        // d entropy / d logit_c = -p_c (ln p_c + H)
        let delta: Vec<f64> = parts
            .probs
            .iter()
            .map(|&p| if p > 0.0 { -p * (ln(p) + loss) } else { 0.0 })
            .collect();
        (loss, self.modulation_grad(parts, &delta))
    }

    /// Backpropagates a logit-space gradient onto the masked modulation
    /// parameters: `d/d gamma_j = (w2^T delta)_j h_j`, `d/d beta_j = (w2^T delta)_j`.
    fn modulation_grad(&self, parts: &ForwardParts, delta: &[f64]) -> Vec<f64> {
        let mut dz = vec![0.0; self.d_feat];
        for (c, &d) in delta.iter().enumerate() {
            for (j, slot) in dz.iter_mut().enumerate() {
                *slot += self.w2[c * self.d_feat + j] * d;
            }
        }
        let mut grad = Vec::with_capacity(self.masked_len());
        for j in 0..self.d_feat {
            if self.adapt_mask[j] {
                grad.push(dz[j] * parts.hidden[j]);
            }
        }
        for j in 0..self.d_feat {
            if self.adapt_mask[self.d_feat + j] {
                grad.push(dz[j]);
            }
        }
        grad
    }

    /// Fraction of samples whose argmax prediction matches the label.
    pub fn accuracy(&self, samples: &[LabeledSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::invalid("cannot score an empty dataset"));
        }
        let mut correct = 0usize;
        for s in samples {
            let parts = self.forward_parts(&s.x)?;
            if argmax(&parts.probs) == s.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / samples.len() as f64)
    }

    /// One cross-entropy SGD step on all trainable parameters (feature bias,
    /// modulation, head). The feature matrix `w1` stays at initialization.
    fn cross_entropy_step(&mut self, sample: &LabeledSample, lr: f64) -> Result<()> {
        if sample.label >= self.k {
            return Err(Error::invalid("label out of range"));
        }
        let parts = self.forward_parts(&sample.x)?;
        // d CE / d logit = p - one_hot(y)
        let mut delta = parts.probs.clone();
        delta[sample.label] -= 1.0;
        // Backprop through the head with pre-update weights, then apply the
        // head update.
        let mut dz = vec![0.0; self.d_feat];
        for (c, &d) in delta.iter().enumerate() {
            for (j, slot) in dz.iter_mut().enumerate() {
                *slot += self.w2[c * self.d_feat + j] * d;
            }
        }
        for (c, &d) in delta.iter().enumerate() {
            self.b2[c] -= lr * d;
            for j in 0..self.d_feat {
                self.w2[c * self.d_feat + j] -= lr * d * parts.modulated[j];
            }
        }
        for j in 0..self.d_feat {
            let dh = dz[j] * self.gamma[j];
            let da = dh * (1.0 - parts.hidden[j] * parts.hidden[j]);
            self.gamma[j] -= lr * dz[j] * parts.hidden[j];
            self.beta[j] -= lr * dz[j];
            self.b1[j] -= lr * da;
        }
        Ok(())
    }
}

/// Outcome of [`pretrain`].
#[derive(Debug, Clone, Serialize)]
pub struct PretrainReport {
    pub epochs: usize,
    pub samples: usize,
    pub final_accuracy: f64,
}

/// Cross-entropy SGD over the labeled dataset, batch size one, epoch-wise
/// reshuffling from the given seed. Deterministic: the same seed yields
/// bit-identical parameters.
pub fn pretrain(
    model: &mut ToyClassifier,
    dataset: &[LabeledSample],
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<PretrainReport> {
    if dataset.is_empty() {
        return Err(Error::invalid("pretraining dataset is empty"));
    }
    if !lr.is_finite() || lr <= 0.0 {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for _ in 0..epochs {
        rng.shuffle(&mut order);
        for &idx in &order {
            model.cross_entropy_step(&dataset[idx], lr)?;
        }
    }
    Ok(PretrainReport {
        epochs,
        samples: dataset.len(),
        final_accuracy: model.accuracy(dataset)?,
    })
}

pub(crate) struct ForwardParts {
    pub hidden: Vec<f64>,
    pub modulated: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Max-subtracted softmax; finite for logits of any magnitude up to overflow
/// of `exp` differences (|logit| ~ 1e3 is safe).
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| exp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_inputs(seed: u64, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
        let mut rng = SplitMix64::new(seed);
        (0..n).map(|_| (0..d).map(|_| rng.next_normal() * scale).collect()).collect()
    }

    #[test]
    fn uniform_probs_for_zero_head() {
        let mut m = ToyClassifier::new(2, 8, 4, 1).unwrap();
        m.w2.iter_mut().for_each(|v| *v = 0.0);
        let (_, probs) = m.forward(&[0.3, -0.7]).unwrap();
        for &p in probs.as_slice() {
            assert!((p - 0.25).abs() < 1e-12);
        }
        // Entropy gradient vanishes at the symmetric point.
        let (loss, grad) = m.entropy_loss_and_grad(&[0.3, -0.7]).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
        for g in grad {
            assert!(g.abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let m = ToyClassifier::new(2, 8, 3, 5).unwrap();
        let x = [1.0, -2.0];
        let (logits, probs) = m.forward(&x).unwrap();
        let shifted: Vec<f64> = logits.iter().map(|l| l + 123.456).collect();
        let probs2 = softmax(&shifted);
        for (a, b) in probs.as_slice().iter().zip(&probs2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_stable_for_large_logits() {
        let p = softmax(&[1e3, -1e3, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_outputs_are_normalized() {
        let m = ToyClassifier::new(3, 16, 5, 9).unwrap();
        for x in sample_inputs(2, 20, 3, 4.0) {
            let (_, probs) = m.forward(&x).unwrap();
            let sum: f64 = probs.as_slice().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = ToyClassifier::new(2, 8, 3, 1).unwrap();
        assert!(m.forward(&[1.0]).is_err());
        assert!(m.entropy_loss_and_grad(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn entropy_grad_matches_finite_differences() {
        let mut m = ToyClassifier::new(2, 12, 3, 42).unwrap();
        // Give the modulation a non-trivial operating point.
        let mut rng = SplitMix64::new(17);
        m.gamma.iter_mut().for_each(|g| *g = 1.0 + 0.3 * rng.next_normal());
        m.beta.iter_mut().for_each(|b| *b = 0.2 * rng.next_normal());
        let h = 1e-5;
        for x in sample_inputs(3, 20, 2, 3.0) {
            let (_, grad) = m.entropy_loss_and_grad(&x).unwrap();
            let mut slot = 0;
            for idx in 0..2 * m.d_feat {
                if !m.adapt_mask[idx] {
                    continue;
                }
                let mut probe = m.clone();
                set_param(&mut probe, idx, get_param(&m, idx) + h);
                let (up, _) = probe.entropy_loss_and_grad(&x).unwrap();
                set_param(&mut probe, idx, get_param(&m, idx) - h);
                let (down, _) = probe.entropy_loss_and_grad(&x).unwrap();
                let fd = (up - down) / (2.0 * h);
                let diff = (grad[slot] - fd).abs();
                let ok = diff <= 1e-7 || diff / fd.abs().max(1e-12) <= 1e-4;
                assert!(ok, "idx {idx}: analytic {} vs fd {fd}", grad[slot]);
                slot += 1;
            }
        }
    }

    fn get_param(m: &ToyClassifier, idx: usize) -> f64 {
        if idx < m.d_feat {
            m.gamma[idx]
        } else {
            m.beta[idx - m.d_feat]
        }
    }

    fn set_param(m: &mut ToyClassifier, idx: usize, v: f64) {
        if idx < m.d_feat {
            m.gamma[idx] = v;
        } else {
            m.beta[idx - m.d_feat] = v;
        }
    }

    #[test]
    fn all_false_mask_gives_empty_grad() {
        let mut m = ToyClassifier::new(2, 8, 3, 1).unwrap();
        m.adapt_mask.iter_mut().for_each(|b| *b = false);
        let (loss, grad) = m.entropy_loss_and_grad(&[0.5, 0.5]).unwrap();
        assert!(loss >= 0.0);
        assert!(grad.is_empty());
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let mut m = ToyClassifier::new(2, 8, 3, 1).unwrap();
        let before = m.clone();
        let data = vec![LabeledSample { x: vec![1.0, 0.0], label: 0 }];
        pretrain(&mut m, &data, 0, 0.1, 7).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn pretrain_is_deterministic() {
        let data: Vec<LabeledSample> = sample_inputs(5, 60, 2, 1.0)
            .into_iter()
            .enumerate()
            .map(|(i, mut x)| {
                let label = i % 3;
                x[0] += 4.0 * label as f64;
                LabeledSample { x, label }
            })
            .collect();
        let mut a = ToyClassifier::new(2, 8, 3, 2).unwrap();
        let mut b = ToyClassifier::new(2, 8, 3, 2).unwrap();
        pretrain(&mut a, &data, 10, 0.1, 7).unwrap();
        pretrain(&mut b, &data, 10, 0.1, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn freeze_beta_masks_shift_half() {
        let mut m = ToyClassifier::new(2, 8, 3, 1).unwrap();
        m.freeze_beta();
        assert_eq!(m.masked_len(), 8);
        let (_, grad) = m.entropy_loss_and_grad(&[0.5, -0.5]).unwrap();
        assert_eq!(grad.len(), 8);
    }
}
