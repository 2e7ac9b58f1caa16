//! Online single-sample adaptation engine.
//!
//! One engine owns one model and processes a stream strictly in order with
//! batch size one. Strategies:
//!
//! - `NoAdapt`: prediction only.
//! - `Tent`: entropy minimization on every sample.
//! - `Eata`: entropy weighted by the reliability weight `s_ent` and the
//!   diversity gate; updates are skipped when the combined weight is zero.
//! - `Realm`: minimizes the robust loss of the entropy while learning the
//!   loss shape and scale online; the diversity gate multiplies the
//!   already-computed gradients, so no gradient ever flows through it.
//!
//! Non-finite losses or gradients never corrupt state: the step is skipped
//! and flagged in the record.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::Serialize;

use crate::data::Stream;
use crate::math::sqrt;
use crate::model::{argmax, ToyClassifier};
use crate::robust_loss::{
    rho_general, rho_grad, rho_squared, rho_squared_grad, s_ent, RobustGrad, RobustParams,
};
use crate::{Error, Result};

/// Default collapse-detector window and concentration threshold.
pub const COLLAPSE_WINDOW: usize = 200;
pub const COLLAPSE_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StrategyKind {
    NoAdapt,
    Tent,
    Eata,
    Realm,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::NoAdapt => "noadapt",
            StrategyKind::Tent => "tent",
            StrategyKind::Eata => "eata",
            StrategyKind::Realm => "realm",
        }
    }
}

/// Adaptation strategy plus the robust-loss options. The option flags are
/// only meaningful for `Realm`, except `use_div_gate`, which is mandatory
/// for `Eata`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Strategy {
    pub kind: StrategyKind,
    /// Use the squared-argument loss variant.
    pub use_squared: bool,
    /// Set the gradient-scale constant to a snapshot of the initial scale.
    pub use_scale_factor: bool,
    /// Apply the prediction-diversity gate.
    pub use_div_gate: bool,
}

impl Strategy {
    pub fn no_adapt() -> Self {
        Strategy { kind: StrategyKind::NoAdapt, use_squared: false, use_scale_factor: false, use_div_gate: false }
    }

    pub fn tent() -> Self {
        Strategy { kind: StrategyKind::Tent, use_squared: false, use_scale_factor: false, use_div_gate: false }
    }

    pub fn eata() -> Self {
        Strategy { kind: StrategyKind::Eata, use_squared: false, use_scale_factor: false, use_div_gate: true }
    }

    pub fn realm() -> Self {
        Strategy { kind: StrategyKind::Realm, use_squared: false, use_scale_factor: true, use_div_gate: true }
    }

    pub fn with_squared(mut self, on: bool) -> Self {
        self.use_squared = on;
        self
    }

    pub fn with_scale_factor(mut self, on: bool) -> Self {
        self.use_scale_factor = on;
        self
    }

    pub fn with_div_gate(mut self, on: bool) -> Self {
        self.use_div_gate = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            StrategyKind::NoAdapt | StrategyKind::Tent => {
                if self.use_squared || self.use_scale_factor || self.use_div_gate {
                    return Err(Error::invalid(
                        "robust-loss options are only meaningful for realm",
                    ));
                }
            }
            StrategyKind::Eata => {
                if !self.use_div_gate {
                    return Err(Error::invalid("the diversity gate is mandatory for eata"));
                }
                if self.use_squared || self.use_scale_factor {
                    return Err(Error::invalid(
                        "squared/scale-factor options are only meaningful for realm",
                    ));
                }
            }
            StrategyKind::Realm => {}
        }
        Ok(())
    }
}

/// Which vector the diversity gate compares against its moving average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateInput {
    Probs,
    Logits,
}

/// Diversity-gate settings.
#[derive(Debug, Clone, Copy)]
pub struct GateConfig {
    /// EMA decay; the average moves by `1 - decay` toward each admitted
    /// sample.
    pub decay: f64,
    /// Cosine-similarity threshold `d`; the gate opens when similarity drops
    /// below it.
    pub threshold: f64,
    pub input: GateInput,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { decay: 0.9, threshold: 0.4, input: GateInput::Probs }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.decay.is_finite() || !(0.0..1.0).contains(&self.decay) {
            return Err(Error::invalid("ema decay must lie in [0, 1)"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::invalid("gate threshold must be finite"));
        }
        Ok(())
    }
}

/// Exponential moving average of admitted predictions plus the cosine gate.
///
/// The first sample always passes and initializes the average. Afterwards a
/// sample passes iff its cosine similarity to the average is below the
/// threshold, and only passing samples move the average. In `Probs` mode the
/// average is renormalized to stay a probability vector.
#[derive(Debug, Clone)]
pub struct EmaTracker {
    m: Option<Vec<f64>>,
    config: GateConfig,
}

impl EmaTracker {
    pub fn new(config: GateConfig) -> Self {
        EmaTracker { m: None, config }
    }

    pub fn average(&self) -> Option<&[f64]> {
        self.m.as_deref()
    }

    /// Returns whether the sample passes, updating the average when it does.
    /// Purely a function of already-computed forward values; gradients never
    /// flow through this decision.
    pub fn gate_and_update(&mut self, v: &[f64]) -> bool {
        match &mut self.m {
            None => {
                self.m = Some(v.to_vec());
                true
            }
            Some(m) => {
                if cosine(v, m) >= self.config.threshold {
                    return false;
                }
                let decay = self.config.decay;
                for (avg, &cur) in m.iter_mut().zip(v) {
                    *avg = decay * *avg + (1.0 - decay) * cur;
                }
                if self.config.input == GateInput::Probs {
                    let sum: f64 = m.iter().sum();
                    if sum > 0.0 {
                        m.iter_mut().for_each(|x| *x /= sum);
                    }
                }
                true
            }
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (sqrt(na) * sqrt(nb))
}

/// SGD settings. Model parameters use momentum; the loss shape and scale take
/// plain gradient steps.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OptimizerConfig {
    pub lr_theta: f64,
    pub momentum: f64,
    pub lr_alpha_lambda: f64,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lr_theta.is_finite() || self.lr_theta <= 0.0 {
            return Err(Error::invalid("lr_theta must be positive"));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if !self.lr_alpha_lambda.is_finite() || self.lr_alpha_lambda <= 0.0 {
            return Err(Error::invalid("lr_alpha_lambda must be positive"));
        }
        Ok(())
    }
}

/// One row of the per-sample adaptation log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub raw_entropy: f64,
    /// Loss actually minimized this step, after the robust transform and any
    /// weights; zero when the step was skipped.
    pub effective_loss: f64,
    /// Multiplier applied to the entropy gradient (the taper/reliability
    /// weight times the gate).
    pub weight: f64,
    pub s_div: bool,
    pub pred: usize,
    pub truth: Option<usize>,
    pub updated: bool,
    pub alpha: f64,
    pub lambda: f64,
    pub anomaly: bool,
}

/// Aggregate outcome of a stream run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub strategy: String,
    pub steps_seen: u64,
    pub updates_applied: u64,
    pub anomalies: u64,
    /// Fraction of correct predictions over the whole stream; absent without
    /// labels.
    pub final_accuracy: Option<f64>,
    /// Fraction correct among the samples seen so far, one entry per step.
    pub cumulative_accuracy: Option<Vec<f64>>,
    pub collapse: bool,
    pub final_alpha: f64,
    pub final_lambda: f64,
}

/// The online adaptation engine; see the module docs for the strategy
/// semantics.
#[derive(Debug, Clone)]
pub struct AdaptEngine {
    model: ToyClassifier,
    strategy: Strategy,
    params: RobustParams,
    ema: EmaTracker,
    opt: OptimizerConfig,
    velocity: Vec<f64>,
    steps_seen: u64,
    updates_applied: u64,
    anomalies: u64,
    pub seed: u64,
}

impl AdaptEngine {
    /// Builds an engine. When the strategy asks for the scale factor, the
    /// gradient-scale constant is set to a frozen snapshot of the initial
    /// scale (it does not track the learned scale afterwards).
    pub fn new(
        model: ToyClassifier,
        strategy: Strategy,
        mut params: RobustParams,
        gate: GateConfig,
        opt: OptimizerConfig,
        seed: u64,
    ) -> Result<Self> {
        strategy.validate()?;
        gate.validate()?;
        opt.validate()?;
        model.validate()?;
        if strategy.kind == StrategyKind::Realm && strategy.use_scale_factor {
            params = RobustParams::new(params.alpha, params.lambda, params.lambda)?;
        }
        let velocity = vec![0.0; 2 * model.d_feat];
        Ok(AdaptEngine {
            model,
            strategy,
            params,
            ema: EmaTracker::new(gate),
            opt,
            velocity,
            steps_seen: 0,
            updates_applied: 0,
            anomalies: 0,
            seed,
        })
    }

    pub fn model(&self) -> &ToyClassifier {
        &self.model
    }

    pub fn params(&self) -> &RobustParams {
        &self.params
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn steps_seen(&self) -> u64 {
        self.steps_seen
    }

    pub fn updates_applied(&self) -> u64 {
        self.updates_applied
    }

    /// Processes one unlabeled sample. The optional label is recorded for
    /// offline scoring only and never influences the update.
    pub fn step(&mut self, x: &[f64], truth: Option<usize>) -> Result<StepRecord> {
        let step_idx = self.steps_seen;
        self.steps_seen += 1;
        let parts = self.model.forward_parts(x)?;
        let pred = argmax(&parts.probs);
        let (entropy, grad) = self.model.entropy_and_masked_grad(&parts);

        let mut record = StepRecord {
            step: step_idx,
            raw_entropy: entropy,
            effective_loss: 0.0,
            weight: 0.0,
            s_div: true,
            pred,
            truth,
            updated: false,
            alpha: self.params.alpha,
            lambda: self.params.lambda,
            anomaly: false,
        };

        if !entropy.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            self.anomalies += 1;
            record.anomaly = true;
            return Ok(record);
        }

        match self.strategy.kind {
            StrategyKind::NoAdapt => {}
            StrategyKind::Tent => {
                record.effective_loss = entropy;
                record.weight = 1.0;
                self.apply_theta_update(&grad, 1.0);
                record.updated = true;
            }
            StrategyKind::Eata => {
                let gate = self.ema.gate_and_update(&parts.probs);
                record.s_div = gate;
                let weight = if gate { s_ent(entropy, self.params.lambda) } else { 0.0 };
                record.weight = weight;
                record.effective_loss = weight * entropy;
                if weight > 0.0 {
                    self.apply_theta_update(&grad, weight);
                    record.updated = true;
                }
            }
            StrategyKind::Realm => {
                let gate = if self.strategy.use_div_gate {
                    let input = match self.ema_input() {
                        GateInput::Probs => &parts.probs,
                        GateInput::Logits => &parts.logits,
                    };
                    self.ema.gate_and_update(input)
                } else {
                    true
                };
                record.s_div = gate;
                if gate {
                    let (loss_value, rg) = self.robust_loss_and_grad(entropy)?;
                    if !loss_value.is_finite()
                        || !rg.d_loss.is_finite()
                        || !rg.d_alpha.is_finite()
                        || !rg.d_lambda.is_finite()
                    {
                        self.anomalies += 1;
                        record.anomaly = true;
                        return Ok(record);
                    }
                    record.effective_loss = loss_value;
                    record.weight = rg.d_loss;
                    self.apply_theta_update(&grad, rg.d_loss);
                    self.params.alpha -= self.opt.lr_alpha_lambda * rg.d_alpha;
                    self.params.lambda -= self.opt.lr_alpha_lambda * rg.d_lambda;
                    self.params.project();
                    record.alpha = self.params.alpha;
                    record.lambda = self.params.lambda;
                    record.updated = true;
                }
            }
        }

        if record.updated {
            self.updates_applied += 1;
        }
        Ok(record)
    }

    fn ema_input(&self) -> GateInput {
        self.ema.config.input
    }

    fn robust_loss_and_grad(&self, entropy: f64) -> Result<(f64, RobustGrad)> {
        if self.strategy.use_squared {
            Ok((rho_squared(entropy, &self.params)?, rho_squared_grad(entropy, &self.params)?))
        } else {
            Ok((rho_general(entropy, &self.params)?, rho_grad(entropy, &self.params)?))
        }
    }

    /// Momentum SGD on the masked modulation parameters, scaling the entropy
    /// gradient by `scale`. Buffers persist across steps and are never reset.
    fn apply_theta_update(&mut self, masked_grad: &[f64], scale: f64) {
        let d = self.model.d_feat;
        let mut slot = 0;
        for idx in 0..2 * d {
            if !self.model.adapt_mask[idx] {
                continue;
            }
            let g = scale * masked_grad[slot];
            slot += 1;
            let v = self.opt.momentum * self.velocity[idx] + g;
            self.velocity[idx] = v;
            if idx < d {
                self.model.gamma[idx] -= self.opt.lr_theta * v;
            } else {
                self.model.beta[idx - d] -= self.opt.lr_theta * v;
            }
        }
    }

    /// Runs the engine over a stream in order, batch size one, and summarizes
    /// the run. Labels, when present, feed the cumulative online accuracy.
    pub fn run_stream(&mut self, stream: &Stream) -> Result<(Vec<StepRecord>, RunSummary)> {
        if stream.is_empty() {
            return Err(Error::invalid("stream is empty"));
        }
        if let Some(labels) = &stream.labels {
            if labels.len() != stream.inputs.len() {
                return Err(Error::DimensionMismatch {
                    expected: stream.inputs.len(),
                    got: labels.len(),
                });
            }
        }
        let mut records = Vec::with_capacity(stream.len());
        let mut cumulative = stream.labels.as_ref().map(|_| Vec::with_capacity(stream.len()));
        let mut correct = 0usize;
        for (i, x) in stream.inputs.iter().enumerate() {
            let truth = stream.labels.as_ref().map(|l| l[i]);
            let record = self.step(x, truth)?;
            if let (Some(t), Some(curve)) = (truth, cumulative.as_mut()) {
                if record.pred == t {
                    correct += 1;
                }
                curve.push(correct as f64 / (i + 1) as f64);
            }
            records.push(record);
        }
        let collapse =
            detect_collapse(&records, COLLAPSE_WINDOW, COLLAPSE_FRACTION)?.collapsed;
        let summary = RunSummary {
            strategy: String::from(self.strategy.kind.name()),
            steps_seen: self.steps_seen,
            updates_applied: self.updates_applied,
            anomalies: self.anomalies,
            final_accuracy: cumulative.as_ref().map(|c| *c.last().unwrap()),
            cumulative_accuracy: cumulative,
            collapse,
            final_alpha: self.params.alpha,
            final_lambda: self.params.lambda,
        };
        Ok((records, summary))
    }
}

/// Per-window and overall collapse verdicts.
#[derive(Debug, Clone, Serialize)]
pub struct CollapseReport {
    /// Prediction concentration per non-overlapping window (trailing partial
    /// window ignored).
    pub per_window: Vec<bool>,
    /// True iff some window after the first is prediction-concentrated while
    /// its true labels are not themselves that concentrated.
    pub collapsed: bool,
}

/// Flags windows where at least `frac_threshold` of the predictions share one
/// class. Windows whose ground-truth labels are equally concentrated do not
/// count toward the overall verdict, and neither does the first window.
pub fn detect_collapse(
    records: &[StepRecord],
    window: usize,
    frac_threshold: f64,
) -> Result<CollapseReport> {
    if window < 10 {
        return Err(Error::invalid("window must be >= 10"));
    }
    if !(0.0..=1.0).contains(&frac_threshold) {
        return Err(Error::invalid("fraction threshold must lie in [0, 1]"));
    }
    let mut per_window = Vec::new();
    let mut collapsed = false;
    for (w_idx, chunk) in records.chunks_exact(window).enumerate() {
        let pred_frac = top_class_fraction(chunk.iter().map(|r| r.pred));
        let concentrated = pred_frac >= frac_threshold;
        per_window.push(concentrated);
        if w_idx == 0 || !concentrated {
            continue;
        }
        let truth_concentrated = if chunk.iter().all(|r| r.truth.is_some()) {
            top_class_fraction(chunk.iter().map(|r| r.truth.unwrap())) >= frac_threshold
        } else {
            false
        };
        if !truth_concentrated {
            collapsed = true;
        }
    }
    Ok(CollapseReport { per_window, collapsed })
}

fn top_class_fraction(classes: impl Iterator<Item = usize>) -> f64 {
    let mut counts: Vec<usize> = Vec::new();
    let mut total = 0usize;
    for c in classes {
        if c >= counts.len() {
            counts.resize(c + 1, 0);
        }
        counts[c] += 1;
        total += 1;
    }
    if total == 0 {
        return 0.0;
    }
    *counts.iter().max().unwrap() as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robust_loss::{ALPHA_MAX, ALPHA_MIN, LAMBDA_MAX, LAMBDA_MIN};

    fn record(step: u64, pred: usize, truth: Option<usize>) -> StepRecord {
        StepRecord {
            step,
            raw_entropy: 0.5,
            effective_loss: 0.0,
            weight: 0.0,
            s_div: true,
            pred,
            truth,
            updated: false,
            alpha: 0.15,
            lambda: 0.4,
            anomaly: false,
        }
    }

    fn engine(strategy: Strategy) -> AdaptEngine {
        let model = ToyClassifier::new(2, 8, 3, 5).unwrap();
        let params = RobustParams::new(0.15, 0.44, 1.0).unwrap();
        let opt = OptimizerConfig { lr_theta: 0.1, momentum: 0.9, lr_alpha_lambda: 0.2 };
        AdaptEngine::new(model, strategy, params, GateConfig::default(), opt, 7).unwrap()
    }

    #[test]
    fn strategy_validation_rejects_conflicts() {
        assert!(Strategy::tent().with_squared(true).validate().is_err());
        assert!(Strategy::eata().with_div_gate(false).validate().is_err());
        assert!(Strategy::eata().with_scale_factor(true).validate().is_err());
        assert!(Strategy::realm().with_squared(true).validate().is_ok());
        assert!(Strategy::no_adapt().validate().is_ok());
    }

    #[test]
    fn gate_first_sample_passes_and_initializes() {
        let mut ema = EmaTracker::new(GateConfig::default());
        assert!(ema.gate_and_update(&[0.2, 0.3, 0.5]));
        assert_eq!(ema.average().unwrap(), &[0.2, 0.3, 0.5]);
    }

    #[test]
    fn gate_blocks_identical_and_admits_orthogonal() {
        let mut ema = EmaTracker::new(GateConfig::default());
        ema.gate_and_update(&[1.0, 0.0, 0.0]);
        // Same vector: cosine 1 >= d.
        assert!(!ema.gate_and_update(&[1.0, 0.0, 0.0]));
        // Disjoint support: cosine 0 < d.
        assert!(ema.gate_and_update(&[0.0, 1.0, 0.0]));
        // Average moved and was renormalized.
        let avg = ema.average().unwrap();
        assert!((avg.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(avg[1] > 0.0);
    }

    #[test]
    fn tent_always_updates() {
        let mut e = engine(Strategy::tent());
        for i in 0..10 {
            let r = e.step(&[i as f64 * 0.3, 1.0], None).unwrap();
            assert!(r.updated);
            assert_eq!(r.weight, 1.0);
        }
        assert_eq!(e.updates_applied(), e.steps_seen());
    }

    #[test]
    fn noadapt_never_touches_model() {
        let mut e = engine(Strategy::no_adapt());
        let before = e.model().clone();
        for i in 0..20 {
            let r = e.step(&[i as f64, -1.0], Some(0)).unwrap();
            assert!(!r.updated);
        }
        assert_eq!(*e.model(), before);
        assert_eq!(e.updates_applied(), 0);
    }

    #[test]
    fn eata_skips_high_entropy_samples() {
        let mut e = engine(Strategy::eata());
        // Force a tiny threshold so every entropy exceeds it.
        e.params.lambda = LAMBDA_MIN;
        let before = e.model().clone();
        for i in 0..30 {
            let r = e.step(&[0.1 * i as f64, 0.5], None).unwrap();
            assert!(!r.updated);
            assert_eq!(r.weight, 0.0);
        }
        assert_eq!(*e.model(), before);
        assert_eq!(e.updates_applied(), 0);
    }

    #[test]
    fn counters_and_projection_invariants() {
        let mut e = engine(Strategy::realm());
        for i in 0..200 {
            let x = [2.0 * crate::math::sin(i as f64), 2.0 * crate::math::cos(i as f64 * 0.7)];
            e.step(&x, None).unwrap();
            assert!(e.updates_applied() <= e.steps_seen());
            assert!((ALPHA_MIN..=ALPHA_MAX).contains(&e.params().alpha));
            assert!((LAMBDA_MIN..=LAMBDA_MAX).contains(&e.params().lambda));
        }
    }

    #[test]
    fn frozen_parameters_never_change() {
        let mut e = engine(Strategy::tent());
        let before = e.model().clone();
        for i in 0..50 {
            e.step(&[i as f64 * 0.1, -0.4], None).unwrap();
        }
        let after = e.model();
        assert_eq!(after.w1, before.w1);
        assert_eq!(after.b1, before.b1);
        assert_eq!(after.w2, before.w2);
        assert_eq!(after.b2, before.b2);
    }

    #[test]
    fn masked_entries_stay_frozen_under_partial_mask() {
        let mut model = ToyClassifier::new(2, 8, 3, 5).unwrap();
        model.freeze_beta();
        let params = RobustParams::new(0.15, 0.44, 1.0).unwrap();
        let opt = OptimizerConfig { lr_theta: 0.5, momentum: 0.9, lr_alpha_lambda: 1.0 };
        let mut e =
            AdaptEngine::new(model.clone(), Strategy::tent(), params, GateConfig::default(), opt, 7)
                .unwrap();
        for i in 0..30 {
            e.step(&[i as f64 * 0.2, 0.3], None).unwrap();
        }
        assert_eq!(e.model().beta, model.beta);
        assert_ne!(e.model().gamma, model.gamma);
    }

    #[test]
    fn run_stream_is_deterministic() {
        let stream = Stream {
            inputs: (0..100).map(|i| vec![(i % 7) as f64 * 0.5, (i % 3) as f64 - 1.0]).collect(),
            labels: Some((0..100).map(|i| i % 3).collect()),
            shuffle_seed: 1,
        };
        let (ra, sa) = engine(Strategy::realm()).run_stream(&stream).unwrap();
        let (rb, sb) = engine(Strategy::realm()).run_stream(&stream).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(sa.updates_applied, sb.updates_applied);
        assert_eq!(sa.final_accuracy, sb.final_accuracy);
    }

    #[test]
    fn run_stream_without_labels_omits_accuracy() {
        let stream = Stream {
            inputs: (0..20).map(|i| vec![i as f64 * 0.1, 0.0]).collect(),
            labels: None,
            shuffle_seed: 1,
        };
        let (records, summary) = engine(Strategy::no_adapt()).run_stream(&stream).unwrap();
        assert_eq!(records.len(), 20);
        assert!(summary.final_accuracy.is_none());
        assert!(summary.cumulative_accuracy.is_none());
    }

    #[test]
    fn collapse_detector_flags_constant_predictions() {
        let records: Vec<StepRecord> =
            (0..600).map(|i| record(i, 1, Some((i % 3) as usize))).collect();
        let report = detect_collapse(&records, 200, 0.9).unwrap();
        assert!(report.collapsed);
        assert!(report.per_window.iter().all(|&w| w));
    }

    #[test]
    fn collapse_detector_accepts_diverse_predictions() {
        let records: Vec<StepRecord> =
            (0..600).map(|i| record(i, (i % 3) as usize, Some((i % 3) as usize))).collect();
        let report = detect_collapse(&records, 200, 0.9).unwrap();
        assert!(!report.collapsed);
    }

    #[test]
    fn collapse_ignores_windows_with_concentrated_truth() {
        // Predictions constant, but so are the labels: not a collapse.
        let records: Vec<StepRecord> = (0..600).map(|i| record(i, 2, Some(2))).collect();
        assert!(!detect_collapse(&records, 200, 0.9).unwrap().collapsed);
    }

    #[test]
    fn collapse_rejects_tiny_windows() {
        let records: Vec<StepRecord> = (0..100).map(|i| record(i, 0, None)).collect();
        assert!(detect_collapse(&records, 5, 0.9).is_err());
    }

    #[test]
    fn anomalous_step_is_flagged_and_skipped() {
        let mut e = engine(Strategy::tent());
        // Blow up the modulation so the forward pass goes non-finite.
        e.model.gamma.iter_mut().for_each(|g| *g = f64::INFINITY);
        let r = e.step(&[1.0, 1.0], None).unwrap();
        assert!(r.anomaly);
        assert!(!r.updated);
        assert_eq!(e.updates_applied(), 0);
    }
}
