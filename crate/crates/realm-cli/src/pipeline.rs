//! Glue between the config and the core library: dataset construction,
//! pretraining, engine assembly, and full adaptation runs. The acceptance
//! suite drives experiments through these functions so CLI runs and tests
//! share one code path.

use realm_core::adapt::{AdaptEngine, GateConfig, OptimizerConfig, RunSummary, StepRecord};
use realm_core::data::{
    corrupt, make_blobs, parse_labeled_csv, shuffle_stream, Stream, SyntheticShift,
};
use realm_core::model::{pretrain, LabeledSample, PretrainReport, ToyClassifier};
use realm_core::rng::{derive_seed, streams};
use realm_core::robust_loss::RobustParams;

use crate::config::{DataSource, RunConfig};
use crate::{CliError, CliResult};

/// Synthetic-shift parameters taken from the config.
pub fn build_shift(config: &RunConfig) -> SyntheticShift {
    SyntheticShift {
        k: config.k,
        d_in: config.d_in,
        n_source: config.n_source,
        n_target: config.n_target,
        blob_separation: config.blob_separation,
        corruption: config.corruption,
        severity: config.severity,
        seed: config.seed,
    }
}

/// Labeled source set for pretraining.
pub fn source_dataset(config: &RunConfig) -> CliResult<Vec<LabeledSample>> {
    match config.data {
        DataSource::Synthetic => {
            let (source, _) = make_blobs(&build_shift(config))?;
            Ok(source)
        }
        DataSource::Csv => {
            let text = std::fs::read_to_string(&config.csv_source)?;
            Ok(parse_labeled_csv(&text)?)
        }
    }
}

/// Shuffled target stream. Synthetic targets are corrupted at the configured
/// severity; CSV targets are used as-is.
pub fn target_stream(config: &RunConfig) -> CliResult<Stream> {
    let target = match config.data {
        DataSource::Synthetic => {
            let (_, clean) = make_blobs(&build_shift(config))?;
            corrupt(
                &clean,
                config.corruption,
                config.severity,
                derive_seed(config.seed, streams::CORRUPTION),
            )?
        }
        DataSource::Csv => {
            let text = std::fs::read_to_string(&config.csv_target)?;
            parse_labeled_csv(&text)?
        }
    };
    Ok(shuffle_stream(&target, config.seed)?)
}

/// Initializes and pretrains the source model.
pub fn pretrain_model(config: &RunConfig) -> CliResult<(ToyClassifier, PretrainReport)> {
    let mut model = ToyClassifier::new(
        config.d_in,
        config.d_feat,
        config.k,
        derive_seed(config.seed, streams::MODEL_INIT),
    )?;
    let dataset = source_dataset(config)?;
    let report = pretrain(
        &mut model,
        &dataset,
        config.pretrain_epochs,
        config.pretrain_lr,
        derive_seed(config.seed, streams::PRETRAIN),
    )?;
    Ok((model, report))
}

/// Assembles the adaptation engine for a pretrained model, applying the
/// configured parameter mask.
pub fn build_engine(config: &RunConfig, mut model: ToyClassifier) -> CliResult<AdaptEngine> {
    if config.freeze_beta {
        model.freeze_beta();
    }
    let strategy = config.build_strategy()?;
    let params = RobustParams::new(config.alpha0, config.resolved_lambda0(), 1.0)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let gate = GateConfig {
        decay: config.ema_decay,
        threshold: config.div_threshold,
        input: config.gate_input,
    };
    let opt = OptimizerConfig {
        lr_theta: config.lr_theta,
        momentum: config.momentum,
        lr_alpha_lambda: config.resolved_lr_alpha_lambda(),
    };
    AdaptEngine::new(model, strategy, params, gate, opt, config.seed)
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Full single-run pipeline: pretrain, build the stream, adapt, summarize.
pub fn run_adaptation(config: &RunConfig) -> CliResult<(Vec<StepRecord>, RunSummary, PretrainReport)> {
    let (model, pretrain_report) = pretrain_model(config)?;
    let (records, summary) = adapt_pretrained(config, model)?;
    Ok((records, summary, pretrain_report))
}

/// Adaptation run against an already-pretrained model.
pub fn adapt_pretrained(
    config: &RunConfig,
    model: ToyClassifier,
) -> CliResult<(Vec<StepRecord>, RunSummary)> {
    let mut engine = build_engine(config, model)?;
    let stream = target_stream(config)?;
    Ok(engine.run_stream(&stream)?)
}
