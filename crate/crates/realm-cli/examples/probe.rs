// Scratch experiment driver used while choosing default hyperparameters.

use realm_cli::config::RunConfig;
use realm_cli::pipeline;
use realm_core::adapt::StrategyKind;
use realm_core::data::{corrupt, make_blobs};
use realm_core::model::pretrain;
use realm_core::rng::{derive_seed, streams};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().map(String::as_str).unwrap_or("gap");
    match mode {
        "gap" => gap_probe(&args[1..]),
        "strategies" => strategy_probe(&args[1..]),
        "gate" => gate_probe(&args[1..]),
        "gbceiling" => gb_ceiling_probe(&args[1..]),
        _ => eprintln!("unknown probe '{mode}'"),
    }
}

// Supervised ceiling for gamma/beta-only adaptation: cross-entropy SGD on the
// modulation parameters alone, trained directly on the corrupted target.
// Pass `rows multi` to give the random features log-spaced per-row scales.
fn gb_ceiling_probe(rest: &[String]) {
    let multi_scale = rest.chunks(2).any(|c| c.len() == 2 && c[0] == "rows" && c[1] == "multi");
    let rest: Vec<String> = rest
        .chunks(2)
        .filter(|c| !(c.len() == 2 && c[0] == "rows"))
        .flat_map(|c| c.to_vec())
        .collect();
    for seed in [7u64, 11, 13] {
        let mut config = RunConfig::default();
        config.seed = seed;
        apply_pairs(&mut config, &rest);
        let shift = pipeline::build_shift(&config);
        let (source, _) = make_blobs(&shift).unwrap();
        let mut model = realm_core::model::ToyClassifier::new(
            config.d_in,
            config.d_feat,
            config.k,
            derive_seed(config.seed, streams::MODEL_INIT),
        )
        .unwrap();
        if multi_scale {
            for j in 0..model.d_feat {
                let frac = j as f64 / (model.d_feat - 1) as f64;
                let scale = 0.25 * 16f64.powf(frac);
                for i in 0..model.d_in {
                    model.w1[j * model.d_in + i] *= scale;
                }
            }
        }
        let sparse = std::env::var("SPARSE_KEEP").ok().and_then(|v| v.parse::<usize>().ok());
        if let Some(keep) = sparse {
            // Keep `keep` randomly chosen input dims per feature, rescaled to
            // preserve the row norm.
            let mut rng = realm_core::rng::SplitMix64::new(derive_seed(config.seed, 99));
            let rescale = (config.d_in as f64 / keep as f64).sqrt();
            for j in 0..model.d_feat {
                let mut dims: Vec<usize> = (0..model.d_in).collect();
                rng.shuffle(&mut dims);
                for &i in &dims[keep..] {
                    model.w1[j * model.d_in + i] = 0.0;
                }
                for &i in &dims[..keep] {
                    model.w1[j * model.d_in + i] *= rescale;
                }
            }
        }
        let report = pretrain(
            &mut model,
            &source,
            config.pretrain_epochs,
            config.pretrain_lr,
            derive_seed(config.seed, streams::PRETRAIN),
        )
        .unwrap();
        let (_, clean_target) = make_blobs(&shift).unwrap();
        let corrupted = corrupt(
            &clean_target,
            config.corruption,
            config.severity,
            derive_seed(config.seed, streams::CORRUPTION),
        )
        .unwrap();
        let noadapt = model.accuracy(&corrupted).unwrap();

        let mut gb = model.clone();
        let lr = 0.05;
        for _ in 0..30 {
            for s in &corrupted {
                let (_, probs) = gb.forward(&s.x).unwrap();
                let mut delta: Vec<f64> = probs.as_slice().to_vec();
                delta[s.label] -= 1.0;
                // dz = w2^T delta; d gamma = dz * h; d beta = dz
                let mut a = vec![0.0; gb.d_feat];
                for (j, slot) in a.iter_mut().enumerate() {
                    let mut acc = gb.b1[j];
                    for (i, &xi) in s.x.iter().enumerate() {
                        acc += gb.w1[j * gb.d_in + i] * xi;
                    }
                    *slot = acc.tanh();
                }
                for j in 0..gb.d_feat {
                    let mut dz = 0.0;
                    for (c, &d) in delta.iter().enumerate() {
                        dz += gb.w2[c * gb.d_feat + j] * d;
                    }
                    gb.gamma[j] -= lr * dz * a[j];
                    gb.beta[j] -= lr * dz;
                }
            }
        }
        let ceiling = gb.accuracy(&corrupted).unwrap();
        println!(
            "seed {seed}: source {:.4} noadapt {noadapt:.4} gb_ceiling {ceiling:.4} room {:+.4}",
            report.final_accuracy,
            ceiling - noadapt
        );
    }
}

fn apply_pairs(config: &mut RunConfig, pairs: &[String]) {
    let mut i = 0;
    while i + 1 < pairs.len() {
        config.apply(&pairs[i], &pairs[i + 1]).unwrap();
        i += 2;
    }
}

// Frozen-model accuracy on corrupted data vs the nearest-mean (Bayes) rule
// and vs a gamma/beta-only supervised oracle, under varying feature-map
// saturation.
fn gap_probe(rest: &[String]) {
    for w1_scale in [1.0, 2.0, 4.0] {
        for seed in [7u64, 11, 13] {
            let mut config = RunConfig::default();
            config.seed = seed;
            apply_pairs(&mut config, rest);
            let shift = pipeline::build_shift(&config);
            let (source, clean_target) = make_blobs(&shift).unwrap();
            let corrupted = corrupt(
                &clean_target,
                config.corruption,
                config.severity,
                derive_seed(config.seed, streams::CORRUPTION),
            )
            .unwrap();

            // Model with rescaled random features.
            let mut model = realm_core::model::ToyClassifier::new(
                config.d_in,
                config.d_feat,
                config.k,
                derive_seed(config.seed, streams::MODEL_INIT),
            )
            .unwrap();
            for w in &mut model.w1 {
                *w *= w1_scale;
            }
            let report = pretrain(
                &mut model,
                &source,
                config.pretrain_epochs,
                config.pretrain_lr,
                derive_seed(config.seed, streams::PRETRAIN),
            )
            .unwrap();
            let noadapt_acc = model.accuracy(&corrupted).unwrap();

            // Nearest-mean rule = Bayes for this mixture.
            let sep = config.blob_separation;
            let mut correct = 0usize;
            for s in &corrupted {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for c in 0..config.k {
                    let angle = std::f64::consts::TAU * c as f64 / config.k as f64;
                    let dx = s.x[0] - sep * angle.cos();
                    let dy = s.x[1] - sep * angle.sin();
                    let d = dx * dx + dy * dy;
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                if best == s.label {
                    correct += 1;
                }
            }
            let bayes_acc = correct as f64 / corrupted.len() as f64;

            // Architecture ceiling: everything retrained on the corrupted set.
            let mut oracle = model.clone();
            pretrain(&mut oracle, &corrupted, 40, 0.05, 99).unwrap();
            let oracle_acc = oracle.accuracy(&corrupted).unwrap();
            println!(
                "w1x{w1_scale} seed {seed}: source {:.4} noadapt {:.4} bayes {:.4} oracle {:.4} bayes_gap {:+.4}",
                report.final_accuracy,
                noadapt_acc,
                bayes_acc,
                oracle_acc,
                bayes_acc - noadapt_acc,
            );
        }
    }
}

// Accuracy of each strategy over a set of seeds with optional overrides.
fn strategy_probe(rest: &[String]) {
    let seeds = [7u64, 11, 13, 17, 19];
    for kind in [StrategyKind::NoAdapt, StrategyKind::Tent, StrategyKind::Eata, StrategyKind::Realm] {
        let mut accs = Vec::new();
        let mut updates = Vec::new();
        let mut collapses = 0;
        for &seed in &seeds {
            let mut config = RunConfig::default();
            config.seed = seed;
            config.strategy = kind;
            apply_pairs(&mut config, rest);
            let (_, summary, _) = pipeline::run_adaptation(&config).unwrap();
            accs.push(summary.final_accuracy.unwrap());
            updates.push(summary.updates_applied);
            if summary.collapse {
                collapses += 1;
            }
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        println!(
            "{:<8} mean_acc {:.4} accs {:?} updates {:?} collapses {collapses}",
            kind.name(),
            mean,
            accs.iter().map(|a| (a * 1e4).round() / 1e4).collect::<Vec<_>>(),
            updates
        );
    }
}

// Distribution of gate decisions and entropy over the stream.
fn gate_probe(rest: &[String]) {
    let mut config = RunConfig::default();
    apply_pairs(&mut config, rest);
    let (records, summary, _) = pipeline::run_adaptation(&config).unwrap();
    let n = records.len();
    let gate_open = records.iter().filter(|r| r.s_div).count();
    let mean_entropy: f64 = records.iter().map(|r| r.raw_entropy).sum::<f64>() / n as f64;
    let below_lambda = records
        .iter()
        .filter(|r| r.raw_entropy < config.resolved_lambda0())
        .count();
    let quarters: Vec<usize> = records
        .chunks(n / 4)
        .map(|c| c.iter().filter(|r| r.updated).count())
        .collect();
    println!(
        "strategy {} seed {}: acc {:.4} updates {} gate_open {gate_open}/{n} mean_H {mean_entropy:.3} below_lambda {below_lambda} updates_by_quarter {quarters:?} alpha {:.3} lambda {:.3}",
        summary.strategy,
        config.seed,
        summary.final_accuracy.unwrap(),
        summary.updates_applied,
        summary.final_alpha,
        summary.final_lambda,
    );
}
