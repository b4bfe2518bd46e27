//! Subcommand implementations. Each writes its artifacts under the config's
//! output directory and appends a manifest record.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::cli::config::ExperimentConfig;
use crate::cli::manifest::{append_manifest, content_hash, file_hash, ManifestEntry};
use crate::dataio::{
    fit_normalizer, read_windowed, windowize, write_windowed, DatasetPartition, WindowedScenario,
};
use crate::error::{Error, Result};
use crate::metrics::{efficiency_sweep, error_pdf, evaluate, SweepConfig};
use crate::model::{
    gradient_check, train, DelayModel, TrainConfig, TrainData,
};
use crate::netsim::{gen_scenarios, simulate, Fidelity, ScenarioTemplate};
use crate::transfer::{
    enumerate_valid_policies, finetune, BlockPolicy, DonorSnapshot, FinetuneConfig, TransferMethod,
};

pub struct GenerateOptions {
    pub force: bool,
    pub write_traces: bool,
}

const SOURCES: [&str; 2] = ["simulated", "real"];

fn scenario_dir(out: &Path, source: &str) -> PathBuf {
    out.join("scenarios").join(source)
}

fn dataset_dir(out: &Path, source: &str) -> PathBuf {
    out.join("datasets").join(source)
}

fn partition_path(out: &Path, source: &str) -> PathBuf {
    out.join("partitions").join(format!("{source}.json"))
}

fn checkpoint_path(out: &Path, name: &str) -> PathBuf {
    out.join("checkpoints").join(format!("{name}.json"))
}

fn history_path(out: &Path, name: &str) -> PathBuf {
    out.join("history").join(format!("{name}.csv"))
}

fn config_hash_of(config: &ExperimentConfig) -> Result<String> {
    Ok(content_hash(serde_json::to_string(config).map_err(Error::data)?.as_bytes()))
}

/// Generates both dataset trees (ideal-mode "simulated", perturbed-mode
/// "real"): scenario files, windowed datasets and partition files.
pub fn cmd_generate(config: &ExperimentConfig, opts: &GenerateOptions) -> Result<()> {
    let started = Instant::now();
    let out = config.output_dir();

    for source in SOURCES {
        for dir in [scenario_dir(&out, source), dataset_dir(&out, source)] {
            if dir.exists() && !opts.force {
                return Err(Error::config(format!(
                    "{} already exists; pass --force to overwrite",
                    dir.display()
                )));
            }
        }
    }

    let mut metrics = BTreeMap::new();
    for source in SOURCES {
        let (template, count, seed) = source_template(config, source);
        let scenarios = gen_scenarios(&template, count, seed)?;

        let sdir = scenario_dir(&out, source);
        let ddir = dataset_dir(&out, source);
        std::fs::create_dir_all(&sdir)?;
        std::fs::create_dir_all(&ddir)?;
        if opts.write_traces {
            std::fs::create_dir_all(out.join("traces").join(source))?;
        }

        let window_length = config.dataset.window_length_s;
        let windowed: Vec<WindowedScenario> = scenarios
            .par_iter()
            .map(|scenario| -> Result<WindowedScenario> {
                let trace = simulate(scenario)?;
                if opts.write_traces {
                    let tpath = out
                        .join("traces")
                        .join(source)
                        .join(format!("{:04}.ndjson", scenario.id));
                    trace.write_ndjson(&tpath)?;
                }
                windowize(&trace, scenario, window_length)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut packets_total = 0u64;
        for (scenario, w) in scenarios.iter().zip(&windowed) {
            scenario.write_json(&sdir.join(format!("{:04}.json", scenario.id)))?;
            write_windowed(&ddir.join(format!("{:04}.ndjson", scenario.id)), w)?;
            packets_total += w.total_packets();
        }

        let ids: Vec<u32> = scenarios.iter().map(|s| s.id).collect();
        let split_spec = match source {
            "simulated" => &config.dataset.simulated.split,
            _ => &config.dataset.real.split,
        };
        let partition = split_spec.apply(&ids)?;
        std::fs::create_dir_all(out.join("partitions"))?;
        partition.write_json(&partition_path(&out, source))?;

        metrics.insert(format!("{source}_scenarios"), scenarios.len() as f64);
        metrics.insert(format!("{source}_packets"), packets_total as f64);
    }

    append_manifest(
        &out,
        &ManifestEntry {
            command: "generate".into(),
            config_hash: config_hash_of(config)?,
            input_hashes: BTreeMap::new(),
            seeds: vec![config.dataset.simulated.seed, config.dataset.real.seed],
            metrics,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    )
}

fn source_template(config: &ExperimentConfig, source: &str) -> (ScenarioTemplate, usize, u64) {
    match source {
        "simulated" => {
            let mut t = config.dataset.template.clone();
            t.fidelity = Fidelity::Ideal;
            (t, config.dataset.simulated.count, config.dataset.simulated.seed)
        }
        _ => {
            let mut t = config
                .dataset
                .real
                .template
                .clone()
                .unwrap_or_else(|| config.dataset.template.clone());
            t.fidelity = config.dataset.real.effective_fidelity();
            (t, config.dataset.real.count, config.dataset.real.seed)
        }
    }
}

/// Loads one split of a generated dataset tree.
pub(crate) fn load_split(
    out: &Path,
    source: &str,
    split: &str,
) -> Result<Vec<WindowedScenario>> {
    let partition = DatasetPartition::read_json(&partition_path(out, source))?;
    let ids = match split {
        "training" => &partition.training,
        "validation" => &partition.validation,
        "evaluation" => &partition.evaluation,
        other => {
            return Err(Error::config(format!(
                "unknown split `{other}` (expected training, validation or evaluation)"
            )))
        }
    };
    if ids.is_empty() {
        return Err(Error::data(format!("{source} {split} split is empty")));
    }
    ids.iter()
        .map(|id| read_windowed(&dataset_dir(out, source).join(format!("{id:04}.ndjson"))))
        .collect()
}

/// Trains the donor on the simulated tree and writes its checkpoint and
/// loss history.
pub fn cmd_train(config: &ExperimentConfig) -> Result<()> {
    let started = Instant::now();
    let out = config.output_dir();
    let training = load_split(&out, "simulated", "training")?;
    let validation = load_split(&out, "simulated", "validation")?;

    let normalizer = fit_normalizer(&training)?;
    let model = DelayModel::init(config.model.clone(), normalizer, config.train.seed)?;
    let (trained, history) = train(
        model,
        &TrainData { training: &training, validation: &validation },
        &config.train,
    )?;

    std::fs::create_dir_all(out.join("checkpoints"))?;
    std::fs::create_dir_all(out.join("history"))?;
    let ckpt = checkpoint_path(&out, "donor");
    trained.save(&ckpt)?;
    std::fs::write(history_path(&out, "donor"), history.to_csv())?;

    append_manifest(
        &out,
        &ManifestEntry {
            command: "train".into(),
            config_hash: config_hash_of(config)?,
            input_hashes: BTreeMap::from([("donor_checkpoint".into(), file_hash(&ckpt)?)]),
            seeds: vec![config.train.seed],
            metrics: BTreeMap::from([
                ("best_val_mape_pct".into(), history.best_val_mape_pct),
                ("best_epoch".into(), history.best_epoch as f64),
                ("epochs_run".into(), history.epochs.len() as f64),
            ]),
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    )
}

/// Resolves `--method` / `--policy` overrides against the config section.
pub(crate) fn resolve_method(
    config: &ExperimentConfig,
    method_flag: Option<&str>,
    policy_flag: Option<&str>,
) -> Result<TransferMethod> {
    let parse_policy = |code: &str| -> Result<BlockPolicy> {
        let policy = BlockPolicy::parse(code).and_then(|p| {
            p.validate()?;
            Ok(p)
        });
        policy.map_err(|e| {
            let valid: Vec<String> =
                enumerate_valid_policies().iter().map(|p| p.code()).collect();
            Error::config(format!("{e}; valid policy codes: {}", valid.join(", ")))
        })
    };

    let mut method = match method_flag {
        None => config.transfer.method.clone(),
        Some(flag) => {
            let (kind, arg) = match flag.split_once(':') {
                Some((k, a)) => (k, Some(a)),
                None => (flag, None),
            };
            match kind {
                "manual" => {
                    let code = arg.ok_or_else(|| {
                        Error::config("manual method needs a policy, e.g. --method manual:FTR")
                    })?;
                    TransferMethod::Manual { policy: parse_policy(code)? }
                }
                "autofreeze" => match &config.transfer.method {
                    m @ TransferMethod::AutoFreeze { .. } => m.clone(),
                    _ => TransferMethod::autofreeze_default(),
                },
                "l2sp" => match &config.transfer.method {
                    m @ TransferMethod::L2sp { .. } => m.clone(),
                    _ => TransferMethod::l2sp_default(),
                },
                "gtot" => match &config.transfer.method {
                    m @ TransferMethod::Gtot { .. } => m.clone(),
                    _ => TransferMethod::gtot_default(),
                },
                other => {
                    return Err(Error::config(format!(
                        "unknown transfer method `{other}` (expected manual:<POLICY>, autofreeze, l2sp or gtot)"
                    )))
                }
            }
        }
    };
    if let Some(code) = policy_flag {
        method = TransferMethod::Manual { policy: parse_policy(code)? };
    }
    Ok(method)
}

/// Fine-tunes the donor checkpoint on the real tree with the selected
/// method.
pub fn cmd_transfer(
    config: &ExperimentConfig,
    method_flag: Option<&str>,
    policy_flag: Option<&str>,
) -> Result<()> {
    let started = Instant::now();
    let out = config.output_dir();
    let method = resolve_method(config, method_flag, policy_flag)?;

    let donor_path = checkpoint_path(&out, "donor");
    if !donor_path.exists() {
        return Err(Error::data(format!(
            "donor checkpoint {} not found; run `flowcast train` first",
            donor_path.display()
        )));
    }
    let donor = DonorSnapshot::new(DelayModel::load(&donor_path)?);

    let training = load_split(&out, "real", "training")?;
    let validation = load_split(&out, "real", "validation")?;
    let cfg = FinetuneConfig {
        learning_rate: config.transfer.learning_rate,
        donor_learning_rate: config.train.learning_rate,
        max_epochs: config.transfer.max_epochs,
        patience: config.transfer.patience,
        seed: config.transfer.seed,
    };
    let (model, history) = finetune(
        &donor,
        &method,
        &TrainData { training: &training, validation: &validation },
        &cfg,
    )?;

    let label = method.label().replace(':', "_");
    std::fs::create_dir_all(out.join("checkpoints"))?;
    std::fs::create_dir_all(out.join("history"))?;
    let ckpt = checkpoint_path(&out, &format!("transfer_{label}"));
    model.save(&ckpt)?;
    std::fs::write(history_path(&out, &format!("transfer_{label}")), history.to_csv())?;

    append_manifest(
        &out,
        &ManifestEntry {
            command: format!("transfer --method {}", method.label()),
            config_hash: config_hash_of(config)?,
            input_hashes: BTreeMap::from([
                ("donor_checkpoint".into(), file_hash(&donor_path)?),
                ("transfer_checkpoint".into(), file_hash(&ckpt)?),
            ]),
            seeds: vec![config.transfer.seed],
            metrics: BTreeMap::from([
                ("best_val_mape_pct".into(), history.best_val_mape_pct),
                ("best_epoch".into(), history.best_epoch as f64),
            ]),
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    )
}

/// Evaluates a checkpoint on one split of one dataset tree; writes a
/// summary CSV, per-sample NDJSON and a signed-error histogram CSV.
pub fn cmd_eval(
    config: &ExperimentConfig,
    checkpoint: &Path,
    dataset: &str,
    split: &str,
    out_name: Option<&str>,
) -> Result<()> {
    let started = Instant::now();
    let out = config.output_dir();
    if !SOURCES.contains(&dataset) {
        return Err(Error::config(format!(
            "unknown dataset `{dataset}` (expected simulated or real)"
        )));
    }
    let model = DelayModel::load(checkpoint)?;
    let scenarios = load_split(&out, dataset, split)?;
    let report = evaluate(&model, &scenarios)?;

    let stem = checkpoint
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "model".into());
    let name = out_name
        .map(str::to_string)
        .unwrap_or_else(|| format!("{stem}_{dataset}_{split}"));
    let rdir = out.join("reports");
    std::fs::create_dir_all(&rdir)?;
    report.write_csv(&rdir.join(format!("{name}.csv")))?;
    report.write_ndjson(&rdir.join(format!("{name}.ndjson")))?;
    let hist = error_pdf(
        &report.predictions.predictions(),
        &report.predictions.targets(),
        41,
    )?;
    std::fs::write(rdir.join(format!("{name}_pdf.csv")), hist.to_csv())?;

    println!("{name}: MAPE {:.3}% over {} flow-windows", report.mape_pct, report.count);

    append_manifest(
        &out,
        &ManifestEntry {
            command: format!("eval --dataset {dataset} --split {split}"),
            config_hash: config_hash_of(config)?,
            input_hashes: BTreeMap::from([("checkpoint".into(), file_hash(checkpoint)?)]),
            seeds: vec![],
            metrics: BTreeMap::from([
                ("mape_pct".into(), report.mape_pct),
                ("samples".into(), report.count as f64),
            ]),
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    )
}

/// Scratch-vs-fine-tuned comparison across real-data subset sizes.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    counts_flag: Option<&str>,
    seeds_flag: Option<&str>,
) -> Result<()> {
    let started = Instant::now();
    let out = config.output_dir();

    let parse_list = |flag: &str, what: &str| -> Result<Vec<u64>> {
        flag.split(',')
            .map(|v| {
                v.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::config(format!("bad {what} `{v}`: {e}")))
            })
            .collect()
    };
    let counts: Vec<usize> = match counts_flag {
        Some(flag) => parse_list(flag, "count")?.into_iter().map(|v| v as usize).collect(),
        None => config.sweep.counts.clone(),
    };
    let seeds: Vec<u64> = match seeds_flag {
        Some(flag) => parse_list(flag, "seed")?,
        None => config.sweep.seeds.clone(),
    };

    let donor_path = checkpoint_path(&out, "donor");
    let donor = DonorSnapshot::new(DelayModel::load(&donor_path)?);
    let pool = load_split(&out, "real", "training")?;
    let validation = load_split(&out, "real", "validation")?;
    let evaluation = load_split(&out, "real", "evaluation")?;

    let cfg = SweepConfig {
        counts: counts.clone(),
        seeds: seeds.clone(),
        model: config.model.clone(),
        scratch: TrainConfig {
            seed: 0, // overridden per cell
            ..config.train.clone()
        },
        finetune: FinetuneConfig {
            learning_rate: config.transfer.learning_rate,
            donor_learning_rate: config.train.learning_rate,
            max_epochs: config.transfer.max_epochs,
            patience: config.transfer.patience,
            seed: 0, // overridden per cell
        },
        policy: BlockPolicy::parse(&config.sweep.policy)?,
    };
    let curve = efficiency_sweep(&donor, &pool, &validation, &evaluation, &cfg)?;

    let sdir = out.join("sweep");
    std::fs::create_dir_all(&sdir)?;
    std::fs::write(sdir.join("efficiency.csv"), curve.to_csv())?;
    for p in &curve.points {
        println!(
            "n={}: scratch {:.3}% vs fine-tuned {:.3}%",
            p.real_scenario_count, p.scratch_mape_pct, p.finetuned_mape_pct
        );
    }

    append_manifest(
        &out,
        &ManifestEntry {
            command: "sweep".into(),
            config_hash: config_hash_of(config)?,
            input_hashes: BTreeMap::from([("donor_checkpoint".into(), file_hash(&donor_path)?)]),
            seeds,
            metrics: curve
                .points
                .iter()
                .flat_map(|p| {
                    [
                        (format!("scratch_mape_pct_n{}", p.real_scenario_count), p.scratch_mape_pct),
                        (format!("finetuned_mape_pct_n{}", p.real_scenario_count), p.finetuned_mape_pct),
                    ]
                })
                .collect(),
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    )
}

/// Runs the finite-difference suite on the built-in scenario; one line per
/// parameter tensor.
pub fn cmd_gradcheck() -> Result<()> {
    let report = gradient_check(1e-4, None)?;
    for item in &report.items {
        println!(
            "{} {} (max rel err {:.3e})",
            if item.passed { "PASS" } else { "FAIL" },
            item.name,
            item.max_rel_err
        );
    }
    println!(
        "{}: {} parameters checked at tolerance {:.0e}",
        if report.passed() { "PASS" } else { "FAIL" },
        report.parameters_checked,
        report.tolerance
    );
    if !report.passed() {
        return Err(Error::numeric("gradient check failed"));
    }
    Ok(())
}
