//! Data-efficiency sweep: how much fine-tuning buys at each level of
//! realistic-data availability.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{fit_normalizer, WindowedScenario};
use crate::error::{Error, Result};
use crate::metrics::report::evaluate;
use crate::model::{train, DelayModel, ModelConfig, TrainConfig, TrainData};
use crate::transfer::{finetune, BlockPolicy, DonorSnapshot, FinetuneConfig, TransferMethod};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub real_scenario_count: usize,
    pub scratch_mape_pct: f64,
    pub finetuned_mape_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    pub points: Vec<EfficiencyPoint>,
    pub seeds_averaged: usize,
}

impl EfficiencyCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("real_scenario_count,scratch_mape_pct,finetuned_mape_pct,seeds_averaged\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.real_scenario_count, p.scratch_mape_pct, p.finetuned_mape_pct, self.seeds_averaged
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// Training-subset sizes, strictly increasing.
    pub counts: Vec<usize>,
    /// One independent run per seed; results are averaged per count.
    pub seeds: Vec<u64>,
    /// Architecture and training settings for the from-scratch runs.
    pub model: ModelConfig,
    pub scratch: TrainConfig,
    /// Fine-tuning settings; the policy defaults to freeze-encoding /
    /// fine-tune-MPA / re-train-readout.
    pub finetune: FinetuneConfig,
    pub policy: BlockPolicy,
}

/// For each (count, seed): sample that many scenarios from the pool, train
/// one model from scratch and fine-tune one from the donor, and evaluate
/// both on the fixed evaluation split. Cells run in parallel; results are
/// deterministic in the seed list.
pub fn efficiency_sweep(
    donor: &DonorSnapshot,
    pool: &[WindowedScenario],
    validation: &[WindowedScenario],
    evaluation: &[WindowedScenario],
    cfg: &SweepConfig,
) -> Result<EfficiencyCurve> {
    if cfg.counts.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::config("sweep needs at least one count and one seed"));
    }
    if !cfg.counts.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::config("sweep counts must be strictly increasing"));
    }
    if *cfg.counts.last().unwrap() > pool.len() {
        return Err(Error::config(format!(
            "sweep count {} exceeds the real-scenario pool of {}",
            cfg.counts.last().unwrap(),
            pool.len()
        )));
    }
    if evaluation.is_empty() {
        return Err(Error::data("sweep evaluation split is empty"));
    }
    for eval_scenario in evaluation {
        if pool.iter().any(|p| p.scenario_id == eval_scenario.scenario_id) {
            return Err(Error::config(format!(
                "evaluation scenario {} also appears in the training pool",
                eval_scenario.scenario_id
            )));
        }
    }

    let cells: Vec<(usize, u64)> = cfg
        .counts
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();

    let results: Vec<(usize, f64, f64)> = cells
        .par_iter()
        .map(|&(count, seed)| -> Result<(usize, f64, f64)> {
            let mut indices: Vec<usize> = (0..pool.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            indices.shuffle(&mut rng);
            let subset: Vec<WindowedScenario> =
                indices[..count].iter().map(|&i| pool[i].clone()).collect();
            let data = TrainData { training: &subset, validation };

            // from scratch: fresh init and a normalizer fit on what little
            // data the run has
            let scratch_normalizer = fit_normalizer(&subset)?;
            let scratch_model = DelayModel::init(cfg.model.clone(), scratch_normalizer, seed)?;
            let scratch_cfg = TrainConfig { seed, ..cfg.scratch.clone() };
            let (scratch_trained, _) = train(scratch_model, &data, &scratch_cfg)?;
            let scratch_mape = evaluate(&scratch_trained, evaluation)?.mape_pct;

            // fine-tuned from the donor
            let ft_cfg = FinetuneConfig { seed, ..cfg.finetune.clone() };
            let method = TransferMethod::Manual { policy: cfg.policy };
            let (ft_model, _) = finetune(donor, &method, &data, &ft_cfg)?;
            let ft_mape = evaluate(&ft_model, evaluation)?.mape_pct;

            Ok((count, scratch_mape, ft_mape))
        })
        .collect::<Result<Vec<_>>>()?;

    let points = cfg
        .counts
        .iter()
        .map(|&n| {
            let (mut scratch_sum, mut ft_sum, mut k) = (0.0, 0.0, 0usize);
            for &(count, s, f) in &results {
                if count == n {
                    scratch_sum += s;
                    ft_sum += f;
                    k += 1;
                }
            }
            EfficiencyPoint {
                real_scenario_count: n,
                scratch_mape_pct: scratch_sum / k as f64,
                finetuned_mape_pct: ft_sum / k as f64,
            }
        })
        .collect();

    Ok(EfficiencyCurve { points, seeds_averaged: cfg.seeds.len() })
}
