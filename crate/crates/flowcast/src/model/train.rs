//! Training loop: per-scenario Adam steps, masked relative-error loss,
//! early stopping on validation error with best-checkpoint restore.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{optimizer_step, Block, OptimizerState, ParamStore, Var};
use crate::dataio::WindowedScenario;
use crate::error::{Error, Result};
use crate::model::net::{build_forward, mape_loss, DelayModel, ForwardPass};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop after this many epochs without validation improvement.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, max_epochs: 200, patience: 10, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-scenario training loss (MAPE %, before any penalty terms).
    pub train_mape_pct: f64,
    /// Pooled validation MAPE % over all active cells.
    pub val_mape_pct: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_mape_pct: f64,
}

impl TrainHistory {
    /// CSV with one row per epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mape_pct,val_mape_pct\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_mape_pct, e.val_mape_pct));
        }
        out
    }
}

/// Mean per-block gradient L2 norm over one epoch's optimizer steps,
/// indexed by [`Block::ALL`] order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockNorms {
    pub norms: [f64; 3],
}

impl BlockNorms {
    pub fn get(&self, block: Block) -> f64 {
        self.norms[Block::ALL.iter().position(|b| *b == block).unwrap()]
    }
}

/// Extension points for transfer strategies: loss augmentation runs on the
/// live tape before backward; the epoch hook can flip trainability flags.
pub trait TrainHooks {
    fn wants_embeddings(&self) -> bool {
        false
    }

    fn augment_loss(
        &mut self,
        _pass: &mut ForwardPass,
        _store: &ParamStore,
        _scenario: &WindowedScenario,
        loss: Var,
    ) -> Result<Var> {
        Ok(loss)
    }

    fn after_epoch(
        &mut self,
        _epoch: usize,
        _norms: &BlockNorms,
        _store: &mut ParamStore,
    ) -> Result<()> {
        Ok(())
    }
}

struct NoHooks;
impl TrainHooks for NoHooks {}

pub struct TrainData<'a> {
    pub training: &'a [WindowedScenario],
    pub validation: &'a [WindowedScenario],
}

/// Trains until validation stops improving, then returns the model at its
/// best validation epoch plus the full loss history.
pub fn train(model: DelayModel, data: &TrainData, cfg: &TrainConfig) -> Result<(DelayModel, TrainHistory)> {
    train_with_hooks(model, data, cfg, &mut NoHooks)
}

pub fn train_with_hooks(
    mut model: DelayModel,
    data: &TrainData,
    cfg: &TrainConfig,
    hooks: &mut dyn TrainHooks,
) -> Result<(DelayModel, TrainHistory)> {
    if data.training.is_empty() {
        return Err(Error::data("training split is empty"));
    }
    if data.validation.is_empty() {
        return Err(Error::data("validation split is empty"));
    }
    if cfg.max_epochs == 0 {
        let val = validation_mape_pct(&model, data.validation)?;
        return Ok((model, TrainHistory { epochs: vec![], best_epoch: 0, best_val_mape_pct: val }));
    }

    let mut optimizer = OptimizerState::new(cfg.learning_rate);
    let mut history = TrainHistory::default();
    let mut best_store: Option<ParamStore> = None;
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut wait = 0usize;

    let mut order: Vec<usize> = (0..data.training.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        let mut norm_sums = [0.0f64; 3];
        let mut steps = 0usize;
        for &si in &order {
            let scenario = &data.training[si];
            let mut pass = build_forward(
                &model.config,
                &model.store,
                &model.normalizer,
                scenario,
                hooks.wants_embeddings(),
            )?;
            let Some(data_loss) = mape_loss(&mut pass, scenario)? else {
                continue; // scenario with no active cells contributes nothing
            };
            let data_loss_value = pass.tape.scalar(data_loss);
            if !data_loss_value.is_finite() {
                return Err(Error::numeric(format!(
                    "loss diverged at epoch {epoch}, scenario {}",
                    scenario.scenario_id
                )));
            }
            loss_sum += data_loss_value;
            loss_count += 1;

            let total_loss = hooks.augment_loss(&mut pass, &model.store, scenario, data_loss)?;
            let grads = pass.tape.backward(total_loss)?;
            pass.params.accumulate_grads(&mut model.store, &grads);
            for (slot, block) in norm_sums.iter_mut().zip(Block::ALL) {
                *slot += model.store.block_grad_norm(block);
            }
            steps += 1;
            optimizer_step(&mut model.store, &mut optimizer)?;
        }
        if loss_count == 0 {
            return Err(Error::data("no active flow-windows in the training split"));
        }

        let train_mape_pct = 100.0 * loss_sum / loss_count as f64;
        let val_mape_pct = validation_mape_pct(&model, data.validation)?;
        if !val_mape_pct.is_finite() {
            return Err(Error::numeric(format!("validation loss diverged at epoch {epoch}")));
        }
        history.epochs.push(EpochStats { epoch, train_mape_pct, val_mape_pct });

        if val_mape_pct < best_val {
            best_val = val_mape_pct;
            best_epoch = epoch;
            best_store = Some(model.store.clone());
            wait = 0;
        } else {
            wait += 1;
        }

        let norms = BlockNorms {
            norms: [
                norm_sums[0] / steps as f64,
                norm_sums[1] / steps as f64,
                norm_sums[2] / steps as f64,
            ],
        };
        hooks.after_epoch(epoch, &norms, &mut model.store)?;

        if wait >= cfg.patience {
            break;
        }
    }

    model.store = best_store.expect("at least one epoch ran");
    history.best_epoch = best_epoch;
    history.best_val_mape_pct = best_val;
    Ok((model, history))
}

/// Pooled MAPE % over all active cells of the given scenarios, forward-only.
pub(crate) fn validation_mape_pct(model: &DelayModel, scenarios: &[WindowedScenario]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for scenario in scenarios {
        let preds = model.predict(scenario)?;
        for row in preds.rows {
            if row.target_s <= 0.0 {
                return Err(Error::data(format!(
                    "scenario {}: non-positive target", scenario.scenario_id
                )));
            }
            sum += (row.predicted_s - row.target_s).abs() / row.target_s;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::data("validation split has no active flow-windows"));
    }
    Ok(100.0 * sum / count as f64)
}
