//! Fine-tuning entry point: builds the receiver for a transfer method and
//! runs the training loop with the method's hooks at a diminished learning
//! rate.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{train_with_hooks, DelayModel, TrainConfig, TrainData, TrainHistory, TrainHooks};
use crate::transfer::autofreeze::AutoFreezeHook;
use crate::transfer::gtot::GtotHook;
use crate::transfer::l2sp::L2spHook;
use crate::transfer::policy::{apply_policy, BlockPolicy, DonorSnapshot};

/// Which transfer strategy drives the fine-tuning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransferMethod {
    /// Hand-picked per-block actions.
    Manual { policy: BlockPolicy },
    /// Freeze blocks whose relative gradient norm stays below `eta` for `k`
    /// consecutive epochs.
    AutoFreeze { eta: f64, k: usize },
    /// Quadratic pull toward donor weights (α) and toward zero for fresh
    /// weights (β).
    L2sp { alpha: f64, beta: f64 },
    /// Masked optimal-transport penalty on post-MPA embeddings, weight λ.
    Gtot { lambda: f64, epsilon: f64, iterations: usize },
}

impl TransferMethod {
    /// Defaults for the automated methods.
    pub fn autofreeze_default() -> Self {
        TransferMethod::AutoFreeze { eta: 0.1, k: 3 }
    }

    pub fn l2sp_default() -> Self {
        TransferMethod::L2sp { alpha: 1e-2, beta: 1e-2 }
    }

    pub fn gtot_default() -> Self {
        TransferMethod::Gtot { lambda: 0.1, epsilon: 1e-2, iterations: 50 }
    }

    pub fn label(&self) -> String {
        match self {
            TransferMethod::Manual { policy } => format!("manual:{policy}"),
            TransferMethod::AutoFreeze { .. } => "autofreeze".into(),
            TransferMethod::L2sp { .. } => "l2sp".into(),
            TransferMethod::Gtot { .. } => "gtot".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    /// Explicit fine-tuning rate; defaults to a tenth of the donor's.
    pub learning_rate: Option<f64>,
    pub donor_learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl FinetuneConfig {
    pub fn effective_learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or(self.donor_learning_rate / 10.0)
    }
}

/// Builds the receiver for `method` and fine-tunes it on the given data.
/// The donor snapshot stays untouched; its normalizer travels with the
/// receiver so realistic data is normalized into the donor's feature space.
pub fn finetune(
    donor: &DonorSnapshot,
    method: &TransferMethod,
    data: &TrainData,
    cfg: &FinetuneConfig,
) -> Result<(DelayModel, TrainHistory)> {
    let receiver = match method {
        TransferMethod::Manual { policy } => apply_policy(donor, policy, cfg.seed)?,
        _ => donor.all_finetune_receiver(),
    };
    let train_cfg = TrainConfig {
        learning_rate: cfg.effective_learning_rate(),
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
        seed: cfg.seed,
    };
    struct NoHooks;
    impl TrainHooks for NoHooks {}

    match method {
        TransferMethod::Manual { .. } => {
            train_with_hooks(receiver, data, &train_cfg, &mut NoHooks)
        }
        TransferMethod::AutoFreeze { eta, k } => {
            let mut hook = AutoFreezeHook::new(*eta, *k);
            train_with_hooks(receiver, data, &train_cfg, &mut hook)
        }
        TransferMethod::L2sp { alpha, beta } => {
            let mut hook = L2spHook { donor: donor.store().clone(), alpha: *alpha, beta: *beta };
            train_with_hooks(receiver, data, &train_cfg, &mut hook)
        }
        TransferMethod::Gtot { lambda, epsilon, iterations } => {
            let mut hook = GtotHook::new(donor.model().clone(), *lambda, *epsilon, *iterations);
            train_with_hooks(receiver, data, &train_cfg, &mut hook)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Block;
    use crate::dataio::{fit_normalizer, WindowedScenario};
    use crate::model::{train, ModelConfig};

    fn toy_data(n: usize) -> Vec<WindowedScenario> {
        (0..n)
            .map(|i| crate::testutil::toy_windowed(i as u32, 2, 0.3, 500 + i as u64))
            .collect()
    }

    fn trained_donor(data: &[WindowedScenario]) -> DonorSnapshot {
        let normalizer = fit_normalizer(data).unwrap();
        let model = DelayModel::init(ModelConfig::tiny(), normalizer, 77).unwrap();
        let cfg = TrainConfig { learning_rate: 1e-3, max_epochs: 5, patience: 5, seed: 3 };
        let (donor, _) = train(
            model,
            &TrainData { training: &data[..2], validation: &data[2..] },
            &cfg,
        )
        .unwrap();
        DonorSnapshot::new(donor)
    }

    fn finetune_cfg(epochs: usize) -> FinetuneConfig {
        FinetuneConfig {
            learning_rate: None,
            donor_learning_rate: 1e-3,
            max_epochs: epochs,
            patience: epochs.max(1),
            seed: 9,
        }
    }

    #[test]
    fn default_learning_rate_is_a_tenth_of_the_donors() {
        let cfg = finetune_cfg(1);
        assert_eq!(cfg.effective_learning_rate(), 1e-4);
        let explicit = FinetuneConfig { learning_rate: Some(5e-5), ..cfg };
        assert_eq!(explicit.effective_learning_rate(), 5e-5);
    }

    #[test]
    fn zero_epoch_manual_run_equals_apply_policy_output() {
        let data = toy_data(3);
        let donor = trained_donor(&data);
        let policy = BlockPolicy::parse("FFT").unwrap();
        let method = TransferMethod::Manual { policy };
        let cfg = finetune_cfg(0);
        let (model, history) = finetune(
            &donor,
            &method,
            &TrainData { training: &data[..2], validation: &data[2..] },
            &cfg,
        )
        .unwrap();
        assert!(history.epochs.is_empty());
        let expected = apply_policy(&donor, &policy, cfg.seed).unwrap();
        for (name, p) in expected.store.iter() {
            let got = model.store.get(name).unwrap();
            assert_eq!(p.values, got.values, "{name}");
            assert_eq!(p.trainable, got.trainable, "{name}");
        }
    }

    #[test]
    fn all_finetune_receiver_starts_bitwise_equal_to_donor() {
        let data = toy_data(3);
        let donor = trained_donor(&data);
        let receiver = apply_policy(&donor, &BlockPolicy::parse("TTT").unwrap(), 1).unwrap();
        for (name, p) in donor.store().iter() {
            let q = receiver.store.get(name).unwrap();
            let a: Vec<u64> = p.values.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = q.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b, "{name}");
            assert!(q.trainable);
        }
    }

    #[test]
    fn retrained_block_differs_from_donor_and_frozen_block_survives_training() {
        let data = toy_data(3);
        let donor = trained_donor(&data);
        let policy = BlockPolicy::parse("FTR").unwrap();
        let method = TransferMethod::Manual { policy };
        let cfg = finetune_cfg(3);

        let receiver = apply_policy(&donor, &policy, cfg.seed).unwrap();
        let readout_differs = receiver
            .store
            .iter()
            .filter(|(_, p)| p.block == Block::Readout && !p.values.is_empty())
            .any(|(name, p)| p.values != donor.store().get(name).unwrap().values);
        assert!(readout_differs, "re-trained readout should start from fresh init");

        let (model, _) = finetune(
            &donor,
            &method,
            &TrainData { training: &data[..2], validation: &data[2..] },
            &cfg,
        )
        .unwrap();
        for (name, p) in model.store.iter() {
            match p.block {
                Block::Encoding => {
                    let donor_p = donor.store().get(name).unwrap();
                    let a: Vec<u64> = p.values.iter().map(|v| v.to_bits()).collect();
                    let b: Vec<u64> = donor_p.values.iter().map(|v| v.to_bits()).collect();
                    assert_eq!(a, b, "frozen `{name}` must stay bitwise donor-equal");
                    assert!(!p.trainable);
                }
                Block::Mpa | Block::Readout => assert!(p.trainable),
            }
        }
    }

    #[test]
    fn invalid_policy_is_rejected_before_any_training() {
        let data = toy_data(3);
        let donor = trained_donor(&data);
        let policy = BlockPolicy::parse("FFF").unwrap();
        let err = finetune(
            &donor,
            &TransferMethod::Manual { policy },
            &TrainData { training: &data[..2], validation: &data[2..] },
            &finetune_cfg(1),
        )
        .unwrap_err();
        assert!(err.to_string().contains("no trainable parameters"));
    }

    #[test]
    fn l2sp_with_zero_weights_reproduces_plain_finetuning_exactly() {
        let data = toy_data(3);
        let donor = trained_donor(&data);
        let split = TrainData { training: &data[..2], validation: &data[2..] };
        let cfg = finetune_cfg(4);
        let plain = finetune(
            &donor,
            &TransferMethod::Manual { policy: BlockPolicy::parse("TTT").unwrap() },
            &split,
            &cfg,
        )
        .unwrap();
        let zeroed = finetune(
            &donor,
            &TransferMethod::L2sp { alpha: 0.0, beta: 0.0 },
            &split,
            &cfg,
        )
        .unwrap();
        assert_eq!(plain.1, zeroed.1, "histories must match to the bit");
    }

    #[test]
    fn gtot_with_zero_lambda_reproduces_plain_finetuning_exactly() {
        let data = toy_data(3);
        let donor = trained_donor(&data);
        let split = TrainData { training: &data[..2], validation: &data[2..] };
        let cfg = finetune_cfg(4);
        let plain = finetune(
            &donor,
            &TransferMethod::Manual { policy: BlockPolicy::parse("TTT").unwrap() },
            &split,
            &cfg,
        )
        .unwrap();
        let zeroed = finetune(
            &donor,
            &TransferMethod::Gtot { lambda: 0.0, epsilon: 1e-2, iterations: 50 },
            &split,
            &cfg,
        )
        .unwrap();
        assert_eq!(plain.1, zeroed.1);
    }

    #[test]
    fn autofreeze_run_keeps_at_least_one_block_trainable() {
        let data = toy_data(3);
        let donor = trained_donor(&data);
        let (model, _) = finetune(
            &donor,
            &TransferMethod::AutoFreeze { eta: 1e9, k: 1 },
            &TrainData { training: &data[..2], validation: &data[2..] },
            &finetune_cfg(4),
        )
        .unwrap();
        assert!(model.store.num_trainable() > 0);
    }
}
