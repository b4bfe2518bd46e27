//! Manual block policies: enumeration, validation and application.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Block, ParamStore};
use crate::error::{Error, Result};
use crate::model::DelayModel;

/// What fine-tuning does with one block's weights.
///
/// The ordering encodes the dependency rule: along the block sequence
/// (encoding → message passing → readout), the action may only stay or
/// escalate, never relax.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockAction {
    /// Copy donor weights and keep them fixed.
    Freeze,
    /// Copy donor weights and let training adjust them.
    FineTune,
    /// Discard donor weights; initialize fresh and train from scratch.
    Retrain,
}

impl BlockAction {
    pub fn letter(self) -> char {
        match self {
            BlockAction::Freeze => 'F',
            BlockAction::FineTune => 'T',
            BlockAction::Retrain => 'R',
        }
    }

    pub fn from_letter(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'F' => Ok(BlockAction::Freeze),
            'T' => Ok(BlockAction::FineTune),
            'R' => Ok(BlockAction::Retrain),
            other => Err(Error::config(format!(
                "unknown block action `{other}` (expected F, T or R)"
            ))),
        }
    }
}

/// Per-block actions in model order: encoding, message passing, readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockPolicy {
    pub encoding: BlockAction,
    pub mpa: BlockAction,
    pub readout: BlockAction,
}

impl BlockPolicy {
    pub fn new(encoding: BlockAction, mpa: BlockAction, readout: BlockAction) -> Self {
        Self { encoding, mpa, readout }
    }

    pub fn actions(&self) -> [(Block, BlockAction); 3] {
        [
            (Block::Encoding, self.encoding),
            (Block::Mpa, self.mpa),
            (Block::Readout, self.readout),
        ]
    }

    /// Three-letter code, e.g. `FTR` = freeze encoding, fine-tune MPA,
    /// re-train readout.
    pub fn code(&self) -> String {
        [self.encoding, self.mpa, self.readout]
            .iter()
            .map(|a| a.letter())
            .collect()
    }

    pub fn parse(code: &str) -> Result<Self> {
        let chars: Vec<char> = code.chars().collect();
        if chars.len() != 3 {
            return Err(Error::config(format!(
                "policy code `{code}` must be exactly 3 letters over {{F, T, R}}"
            )));
        }
        let policy = Self::new(
            BlockAction::from_letter(chars[0])?,
            BlockAction::from_letter(chars[1])?,
            BlockAction::from_letter(chars[2])?,
        );
        Ok(policy)
    }

    /// Checks the three validity guidelines, naming the violated one.
    pub fn validate(&self) -> Result<()> {
        let seq = [self.encoding, self.mpa, self.readout];
        for pair in seq.windows(2) {
            if pair[1] < pair[0] {
                return Err(Error::config(format!(
                    "invalid policy {}: a {} block may not be preceded by a {} block \
                     (block-dependency guideline)",
                    self.code(),
                    action_name(pair[1]),
                    action_name(pair[0]),
                )));
            }
        }
        if seq.iter().all(|a| *a == BlockAction::Freeze) {
            return Err(Error::config(format!(
                "invalid policy {}: freezing all blocks leaves no trainable parameters",
                self.code()
            )));
        }
        if seq.iter().all(|a| *a == BlockAction::Retrain) {
            return Err(Error::config(format!(
                "invalid policy {}: re-training all blocks transfers nothing",
                self.code()
            )));
        }
        Ok(())
    }
}

fn action_name(a: BlockAction) -> &'static str {
    match a {
        BlockAction::Freeze => "frozen",
        BlockAction::FineTune => "fine-tuned",
        BlockAction::Retrain => "re-trained",
    }
}

impl std::fmt::Display for BlockPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.code())
    }
}

/// All 27 raw assignments, fixed order (for brute-force comparisons).
pub fn all_policies() -> Vec<BlockPolicy> {
    const ACTIONS: [BlockAction; 3] =
        [BlockAction::Freeze, BlockAction::FineTune, BlockAction::Retrain];
    let mut out = Vec::with_capacity(27);
    for e in ACTIONS {
        for m in ACTIONS {
            for r in ACTIONS {
                out.push(BlockPolicy::new(e, m, r));
            }
        }
    }
    out
}

/// The valid policies: action sequences that never relax along the block
/// order, excluding all-freeze and all-retrain. Exactly eight.
pub fn enumerate_valid_policies() -> Vec<BlockPolicy> {
    all_policies()
        .into_iter()
        .filter(|p| p.validate().is_ok())
        .collect()
}

/// A trained donor model held immutable during fine-tuning.
#[derive(Clone, Debug)]
pub struct DonorSnapshot {
    model: DelayModel,
}

impl DonorSnapshot {
    pub fn new(model: DelayModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &DelayModel {
        &self.model
    }

    pub fn store(&self) -> &ParamStore {
        &self.model.store
    }

    /// A receiver with every donor weight copied and trainable — the
    /// starting point of the automated strategies.
    pub fn all_finetune_receiver(&self) -> DelayModel {
        let mut receiver = self.model.clone();
        for (_, p) in receiver.store.iter_mut() {
            p.trainable = true;
            p.fresh = false;
        }
        receiver
    }
}

/// Builds the receiver for a manual policy: frozen and fine-tuned blocks
/// copy donor weights (frozen ones locked), re-trained blocks draw a fresh
/// seeded initialization.
pub fn apply_policy(
    donor: &DonorSnapshot,
    policy: &BlockPolicy,
    retrain_seed: u64,
) -> Result<DelayModel> {
    policy.validate()?;
    let mut receiver = donor.model().clone();
    let needs_fresh = policy.actions().iter().any(|(_, a)| *a == BlockAction::Retrain);
    let fresh = if needs_fresh {
        Some(DelayModel::fresh_store_scaled(
            &receiver.config,
            receiver.normalizer.target_mean_s,
            retrain_seed,
        )?)
    } else {
        None
    };
    for (name, p) in receiver.store.iter_mut() {
        let action = policy
            .actions()
            .iter()
            .find(|(b, _)| *b == p.block)
            .map(|(_, a)| *a)
            .expect("every block has an action");
        match action {
            BlockAction::Freeze => {
                p.trainable = false;
                p.fresh = false;
            }
            BlockAction::FineTune => {
                p.trainable = true;
                p.fresh = false;
            }
            BlockAction::Retrain => {
                let source = fresh.as_ref().expect("fresh store built");
                p.values = source.get(name).expect("same layer set").values.clone();
                p.trainable = true;
                p.fresh = true;
            }
        }
    }
    Ok(receiver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn exactly_the_eight_expected_codes() {
        let codes: BTreeSet<String> =
            enumerate_valid_policies().iter().map(|p| p.code()).collect();
        let expected: BTreeSet<String> = ["FFT", "FFR", "FTT", "FTR", "FRR", "TTT", "TTR", "TRR"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(codes, expected);
    }

    #[test]
    fn enumeration_matches_brute_force_guideline_filter() {
        // independent statement of the three guidelines
        let brute: Vec<BlockPolicy> = all_policies()
            .into_iter()
            .filter(|p| {
                let seq = [p.encoding, p.mpa, p.readout];
                let no_relax = seq.windows(2).all(|w| {
                    let after_retrained_ok = w[0] != BlockAction::Retrain
                        || w[1] == BlockAction::Retrain;
                    let after_finetuned_ok =
                        w[0] != BlockAction::FineTune || w[1] != BlockAction::Freeze;
                    after_retrained_ok && after_finetuned_ok
                });
                let not_all_frozen = seq != [BlockAction::Freeze; 3];
                let not_all_retrained = seq != [BlockAction::Retrain; 3];
                no_relax && not_all_frozen && not_all_retrained
            })
            .collect();
        assert_eq!(brute.len(), 8);
        assert_eq!(enumerate_valid_policies(), brute);
    }

    #[test]
    fn frozen_after_retrained_is_rejected_with_guideline() {
        let err = BlockPolicy::parse("FRF").unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("block-dependency"), "got: {err}");
        let err = BlockPolicy::parse("RTF").unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("block-dependency"));
    }

    #[test]
    fn all_freeze_and_all_retrain_are_rejected() {
        let err = BlockPolicy::parse("FFF").unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("no trainable parameters"));
        let err = BlockPolicy::parse("RRR").unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("transfers nothing"));
    }

    #[test]
    fn code_round_trips() {
        for p in enumerate_valid_policies() {
            assert_eq!(BlockPolicy::parse(&p.code()).unwrap(), p);
        }
        assert!(BlockPolicy::parse("FT").is_err());
        assert!(BlockPolicy::parse("FTX").is_err());
    }
}
