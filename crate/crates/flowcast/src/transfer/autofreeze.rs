//! Gradient-triggered block freezing.
//!
//! All donor weights start trainable. After each epoch, a block freezes once
//! its gradient norm has stayed below `eta` (relative to its first-epoch
//! norm) for `k` consecutive epochs. Freezing is monotone and at least one
//! block always stays trainable.

use crate::autodiff::{Block, ParamStore};
use crate::error::Result;
use crate::model::{BlockNorms, TrainHooks};

/// Pure freeze decision over a per-epoch gradient-norm history.
///
/// Returns the frozen flag per block in [`Block::ALL`] order after the last
/// recorded epoch. The relative threshold compares each epoch's norm to the
/// first epoch's; the comparison is strict, so `eta = 0` never freezes.
pub fn autofreeze_update(history: &[BlockNorms], eta: f64, k: usize) -> [bool; 3] {
    let mut frozen = [false; 3];
    if history.is_empty() {
        return frozen;
    }
    let k = k.max(1);
    let baseline = history[0].norms;
    let mut consecutive = [0usize; 3];
    for epoch in history {
        for b in 0..3 {
            let ratio = if baseline[b] > 0.0 {
                epoch.norms[b] / baseline[b]
            } else if epoch.norms[b] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            if ratio < eta {
                consecutive[b] += 1;
            } else {
                consecutive[b] = 0;
            }
        }
        // freeze in block order, refusing a freeze that would empty the
        // trainable set
        for b in 0..3 {
            if !frozen[b] && consecutive[b] >= k {
                let unfrozen_others = frozen.iter().enumerate().filter(|(i, f)| *i != b && !**f).count();
                if unfrozen_others > 0 {
                    frozen[b] = true;
                }
            }
        }
    }
    frozen
}

/// Training hook applying the freeze decisions to the live store.
pub struct AutoFreezeHook {
    pub eta: f64,
    pub k: usize,
    history: Vec<BlockNorms>,
}

impl AutoFreezeHook {
    pub fn new(eta: f64, k: usize) -> Self {
        Self { eta, k, history: Vec::new() }
    }

    pub fn history(&self) -> &[BlockNorms] {
        &self.history
    }
}

impl TrainHooks for AutoFreezeHook {
    fn after_epoch(
        &mut self,
        _epoch: usize,
        norms: &BlockNorms,
        store: &mut ParamStore,
    ) -> Result<()> {
        self.history.push(*norms);
        let frozen = autofreeze_update(&self.history, self.eta, self.k);
        for (i, block) in Block::ALL.iter().enumerate() {
            if frozen[i] {
                store.set_block_trainable(*block, false);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norms(e: f64, m: f64, r: f64) -> BlockNorms {
        BlockNorms { norms: [e, m, r] }
    }

    #[test]
    fn eta_zero_never_freezes() {
        let history = vec![norms(1.0, 1.0, 1.0), norms(0.0, 0.0, 0.0), norms(0.0, 0.0, 0.0)];
        assert_eq!(autofreeze_update(&history, 0.0, 1), [false; 3]);
    }

    #[test]
    fn huge_eta_freezes_all_but_the_guarded_last_block() {
        let history: Vec<BlockNorms> = (0..3).map(|_| norms(1.0, 1.0, 1.0)).collect();
        let frozen = autofreeze_update(&history, 1e9, 3);
        assert_eq!(frozen, [true, true, false], "readout is the guarded survivor");
    }

    #[test]
    fn dip_shorter_than_k_does_not_freeze() {
        // MPA ratio dips below eta for k−1 epochs, then recovers
        let eta = 0.5;
        let history = vec![
            norms(1.0, 1.0, 1.0),
            norms(1.0, 0.1, 1.0), // dip 1
            norms(1.0, 0.1, 1.0), // dip 2
            norms(1.0, 0.9, 1.0), // recovery
            norms(1.0, 0.1, 1.0), // dip 1 again
        ];
        let frozen = autofreeze_update(&history, eta, 3);
        assert_eq!(frozen, [false, false, false]);

        // one more consecutive dip completes k = 3
        let mut longer = history.clone();
        longer.push(norms(1.0, 0.1, 1.0));
        longer.push(norms(1.0, 0.1, 1.0));
        let frozen = autofreeze_update(&longer, eta, 3);
        assert_eq!(frozen, [false, true, false]);
    }

    #[test]
    fn freezing_is_monotone_over_epochs() {
        let mut history = Vec::new();
        let mut prev = [false; 3];
        for e in 0..20 {
            // encoding decays fast, mpa oscillates, readout stays high
            let enc = if e == 0 { 1.0 } else { 0.01 };
            let mpa = if e % 3 == 0 { 1.0 } else { 0.05 };
            history.push(norms(enc, mpa, 1.0));
            let now = autofreeze_update(&history, 0.3, 2);
            for b in 0..3 {
                assert!(!prev[b] || now[b], "block {b} unfroze at epoch {e}");
            }
            assert!(now.iter().any(|f| !f), "all blocks frozen at epoch {e}");
            prev = now;
        }
        assert_eq!(prev, [true, true, false]);
    }
}
