//! Transfer strategies for adapting a donor model to scarce realistic data.
//!
//! Manual strategies assign one of {freeze, fine-tune, re-train} to each of
//! the model's three blocks; only assignments respecting block dependencies
//! are valid, eight in total. Automated strategies skip the manual choice:
//! gradient-triggered freezing ([`AutoFreezeHook`]), a starting-point weight
//! penalty ([`L2spHook`]), and a masked optimal-transport penalty on
//! post-MPA embeddings ([`GtotHook`]).

mod autofreeze;
mod finetune;
mod gtot;
mod l2sp;
mod policy;
mod sinkhorn;

pub use autofreeze::{autofreeze_update, AutoFreezeHook};
pub use finetune::{finetune, FinetuneConfig, TransferMethod};
pub use gtot::{entity_mask, gtot_distance, window_embedding_values, GtotHook};
pub use l2sp::{add_l2sp_penalty, l2sp_penalty, L2spHook};
pub use policy::{
    all_policies, apply_policy, enumerate_valid_policies, BlockAction, BlockPolicy, DonorSnapshot,
};
pub use sinkhorn::{sinkhorn_distance, sinkhorn_plan, MaskedCost};
