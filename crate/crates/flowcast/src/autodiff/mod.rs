//! Minimal reverse-mode differentiation substrate.
//!
//! Everything the delay model needs and nothing more: a dynamic tape of
//! vector-valued ops ([`tape`]), named block-tagged parameters ([`store`]),
//! MLP/GRU parameter bundles ([`layers`]) and an Adam optimizer ([`optim`]).
//! All arithmetic is f64 so finite-difference checks can run tight.

pub mod layers;
pub mod optim;
pub mod store;
pub mod tape;

pub use layers::{Activation, GruSpec, MlpSpec};
pub use optim::{optimizer_step, OptimizerState};
pub use store::{Block, Param, ParamStore};
pub use tape::{Gradients, Tape, TapeParams, Var};
