//! Desk-scale pipeline for predicting per-flow packet delay across the
//! sim-to-real gap.
//!
//! The crate bundles four things:
//!
//! * [`netsim`] — a deterministic discrete-event simulator of store-and-forward
//!   FIFO networks. It runs in two fidelity modes: `Ideal`, and `Perturbed`,
//!   which adds per-hop processing delay, capacity derating and timing jitter
//!   to stand in for hardware effects that idealized simulation misses.
//! * [`dataio`] — turns packet traces into windowed supervised samples
//!   (fixed-length temporal windows, per-flow-window features and mean-delay
//!   targets), plus normalization and dataset partitioning.
//! * [`model`] — a windowed message-passing delay predictor over the
//!   flow/queue/link graph, built on the reverse-mode autodiff substrate in
//!   [`autodiff`]. Queue embeddings carry memory across windows.
//! * [`transfer`] + [`metrics`] — transfer strategies for adapting a model
//!   trained on ideal data to scarce perturbed data (manual block policies,
//!   AutoFreeze, L2-SP, masked-OT embedding regularization), and the
//!   evaluation machinery (MAPE, error PDFs, data-efficiency sweeps) that
//!   quantifies what each strategy buys.
//!
//! The `flowcast` binary drives the full pipeline (generate → train →
//! transfer → eval → sweep) from a single JSON experiment config; the
//! `examples/` directory shows each capability in isolation.

pub mod autodiff;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod metrics;
pub mod model;
pub mod netsim;
pub mod transfer;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
