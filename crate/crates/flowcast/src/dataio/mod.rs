//! Packet traces → windowed supervised samples.
//!
//! Splits each scenario into fixed-length temporal windows (100 ms by
//! default) and aggregates per-(flow, window) features and mean-delay
//! targets, the training currency of the delay model. Also owns feature
//! normalization and dataset partitioning.

mod ndjson;
mod normalize;
mod partition;
mod window;

pub use ndjson::{read_windowed, write_windowed, DATASET_SCHEMA};
pub use normalize::{fit_normalizer, ColumnStats, Normalizer, FLOW_FEATURES};
pub use partition::{split, split_counts, DatasetPartition, PARTITION_SCHEMA};
pub use window::{
    windowize, FlowSpec, FlowWindow, GraphSpec, HopRef, LinkSpec, QueueSpec, WindowSample,
    WindowedScenario, DEFAULT_WINDOW_S,
};
