//! Deterministic discrete-event simulator of store-and-forward FIFO
//! networks.
//!
//! A [`Scenario`] (topology + flows + traffic models + seed) simulates to a
//! [`PacketTrace`]. Two fidelity modes share the same traffic draws:
//! `Ideal` is the textbook queueing model; `Perturbed` derates link
//! capacities and adds per-hop processing delay and timing jitter,
//! producing a systematic gap between the two that downstream transfer
//! experiments try to close.

mod gen;
mod sim;
mod trace;
mod traffic;
mod types;

pub use gen::{gen_scenarios, RangeF, RangeU, ScenarioTemplate, TopologySpec, TrafficSpec};
pub use sim::{simulate, simulate_instrumented, QueueOrderLog};
pub use trace::{PacketRecord, PacketTrace};
pub use types::{
    Fidelity, Flow, FlowId, Link, LinkId, NodeId, PacketSize, QueueCfg, QueueId, Scenario,
    Topology, TrafficModel, SCENARIO_SCHEMA,
};
