//! Shared builders for unit tests.

use crate::dataio::{windowize, WindowedScenario};
use crate::netsim::{
    simulate, Fidelity, Flow, Link, PacketSize, QueueCfg, Scenario, Topology, TrafficModel,
};

/// Two-link chain with `flows` flows: even ids cross both hops, odd ids only
/// the second.
pub(crate) fn toy_scenario(id: u32, flows: u32, duration_s: f64, seed: u64) -> Scenario {
    let topology = Topology {
        nodes: vec![0, 1, 2],
        links: vec![
            Link { id: 0, src: 0, dst: 1, capacity_bps: 1e7, prop_delay_s: 1e-4 },
            Link { id: 1, src: 1, dst: 2, capacity_bps: 8e6, prop_delay_s: 2e-4 },
        ],
        queues: vec![
            QueueCfg { id: 0, link: 0, buffer_pkts: 1000 },
            QueueCfg { id: 1, link: 1, buffer_pkts: 1000 },
        ],
    };
    let flows = (0..flows)
        .map(|fid| Flow {
            id: fid,
            path: if fid % 2 == 0 { vec![0, 1] } else { vec![1] },
            traffic: TrafficModel::Poisson { rate_pps: 200.0 + 60.0 * fid as f64 },
            packet_size: PacketSize::Exponential { mean_bytes: 1000.0 },
        })
        .collect();
    Scenario::new(id, topology, flows, duration_s, seed, Fidelity::Ideal)
}

pub(crate) fn toy_windowed(id: u32, flows: u32, duration_s: f64, seed: u64) -> WindowedScenario {
    let scenario = toy_scenario(id, flows, duration_s, seed);
    let trace = simulate(&scenario).unwrap();
    windowize(&trace, &scenario, 0.1).unwrap()
}
