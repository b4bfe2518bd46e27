//! Temporal windowing of packet traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::{FlowId, LinkId, PacketTrace, QueueId, Scenario};

/// Default window length in seconds.
pub const DEFAULT_WINDOW_S: f64 = 0.1;

/// One hop of a flow's path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopRef {
    pub queue: QueueId,
    pub link: LinkId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub id: FlowId,
    pub hops: Vec<HopRef>,
}

impl FlowSpec {
    pub fn path_len(&self) -> usize {
        self.hops.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueSpec {
    pub id: QueueId,
    pub buffer_pkts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub id: LinkId,
    pub capacity_bps: f64,
    pub queue: QueueId,
}

/// The static structure the model message-passes over: flows, the queues
/// they traverse, and the links behind those queues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub flows: Vec<FlowSpec>,
    pub queues: Vec<QueueSpec>,
    pub links: Vec<LinkSpec>,
}

impl GraphSpec {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let flows = scenario
            .flows
            .iter()
            .map(|f| {
                let hops = f
                    .path
                    .iter()
                    .map(|&lid| {
                        let q = scenario.topology.queue_of_link(lid).expect("validated");
                        HopRef { queue: q.id, link: lid }
                    })
                    .collect();
                FlowSpec { id: f.id, hops }
            })
            .collect();
        let queues = scenario
            .topology
            .queues
            .iter()
            .map(|q| QueueSpec { id: q.id, buffer_pkts: q.buffer_pkts })
            .collect();
        let links = scenario
            .topology
            .links
            .iter()
            .map(|l| {
                let queue = scenario.topology.queue_of_link(l.id).expect("validated").id;
                LinkSpec { id: l.id, capacity_bps: l.capacity_bps, queue }
            })
            .collect();
        Ok(GraphSpec { flows, queues, links })
    }

    pub fn flow_position(&self, id: FlowId) -> Option<usize> {
        self.flows.iter().position(|f| f.id == id)
    }

    pub fn queue_position(&self, id: QueueId) -> Option<usize> {
        self.queues.iter().position(|q| q.id == id)
    }

    pub fn link_position(&self, id: LinkId) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }
}

/// Aggregates for one (flow, window) cell. Inactive cells (no delivered
/// packets) carry zero features and are masked out of losses and metrics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowWindow {
    pub avg_bandwidth_bps: f64,
    pub packet_rate_pps: f64,
    pub mean_packet_size_bytes: f64,
    pub packets: u64,
    pub target_delay_s: f64,
    pub active: bool,
}

/// One NDJSON line of a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub scenario: u32,
    pub window: u32,
    pub flow: FlowId,
    pub avg_bandwidth_bps: f64,
    pub packet_rate_pps: f64,
    pub mean_packet_size_bytes: f64,
    pub path_len: usize,
    pub target_delay_s: f64,
    pub packets: u64,
    pub active: bool,
}

/// A scenario's graph plus its full W×F window grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedScenario {
    pub scenario_id: u32,
    pub window_length_s: f64,
    /// Actual width of each window; the final window of a scenario that is
    /// not a multiple of the window length is shorter, and its rates are
    /// normalized by elapsed time rather than the nominal length.
    pub window_widths: Vec<f64>,
    pub graph: GraphSpec,
    /// `grid[w][f]` for window `w` and the flow at position `f` in the graph.
    pub grid: Vec<Vec<FlowWindow>>,
}

impl WindowedScenario {
    pub fn num_windows(&self) -> usize {
        self.grid.len()
    }

    pub fn num_flows(&self) -> usize {
        self.graph.flows.len()
    }

    pub fn active_count(&self) -> usize {
        self.grid
            .iter()
            .flat_map(|row| row.iter())
            .filter(|fw| fw.active)
            .count()
    }

    pub fn total_packets(&self) -> u64 {
        self.grid
            .iter()
            .flat_map(|row| row.iter())
            .map(|fw| fw.packets)
            .sum()
    }

    pub fn samples(&self) -> impl Iterator<Item = WindowSample> + '_ {
        self.grid.iter().enumerate().flat_map(move |(w, row)| {
            row.iter().enumerate().map(move |(f, fw)| WindowSample {
                scenario: self.scenario_id,
                window: w as u32,
                flow: self.graph.flows[f].id,
                avg_bandwidth_bps: fw.avg_bandwidth_bps,
                packet_rate_pps: fw.packet_rate_pps,
                mean_packet_size_bytes: fw.mean_packet_size_bytes,
                path_len: self.graph.flows[f].path_len(),
                target_delay_s: fw.target_delay_s,
                packets: fw.packets,
                active: fw.active,
            })
        })
    }
}

/// Buckets delivered packets into windows by send time (floor rule) and
/// aggregates per-(flow, window) features and the mean-delay target.
pub fn windowize(
    trace: &PacketTrace,
    scenario: &Scenario,
    window_length_s: f64,
) -> Result<WindowedScenario> {
    if window_length_s <= 0.0 {
        return Err(Error::config("window length must be > 0"));
    }
    let graph = GraphSpec::from_scenario(scenario)?;
    let num_windows = (scenario.duration_s / window_length_s).ceil().max(1.0) as usize;
    let window_widths: Vec<f64> = (0..num_windows)
        .map(|w| (scenario.duration_s - w as f64 * window_length_s).min(window_length_s))
        .collect();

    let num_flows = graph.flows.len();
    let mut sums = vec![vec![(0u64, 0.0f64, 0.0f64); num_flows]; num_windows]; // (count, Σsize, Σdelay)
    for record in trace.delivered() {
        let Some(f) = graph.flow_position(record.flow) else {
            return Err(Error::data(format!(
                "trace references flow {} absent from the scenario",
                record.flow
            )));
        };
        let w = ((record.send_s / window_length_s) as usize).min(num_windows - 1);
        let cell = &mut sums[w][f];
        cell.0 += 1;
        cell.1 += record.size_bytes;
        cell.2 += record.delay_s().expect("delivered packets have delays");
    }

    let grid = sums
        .into_iter()
        .enumerate()
        .map(|(w, row)| {
            let width = window_widths[w];
            row.into_iter()
                .map(|(count, size_sum, delay_sum)| {
                    if count == 0 {
                        FlowWindow::default()
                    } else {
                        FlowWindow {
                            avg_bandwidth_bps: size_sum * 8.0 / width,
                            packet_rate_pps: count as f64 / width,
                            mean_packet_size_bytes: size_sum / count as f64,
                            packets: count,
                            target_delay_s: delay_sum / count as f64,
                            active: true,
                        }
                    }
                })
                .collect()
        })
        .collect();

    Ok(WindowedScenario {
        scenario_id: scenario.id,
        window_length_s,
        window_widths,
        graph,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::{
        Fidelity, Flow, Link, PacketRecord, PacketSize, QueueCfg, Topology, TrafficModel,
    };

    pub(crate) fn one_flow_scenario(duration_s: f64) -> Scenario {
        Scenario::new(
            0,
            Topology {
                nodes: vec![0, 1],
                links: vec![Link { id: 0, src: 0, dst: 1, capacity_bps: 1e7, prop_delay_s: 0.0 }],
                queues: vec![QueueCfg { id: 0, link: 0, buffer_pkts: 100 }],
            },
            vec![Flow {
                id: 0,
                path: vec![0],
                traffic: TrafficModel::Poisson { rate_pps: 100.0 },
                packet_size: PacketSize::Fixed { bytes: 1250.0 },
            }],
            duration_s,
            1,
            Fidelity::Ideal,
        )
    }

    fn record(flow: u32, send: f64, delay: f64, size: f64) -> PacketRecord {
        PacketRecord { flow, send_s: send, arrive_s: Some(send + delay), size_bytes: size, dropped: false }
    }

    #[test]
    fn floor_rule_assigns_windows() {
        let scenario = one_flow_scenario(1.0);
        let trace = PacketTrace { records: vec![record(0, 0.15, 0.001, 1000.0)] };
        let windowed = windowize(&trace, &scenario, 0.1).unwrap();
        assert_eq!(windowed.num_windows(), 10);
        assert!(windowed.grid[1][0].active);
        assert_eq!(windowed.grid[1][0].packets, 1);
        assert!(!windowed.grid[0][0].active);
    }

    #[test]
    fn bandwidth_and_rate_arithmetic() {
        // 10 packets of 1250 B inside one 0.1 s window → 1 Mb/s, 100 pkt/s
        let scenario = one_flow_scenario(0.1);
        let records: Vec<PacketRecord> = (0..10)
            .map(|i| record(0, 0.005 + i as f64 * 0.009, 0.002, 1250.0))
            .collect();
        let trace = PacketTrace { records };
        let windowed = windowize(&trace, &scenario, 0.1).unwrap();
        let fw = &windowed.grid[0][0];
        assert!((fw.avg_bandwidth_bps - 1e6).abs() < 1e-9, "bw {}", fw.avg_bandwidth_bps);
        assert!((fw.packet_rate_pps - 100.0).abs() < 1e-9);
        assert_eq!(fw.mean_packet_size_bytes, 1250.0);

        // brute-force recount straight off the trace
        let brute_bits: f64 = trace.delivered().map(|r| r.size_bytes * 8.0).sum();
        assert_eq!(fw.avg_bandwidth_bps, brute_bits / 0.1);
    }

    #[test]
    fn window_counts_conserve_delivered_packets() {
        let scenario = one_flow_scenario(2.0);
        let mut records: Vec<PacketRecord> = (0..57)
            .map(|i| record(0, i as f64 * 0.031, 0.003, 800.0))
            .collect();
        records.push(PacketRecord {
            flow: 0,
            send_s: 0.5,
            arrive_s: None,
            size_bytes: 800.0,
            dropped: true,
        });
        let trace = PacketTrace { records };
        let windowed = windowize(&trace, &scenario, 0.1).unwrap();
        assert_eq!(windowed.total_packets(), trace.delivered_count() as u64);
    }

    #[test]
    fn per_window_target_matches_brute_force_mean() {
        let scenario = one_flow_scenario(0.3);
        let records = vec![
            record(0, 0.01, 0.004, 500.0),
            record(0, 0.05, 0.006, 700.0),
            record(0, 0.11, 0.010, 900.0),
        ];
        let trace = PacketTrace { records: records.clone() };
        let windowed = windowize(&trace, &scenario, 0.1).unwrap();
        // window 0: packets at 0.01 and 0.05
        let brute: f64 = records[..2]
            .iter()
            .map(|r| r.delay_s().unwrap())
            .sum::<f64>()
            / 2.0;
        assert_eq!(windowed.grid[0][0].target_delay_s, brute);
        assert_eq!(windowed.grid[1][0].target_delay_s, records[2].delay_s().unwrap());
        assert!(!windowed.grid[2][0].active);
    }

    #[test]
    fn partial_final_window_uses_elapsed_time() {
        let scenario = one_flow_scenario(0.25);
        let trace = PacketTrace { records: vec![record(0, 0.22, 0.001, 1000.0)] };
        let windowed = windowize(&trace, &scenario, 0.1).unwrap();
        assert_eq!(windowed.num_windows(), 3);
        assert!((windowed.window_widths[2] - 0.05).abs() < 1e-12);
        let fw = &windowed.grid[2][0];
        assert!((fw.avg_bandwidth_bps - 1000.0 * 8.0 / 0.05).abs() < 1e-9);
        assert!((fw.packet_rate_pps - 20.0).abs() < 1e-9);
    }

    #[test]
    fn empty_trace_is_all_inactive_not_an_error() {
        let scenario = one_flow_scenario(0.5);
        let windowed = windowize(&PacketTrace::default(), &scenario, 0.1).unwrap();
        assert_eq!(windowed.active_count(), 0);
        assert_eq!(windowed.total_packets(), 0);
    }
}
