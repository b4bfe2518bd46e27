//! Event-driven FIFO store-and-forward simulation core.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::netsim::trace::{PacketRecord, PacketTrace};
use crate::netsim::traffic::{generate_arrivals, generate_sizes, stream_rng, JITTER_STREAM};
use crate::netsim::types::{Fidelity, QueueId, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EventKind {
    /// Transmission finished at a queue's server.
    ServiceDone = 0,
    /// Packet arrives at a hop's queue (or is injected at its source).
    Arrive = 1,
}

#[derive(Clone, Copy, Debug)]
enum Payload {
    Arrive { pkt: usize, hop: usize },
    ServiceDone { queue: usize },
}

struct Event {
    time: f64,
    kind: EventKind,
    seq: u64,
    payload: Payload,
}

// Min-heap ordering: earliest time first; ties broken by kind then by
// insertion sequence so replays are bit-identical.
impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| (other.kind as u8).cmp(&(self.kind as u8)))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Packet {
    flow: u32,
    send_s: f64,
    size_bytes: f64,
    path: usize, // index into per-flow resolved paths
    arrive_s: Option<f64>,
    dropped: bool,
}

struct QueueState {
    waiting: VecDeque<(usize, usize)>, // (pkt, hop)
    in_service: Option<(usize, usize)>,
    buffer_pkts: usize,
    service_bps: f64,
    prop_delay_s: f64,
}

impl QueueState {
    fn occupancy(&self) -> usize {
        self.waiting.len() + usize::from(self.in_service.is_some())
    }
}

/// Per-queue arrival and departure order, for FIFO verification.
#[derive(Debug, Default)]
pub struct QueueOrderLog {
    pub arrivals: HashMap<QueueId, Vec<usize>>,
    pub departures: HashMap<QueueId, Vec<usize>>,
}

/// Runs a scenario to completion and returns its packet trace.
///
/// Identical (scenario, seed) inputs produce bit-identical traces.
pub fn simulate(scenario: &Scenario) -> Result<PacketTrace> {
    Ok(run(scenario, false)?.0)
}

/// As [`simulate`], additionally recording per-queue arrival/departure order.
pub fn simulate_instrumented(scenario: &Scenario) -> Result<(PacketTrace, QueueOrderLog)> {
    let (trace, log) = run(scenario, true)?;
    Ok((trace, log))
}

fn run(scenario: &Scenario, record_order: bool) -> Result<(PacketTrace, QueueOrderLog)> {
    scenario.validate()?;

    // Resolve link/queue ids to dense indices.
    let link_index: HashMap<u32, usize> = scenario
        .topology
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| (l.id, i))
        .collect();
    let mut queue_of_link = vec![usize::MAX; scenario.topology.links.len()];
    let mut queues: Vec<QueueState> = Vec::with_capacity(scenario.topology.queues.len());
    let mut queue_ids: Vec<QueueId> = Vec::with_capacity(scenario.topology.queues.len());
    let (derating, processing_s, jitter_sd) = match scenario.fidelity {
        Fidelity::Ideal => (1.0, 0.0, 0.0),
        Fidelity::Perturbed { processing_delay_s, capacity_derating, jitter_sd_s } => {
            (capacity_derating, processing_delay_s, jitter_sd_s)
        }
    };
    for q in &scenario.topology.queues {
        let li = link_index[&q.link];
        let link = &scenario.topology.links[li];
        queue_of_link[li] = queues.len();
        queue_ids.push(q.id);
        queues.push(QueueState {
            waiting: VecDeque::new(),
            in_service: None,
            buffer_pkts: q.buffer_pkts,
            service_bps: link.capacity_bps * derating,
            prop_delay_s: link.prop_delay_s,
        });
    }

    // Per-flow resolved paths (dense queue indices).
    let mut paths: Vec<Vec<usize>> = Vec::with_capacity(scenario.flows.len());
    for flow in &scenario.flows {
        let path = flow
            .path
            .iter()
            .map(|lid| queue_of_link[link_index[lid]])
            .collect();
        paths.push(path);
    }

    // Pre-generate all packets, flow by flow.
    let mut packets: Vec<Packet> = Vec::new();
    for (fi, flow) in scenario.flows.iter().enumerate() {
        let times = generate_arrivals(flow, scenario.seed, scenario.duration_s)?;
        let sizes = generate_sizes(flow, scenario.seed, times.len())?;
        for (t, size) in times.into_iter().zip(sizes) {
            packets.push(Packet {
                flow: flow.id,
                send_s: t,
                size_bytes: size,
                path: fi,
                arrive_s: None,
                dropped: false,
            });
        }
    }

    let mut jitter_rng: Option<(ChaCha8Rng, Normal<f64>)> = if jitter_sd > 0.0 {
        let normal = Normal::new(0.0, jitter_sd).map_err(|e| Error::config(e.to_string()))?;
        Some((stream_rng(scenario.seed, JITTER_STREAM), normal))
    } else {
        None
    };

    let mut heap: BinaryHeap<Event> = BinaryHeap::with_capacity(packets.len() * 2);
    let mut seq: u64 = 0;
    let push = |heap: &mut BinaryHeap<Event>, seq: &mut u64, time: f64, payload: Payload| {
        let kind = match payload {
            Payload::Arrive { .. } => EventKind::Arrive,
            Payload::ServiceDone { .. } => EventKind::ServiceDone,
        };
        heap.push(Event { time, kind, seq: *seq, payload });
        *seq += 1;
    };

    for (pi, packet) in packets.iter().enumerate() {
        push(&mut heap, &mut seq, packet.send_s, Payload::Arrive { pkt: pi, hop: 0 });
    }

    let mut log = QueueOrderLog::default();

    while let Some(event) = heap.pop() {
        match event.payload {
            Payload::Arrive { pkt, hop } => {
                let qi = paths[packets[pkt].path][hop];
                let q = &mut queues[qi];
                if q.occupancy() >= q.buffer_pkts {
                    packets[pkt].dropped = true;
                    continue;
                }
                if record_order {
                    log.arrivals.entry(queue_ids[qi]).or_default().push(pkt);
                }
                q.waiting.push_back((pkt, hop));
                if q.in_service.is_none() {
                    let (head, head_hop) = q.waiting.pop_front().expect("just pushed");
                    q.in_service = Some((head, head_hop));
                    let service = packets[head].size_bytes * 8.0 / q.service_bps;
                    push(&mut heap, &mut seq, event.time + service, Payload::ServiceDone { queue: qi });
                }
            }
            Payload::ServiceDone { queue: qi } => {
                let q = &mut queues[qi];
                let (pkt, hop) = q.in_service.take().expect("service completion without job");
                if record_order {
                    log.departures.entry(queue_ids[qi]).or_default().push(pkt);
                }
                // Post-transmission extras. Jitter is clamped so the extra
                // never undercuts the ideal propagation-only delay, keeping
                // perturbed runs pointwise no faster than ideal ones.
                let mut extra = q.prop_delay_s;
                if processing_s > 0.0 || jitter_rng.is_some() {
                    let jitter = match &mut jitter_rng {
                        Some((rng, normal)) => normal.sample(rng),
                        None => 0.0,
                    };
                    extra += (processing_s + jitter).max(0.0);
                }
                let out_time = event.time + extra;
                let path_len = paths[packets[pkt].path].len();
                if hop + 1 == path_len {
                    packets[pkt].arrive_s = Some(out_time);
                } else {
                    push(&mut heap, &mut seq, out_time, Payload::Arrive { pkt, hop: hop + 1 });
                }
                if let Some((next, next_hop)) = q.waiting.pop_front() {
                    let service = packets[next].size_bytes * 8.0 / q.service_bps;
                    q.in_service = Some((next, next_hop));
                    push(&mut heap, &mut seq, event.time + service, Payload::ServiceDone { queue: qi });
                }
            }
        }
    }

    let mut records: Vec<PacketRecord> = packets
        .into_iter()
        .map(|p| PacketRecord {
            flow: p.flow,
            send_s: p.send_s,
            arrive_s: p.arrive_s,
            size_bytes: p.size_bytes,
            dropped: p.dropped,
        })
        .collect();
    records.sort_by(|a, b| a.flow.cmp(&b.flow).then(a.send_s.total_cmp(&b.send_s)));
    Ok((PacketTrace { records }, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::types::{Flow, Link, PacketSize, QueueCfg, Topology, TrafficModel};

    fn single_link_topology(capacity_bps: f64, prop_delay_s: f64, buffer: usize) -> Topology {
        Topology {
            nodes: vec![0, 1],
            links: vec![Link { id: 0, src: 0, dst: 1, capacity_bps, prop_delay_s }],
            queues: vec![QueueCfg { id: 0, link: 0, buffer_pkts: buffer }],
        }
    }

    /// λ=800 pkt/s, exponential sizes mean 1250 B on a 10 Mb/s link → service
    /// rate μ=1000 pkt/s. M/M/1 mean sojourn = 1/(μ−λ) = 5 ms.
    pub(crate) fn mm1_scenario(duration_s: f64, seed: u64) -> Scenario {
        Scenario::new(
            0,
            single_link_topology(1e7, 0.0, 100_000),
            vec![Flow {
                id: 0,
                path: vec![0],
                traffic: TrafficModel::Poisson { rate_pps: 800.0 },
                packet_size: PacketSize::Exponential { mean_bytes: 1250.0 },
            }],
            duration_s,
            seed,
            Fidelity::Ideal,
        )
    }

    #[test]
    fn mm1_mean_sojourn_matches_analytic_value() {
        // 600 s at 800 pkt/s ≈ 480k packets; the sojourn mean is strongly
        // autocorrelated at utilization 0.8, so give the 5% gate headroom
        let scenario = mm1_scenario(600.0, 4242);
        let trace = simulate(&scenario).unwrap();
        assert!(trace.delivered_count() >= 100_000, "got {}", trace.delivered_count());
        let mean = trace.mean_delay_s().unwrap();
        let analytic = 1.0 / (1000.0 - 800.0);
        let rel = (mean - analytic).abs() / analytic;
        assert!(rel < 0.05, "mean {mean}, analytic {analytic}, rel err {rel}");
    }

    #[test]
    fn single_packet_delay_is_transmission_plus_propagation() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        std::io::Write::write_all(&mut file, b"0.5\n").unwrap();
        let scenario = Scenario::new(
            0,
            single_link_topology(1e6, 3e-3, 10),
            vec![Flow {
                id: 0,
                path: vec![0],
                traffic: TrafficModel::Replay { file: file.path().to_path_buf() },
                packet_size: PacketSize::Fixed { bytes: 500.0 },
            }],
            1.0,
            7,
            Fidelity::Ideal,
        );
        let trace = simulate(&scenario).unwrap();
        assert_eq!(trace.records.len(), 1);
        let delay = trace.records[0].delay_s().unwrap();
        let expected = 500.0 * 8.0 / 1e6 + 3e-3;
        assert!((delay - expected).abs() < 1e-15, "delay {delay} vs {expected}");
    }

    #[test]
    fn identical_scenario_and_seed_give_bit_identical_traces() {
        let scenario = mm1_scenario(3.0, 99);
        let a = simulate(&scenario).unwrap();
        let b = simulate(&scenario).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conservation_delivered_plus_dropped_equals_generated() {
        // tiny buffer at overload to force drops
        let mut scenario = mm1_scenario(5.0, 12);
        scenario.topology.queues[0].buffer_pkts = 3;
        scenario.flows[0].traffic = TrafficModel::Poisson { rate_pps: 2000.0 };
        let trace = simulate(&scenario).unwrap();
        let generated = generate_arrivals(&scenario.flows[0], scenario.seed, scenario.duration_s)
            .unwrap()
            .len();
        assert!(trace.dropped_count() > 0, "expected drops at overload");
        assert_eq!(trace.delivered_count() + trace.dropped_count(), generated);
        assert_eq!(trace.records.len(), generated);
    }

    #[test]
    fn fifo_departure_order_matches_arrival_order() {
        let scenario = two_flow_shared_queue(2.0, 5);
        let (_, log) = simulate_instrumented(&scenario).unwrap();
        for (qid, arrivals) in &log.arrivals {
            let departures = &log.departures[qid];
            // every admitted packet eventually departs, in order
            assert_eq!(arrivals, departures, "queue {qid} reordered packets");
        }
    }

    fn two_flow_shared_queue(duration_s: f64, seed: u64) -> Scenario {
        let topology = Topology {
            nodes: vec![0, 1, 2],
            links: vec![
                Link { id: 0, src: 0, dst: 1, capacity_bps: 1e7, prop_delay_s: 1e-4 },
                Link { id: 1, src: 1, dst: 2, capacity_bps: 1e7, prop_delay_s: 1e-4 },
            ],
            queues: vec![
                QueueCfg { id: 0, link: 0, buffer_pkts: 100_000 },
                QueueCfg { id: 1, link: 1, buffer_pkts: 100_000 },
            ],
        };
        Scenario::new(
            0,
            topology,
            vec![
                Flow {
                    id: 0,
                    path: vec![0, 1],
                    traffic: TrafficModel::Poisson { rate_pps: 300.0 },
                    packet_size: PacketSize::Exponential { mean_bytes: 1000.0 },
                },
                Flow {
                    id: 1,
                    path: vec![1],
                    traffic: TrafficModel::Poisson { rate_pps: 200.0 },
                    packet_size: PacketSize::Exponential { mean_bytes: 800.0 },
                },
            ],
            duration_s,
            seed,
            Fidelity::Ideal,
        )
    }

    fn two_hop_single_flow(seed: u64) -> Scenario {
        let mut s = mm1_scenario(10.0, seed);
        s.topology = Topology {
            nodes: vec![0, 1, 2],
            links: vec![
                Link { id: 0, src: 0, dst: 1, capacity_bps: 1e7, prop_delay_s: 1e-4 },
                Link { id: 1, src: 1, dst: 2, capacity_bps: 1.2e7, prop_delay_s: 2e-4 },
            ],
            queues: vec![
                QueueCfg { id: 0, link: 0, buffer_pkts: 100_000 },
                QueueCfg { id: 1, link: 1, buffer_pkts: 100_000 },
            ],
        };
        s.flows[0].path = vec![0, 1];
        s
    }

    fn assert_pointwise_dominates(ideal: &Scenario, perturbed: &Scenario) {
        let ti = simulate(ideal).unwrap();
        let tp = simulate(perturbed).unwrap();
        assert_eq!(ti.records.len(), tp.records.len());
        for (a, b) in ti.records.iter().zip(&tp.records) {
            assert_eq!(a.send_s, b.send_s, "arrival sequences must coincide");
            let (da, db) = (a.delay_s().unwrap(), b.delay_s().unwrap());
            assert!(db >= da, "perturbed {db} < ideal {da} at send {}", a.send_s);
        }
    }

    #[test]
    fn perturbed_delays_dominate_ideal_pointwise_when_order_is_preserved() {
        // Jitter can reorder packets *between* hops (a short transmission can
        // slip past a long one), and a reordered packet may skip queueing it
        // would have done in the ideal run — so pointwise dominance is only a
        // theorem while arrival sequences coincide. Two clean cases:
        // multi-hop with jitter off, and single-hop where reordering cannot
        // feed back into a queue.
        let ideal = two_hop_single_flow(31);
        let mut perturbed = ideal.clone();
        perturbed.fidelity = Fidelity::Perturbed {
            processing_delay_s: 50e-6,
            capacity_derating: 0.95,
            jitter_sd_s: 0.0,
        };
        assert_pointwise_dominates(&ideal, &perturbed);

        let ideal_one_hop = mm1_scenario(10.0, 32);
        let mut perturbed_one_hop = ideal_one_hop.clone();
        perturbed_one_hop.fidelity = Fidelity::perturbed_default();
        assert_pointwise_dominates(&ideal_one_hop, &perturbed_one_hop);
    }

    #[test]
    fn perturbed_mean_delay_exceeds_ideal_under_full_perturbation() {
        let ideal = two_hop_single_flow(33);
        let mut perturbed = ideal.clone();
        perturbed.fidelity = Fidelity::perturbed_default();
        let mi = simulate(&ideal).unwrap().mean_delay_s().unwrap();
        let mp = simulate(&perturbed).unwrap().mean_delay_s().unwrap();
        assert!(mp > mi, "perturbed mean {mp} <= ideal mean {mi}");
    }

    #[test]
    fn zero_delivered_packets_is_flagged_not_an_error() {
        let mut scenario = mm1_scenario(0.001, 1);
        scenario.flows[0].traffic = TrafficModel::Poisson { rate_pps: 0.001 };
        let trace = simulate(&scenario).unwrap();
        assert!(trace.is_empty_delivery());
    }

    #[test]
    fn path_referencing_missing_queue_is_config_error() {
        let mut scenario = mm1_scenario(1.0, 1);
        scenario.topology.queues.clear();
        let err = simulate(&scenario).unwrap_err();
        assert!(matches!(err, crate::error::Error::Config(_)));
    }
}
