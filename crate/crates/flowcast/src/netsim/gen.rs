//! Randomized scenario generation from a template.

use std::collections::VecDeque;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::traffic::stream_rng;
use crate::netsim::types::{
    Fidelity, Flow, Link, LinkId, NodeId, PacketSize, QueueCfg, Scenario, Topology, TrafficModel,
};

/// Inclusive range of floats; `min == max` pins the value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeF {
    pub min: f64,
    pub max: f64,
}

impl RangeF {
    pub fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        if self.min >= self.max {
            self.min
        } else {
            rng.random_range(self.min..self.max)
        }
    }
}

/// Inclusive range of unsigned counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeU {
    pub min: u32,
    pub max: u32,
}

impl RangeU {
    pub fn fixed(v: u32) -> Self {
        Self { min: v, max: v }
    }

    fn draw(&self, rng: &mut impl Rng) -> u32 {
        rng.random_range(self.min..=self.max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TopologySpec {
    /// Random connected graph: a spanning tree over `nodes` plus extra
    /// edges, every edge realized as a pair of directed links.
    Random {
        nodes: RangeU,
        capacity_bps: RangeF,
        prop_delay_s: RangeF,
        extra_link_prob: f64,
        buffer_pkts: usize,
    },
    /// A hand-specified topology reused for every scenario (the shape of a
    /// small lab network with VLAN-configured routes).
    Fixed { topology: Topology },
}

/// Traffic model template: parameter ranges instead of values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrafficSpec {
    Poisson { rate_pps: RangeF },
    OnOff { on_mean_s: RangeF, off_mean_s: RangeF, on_rate_pps: RangeF },
    HeavyTail { log_mean: RangeF, log_sd: RangeF },
    Replay { file: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    pub topology: TopologySpec,
    pub flow_count: RangeU,
    pub traffic: Vec<TrafficSpec>,
    pub packet_size: PacketSize,
    pub duration_s: RangeF,
    /// No link may carry offered load above this fraction of its capacity;
    /// flow rates are scaled down together when a draw exceeds it.
    pub utilization_cap: f64,
    pub fidelity: Fidelity,
}

impl ScenarioTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.traffic.is_empty() {
            return Err(Error::config("template lists no traffic models"));
        }
        if !(self.utilization_cap > 0.0 && self.utilization_cap <= 1.0) {
            return Err(Error::config("utilization cap must be in (0, 1]"));
        }
        if self.flow_count.min == 0 {
            return Err(Error::config("flow count must be >= 1"));
        }
        self.packet_size.validate()?;
        self.fidelity.validate()?;
        if let TopologySpec::Fixed { topology } = &self.topology {
            topology.validate()?;
        }
        Ok(())
    }
}

/// Generates `count` scenarios, ids `0..count`, reproducible from `seed`.
pub fn gen_scenarios(template: &ScenarioTemplate, count: usize, seed: u64) -> Result<Vec<Scenario>> {
    if count == 0 {
        return Err(Error::config("scenario count must be > 0"));
    }
    template.validate()?;
    (0..count)
        .map(|i| gen_one(template, i as u32, seed))
        .collect()
}

fn gen_one(template: &ScenarioTemplate, id: u32, seed: u64) -> Result<Scenario> {
    let mut rng = stream_rng(seed, id as u64);

    let topology = match &template.topology {
        TopologySpec::Fixed { topology } => topology.clone(),
        TopologySpec::Random { nodes, capacity_bps, prop_delay_s, extra_link_prob, buffer_pkts } => {
            random_topology(&mut rng, nodes, capacity_bps, prop_delay_s, *extra_link_prob, *buffer_pkts)
        }
    };

    // All (src, dst) pairs connected by some path, in deterministic order.
    let reachable = reachable_pairs(&topology);
    if reachable.is_empty() {
        return Err(Error::config(
            "infeasible template: no path exists between any pair of nodes",
        ));
    }

    let flow_count = template.flow_count.draw(&mut rng);
    let mut flows = Vec::with_capacity(flow_count as usize);
    for fid in 0..flow_count {
        let &(src, dst) = &reachable[rng.random_range(0..reachable.len())];
        let path = shortest_path(&topology, src, dst).expect("pair known reachable");
        let traffic = draw_traffic(&template.traffic, &mut rng);
        flows.push(Flow { id: fid, path, traffic, packet_size: template.packet_size.clone() });
    }

    cap_utilization(&topology, &mut flows, template.utilization_cap)?;

    let duration_s = template.duration_s.draw(&mut rng);
    let sim_seed: u64 = rng.random();
    let scenario = Scenario::new(id, topology, flows, duration_s, sim_seed, template.fidelity.clone());
    scenario.validate()?;
    Ok(scenario)
}

fn random_topology(
    rng: &mut impl Rng,
    nodes: &RangeU,
    capacity_bps: &RangeF,
    prop_delay_s: &RangeF,
    extra_link_prob: f64,
    buffer_pkts: usize,
) -> Topology {
    let n = nodes.draw(rng);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    // spanning tree keeps the graph connected
    for k in 1..n {
        let parent = rng.random_range(0..k);
        edges.push((parent, k));
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if !edges.contains(&(a, b)) && rng.random_range(0.0..1.0) < extra_link_prob {
                edges.push((a, b));
            }
        }
    }
    edges.sort_unstable();

    let mut links = Vec::with_capacity(edges.len() * 2);
    let mut queues = Vec::with_capacity(edges.len() * 2);
    for (a, b) in edges {
        let capacity = capacity_bps.draw(rng);
        let delay = prop_delay_s.draw(rng);
        for (src, dst) in [(a, b), (b, a)] {
            let id = links.len() as LinkId;
            links.push(Link { id, src, dst, capacity_bps: capacity, prop_delay_s: delay });
            queues.push(QueueCfg { id, link: id, buffer_pkts });
        }
    }
    Topology { nodes: (0..n).collect(), links, queues }
}

/// BFS shortest path as a list of link ids, with ties broken by link id so
/// routing is deterministic.
fn shortest_path(topology: &Topology, src: NodeId, dst: NodeId) -> Option<Vec<LinkId>> {
    if src == dst {
        return None;
    }
    let mut adjacency: Vec<(NodeId, NodeId, LinkId)> = topology
        .links
        .iter()
        .map(|l| (l.src, l.dst, l.id))
        .collect();
    adjacency.sort_unstable_by_key(|&(s, d, id)| (s, d, id));

    let mut parent: std::collections::HashMap<NodeId, (NodeId, LinkId)> = Default::default();
    let mut queue = VecDeque::from([src]);
    while let Some(node) = queue.pop_front() {
        if node == dst {
            break;
        }
        for &(s, d, id) in adjacency.iter().filter(|&&(s, _, _)| s == node) {
            if d != src && !parent.contains_key(&d) {
                parent.insert(d, (s, id));
                queue.push_back(d);
            }
        }
    }
    if !parent.contains_key(&dst) {
        return None;
    }
    let mut path = Vec::new();
    let mut node = dst;
    while node != src {
        let (prev, link) = parent[&node];
        path.push(link);
        node = prev;
    }
    path.reverse();
    Some(path)
}

fn reachable_pairs(topology: &Topology) -> Vec<(NodeId, NodeId)> {
    let mut pairs = Vec::new();
    for &src in &topology.nodes {
        for &dst in &topology.nodes {
            if src != dst && shortest_path(topology, src, dst).is_some() {
                pairs.push((src, dst));
            }
        }
    }
    pairs
}

fn draw_traffic(specs: &[TrafficSpec], rng: &mut impl Rng) -> TrafficModel {
    let spec = &specs[rng.random_range(0..specs.len())];
    match spec {
        TrafficSpec::Poisson { rate_pps } => TrafficModel::Poisson { rate_pps: rate_pps.draw(rng) },
        TrafficSpec::OnOff { on_mean_s, off_mean_s, on_rate_pps } => TrafficModel::OnOff {
            on_mean_s: on_mean_s.draw(rng),
            off_mean_s: off_mean_s.draw(rng),
            on_rate_pps: on_rate_pps.draw(rng),
        },
        TrafficSpec::HeavyTail { log_mean, log_sd } => TrafficModel::HeavyTail {
            log_mean: log_mean.draw(rng),
            log_sd: log_sd.draw(rng),
        },
        TrafficSpec::Replay { file } => TrafficModel::Replay { file: file.clone() },
    }
}

/// Mean offered load of one flow in bits/s. Replay rates come from the file.
fn offered_load_bps(flow: &Flow) -> Result<f64> {
    let rate = match flow.traffic.mean_rate_pps() {
        Some(r) => r,
        None => {
            let TrafficModel::Replay { file } = &flow.traffic else { unreachable!() };
            let text = std::fs::read_to_string(file)
                .map_err(|e| Error::data(format!("replay file {}: {e}", file.display())))?;
            let gaps: Vec<f64> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .filter_map(|l| l.parse::<f64>().ok())
                .collect();
            if gaps.is_empty() {
                return Err(Error::data(format!(
                    "replay file {} contains no inter-arrival times",
                    file.display()
                )));
            }
            gaps.len() as f64 / gaps.iter().sum::<f64>()
        }
    };
    Ok(rate * flow.packet_size.mean_bytes() * 8.0)
}

/// Scales scalable flows so that every link's offered load stays within
/// `cap × capacity`. Replay flows keep their recorded rate; if they alone
/// overload a link the template is infeasible.
fn cap_utilization(topology: &Topology, flows: &mut [Flow], cap: f64) -> Result<()> {
    let mut fixed_load: std::collections::HashMap<LinkId, f64> = Default::default();
    let mut scalable_load: std::collections::HashMap<LinkId, f64> = Default::default();
    for flow in flows.iter() {
        let load = offered_load_bps(flow)?;
        let scalable = !matches!(flow.traffic, TrafficModel::Replay { .. });
        for &lid in &flow.path {
            let slot = if scalable { &mut scalable_load } else { &mut fixed_load };
            *slot.entry(lid).or_default() += load;
        }
    }

    let mut factor = 1.0f64;
    for link in &topology.links {
        let budget = cap * link.capacity_bps;
        let fixed = fixed_load.get(&link.id).copied().unwrap_or(0.0);
        let scalable = scalable_load.get(&link.id).copied().unwrap_or(0.0);
        if fixed > budget {
            return Err(Error::config(format!(
                "infeasible template: replay traffic alone offers {fixed:.0} bps on link {} \
                 against a budget of {budget:.0} bps (utilization cap {cap})",
                link.id
            )));
        }
        if scalable > 0.0 {
            factor = factor.min((budget - fixed) / scalable);
        }
    }
    if factor < 1.0 {
        for flow in flows.iter_mut() {
            flow.traffic.scale_rate(factor);
        }
    }
    Ok(())
}
