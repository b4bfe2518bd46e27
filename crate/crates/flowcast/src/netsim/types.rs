//! Scenario domain types and their invariant checks.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;
pub type LinkId = u32;
pub type QueueId = u32;
pub type FlowId = u32;

pub const SCENARIO_SCHEMA: &str = "scenario/1";

/// Directed link between two nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    pub capacity_bps: f64,
    pub prop_delay_s: f64,
}

/// FIFO buffer at a link's egress. Exactly one per link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueCfg {
    pub id: QueueId,
    pub link: LinkId,
    pub buffer_pkts: usize,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<NodeId>,
    pub links: Vec<Link>,
    pub queues: Vec<QueueCfg>,
}

impl Topology {
    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.links.iter().find(|l| l.id == id)
    }

    pub fn queue_of_link(&self, link: LinkId) -> Option<&QueueCfg> {
        self.queues.iter().find(|q| q.link == link)
    }

    pub fn validate(&self) -> Result<()> {
        let node_set: HashSet<NodeId> = self.nodes.iter().copied().collect();
        if node_set.len() != self.nodes.len() {
            return Err(Error::config("duplicate node ids in topology"));
        }
        let mut link_ids = HashSet::new();
        for link in &self.links {
            if !link_ids.insert(link.id) {
                return Err(Error::config(format!("duplicate link id {}", link.id)));
            }
            if !node_set.contains(&link.src) || !node_set.contains(&link.dst) {
                return Err(Error::config(format!(
                    "link {} references unknown node (src {}, dst {})",
                    link.id, link.src, link.dst
                )));
            }
            if link.capacity_bps <= 0.0 {
                return Err(Error::config(format!(
                    "link {} capacity must be > 0 (got {})",
                    link.id, link.capacity_bps
                )));
            }
            if link.prop_delay_s < 0.0 {
                return Err(Error::config(format!(
                    "link {} propagation delay must be >= 0",
                    link.id
                )));
            }
        }
        // exactly one queue per link
        let mut queued_links: HashMap<LinkId, usize> = HashMap::new();
        for q in &self.queues {
            *queued_links.entry(q.link).or_default() += 1;
            if !link_ids.contains(&q.link) {
                return Err(Error::config(format!(
                    "queue {} references unknown link {}",
                    q.id, q.link
                )));
            }
        }
        for link in &self.links {
            match queued_links.get(&link.id) {
                Some(1) => {}
                Some(n) => {
                    return Err(Error::config(format!(
                        "link {} has {n} queues, expected exactly one",
                        link.id
                    )))
                }
                None => {
                    return Err(Error::config(format!("link {} has no queue", link.id)));
                }
            }
        }
        Ok(())
    }
}

/// Per-flow arrival process. All rates/durations are strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrafficModel {
    /// Exponential inter-arrival times at `rate_pps`.
    Poisson { rate_pps: f64 },
    /// Alternating exponential on/off periods; Poisson arrivals at
    /// `on_rate_pps` while on, silence while off.
    OnOff { on_mean_s: f64, off_mean_s: f64, on_rate_pps: f64 },
    /// Inter-arrival times replayed from a file (one value in seconds per
    /// line), cycled if the scenario outlasts the trace.
    Replay { file: PathBuf },
    /// Lognormal inter-arrival times — a heavy-tailed stand-in for captured
    /// internet traffic. `log_mean`/`log_sd` parameterize ln(seconds).
    HeavyTail { log_mean: f64, log_sd: f64 },
}

impl TrafficModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            TrafficModel::Poisson { rate_pps } if *rate_pps <= 0.0 => {
                Err(Error::config("poisson rate must be > 0"))
            }
            TrafficModel::OnOff { on_mean_s, off_mean_s, on_rate_pps }
                if *on_mean_s <= 0.0 || *off_mean_s <= 0.0 || *on_rate_pps <= 0.0 =>
            {
                Err(Error::config("on/off durations and rate must be > 0"))
            }
            TrafficModel::HeavyTail { log_sd, .. } if *log_sd <= 0.0 => {
                Err(Error::config("heavy-tail log_sd must be > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Mean offered packet rate in packets/s (used for load capping).
    /// Replay rates depend on the trace file, resolved at generation time.
    pub fn mean_rate_pps(&self) -> Option<f64> {
        match self {
            TrafficModel::Poisson { rate_pps } => Some(*rate_pps),
            TrafficModel::OnOff { on_mean_s, off_mean_s, on_rate_pps } => {
                Some(on_rate_pps * on_mean_s / (on_mean_s + off_mean_s))
            }
            TrafficModel::HeavyTail { log_mean, log_sd } => {
                Some(1.0 / (log_mean + 0.5 * log_sd * log_sd).exp())
            }
            TrafficModel::Replay { .. } => None,
        }
    }

    /// Scales the mean packet rate by `factor`, used to honor utilization
    /// caps. Replay traffic cannot be rescaled.
    pub fn scale_rate(&mut self, factor: f64) {
        match self {
            TrafficModel::Poisson { rate_pps } => *rate_pps *= factor,
            TrafficModel::OnOff { on_rate_pps, .. } => *on_rate_pps *= factor,
            TrafficModel::HeavyTail { log_mean, .. } => *log_mean -= factor.ln(),
            TrafficModel::Replay { .. } => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PacketSize {
    Fixed { bytes: f64 },
    Exponential { mean_bytes: f64 },
}

impl PacketSize {
    pub fn validate(&self) -> Result<()> {
        let v = self.mean_bytes();
        if v <= 0.0 {
            return Err(Error::config("packet size must be > 0"));
        }
        Ok(())
    }

    pub fn mean_bytes(&self) -> f64 {
        match self {
            PacketSize::Fixed { bytes } => *bytes,
            PacketSize::Exponential { mean_bytes } => *mean_bytes,
        }
    }
}

/// A source-to-destination stream following a fixed path of links.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: FlowId,
    /// Ordered link ids from source to destination; the packet transits the
    /// queue of each link in turn.
    pub path: Vec<LinkId>,
    pub traffic: TrafficModel,
    pub packet_size: PacketSize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Fidelity {
    Ideal,
    Perturbed {
        /// Extra per-hop delay in seconds.
        processing_delay_s: f64,
        /// Multiplier on link capacity, in (0, 1].
        capacity_derating: f64,
        /// Standard deviation of zero-mean Gaussian per-hop jitter, seconds.
        jitter_sd_s: f64,
    },
}

impl Fidelity {
    /// Perturbed-mode defaults: 50 µs/hop processing, 5% capacity derate,
    /// 10 µs jitter. Enough to open a measurable, learnable gap versus the
    /// ideal mode at desk scale.
    pub fn perturbed_default() -> Self {
        Fidelity::Perturbed {
            processing_delay_s: 50e-6,
            capacity_derating: 0.95,
            jitter_sd_s: 10e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Fidelity::Perturbed { processing_delay_s, capacity_derating, jitter_sd_s } = self {
            if *processing_delay_s < 0.0 || *jitter_sd_s < 0.0 {
                return Err(Error::config("perturbation delays must be >= 0"));
            }
            if !(*capacity_derating > 0.0 && *capacity_derating <= 1.0) {
                return Err(Error::config(format!(
                    "capacity derating must be in (0, 1], got {capacity_derating}"
                )));
            }
        }
        Ok(())
    }
}

/// The unit of dataset generation: everything needed to reproduce one
/// simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: String,
    pub id: u32,
    pub topology: Topology,
    pub flows: Vec<Flow>,
    pub duration_s: f64,
    pub seed: u64,
    pub fidelity: Fidelity,
}

impl Scenario {
    pub fn new(
        id: u32,
        topology: Topology,
        flows: Vec<Flow>,
        duration_s: f64,
        seed: u64,
        fidelity: Fidelity,
    ) -> Self {
        Self { schema: SCENARIO_SCHEMA.to_string(), id, topology, flows, duration_s, seed, fidelity }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(Error::config(format!(
                "unsupported scenario schema `{}` (expected `{SCENARIO_SCHEMA}`)",
                self.schema
            )));
        }
        self.topology.validate()?;
        self.fidelity.validate()?;
        if self.duration_s <= 0.0 {
            return Err(Error::config("scenario duration must be > 0"));
        }
        let mut flow_ids = HashSet::new();
        for flow in &self.flows {
            if !flow_ids.insert(flow.id) {
                return Err(Error::config(format!("duplicate flow id {}", flow.id)));
            }
            flow.traffic.validate()?;
            flow.packet_size.validate()?;
            if flow.path.is_empty() {
                return Err(Error::config(format!("flow {} has an empty path", flow.id)));
            }
            // path links exist, have queues, and are contiguous
            let mut prev_dst: Option<NodeId> = None;
            for &lid in &flow.path {
                let link = self.topology.link(lid).ok_or_else(|| {
                    Error::config(format!("flow {} path references unknown link {lid}", flow.id))
                })?;
                self.topology.queue_of_link(lid).ok_or_else(|| {
                    Error::config(format!("flow {} path references link {lid} with no queue", flow.id))
                })?;
                if let Some(p) = prev_dst {
                    if p != link.src {
                        return Err(Error::config(format!(
                            "flow {} path is not contiguous: node {p} then link {lid} from node {}",
                            flow.id, link.src
                        )));
                    }
                }
                prev_dst = Some(link.dst);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(Error::data)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("reading {}: {e}", path.display())))?;
        let scenario: Scenario = serde_json::from_str(&text)
            .map_err(|e| Error::data(format!("parsing {}: {e}", path.display())))?;
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_hop_topology() -> Topology {
        Topology {
            nodes: vec![0, 1, 2],
            links: vec![
                Link { id: 0, src: 0, dst: 1, capacity_bps: 1e7, prop_delay_s: 1e-3 },
                Link { id: 1, src: 1, dst: 2, capacity_bps: 1e7, prop_delay_s: 2e-3 },
            ],
            queues: vec![
                QueueCfg { id: 0, link: 0, buffer_pkts: 1000 },
                QueueCfg { id: 1, link: 1, buffer_pkts: 1000 },
            ],
        }
    }

    fn scenario_with_path(path: Vec<LinkId>) -> Scenario {
        Scenario::new(
            0,
            two_hop_topology(),
            vec![Flow {
                id: 0,
                path,
                traffic: TrafficModel::Poisson { rate_pps: 10.0 },
                packet_size: PacketSize::Fixed { bytes: 1000.0 },
            }],
            1.0,
            42,
            Fidelity::Ideal,
        )
    }

    #[test]
    fn valid_scenario_passes() {
        scenario_with_path(vec![0, 1]).validate().unwrap();
    }

    #[test]
    fn unknown_link_in_path_is_config_error() {
        let err = scenario_with_path(vec![0, 9]).validate().unwrap_err();
        assert!(err.to_string().contains("unknown link 9"));
    }

    #[test]
    fn non_contiguous_path_is_rejected() {
        // link 1 starts at node 1, not node 2
        let err = scenario_with_path(vec![1, 0]).validate().unwrap_err();
        assert!(err.to_string().contains("not contiguous"));
    }

    #[test]
    fn missing_queue_is_rejected() {
        let mut s = scenario_with_path(vec![0, 1]);
        s.topology.queues.pop();
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("no queue"));
    }

    #[test]
    fn derating_bounds_are_enforced() {
        let mut s = scenario_with_path(vec![0]);
        s.fidelity = Fidelity::Perturbed {
            processing_delay_s: 0.0,
            capacity_derating: 1.5,
            jitter_sd_s: 0.0,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn scenario_json_round_trips() {
        let s = scenario_with_path(vec![0, 1]);
        let json = s.to_json().unwrap();
        let back: Scenario = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn onoff_mean_rate_accounts_for_duty_cycle() {
        let m = TrafficModel::OnOff { on_mean_s: 1.0, off_mean_s: 3.0, on_rate_pps: 400.0 };
        assert!((m.mean_rate_pps().unwrap() - 100.0).abs() < 1e-12);
    }
}
