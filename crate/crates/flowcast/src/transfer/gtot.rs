//! Masked optimal-transport penalty on post-MPA embeddings.
//!
//! Instead of anchoring weights, this compares the receiver's refined
//! entity embeddings against the donor's on the same scenario-window, using
//! an entropic transport cost restricted to graph-adjacent pairs (plus
//! self-loops). The transport plan is computed from detached values; the
//! gradient flows through the receiver-side costs only.

use std::collections::HashMap;

use crate::autodiff::Var;
use crate::dataio::WindowedScenario;
use crate::error::{Error, Result};
use crate::model::{build_forward, DelayModel, ForwardPass, TrainHooks};
use crate::transfer::sinkhorn::{sinkhorn_plan, MaskedCost};

/// Entity order inside one window: active flows (graph order), then all
/// queues, then all links.
fn window_entities(pass: &ForwardPass, w: usize) -> Vec<Var> {
    let embs = pass
        .embeddings
        .as_ref()
        .expect("forward pass collected embeddings")
        .get(w)
        .expect("window in range");
    embs.flows
        .iter()
        .flatten()
        .copied()
        .chain(embs.queues.iter().copied())
        .chain(embs.links.iter().copied())
        .collect()
}

/// Embedding values (donor side) in the same entity order.
pub fn window_embedding_values(pass: &ForwardPass, w: usize) -> Vec<Vec<f64>> {
    window_entities(pass, w)
        .into_iter()
        .map(|v| pass.tape.value(v).to_vec())
        .collect()
}

/// Feasible transport pairs for one window: self-loops over every entity,
/// flow–queue incidence for each hop of each active flow, and queue–link
/// incidence, all symmetric.
pub fn entity_mask(scenario: &WindowedScenario, w: usize) -> Vec<(usize, usize)> {
    let graph = &scenario.graph;
    let active: Vec<usize> = (0..graph.flows.len())
        .filter(|&f| scenario.grid[w][f].active)
        .collect();
    let nf = active.len();
    let nq = graph.queues.len();
    let nl = graph.links.len();
    let total = nf + nq + nl;

    let mut pairs: Vec<(usize, usize)> = (0..total).map(|i| (i, i)).collect();
    for (fi, &f) in active.iter().enumerate() {
        for hop in &graph.flows[f].hops {
            if let Some(q) = graph.queue_position(hop.queue) {
                pairs.push((fi, nf + q));
                pairs.push((nf + q, fi));
            }
        }
    }
    for (l, link) in graph.links.iter().enumerate() {
        if let Some(q) = graph.queue_position(link.queue) {
            pairs.push((nf + q, nf + nq + l));
            pairs.push((nf + nq + l, nf + q));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Masked transport cost between two embedding sets (value route, used by
/// tests and reporting): cᵢⱼ = ‖eᵢ − e'ⱼ‖² on masked pairs.
pub fn gtot_distance(
    receiver: &[Vec<f64>],
    donor: &[Vec<f64>],
    mask: &[(usize, usize)],
    epsilon: f64,
    iterations: usize,
) -> Result<f64> {
    if receiver.len() != donor.len() {
        return Err(Error::config(format!(
            "embedding sets differ in size: {} vs {}",
            receiver.len(),
            donor.len()
        )));
    }
    let entries = mask
        .iter()
        .map(|&(i, j)| {
            let c = receiver[i]
                .iter()
                .zip(&donor[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            (i, j, c)
        })
        .collect();
    let cost = MaskedCost { rows: receiver.len(), cols: donor.len(), entries };
    crate::transfer::sinkhorn::sinkhorn_distance(&cost, epsilon, iterations)
}

/// Training hook: adds λ × (mean over windows of the masked transport cost
/// between receiver and donor embeddings).
pub struct GtotHook {
    pub lambda: f64,
    pub epsilon: f64,
    pub iterations: usize,
    donor: DelayModel,
    donor_cache: HashMap<u32, Vec<Vec<Vec<f64>>>>,
}

impl GtotHook {
    pub fn new(donor: DelayModel, lambda: f64, epsilon: f64, iterations: usize) -> Self {
        Self { lambda, epsilon, iterations, donor, donor_cache: HashMap::new() }
    }

    fn donor_embeddings(&mut self, scenario: &WindowedScenario) -> Result<&Vec<Vec<Vec<f64>>>> {
        if !self.donor_cache.contains_key(&scenario.scenario_id) {
            let pass = build_forward(
                &self.donor.config,
                &self.donor.store,
                &self.donor.normalizer,
                scenario,
                true,
            )?;
            pass.tape.check_finite()?;
            let per_window: Vec<Vec<Vec<f64>>> = (0..scenario.num_windows())
                .map(|w| window_embedding_values(&pass, w))
                .collect();
            self.donor_cache.insert(scenario.scenario_id, per_window);
        }
        Ok(&self.donor_cache[&scenario.scenario_id])
    }
}

impl TrainHooks for GtotHook {
    fn wants_embeddings(&self) -> bool {
        self.lambda != 0.0
    }

    fn augment_loss(
        &mut self,
        pass: &mut ForwardPass,
        _store: &crate::autodiff::ParamStore,
        scenario: &WindowedScenario,
        loss: Var,
    ) -> Result<Var> {
        if self.lambda == 0.0 {
            return Ok(loss);
        }
        let donor_embs = self.donor_embeddings(scenario)?.clone();
        let num_windows = scenario.num_windows();
        let mut window_costs = Vec::with_capacity(num_windows);
        for (w, donor_w) in donor_embs.iter().enumerate().take(num_windows) {
            let entities = window_entities(pass, w);
            if entities.len() != donor_w.len() {
                return Err(Error::config(format!(
                    "window {w}: receiver has {} entities, donor {}",
                    entities.len(),
                    donor_w.len()
                )));
            }
            let mask = entity_mask(scenario, w);
            let mut cost_vars = Vec::with_capacity(mask.len());
            let mut entries = Vec::with_capacity(mask.len());
            for &(i, j) in &mask {
                let anchor = pass.tape.constant(&donor_w[j]);
                let diff = pass.tape.sub(entities[i], anchor);
                let sq = pass.tape.square(diff);
                let c = pass.tape.sum(sq);
                entries.push((i, j, pass.tape.scalar(c)));
                cost_vars.push(c);
            }
            let cost = MaskedCost { rows: entities.len(), cols: donor_w.len(), entries };
            // plan from detached values; gradient flows through the costs
            let plan = sinkhorn_plan(&cost, self.epsilon, self.iterations)?;
            let terms: Vec<Var> = cost_vars
                .iter()
                .zip(&plan)
                .map(|(c, p)| pass.tape.scale(*c, *p))
                .collect();
            window_costs.push(pass.tape.sum_many(&terms));
        }
        let total = pass.tape.sum_many(&window_costs);
        let mean = pass.tape.scale(total, 1.0 / num_windows as f64);
        let weighted = pass.tape.scale(mean, self.lambda);
        Ok(pass.tape.add(loss, weighted))
    }
}
