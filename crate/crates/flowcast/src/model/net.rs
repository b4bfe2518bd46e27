//! Forward-pass construction and the masked relative-error loss.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Block, GruSpec, MlpSpec, ParamStore, Tape, TapeParams, Var};
use crate::dataio::{Normalizer, WindowedScenario, FLOW_FEATURES};
use crate::error::{Error, Result};
use crate::model::config::ModelConfig;

/// The trained artifact: hyperparameters, weights and the feature
/// normalizer they were fit against.
#[derive(Clone, Debug)]
pub struct DelayModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub normalizer: Normalizer,
}

struct LayerSpecs {
    enc_flow: MlpSpec,
    enc_link: MlpSpec,
    enc_queue: MlpSpec,
    mpa_flow: GruSpec,
    mpa_queue: GruSpec,
    mpa_link: GruSpec,
    mem_queue: GruSpec,
    readout: MlpSpec,
}

/// Inverse of softplus: x with ln(1 + eˣ) = y.
fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().max(f64::MIN_POSITIVE).ln()
    }
}

fn layer_specs(config: &ModelConfig) -> LayerSpecs {
    let e = config.embedding_dim;
    let enc = config.encoder_hidden;
    let ro = config.readout_hidden;
    LayerSpecs {
        enc_flow: MlpSpec::new("enc_flow", &[FLOW_FEATURES, enc, e], Activation::Relu, Activation::Linear),
        enc_link: MlpSpec::new("enc_link", &[1, enc, e], Activation::Relu, Activation::Linear),
        enc_queue: MlpSpec::new("enc_queue", &[1, enc, e], Activation::Relu, Activation::Linear),
        mpa_flow: GruSpec::new("mpa_flow", 2 * e, e),
        mpa_queue: GruSpec::new("mpa_queue", e, e),
        mpa_link: GruSpec::new("mpa_link", e, e),
        mem_queue: GruSpec::new("mem_queue", e, e),
        readout: MlpSpec::new("readout", &[e, ro, ro, 1], Activation::Relu, Activation::Softplus),
    }
}

impl DelayModel {
    /// Fresh model with seeded initialization.
    pub fn init(config: ModelConfig, normalizer: Normalizer, seed: u64) -> Result<Self> {
        config.validate()?;
        let store = Self::fresh_store_scaled(&config, normalizer.target_mean_s, seed)?;
        Ok(Self { config, store, normalizer })
    }

    /// A freshly initialized parameter store with the readout output bias
    /// left at zero. Prefer [`fresh_store_scaled`](Self::fresh_store_scaled)
    /// when a target scale is known.
    pub fn fresh_store(config: &ModelConfig, seed: u64) -> Result<ParamStore> {
        Self::fresh_store_scaled(config, 0.0, seed)
    }

    /// A freshly initialized parameter store for `config`. Used both at
    /// model creation and when a transfer policy re-trains a block from
    /// scratch.
    ///
    /// The readout's output bias starts at softplus⁻¹(`target_scale_s`) so
    /// the first predictions land near the training targets' magnitude;
    /// delay targets sit orders of magnitude below softplus(0), and a
    /// zero-bias start strands the optimizer in the saturated region where
    /// gradients vanish.
    pub fn fresh_store_scaled(
        config: &ModelConfig,
        target_scale_s: f64,
        seed: u64,
    ) -> Result<ParamStore> {
        config.validate()?;
        let specs = layer_specs(config);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        specs.enc_flow.init_into(&mut store, Block::Encoding, &mut rng)?;
        specs.enc_link.init_into(&mut store, Block::Encoding, &mut rng)?;
        specs.enc_queue.init_into(&mut store, Block::Encoding, &mut rng)?;
        specs.mpa_flow.init_into(&mut store, Block::Mpa, &mut rng)?;
        specs.mpa_queue.init_into(&mut store, Block::Mpa, &mut rng)?;
        specs.mpa_link.init_into(&mut store, Block::Mpa, &mut rng)?;
        specs.mem_queue.init_into(&mut store, Block::Mpa, &mut rng)?;
        specs.readout.init_into(&mut store, Block::Readout, &mut rng)?;
        if target_scale_s > 0.0 {
            let bias_name = format!("readout.b{}", specs.readout.num_layers() - 1);
            let bias = store.get_mut(&bias_name).expect("readout bias exists");
            bias.values[0] = softplus_inverse(target_scale_s);
        }
        Ok(store)
    }

    pub fn forward(&self, scenario: &WindowedScenario) -> Result<ForwardPass> {
        build_forward(&self.config, &self.store, &self.normalizer, scenario, false)
    }

    /// Per-(flow, window) predictions paired with ground-truth targets, for
    /// active cells only.
    pub fn predict(&self, scenario: &WindowedScenario) -> Result<PredictionSet> {
        let pass = self.forward(scenario)?;
        pass.tape.check_finite()?;
        let mut rows = Vec::new();
        for (w, row) in pass.preds.iter().enumerate() {
            for (f, pred) in row.iter().enumerate() {
                if let Some(var) = pred {
                    rows.push(PredRow {
                        scenario: scenario.scenario_id,
                        window: w as u32,
                        flow: scenario.graph.flows[f].id,
                        predicted_s: pass.tape.scalar(*var),
                        target_s: scenario.grid[w][f].target_delay_s,
                    });
                }
            }
        }
        Ok(PredictionSet { rows })
    }
}

/// Post-MPA embeddings of one window.
pub struct WindowEmbeddings {
    pub flows: Vec<Option<Var>>,
    pub queues: Vec<Var>,
    pub links: Vec<Var>,
}

/// A built tape plus handles into it: per-cell prediction vars and,
/// optionally, the post-MPA embeddings (for embedding-space regularizers).
pub struct ForwardPass {
    pub tape: Tape,
    pub params: TapeParams,
    pub preds: Vec<Vec<Option<Var>>>,
    pub embeddings: Option<Vec<WindowEmbeddings>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredRow {
    pub scenario: u32,
    pub window: u32,
    pub flow: u32,
    pub predicted_s: f64,
    pub target_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub rows: Vec<PredRow>,
}

impl PredictionSet {
    pub fn extend(&mut self, other: PredictionSet) {
        self.rows.extend(other.rows);
    }

    pub fn predictions(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.predicted_s).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target_s).collect()
    }
}

/// Builds the full forward pass for one scenario on a fresh tape.
///
/// Window loop: encode entities (queue embeddings seeded from the previous
/// window through the memory GRU), run `mpa_iterations` of flow→queue→link
/// updates, then read out per-flow delay predictions for active cells.
pub fn build_forward(
    config: &ModelConfig,
    store: &ParamStore,
    normalizer: &Normalizer,
    scenario: &WindowedScenario,
    collect_embeddings: bool,
) -> Result<ForwardPass> {
    config.validate()?;
    let specs = layer_specs(config);
    let graph = &scenario.graph;
    let num_flows = graph.flows.len();
    let num_queues = graph.queues.len();
    let num_links = graph.links.len();
    let e = config.embedding_dim;

    // resolve hop ids to dense positions once
    let mut hop_positions: Vec<Vec<(usize, usize)>> = Vec::with_capacity(num_flows);
    for flow in &graph.flows {
        if flow.hops.is_empty() {
            return Err(Error::config(format!("flow {} has an empty path", flow.id)));
        }
        let hops = flow
            .hops
            .iter()
            .map(|h| {
                let q = graph.queue_position(h.queue).ok_or_else(|| {
                    Error::config(format!("flow {} references unknown queue {}", flow.id, h.queue))
                })?;
                let l = graph.link_position(h.link).ok_or_else(|| {
                    Error::config(format!("flow {} references unknown link {}", flow.id, h.link))
                })?;
                Ok((q, l))
            })
            .collect::<Result<Vec<_>>>()?;
        hop_positions.push(hops);
    }
    let link_queue_pos: Vec<usize> = graph
        .links
        .iter()
        .map(|l| {
            graph.queue_position(l.queue).ok_or_else(|| {
                Error::config(format!("link {} references unknown queue {}", l.id, l.queue))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tape = Tape::new();
    let mut params = TapeParams::new();
    let mut preds: Vec<Vec<Option<Var>>> = Vec::with_capacity(scenario.num_windows());
    let mut embeddings: Vec<WindowEmbeddings> = Vec::new();
    let mut prev_queue_state: Option<Vec<Var>> = None;

    for w in 0..scenario.num_windows() {
        // --- encoding ---
        let mut h_q: Vec<Var> = (0..num_queues)
            .map(|q| {
                let x = tape.constant(&normalizer.queue_input(scenario, q));
                let enc = specs.enc_queue.forward(&mut tape, &mut params, store, x);
                match (&prev_queue_state, config.inter_window_memory) {
                    (Some(prev), true) => {
                        specs.mem_queue.step(&mut tape, &mut params, store, enc, prev[q])
                    }
                    _ => enc,
                }
            })
            .collect();
        let mut h_l: Vec<Var> = (0..num_links)
            .map(|l| {
                let x = tape.constant(&normalizer.link_input(scenario, l));
                specs.enc_link.forward(&mut tape, &mut params, store, x)
            })
            .collect();
        let mut h_f: Vec<Option<Var>> = (0..num_flows)
            .map(|f| {
                scenario.grid[w][f].active.then(|| {
                    let x = tape.constant(&normalizer.flow_input(scenario, w, f));
                    specs.enc_flow.forward(&mut tape, &mut params, store, x)
                })
            })
            .collect();

        // --- message passing ---
        for _ in 0..config.mpa_iterations {
            // flow updates: scan each active flow's path, leaving one
            // message per traversed hop
            let mut queue_messages: Vec<Vec<Var>> = vec![Vec::new(); num_queues];
            for f in 0..num_flows {
                let Some(mut state) = h_f[f] else { continue };
                for &(q, l) in &hop_positions[f] {
                    let input = tape.concat(h_q[q], h_l[l]);
                    state = specs.mpa_flow.step(&mut tape, &mut params, store, input, state);
                    queue_messages[q].push(state);
                }
                h_f[f] = Some(state);
            }
            // queue updates: aggregate traversing-flow messages (canonical
            // order, so relabeling flows cannot change the sum)
            let zero = tape.constant(&vec![0.0; e]);
            for q in 0..num_queues {
                let agg = if queue_messages[q].is_empty() {
                    zero
                } else {
                    tape.canonical_sum(&queue_messages[q])
                };
                h_q[q] = specs.mpa_queue.step(&mut tape, &mut params, store, agg, h_q[q]);
            }
            // link updates: one step over the link's queue state
            for l in 0..num_links {
                let q = link_queue_pos[l];
                h_l[l] = specs.mpa_link.step(&mut tape, &mut params, store, h_q[q], h_l[l]);
            }
        }
        prev_queue_state = Some(h_q.clone());

        // --- readout ---
        let row: Vec<Option<Var>> = (0..num_flows)
            .map(|f| {
                h_f[f].map(|state| specs.readout.forward(&mut tape, &mut params, store, state))
            })
            .collect();
        preds.push(row);
        if collect_embeddings {
            embeddings.push(WindowEmbeddings { flows: h_f, queues: h_q.clone(), links: h_l });
        }
    }

    tape.check_finite()?;
    Ok(ForwardPass {
        tape,
        params,
        preds,
        embeddings: collect_embeddings.then_some(embeddings),
    })
}

/// Masked relative-error training loss: mean over active cells of
/// |pred − target| / target. Returns `None` when the scenario has no active
/// cells at all.
pub fn mape_loss(pass: &mut ForwardPass, scenario: &WindowedScenario) -> Result<Option<Var>> {
    let mut errors = Vec::new();
    for (w, row) in pass.preds.iter().enumerate() {
        for (f, pred) in row.iter().enumerate() {
            let Some(pred) = pred else { continue };
            let target = scenario.grid[w][f].target_delay_s;
            if target <= 0.0 {
                return Err(Error::data(format!(
                    "scenario {}: active flow-window ({}, {}) has non-positive target {target}",
                    scenario.scenario_id, w, f
                )));
            }
            let t = pass.tape.scalar_const(target);
            let diff = pass.tape.sub(*pred, t);
            let abs = pass.tape.abs(diff);
            errors.push(pass.tape.scale(abs, 1.0 / target));
        }
    }
    if errors.is_empty() {
        return Ok(None);
    }
    let total = pass.tape.sum_many(&errors);
    let loss = pass.tape.scale(total, 1.0 / errors.len() as f64);
    Ok(Some(loss))
}
