//! MLP and GRU parameter bundles: naming scheme, seeded initialization and
//! tape-level forward passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::store::{Block, ParamStore};
use crate::autodiff::tape::{Tape, TapeParams, Var};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
    Softplus,
}

fn apply(tape: &mut Tape, act: Activation, x: Var) -> Var {
    match act {
        Activation::Linear => x,
        Activation::Relu => tape.relu(x),
        Activation::Tanh => tape.tanh(x),
        Activation::Softplus => tape.softplus(x),
    }
}

/// Glorot-style uniform init in ±√(6/(fan_in+fan_out)).
fn init_weight(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect()
}

/// A chain of affine layers. Hidden layers share one activation; the output
/// layer has its own (usually linear, softplus for the delay readout).
#[derive(Clone, Debug)]
pub struct MlpSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
}

impl MlpSpec {
    pub fn new(name: &str, dims: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        Self { name: name.to_string(), dims: dims.to_vec(), hidden, output }
    }

    fn layer_names(&self, layer: usize) -> (String, String) {
        (format!("{}.w{layer}", self.name), format!("{}.b{layer}", self.name))
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Registers weight and bias tensors: weights Glorot-uniform, biases zero.
    pub fn init_into(&self, store: &mut ParamStore, block: Block, rng: &mut impl Rng) -> Result<()> {
        for layer in 0..self.num_layers() {
            let (rows, cols) = (self.dims[layer + 1], self.dims[layer]);
            let (wname, bname) = self.layer_names(layer);
            store.insert(&wname, init_weight(rng, rows, cols), vec![rows, cols], block)?;
            store.insert(&bname, vec![0.0; rows], vec![rows], block)?;
        }
        Ok(())
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &mut TapeParams,
        store: &ParamStore,
        x: Var,
    ) -> Var {
        let mut h = x;
        for layer in 0..self.num_layers() {
            let (rows, cols) = (self.dims[layer + 1], self.dims[layer]);
            let (wname, bname) = self.layer_names(layer);
            let w = params.bind(tape, store, &wname);
            let b = params.bind(tape, store, &bname);
            h = tape.affine(w, b, h, rows, cols);
            let act = if layer + 1 == self.num_layers() { self.output } else { self.hidden };
            h = apply(tape, act, h);
        }
        h
    }
}

/// Gated recurrent unit: update gate z, reset gate r, candidate c.
///
/// h' = (1−z)⊙h + z⊙c with z,r = σ(Wx + Uh + b) and
/// c = tanh(W_c x + U_c (r⊙h) + b_c). With all-zero weights the gates sit at
/// 0.5 and the candidate at 0, so h' = h/2 — a handy analytic check.
#[derive(Clone, Debug)]
pub struct GruSpec {
    pub name: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl GruSpec {
    pub fn new(name: &str, input_dim: usize, hidden_dim: usize) -> Self {
        Self { name: name.to_string(), input_dim, hidden_dim }
    }

    fn gate_names(&self, gate: &str) -> (String, String, String) {
        (
            format!("{}.w{gate}", self.name),
            format!("{}.u{gate}", self.name),
            format!("{}.b{gate}", self.name),
        )
    }

    pub fn init_into(&self, store: &mut ParamStore, block: Block, rng: &mut impl Rng) -> Result<()> {
        let (h, i) = (self.hidden_dim, self.input_dim);
        for gate in ["z", "r", "c"] {
            let (w, u, b) = self.gate_names(gate);
            store.insert(&w, init_weight(rng, h, i), vec![h, i], block)?;
            store.insert(&u, init_weight(rng, h, h), vec![h, h], block)?;
            store.insert(&b, vec![0.0; h], vec![h], block)?;
        }
        Ok(())
    }

    /// One recurrence step: consumes input `x` and state `h`, returns the new
    /// state.
    pub fn step(
        &self,
        tape: &mut Tape,
        params: &mut TapeParams,
        store: &ParamStore,
        x: Var,
        h: Var,
    ) -> Var {
        let (hd, id) = (self.hidden_dim, self.input_dim);
        let gate = |tape: &mut Tape, params: &mut TapeParams, names: (String, String, String), state: Var| {
            let w = params.bind(tape, store, &names.0);
            let u = params.bind(tape, store, &names.1);
            let b = params.bind(tape, store, &names.2);
            let wx = tape.affine(w, b, x, hd, id);
            let zeros = tape.constant(&vec![0.0; hd]);
            let uh = tape.affine(u, zeros, state, hd, hd);
            tape.add(wx, uh)
        };

        let z_pre = gate(tape, params, self.gate_names("z"), h);
        let z = tape.sigmoid(z_pre);
        let r_pre = gate(tape, params, self.gate_names("r"), h);
        let r = tape.sigmoid(r_pre);
        let rh = tape.mul(r, h);
        let c_pre = gate(tape, params, self.gate_names("c"), rh);
        let c = tape.tanh(c_pre);

        // h' = h + z⊙(c − h)
        let delta = tape.sub(c, h);
        let zdelta = tape.mul(z, delta);
        tape.add(h, zdelta)
    }
}
