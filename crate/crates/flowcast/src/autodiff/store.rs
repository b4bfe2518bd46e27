//! Named, block-tagged parameter tensors with gradient buffers and
//! per-parameter trainability flags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three sub-networks a parameter can belong to. Transfer strategies
/// operate at this granularity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Encoding,
    Mpa,
    Readout,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::Encoding, Block::Mpa, Block::Readout];

    pub fn label(self) -> &'static str {
        match self {
            Block::Encoding => "encoding",
            Block::Mpa => "mpa",
            Block::Readout => "readout",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Param {
    pub values: Vec<f64>,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub grad: Vec<f64>,
    pub block: Block,
    pub trainable: bool,
    /// True when this tensor was freshly initialized rather than copied from
    /// a donor. Used by starting-point penalties to tell the two apart.
    #[serde(default)]
    pub fresh: bool,
}

impl Param {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Map from parameter name to tensor. Iteration order is the name order, so
/// every walk over the store is deterministic.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a tensor. Names must be unique; the gradient buffer is
    /// allocated to match the tensor shape.
    pub fn insert(
        &mut self,
        name: &str,
        values: Vec<f64>,
        shape: Vec<usize>,
        block: Block,
    ) -> Result<()> {
        if self.params.contains_key(name) {
            return Err(Error::config(format!("duplicate parameter name `{name}`")));
        }
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::config(format!(
                "parameter `{name}`: {} values do not fill shape {shape:?}",
                values.len()
            )));
        }
        let grad = vec![0.0; values.len()];
        self.params.insert(
            name.to_string(),
            Param { values, shape, grad, block, trainable: true, fresh: true },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_trainable(&self) -> usize {
        self.params.values().filter(|p| p.trainable).count()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Restores gradient buffers after deserialization (serde skips them).
    pub fn ensure_grad_buffers(&mut self) {
        for p in self.params.values_mut() {
            if p.grad.len() != p.values.len() {
                p.grad = vec![0.0; p.values.len()];
            }
        }
    }

    pub fn set_block_trainable(&mut self, block: Block, trainable: bool) {
        for p in self.params.values_mut() {
            if p.block == block {
                p.trainable = trainable;
            }
        }
    }

    /// L2 norm of the current gradient of one block.
    pub fn block_grad_norm(&self, block: Block) -> f64 {
        self.params
            .values()
            .filter(|p| p.block == block)
            .flat_map(|p| p.grad.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// True when every tensor value is finite.
    pub fn all_finite(&self) -> bool {
        self.params
            .values()
            .all(|p| p.values.iter().all(|v| v.is_finite()))
    }
}
