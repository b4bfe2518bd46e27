//! Checkpoint files: hyperparameters, normalizer and parameters in one JSON
//! object. f64 values are written as decimal literals that parse back to
//! the identical bits.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Block, ParamStore};
use crate::dataio::Normalizer;
use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::net::DelayModel;

pub const CHECKPOINT_SCHEMA: &str = "checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointParam {
    pub shape: Vec<usize>,
    pub block: Block,
    pub trainable: bool,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub hyperparameters: ModelConfig,
    pub normalizer: Normalizer,
    pub parameters: BTreeMap<String, CheckpointParam>,
}

impl Checkpoint {
    pub fn from_model(model: &DelayModel) -> Result<Self> {
        if !model.store.all_finite() {
            return Err(Error::numeric("refusing to checkpoint non-finite parameters"));
        }
        let parameters = model
            .store
            .iter()
            .map(|(name, p)| {
                (
                    name.clone(),
                    CheckpointParam {
                        shape: p.shape.clone(),
                        block: p.block,
                        trainable: p.trainable,
                        values: p.values.clone(),
                    },
                )
            })
            .collect();
        Ok(Self {
            schema: CHECKPOINT_SCHEMA.to_string(),
            hyperparameters: model.config.clone(),
            normalizer: model.normalizer.clone(),
            parameters,
        })
    }

    pub fn into_model(self) -> Result<DelayModel> {
        if self.schema != CHECKPOINT_SCHEMA {
            return Err(Error::data(format!(
                "unsupported checkpoint schema `{}` (expected `{CHECKPOINT_SCHEMA}`)",
                self.schema
            )));
        }
        self.hyperparameters.validate()?;
        let mut store = ParamStore::new();
        for (name, p) in self.parameters {
            store.insert(&name, p.values, p.shape, p.block)?;
            let inserted = store.get_mut(&name).expect("just inserted");
            inserted.trainable = p.trainable;
            inserted.fresh = false;
        }
        // the layer set must match what the hyperparameters would build
        let expected = DelayModel::fresh_store(&self.hyperparameters, 0)?;
        for name in expected.names() {
            let got = store.get(name).ok_or_else(|| {
                Error::data(format!("checkpoint is missing parameter `{name}`"))
            })?;
            let want = expected.get(name).unwrap();
            if got.shape != want.shape {
                return Err(Error::data(format!(
                    "checkpoint parameter `{name}` has shape {:?}, expected {:?}",
                    got.shape, want.shape
                )));
            }
        }
        if store.len() != expected.len() {
            return Err(Error::data("checkpoint carries unexpected extra parameters"));
        }
        Ok(DelayModel { config: self.hyperparameters, store, normalizer: self.normalizer })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(Error::data)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("reading checkpoint {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::data(format!("parsing checkpoint {}: {e}", path.display())))
    }
}

impl DelayModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        Checkpoint::from_model(self)?.write_json(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::read_json(path)?.into_model()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::ColumnStats;

    fn dummy_normalizer() -> Normalizer {
        Normalizer {
            flow: ColumnStats { mean: vec![0.1, 0.2, 0.3, 0.4], sd: vec![1.0, 2.0, 3.0, 4.0] },
            link: ColumnStats { mean: vec![5.0], sd: vec![6.0] },
            queue: ColumnStats { mean: vec![7.0], sd: vec![8.0] },
            target_mean_s: 1.5e-3,
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let model = DelayModel::init(ModelConfig::tiny(), dummy_normalizer(), 42).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        model.save(file.path()).unwrap();
        let back = DelayModel::load(file.path()).unwrap();

        assert_eq!(model.config, back.config);
        assert_eq!(model.normalizer, back.normalizer);
        assert_eq!(model.store.len(), back.store.len());
        for (name, p) in model.store.iter() {
            let q = back.store.get(name).unwrap();
            assert_eq!(p.shape, q.shape);
            assert_eq!(p.block, q.block);
            assert_eq!(p.trainable, q.trainable);
            let a: Vec<u64> = p.values.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = q.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b, "parameter `{name}` not bit-identical");
        }
    }

    #[test]
    fn missing_parameter_is_rejected() {
        let model = DelayModel::init(ModelConfig::tiny(), dummy_normalizer(), 1).unwrap();
        let mut checkpoint = Checkpoint::from_model(&model).unwrap();
        checkpoint.parameters.remove("readout.w0");
        let err = checkpoint.into_model().unwrap_err();
        assert!(err.to_string().contains("missing parameter"));
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let model = DelayModel::init(ModelConfig::tiny(), dummy_normalizer(), 1).unwrap();
        let mut checkpoint = Checkpoint::from_model(&model).unwrap();
        checkpoint.schema = "checkpoint/99".into();
        assert!(checkpoint.into_model().is_err());
    }
}
