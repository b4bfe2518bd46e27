//! Experiment configuration file: schema-validated before any work starts,
//! unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::model::TrainConfig;
use crate::netsim::{Fidelity, ScenarioTemplate};
use crate::transfer::TransferMethod;

pub const EXPERIMENT_SCHEMA: &str = "experiment/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    /// Donor training settings.
    pub train: TrainConfig,
    pub transfer: TransferSection,
    #[serde(default)]
    pub sweep: SweepSection,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Shared scenario template; its fidelity field is ignored in favor of
    /// the per-source fidelities below.
    pub template: ScenarioTemplate,
    pub window_length_s: f64,
    /// Ideal-mode scenarios (the abundant training source).
    pub simulated: SourceSection,
    /// Perturbed-mode scenarios standing in for hardware measurements.
    pub real: RealSourceSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub count: usize,
    pub seed: u64,
    pub split: SplitSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealSourceSection {
    pub count: usize,
    pub seed: u64,
    pub split: SplitSpec,
    /// Perturbation applied to this source; defaults to the standard
    /// perturbed-mode parameters.
    pub fidelity: Option<Fidelity>,
    /// Optional template override (e.g. a fixed lab topology).
    pub template: Option<ScenarioTemplate>,
}

impl RealSourceSection {
    pub fn effective_fidelity(&self) -> Fidelity {
        self.fidelity.clone().unwrap_or_else(Fidelity::perturbed_default)
    }
}

/// Either fractional or explicit-count partitioning; exactly one must be
/// given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub seed: u64,
    pub fractions: Option<[f64; 3]>,
    pub counts: Option<[usize; 3]>,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        match (&self.fractions, &self.counts) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            (Some(_), Some(_)) => {
                Err(Error::config("split: give either fractions or counts, not both"))
            }
            (None, None) => Err(Error::config("split: either fractions or counts is required")),
        }
    }

    pub fn apply(&self, ids: &[u32]) -> Result<crate::dataio::DatasetPartition> {
        self.validate()?;
        match (self.fractions, self.counts) {
            (Some(f), None) => crate::dataio::split(ids, f, self.seed),
            (None, Some(c)) => crate::dataio::split_counts(ids, c, self.seed),
            _ => unreachable!("validated above"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSection {
    pub method: TransferMethod,
    /// Fine-tuning rate; omitted means a tenth of the donor's rate.
    pub learning_rate: Option<f64>,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub counts: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Manual policy used for the fine-tuned arm.
    pub policy: String,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { counts: vec![5, 10], seeds: vec![1, 2, 3], policy: "FTR".into() }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("reading config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("parsing config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != EXPERIMENT_SCHEMA {
            return Err(Error::config(format!(
                "unsupported experiment schema `{}` (expected `{EXPERIMENT_SCHEMA}`)",
                self.schema
            )));
        }
        if self.dataset.window_length_s <= 0.0 {
            return Err(Error::config("window_length_s must be > 0"));
        }
        if self.dataset.simulated.count == 0 || self.dataset.real.count == 0 {
            return Err(Error::config("both dataset sources need at least one scenario"));
        }
        self.dataset.template.validate()?;
        if let Some(t) = &self.dataset.real.template {
            t.validate()?;
        }
        self.dataset.simulated.split.validate()?;
        self.dataset.real.split.validate()?;
        self.dataset.real.effective_fidelity().validate()?;
        self.model.validate()?;
        if let TransferMethod::Manual { policy } = &self.transfer.method {
            policy.validate()?;
        }
        crate::transfer::BlockPolicy::parse(&self.sweep.policy)?.validate()?;
        Ok(())
    }

    /// Output directory, overridable via FLOWCAST_OUT_DIR.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var("FLOWCAST_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|_| self.output_dir.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::{PacketSize, RangeF, RangeU, TopologySpec, TrafficSpec};

    pub(crate) fn tiny_config(out: &Path) -> ExperimentConfig {
        ExperimentConfig {
            schema: EXPERIMENT_SCHEMA.into(),
            dataset: DatasetConfig {
                template: ScenarioTemplate {
                    topology: TopologySpec::Random {
                        nodes: RangeU { min: 5, max: 6 },
                        capacity_bps: RangeF { min: 5e6, max: 5e7 },
                        prop_delay_s: RangeF { min: 1e-5, max: 5e-4 },
                        extra_link_prob: 0.3,
                        buffer_pkts: 1000,
                    },
                    flow_count: RangeU { min: 2, max: 3 },
                    traffic: vec![TrafficSpec::Poisson {
                        rate_pps: RangeF { min: 200.0, max: 1500.0 },
                    }],
                    packet_size: PacketSize::Exponential { mean_bytes: 1000.0 },
                    duration_s: RangeF { min: 0.4, max: 0.6 },
                    utilization_cap: 0.8,
                    fidelity: Fidelity::Ideal,
                },
                window_length_s: 0.1,
                simulated: SourceSection {
                    count: 6,
                    seed: 1,
                    split: SplitSpec { seed: 11, fractions: Some([0.7, 0.3, 0.0]), counts: None },
                },
                real: RealSourceSection {
                    count: 6,
                    seed: 2,
                    split: SplitSpec { seed: 12, counts: Some([3, 2, 1]), fractions: None },
                    fidelity: None,
                    template: None,
                },
            },
            model: ModelConfig::tiny(),
            train: TrainConfig { learning_rate: 1e-3, max_epochs: 2, patience: 2, seed: 3 },
            transfer: TransferSection {
                method: TransferMethod::Manual {
                    policy: crate::transfer::BlockPolicy::parse("FTR").unwrap(),
                },
                learning_rate: None,
                max_epochs: 2,
                patience: 2,
                seed: 4,
            },
            sweep: SweepSection { counts: vec![2, 3], seeds: vec![1, 2], policy: "FTR".into() },
            output_dir: out.to_path_buf(),
        }
    }

    #[test]
    fn config_round_trips_and_validates() {
        let cfg = tiny_config(Path::new("/tmp/out"));
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = tiny_config(Path::new("/tmp/out"));
        let mut value: serde_json::Value = serde_json::to_value(&cfg).unwrap();
        value["surprise"] = serde_json::json!(1);
        let err = serde_json::from_value::<ExperimentConfig>(value).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }

    #[test]
    fn bundled_example_config_loads() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../docs/experiment.example.json");
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.model.embedding_dim, 32);
        assert_eq!(cfg.sweep.policy, "FTR");
    }

    #[test]
    fn split_spec_requires_exactly_one_mode() {
        let both = SplitSpec { seed: 0, fractions: Some([1.0, 0.0, 0.0]), counts: Some([1, 0, 0]) };
        assert!(both.validate().is_err());
        let neither = SplitSpec { seed: 0, fractions: None, counts: None };
        assert!(neither.validate().is_err());
    }
}
