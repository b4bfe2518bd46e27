//! Train/validation/evaluation partitioning of scenario ids.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PARTITION_SCHEMA: &str = "partition/1";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPartition {
    pub schema: String,
    pub training: Vec<u32>,
    pub validation: Vec<u32>,
    pub evaluation: Vec<u32>,
}

impl DatasetPartition {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(Error::data)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("reading {}: {e}", path.display())))?;
        let p: Self = serde_json::from_str(&text)
            .map_err(|e| Error::data(format!("parsing {}: {e}", path.display())))?;
        if p.schema != PARTITION_SCHEMA {
            return Err(Error::data(format!("unsupported partition schema `{}`", p.schema)));
        }
        Ok(p)
    }
}

/// Deterministic seeded shuffle followed by contiguous slicing at the
/// cumulative fraction boundaries.
pub fn split(ids: &[u32], fractions: [f64; 3], seed: u64) -> Result<DatasetPartition> {
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split fractions must sum to 1, got {total}")));
    }
    if fractions.iter().any(|f| *f < 0.0) {
        return Err(Error::config("split fractions must be nonnegative"));
    }
    let n = ids.len() as f64;
    let b1 = (fractions[0] * n).round() as usize;
    let b2 = ((fractions[0] + fractions[1]) * n).round() as usize;
    let counts = [b1, b2 - b1, ids.len() - b2];
    for (frac, count) in fractions.iter().zip(&counts) {
        if *frac > 0.0 && *count == 0 {
            return Err(Error::config(format!(
                "split fraction {frac} of {} scenarios yields an empty split",
                ids.len()
            )));
        }
    }
    split_counts(ids, counts, seed)
}

/// Split with explicit per-partition counts (which must cover all ids).
pub fn split_counts(ids: &[u32], counts: [usize; 3], seed: u64) -> Result<DatasetPartition> {
    let total: usize = counts.iter().sum();
    if total != ids.len() {
        return Err(Error::config(format!(
            "split counts {counts:?} sum to {total}, but there are {} scenarios",
            ids.len()
        )));
    }
    let mut shuffled = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let training = shuffled[..counts[0]].to_vec();
    let validation = shuffled[counts[0]..counts[0] + counts[1]].to_vec();
    let evaluation = shuffled[counts[0] + counts[1]..].to_vec();
    Ok(DatasetPartition {
        schema: PARTITION_SCHEMA.to_string(),
        training,
        validation,
        evaluation,
    })
}
