//! Z-score feature normalization, fit on the training split only.

use serde::{Deserialize, Serialize};

use crate::dataio::window::WindowedScenario;
use crate::error::{Error, Result};

/// Flow feature order: bandwidth, packet rate, mean packet size, path length.
pub const FLOW_FEATURES: usize = 4;

/// Per-column mean and standard deviation. Constant columns get sd = 1 so
/// they normalize to zero instead of blowing up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl ColumnStats {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::data("cannot fit a normalizer on an empty split"));
        }
        let cols = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; cols];
        for row in rows {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; cols];
        for row in rows {
            for (c, x) in row.iter().enumerate() {
                let d = x - mean[c];
                var[c] += d * d;
            }
        }
        let sd = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Self { mean, sd })
    }

    /// In-place z-score. Applying twice double-transforms; the stats describe
    /// raw data, so callers normalize exactly once.
    pub fn apply(&self, row: &mut [f64]) {
        for (c, x) in row.iter_mut().enumerate() {
            *x = (*x - self.mean[c]) / self.sd[c];
        }
    }

    /// Inverse of [`apply`](Self::apply).
    pub fn denormalize(&self, row: &mut [f64]) {
        for (c, x) in row.iter_mut().enumerate() {
            *x = *x * self.sd[c] + self.mean[c];
        }
    }
}

/// Normalization statistics for all three entity kinds. Persisted inside
/// model checkpoints so inference always sees the feature space the model
/// was trained in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub flow: ColumnStats,
    pub link: ColumnStats,
    pub queue: ColumnStats,
    /// Mean delay target over the training split's active cells. The model
    /// seeds its readout output bias from this so initial predictions start
    /// on the right scale instead of deep in softplus saturation.
    pub target_mean_s: f64,
}

impl Normalizer {
    /// Raw (unnormalized) feature row for one (window, flow) cell.
    pub fn raw_flow_row(scenario: &WindowedScenario, w: usize, f: usize) -> [f64; FLOW_FEATURES] {
        let fw = &scenario.grid[w][f];
        [
            fw.avg_bandwidth_bps,
            fw.packet_rate_pps,
            fw.mean_packet_size_bytes,
            scenario.graph.flows[f].path_len() as f64,
        ]
    }

    /// Normalized model input for an active (window, flow) cell; inactive
    /// cells keep their all-zero features and stay out of the loss.
    pub fn flow_input(&self, scenario: &WindowedScenario, w: usize, f: usize) -> [f64; FLOW_FEATURES] {
        if !scenario.grid[w][f].active {
            return [0.0; FLOW_FEATURES];
        }
        let mut row = Self::raw_flow_row(scenario, w, f);
        self.flow.apply(&mut row);
        row
    }

    pub fn link_input(&self, scenario: &WindowedScenario, l: usize) -> [f64; 1] {
        let mut row = [scenario.graph.links[l].capacity_bps];
        self.link.apply(&mut row);
        row
    }

    pub fn queue_input(&self, scenario: &WindowedScenario, q: usize) -> [f64; 1] {
        let mut row = [scenario.graph.queues[q].buffer_pkts as f64];
        self.queue.apply(&mut row);
        row
    }
}

/// Fits normalization statistics over the training split: flow features over
/// active cells, link/queue features over every entity.
pub fn fit_normalizer(training: &[WindowedScenario]) -> Result<Normalizer> {
    if training.is_empty() {
        return Err(Error::data("cannot fit a normalizer on an empty training split"));
    }
    let mut flow_rows = Vec::new();
    let mut link_rows = Vec::new();
    let mut queue_rows = Vec::new();
    let mut target_sum = 0.0;
    let mut target_count = 0usize;
    for scenario in training {
        for w in 0..scenario.num_windows() {
            for f in 0..scenario.num_flows() {
                if scenario.grid[w][f].active {
                    flow_rows.push(Normalizer::raw_flow_row(scenario, w, f).to_vec());
                    target_sum += scenario.grid[w][f].target_delay_s;
                    target_count += 1;
                }
            }
        }
        for link in &scenario.graph.links {
            link_rows.push(vec![link.capacity_bps]);
        }
        for queue in &scenario.graph.queues {
            queue_rows.push(vec![queue.buffer_pkts as f64]);
        }
    }
    if flow_rows.is_empty() {
        return Err(Error::data(
            "training split has no active flow-windows to fit a normalizer on",
        ));
    }
    Ok(Normalizer {
        flow: ColumnStats::fit(&flow_rows)?,
        link: ColumnStats::fit(&link_rows)?,
        queue: ColumnStats::fit(&queue_rows)?,
        target_mean_s: target_sum / target_count as f64,
    })
}
