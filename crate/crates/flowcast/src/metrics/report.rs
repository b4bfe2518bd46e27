//! MAPE, evaluation reports and signed-error histograms.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::WindowedScenario;
use crate::error::{Error, Result};
use crate::model::{DelayModel, PredictionSet};

/// 100 · mean(|pred − true| / true). Targets must be strictly positive.
pub fn mape(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::data("MAPE over an empty sample set"));
    }
    if predictions.len() != targets.len() {
        return Err(Error::data(format!(
            "MAPE length mismatch: {} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let mut sum = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        if *t <= 0.0 {
            return Err(Error::data(format!("MAPE target must be > 0, got {t}")));
        }
        sum += (p - t).abs() / t;
    }
    Ok(100.0 * sum / predictions.len() as f64)
}

/// Per-sample predictions plus the aggregate error of one evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub predictions: PredictionSet,
    pub mape_pct: f64,
    pub count: usize,
}

impl EvalReport {
    pub fn from_predictions(predictions: PredictionSet) -> Result<Self> {
        let mape_pct = mape(&predictions.predictions(), &predictions.targets())?;
        let count = predictions.rows.len();
        Ok(Self { predictions, mape_pct, count })
    }

    /// Signed relative errors (pred − true)/true per sample.
    pub fn signed_errors(&self) -> Vec<f64> {
        self.predictions
            .rows
            .iter()
            .map(|r| (r.predicted_s - r.target_s) / r.target_s)
            .collect()
    }

    /// Two-line summary CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("metric,value\n");
        out.push_str(&format!("mape_pct,{}\n", self.mape_pct));
        out.push_str(&format!("samples,{}\n", self.count));
        std::fs::write(path, out)?;
        Ok(())
    }

    /// One NDJSON record per evaluated (flow, window) pair.
    pub fn write_ndjson(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        for row in &self.predictions.rows {
            writeln!(out, "{}", serde_json::to_string(row).map_err(Error::data)?)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs the model over every scenario and pools the active cells into one
/// report.
pub fn evaluate(model: &DelayModel, scenarios: &[WindowedScenario]) -> Result<EvalReport> {
    let mut predictions = PredictionSet::default();
    for scenario in scenarios {
        predictions.extend(model.predict(scenario)?);
    }
    EvalReport::from_predictions(predictions)
}

/// Ratio of a model's MAPE to a baseline's on the same evaluation split.
/// Values under 1 mean the model improves on the baseline.
pub fn normalized_mape(model: &EvalReport, baseline: &EvalReport) -> Result<f64> {
    if baseline.mape_pct == 0.0 {
        return Err(Error::data("baseline MAPE is zero; the ratio is undefined"));
    }
    Ok(model.mape_pct / baseline.mape_pct)
}

/// Histogram of signed relative error, normalized to integrate to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges, uniform width.
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,density\n");
        for (k, d) in self.density.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[k], self.edges[k + 1], d));
        }
        out
    }
}

/// Density of signed relative error (pred − true)/true over `bins` equal
/// bins spanning the observed range. Degenerate ranges (all errors equal)
/// widen to ±1 around the common value.
pub fn error_pdf(predictions: &[f64], targets: &[f64], bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::config("error_pdf needs at least 2 bins"));
    }
    mape(predictions, targets)?; // validates lengths and target positivity
    let errors: Vec<f64> = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) / t)
        .collect();
    let mut lo = errors.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = errors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for e in &errors {
        let k = (((e - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = errors.len() as f64;
    let density = counts.into_iter().map(|c| c as f64 / (n * width)).collect();
    let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
    Ok(Histogram { edges, density })
}
