//! Metrics and experiment analytics: MAPE, baseline-normalized MAPE, error
//! distributions and the data-efficiency sweep.

mod report;
mod sweep;

pub use report::{error_pdf, evaluate, mape, normalized_mape, EvalReport, Histogram};
pub use sweep::{efficiency_sweep, EfficiencyCurve, EfficiencyPoint, SweepConfig};
