//! Windowed-dataset files: one header object carrying the graph, then one
//! [`WindowSample`] per line.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::window::{FlowWindow, GraphSpec, WindowSample, WindowedScenario};
use crate::error::{Error, Result};

pub const DATASET_SCHEMA: &str = "windows/1";

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    scenario_id: u32,
    window_length_s: f64,
    window_widths: Vec<f64>,
    graph: GraphSpec,
}

pub fn write_windowed(path: &Path, scenario: &WindowedScenario) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    let header = Header {
        schema: DATASET_SCHEMA.to_string(),
        scenario_id: scenario.scenario_id,
        window_length_s: scenario.window_length_s,
        window_widths: scenario.window_widths.clone(),
        graph: scenario.graph.clone(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).map_err(Error::data)?)?;
    for sample in scenario.samples() {
        writeln!(out, "{}", serde_json::to_string(&sample).map_err(Error::data)?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_windowed(path: &Path) -> Result<WindowedScenario> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(format!("reading {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::data(format!("{}: empty dataset file", path.display())))??;
    let header: Header = serde_json::from_str(&header_line)
        .map_err(|e| Error::data(format!("{}: bad header: {e}", path.display())))?;
    if header.schema != DATASET_SCHEMA {
        return Err(Error::data(format!(
            "{}: unsupported dataset schema `{}`",
            path.display(),
            header.schema
        )));
    }

    let num_windows = header.window_widths.len();
    let num_flows = header.graph.flows.len();
    let mut grid = vec![vec![FlowWindow::default(); num_flows]; num_windows];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: WindowSample = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("{}:{}: {e}", path.display(), lineno + 2)))?;
        let f = header.graph.flow_position(sample.flow).ok_or_else(|| {
            Error::data(format!(
                "{}:{}: unknown flow {}",
                path.display(),
                lineno + 2,
                sample.flow
            ))
        })?;
        let w = sample.window as usize;
        if w >= num_windows {
            return Err(Error::data(format!(
                "{}:{}: window {w} out of range",
                path.display(),
                lineno + 2
            )));
        }
        grid[w][f] = FlowWindow {
            avg_bandwidth_bps: sample.avg_bandwidth_bps,
            packet_rate_pps: sample.packet_rate_pps,
            mean_packet_size_bytes: sample.mean_packet_size_bytes,
            packets: sample.packets,
            target_delay_s: sample.target_delay_s,
            active: sample.active,
        };
    }

    Ok(WindowedScenario {
        scenario_id: header.scenario_id,
        window_length_s: header.window_length_s,
        window_widths: header.window_widths,
        graph: header.graph,
        grid,
    })
}
