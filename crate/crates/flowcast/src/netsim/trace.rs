//! Packet-level trace records and NDJSON persistence.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::types::FlowId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub flow: FlowId,
    pub send_s: f64,
    /// Arrival time at the destination; `None` for dropped packets.
    pub arrive_s: Option<f64>,
    pub size_bytes: f64,
    pub dropped: bool,
}

impl PacketRecord {
    pub fn delay_s(&self) -> Option<f64> {
        self.arrive_s.map(|a| a - self.send_s)
    }
}

/// All packets of one simulation run, sorted by (flow, send time).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PacketTrace {
    pub records: Vec<PacketRecord>,
}

impl PacketTrace {
    pub fn delivered(&self) -> impl Iterator<Item = &PacketRecord> {
        self.records.iter().filter(|r| !r.dropped)
    }

    pub fn delivered_count(&self) -> usize {
        self.records.iter().filter(|r| !r.dropped).count()
    }

    pub fn dropped_count(&self) -> usize {
        self.records.iter().filter(|r| r.dropped).count()
    }

    /// A trace with zero delivered packets is flagged empty rather than
    /// treated as an error; downstream windowing yields all-inactive rows.
    pub fn is_empty_delivery(&self) -> bool {
        self.delivered_count() == 0
    }

    pub fn mean_delay_s(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for r in self.delivered() {
            sum += r.delay_s().expect("delivered packets have arrival times");
            n += 1;
        }
        (n > 0).then(|| sum / n as f64)
    }

    pub fn write_ndjson(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = BufWriter::new(file);
        for record in &self.records {
            let line = serde_json::to_string(record).map_err(Error::data)?;
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_ndjson(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::data(format!("reading {}: {e}", path.display())))?;
        let mut records = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: PacketRecord = serde_json::from_str(&line).map_err(|e| {
                Error::data(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            records.push(record);
        }
        Ok(PacketTrace { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndjson_round_trip() {
        let trace = PacketTrace {
            records: vec![
                PacketRecord { flow: 0, send_s: 0.1, arrive_s: Some(0.15), size_bytes: 1250.0, dropped: false },
                PacketRecord { flow: 1, send_s: 0.2, arrive_s: None, size_bytes: 900.5, dropped: true },
            ],
        };
        let file = tempfile::NamedTempFile::new().unwrap();
        trace.write_ndjson(file.path()).unwrap();
        let back = PacketTrace::read_ndjson(file.path()).unwrap();
        assert_eq!(trace, back);
        assert_eq!(back.delivered_count(), 1);
        assert_eq!(back.dropped_count(), 1);
    }
}
