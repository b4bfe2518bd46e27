//! Packet generation for a flow's traffic model.
//!
//! Each flow draws from its own RNG streams (arrivals and sizes separately),
//! so changing one flow's model never disturbs another's draws, and the
//! perturbed fidelity mode sees exactly the same arrival sequence as the
//! ideal mode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};

use crate::error::{Error, Result};
use crate::netsim::types::{Flow, PacketSize, TrafficModel};

/// Stream ids carve one scenario seed into independent ChaCha streams.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn arrivals_stream(flow: u32) -> u64 {
    2 * flow as u64
}

pub(crate) fn sizes_stream(flow: u32) -> u64 {
    2 * flow as u64 + 1
}

/// Jitter draws live far away from any flow stream.
pub(crate) const JITTER_STREAM: u64 = u64::MAX;

/// Send times (strictly before `duration_s`) for one flow.
pub(crate) fn generate_arrivals(flow: &Flow, seed: u64, duration_s: f64) -> Result<Vec<f64>> {
    let mut rng = stream_rng(seed, arrivals_stream(flow.id));
    let mut times = Vec::new();
    match &flow.traffic {
        TrafficModel::Poisson { rate_pps } => {
            let exp = Exp::new(*rate_pps).map_err(|e| Error::config(e.to_string()))?;
            let mut t = exp.sample(&mut rng);
            while t < duration_s {
                times.push(t);
                t += exp.sample(&mut rng);
            }
        }
        TrafficModel::OnOff { on_mean_s, off_mean_s, on_rate_pps } => {
            let on = Exp::new(1.0 / on_mean_s).map_err(|e| Error::config(e.to_string()))?;
            let off = Exp::new(1.0 / off_mean_s).map_err(|e| Error::config(e.to_string()))?;
            let inter = Exp::new(*on_rate_pps).map_err(|e| Error::config(e.to_string()))?;
            // starts in an ON period
            let mut t = 0.0;
            while t < duration_s {
                let on_end = t + on.sample(&mut rng);
                let mut next = t + inter.sample(&mut rng);
                while next < on_end && next < duration_s {
                    times.push(next);
                    next += inter.sample(&mut rng);
                }
                t = on_end + off.sample(&mut rng);
            }
        }
        TrafficModel::Replay { file } => {
            let text = std::fs::read_to_string(file).map_err(|e| {
                Error::data(format!("replay file {}: {e}", file.display()))
            })?;
            let gaps: Vec<f64> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|l| {
                    l.parse::<f64>().map_err(|e| {
                        Error::data(format!("replay file {}: bad value `{l}`: {e}", file.display()))
                    })
                })
                .collect::<Result<_>>()?;
            if gaps.is_empty() {
                return Err(Error::data(format!(
                    "replay file {} contains no inter-arrival times",
                    file.display()
                )));
            }
            if gaps.iter().any(|g| *g <= 0.0) {
                return Err(Error::data(format!(
                    "replay file {} contains non-positive inter-arrival times",
                    file.display()
                )));
            }
            let mut t = 0.0;
            for gap in gaps.iter().cycle() {
                t += gap;
                if t >= duration_s {
                    break;
                }
                times.push(t);
            }
        }
        TrafficModel::HeavyTail { log_mean, log_sd } => {
            let ln = LogNormal::new(*log_mean, *log_sd).map_err(|e| Error::config(e.to_string()))?;
            let mut t = ln.sample(&mut rng);
            while t < duration_s {
                times.push(t);
                t += ln.sample(&mut rng);
            }
        }
    }
    Ok(times)
}

/// Packet sizes in bytes for `count` packets of one flow. Sizes stay
/// continuous so exponential service times are exactly exponential.
pub(crate) fn generate_sizes(flow: &Flow, seed: u64, count: usize) -> Result<Vec<f64>> {
    let mut rng = stream_rng(seed, sizes_stream(flow.id));
    Ok(match &flow.packet_size {
        PacketSize::Fixed { bytes } => vec![*bytes; count],
        PacketSize::Exponential { mean_bytes } => {
            let exp = Exp::new(1.0 / mean_bytes).map_err(|e| Error::config(e.to_string()))?;
            (0..count).map(|_| exp.sample(&mut rng)).collect()
        }
    })
}
