//! File-based trace replay: feeds recorded inter-arrival times through the
//! simulator instead of a synthetic arrival process.
//!
//! ```bash
//! cargo run --release --example replay_traffic
//! ```

use std::io::Write;

use flowcast::netsim::{
    simulate, Fidelity, Flow, Link, PacketSize, QueueCfg, Scenario, Topology, TrafficModel,
};

fn main() {
    // a short bursty gap sequence; a real use would point at a measured
    // inter-arrival trace, one seconds value per line
    let mut file = tempfile::NamedTempFile::new().unwrap();
    for gap in [0.002, 0.001, 0.001, 0.050, 0.002, 0.001, 0.080, 0.003] {
        writeln!(file, "{gap}").unwrap();
    }

    let scenario = Scenario::new(
        0,
        Topology {
            nodes: vec![0, 1],
            links: vec![Link { id: 0, src: 0, dst: 1, capacity_bps: 2e6, prop_delay_s: 1e-4 }],
            queues: vec![QueueCfg { id: 0, link: 0, buffer_pkts: 100 }],
        },
        vec![Flow {
            id: 0,
            path: vec![0],
            traffic: TrafficModel::Replay { file: file.path().to_path_buf() },
            packet_size: PacketSize::Fixed { bytes: 1250.0 },
        }],
        1.0,
        7,
        Fidelity::Ideal,
    );

    let trace = simulate(&scenario).unwrap();
    println!("replayed {} packets (trace cycled to fill 1 s)", trace.records.len());
    for r in trace.records.iter().take(10) {
        println!(
            "  sent {:.4} s  arrived {:.4} s  delay {:.2} ms",
            r.send_s,
            r.arrive_s.unwrap(),
            1e3 * r.delay_s().unwrap()
        );
    }
    println!(
        "mean delay {:.3} ms over the replayed trace",
        1e3 * trace.mean_delay_s().unwrap()
    );
}
