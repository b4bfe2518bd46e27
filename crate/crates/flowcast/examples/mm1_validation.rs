//! Validates the simulator against the M/M/1 closed form.
//!
//! A single link at 10 Mb/s with exponential packet sizes of mean 1250 B
//! serves μ = 1000 pkt/s; Poisson arrivals at λ = 800 pkt/s should see a
//! mean sojourn time of 1/(μ−λ) = 5 ms.
//!
//! ```bash
//! cargo run --release --example mm1_validation
//! ```

use flowcast::netsim::{
    simulate, Fidelity, Flow, Link, PacketSize, QueueCfg, Scenario, Topology, TrafficModel,
};

fn main() {
    let scenario = Scenario::new(
        0,
        Topology {
            nodes: vec![0, 1],
            links: vec![Link { id: 0, src: 0, dst: 1, capacity_bps: 1e7, prop_delay_s: 0.0 }],
            queues: vec![QueueCfg { id: 0, link: 0, buffer_pkts: 100_000 }],
        },
        vec![Flow {
            id: 0,
            path: vec![0],
            traffic: TrafficModel::Poisson { rate_pps: 800.0 },
            packet_size: PacketSize::Exponential { mean_bytes: 1250.0 },
        }],
        // long run: the sojourn mean at utilization 0.8 carries strong
        // autocorrelation, so short runs wobble by several percent
        2000.0,
        2024,
        Fidelity::Ideal,
    );

    let trace = simulate(&scenario).expect("simulation runs");
    let mean = trace.mean_delay_s().expect("packets were delivered");
    let analytic = 1.0 / (1000.0 - 800.0);
    let rel_err = (mean - analytic).abs() / analytic;

    println!("packets delivered : {}", trace.delivered_count());
    println!("simulated mean    : {:.6} s", mean);
    println!("analytic 1/(μ−λ)  : {:.6} s", analytic);
    println!("relative error    : {:.3}%", 100.0 * rel_err);
    assert!(rel_err < 0.05, "simulator disagrees with the closed form");
    println!("within the 5% tolerance");
}
