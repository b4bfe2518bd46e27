//! Generates a small two-tree dataset: ideal-mode scenarios for donor
//! training and perturbed-mode scenarios standing in for hardware
//! measurements, with the same template and seed so topologies match.
//!
//! ```bash
//! cargo run --release --example generate_data -- /tmp/flowcast_demo
//! ```

use std::path::PathBuf;

use flowcast::dataio::{split, windowize, write_windowed};
use flowcast::netsim::{
    gen_scenarios, simulate, Fidelity, PacketSize, RangeF, RangeU, ScenarioTemplate, TopologySpec,
    TrafficSpec,
};

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| "/tmp/flowcast_demo".into());

    let template = ScenarioTemplate {
        topology: TopologySpec::Random {
            nodes: RangeU { min: 5, max: 8 },
            capacity_bps: RangeF { min: 5e6, max: 2.5e7 },
            prop_delay_s: RangeF { min: 2e-5, max: 2e-4 },
            extra_link_prob: 0.25,
            buffer_pkts: 1000,
        },
        flow_count: RangeU { min: 3, max: 5 },
        traffic: vec![
            TrafficSpec::Poisson { rate_pps: RangeF { min: 300.0, max: 1200.0 } },
            TrafficSpec::OnOff {
                on_mean_s: RangeF { min: 0.1, max: 0.3 },
                off_mean_s: RangeF { min: 0.1, max: 0.3 },
                on_rate_pps: RangeF { min: 600.0, max: 2500.0 },
            },
            // heavy-tailed stand-in for replayed internet traffic
            TrafficSpec::HeavyTail {
                log_mean: RangeF { min: -6.5, max: -5.9 },
                log_sd: RangeF { min: 0.8, max: 1.1 },
            },
        ],
        packet_size: PacketSize::Fixed { bytes: 1000.0 },
        duration_s: RangeF { min: 1.0, max: 2.0 },
        utilization_cap: 0.7,
        fidelity: Fidelity::Ideal,
    };

    for (name, fidelity, count, seed) in [
        ("simulated", Fidelity::Ideal, 12usize, 1u64),
        ("real", Fidelity::perturbed_default(), 12, 1),
    ] {
        let mut t = template.clone();
        t.fidelity = fidelity;
        let scenarios = gen_scenarios(&t, count, seed).expect("template is feasible");
        let dir = out.join("datasets").join(name);
        std::fs::create_dir_all(&dir).unwrap();

        let mut packets = 0u64;
        let mut active = 0usize;
        for scenario in &scenarios {
            let trace = simulate(scenario).expect("simulation runs");
            let windowed = windowize(&trace, scenario, 0.1).expect("windowing succeeds");
            packets += windowed.total_packets();
            active += windowed.active_count();
            write_windowed(&dir.join(format!("{:04}.ndjson", scenario.id)), &windowed).unwrap();
        }

        let ids: Vec<u32> = scenarios.iter().map(|s| s.id).collect();
        let partition = split(&ids, [0.7, 0.2, 0.1], 42).unwrap();
        partition.write_json(&out.join(format!("partition_{name}.json"))).unwrap();

        println!(
            "{name:>9}: {count} scenarios, {packets} packets, {active} active flow-windows → {}",
            dir.display()
        );
        println!(
            "           split {}/{}/{} (train/val/eval)",
            partition.training.len(),
            partition.validation.len(),
            partition.evaluation.len()
        );
    }
}
