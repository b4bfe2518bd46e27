//! Trains the windowed message-passing delay model on a batch of ideal-mode
//! scenarios and reports training, validation and held-out error.
//!
//! ```bash
//! cargo run --release --example train_donor
//! ```

use rayon::prelude::*;

use flowcast::dataio::{fit_normalizer, windowize, WindowedScenario};
use flowcast::metrics::evaluate;
use flowcast::model::{train, DelayModel, ModelConfig, TrainConfig, TrainData};
use flowcast::netsim::{
    gen_scenarios, simulate, Fidelity, PacketSize, RangeF, RangeU, ScenarioTemplate, TopologySpec,
    TrafficSpec,
};

fn main() {
    let template = ScenarioTemplate {
        topology: TopologySpec::Random {
            nodes: RangeU { min: 5, max: 6 },
            capacity_bps: RangeF { min: 8e6, max: 2.5e7 },
            prop_delay_s: RangeF { min: 2e-5, max: 2e-4 },
            extra_link_prob: 0.25,
            buffer_pkts: 1000,
        },
        flow_count: RangeU { min: 3, max: 4 },
        traffic: vec![TrafficSpec::Poisson { rate_pps: RangeF { min: 400.0, max: 1500.0 } }],
        packet_size: PacketSize::Fixed { bytes: 1000.0 },
        duration_s: RangeF { min: 1.5, max: 2.0 },
        utilization_cap: 0.6,
        fidelity: Fidelity::Ideal,
    };

    println!("generating and simulating 40 scenarios…");
    let scenarios = gen_scenarios(&template, 40, 7).unwrap();
    let windowed: Vec<WindowedScenario> = scenarios
        .par_iter()
        .map(|s| windowize(&simulate(s).unwrap(), s, 0.1).unwrap())
        .collect();
    let (train_set, rest) = windowed.split_at(30);
    let (val_set, eval_set) = rest.split_at(5);

    let config = ModelConfig {
        embedding_dim: 16,
        mpa_iterations: 4,
        window_length_s: 0.1,
        encoder_hidden: 16,
        readout_hidden: 16,
        inter_window_memory: true,
    };
    let normalizer = fit_normalizer(train_set).unwrap();
    let model = DelayModel::init(config, normalizer, 1).unwrap();

    let cfg = TrainConfig { learning_rate: 3e-3, max_epochs: 40, patience: 6, seed: 2 };
    println!("training (early stopping, patience {})…", cfg.patience);
    let (trained, history) = train(
        model,
        &TrainData { training: train_set, validation: val_set },
        &cfg,
    )
    .unwrap();

    for stats in history.epochs.iter().step_by(5) {
        println!(
            "  epoch {:3}  train {:7.2}%  val {:7.2}%",
            stats.epoch, stats.train_mape_pct, stats.val_mape_pct
        );
    }
    println!(
        "best validation MAPE {:.2}% at epoch {} ({} epochs run)",
        history.best_val_mape_pct,
        history.best_epoch,
        history.epochs.len()
    );

    let report = evaluate(&trained, eval_set).unwrap();
    println!(
        "held-out MAPE {:.2}% over {} flow-windows",
        report.mape_pct, report.count
    );

    let path = std::env::temp_dir().join("flowcast_donor.json");
    trained.save(&path).unwrap();
    println!("checkpoint written to {}", path.display());
}
