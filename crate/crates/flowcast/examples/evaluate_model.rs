//! Evaluation machinery: MAPE reports, baseline-normalized MAPE and the
//! signed-relative-error histogram.
//!
//! ```bash
//! cargo run --release --example evaluate_model
//! ```

use rayon::prelude::*;

use flowcast::dataio::{fit_normalizer, windowize, WindowedScenario};
use flowcast::metrics::{error_pdf, evaluate, normalized_mape};
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
        duration_s: RangeF { min: 1.0, max: 1.5 },
        utilization_cap: 0.6,
        fidelity: Fidelity::Ideal,
    };

    println!("building 30 scenarios and training two models of different sizes…");
    let windowed: Vec<WindowedScenario> = gen_scenarios(&template, 30, 11)
        .unwrap()
        .par_iter()
        .map(|s| windowize(&simulate(s).unwrap(), s, 0.1).unwrap())
        .collect();
    let (train_set, rest) = windowed.split_at(22);
    let (val_set, eval_set) = rest.split_at(4);

    let cfg = TrainConfig { learning_rate: 3e-3, max_epochs: 25, patience: 5, seed: 2 };
    let normalizer = fit_normalizer(train_set).unwrap();

    let small = DelayModel::init(ModelConfig::tiny(), normalizer.clone(), 1).unwrap();
    let (small, _) = train(small, &TrainData { training: train_set, validation: val_set }, &cfg).unwrap();

    let big_cfg = ModelConfig {
        embedding_dim: 16,
        mpa_iterations: 4,
        window_length_s: 0.1,
        encoder_hidden: 16,
        readout_hidden: 16,
        inter_window_memory: true,
    };
    let big = DelayModel::init(big_cfg, normalizer, 1).unwrap();
    let (big, _) = train(big, &TrainData { training: train_set, validation: val_set }, &cfg).unwrap();

    let baseline = evaluate(&small, eval_set).unwrap();
    let report = evaluate(&big, eval_set).unwrap();
    println!("baseline (small model): {:.2}% MAPE over {} samples", baseline.mape_pct, baseline.count);
    println!("model    (large model): {:.2}% MAPE over {} samples", report.mape_pct, report.count);
    println!(
        "normalized MAPE {:.3} (under 1 means the large model improves on the baseline)",
        normalized_mape(&report, &baseline).unwrap()
    );

    let hist = error_pdf(
        &report.predictions.predictions(),
        &report.predictions.targets(),
        13,
    )
    .unwrap();
    println!("\nsigned relative error PDF (large model):");
    let peak = hist.density.iter().cloned().fold(0.0, f64::max);
    for (k, d) in hist.density.iter().enumerate() {
        let bar = "#".repeat((d / peak * 40.0).round() as usize);
        println!("  [{:+.3}, {:+.3})  {bar}", hist.edges[k], hist.edges[k + 1]);
    }
    let mean_signed: f64 =
        report.signed_errors().iter().sum::<f64>() / report.count as f64;
    println!("mean signed error {:+.2}% (sign shows the bias direction)", 100.0 * mean_signed);
}
