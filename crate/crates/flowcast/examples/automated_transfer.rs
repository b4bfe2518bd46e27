//! The three automated transfer strategies side by side on one small
//! sim-to-perturbed setup: gradient-triggered freezing, the starting-point
//! weight penalty, and the masked-OT embedding penalty.
//!
//! ```bash
//! cargo run --release --example automated_transfer
//! ```

use rayon::prelude::*;

use flowcast::dataio::{fit_normalizer, windowize, WindowedScenario};
use flowcast::metrics::evaluate;
use flowcast::model::{train, DelayModel, ModelConfig, TrainConfig, TrainData};
use flowcast::netsim::{
    gen_scenarios, simulate, Fidelity, PacketSize, RangeF, RangeU, ScenarioTemplate, TopologySpec,
    TrafficSpec,
};
use flowcast::transfer::{finetune, DonorSnapshot, FinetuneConfig, TransferMethod};

fn build(template: &ScenarioTemplate, count: usize, seed: u64) -> Vec<WindowedScenario> {
    gen_scenarios(template, count, seed)
        .unwrap()
        .par_iter()
        .map(|s| windowize(&simulate(s).unwrap(), s, 0.1).unwrap())
        .collect()
}

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

    println!("training donor on 24 ideal scenarios…");
    let sim = build(&template, 24, 3);
    let normalizer = fit_normalizer(&sim[..20]).unwrap();
    let model = DelayModel::init(ModelConfig::tiny(), normalizer, 1).unwrap();
    let train_cfg = TrainConfig { learning_rate: 3e-3, max_epochs: 20, patience: 5, seed: 2 };
    let (donor_model, _) = train(
        model,
        &TrainData { training: &sim[..20], validation: &sim[20..] },
        &train_cfg,
    )
    .unwrap();
    let donor = DonorSnapshot::new(donor_model);

    let mut real_template = template;
    real_template.fidelity = Fidelity::perturbed_default();
    let real = build(&real_template, 14, 9);
    let data = TrainData { training: &real[..8], validation: &real[8..10] };
    let eval_set = &real[10..];

    let donor_raw = evaluate(donor.model(), eval_set).unwrap().mape_pct;
    println!("donor evaluated raw on perturbed data: {donor_raw:.2}% MAPE\n");

    let methods = [
        TransferMethod::autofreeze_default(),
        TransferMethod::l2sp_default(),
        TransferMethod::gtot_default(),
    ];
    let cfg = FinetuneConfig {
        learning_rate: None,
        donor_learning_rate: train_cfg.learning_rate,
        max_epochs: 15,
        patience: 4,
        seed: 5,
    };
    for method in methods {
        let (tuned, history) = finetune(&donor, &method, &data, &cfg).unwrap();
        let report = evaluate(&tuned, eval_set).unwrap();
        println!(
            "{:<11} eval MAPE {:6.2}%  (best val {:6.2}% at epoch {}, {} trainable tensors left)",
            method.label(),
            report.mape_pct,
            history.best_val_mape_pct,
            history.best_epoch,
            tuned.store.num_trainable(),
        );
    }
}
