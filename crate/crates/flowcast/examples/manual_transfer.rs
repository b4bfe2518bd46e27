//! Manual transfer policies: enumerates the valid ones, applies the
//! freeze-encoding / fine-tune-MPA / re-train-readout configuration, and
//! verifies that frozen weights survive fine-tuning untouched.
//!
//! ```bash
//! cargo run --release --example manual_transfer
//! ```

use rayon::prelude::*;

use flowcast::autodiff::Block;
use flowcast::dataio::{fit_normalizer, windowize, WindowedScenario};
use flowcast::metrics::evaluate;
use flowcast::model::{train, DelayModel, ModelConfig, TrainConfig, TrainData};
use flowcast::netsim::{
    gen_scenarios, simulate, Fidelity, PacketSize, RangeF, RangeU, ScenarioTemplate, TopologySpec,
    TrafficSpec,
};
use flowcast::transfer::{
    enumerate_valid_policies, finetune, BlockPolicy, DonorSnapshot, FinetuneConfig, TransferMethod,
};

fn build(template: &ScenarioTemplate, count: usize, seed: u64) -> Vec<WindowedScenario> {
    gen_scenarios(template, count, seed)
        .unwrap()
        .par_iter()
        .map(|s| windowize(&simulate(s).unwrap(), s, 0.1).unwrap())
        .collect()
}

fn main() {
    println!("valid block policies (encoding-MPA-readout):");
    for policy in enumerate_valid_policies() {
        println!("  {policy}");
    }

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

    println!("\ntraining a small donor on 20 ideal scenarios…");
    let sim = build(&template, 20, 3);
    let normalizer = fit_normalizer(&sim[..16]).unwrap();
    let model = DelayModel::init(ModelConfig::tiny(), normalizer, 1).unwrap();
    let cfg = TrainConfig { learning_rate: 3e-3, max_epochs: 15, patience: 4, seed: 2 };
    let (donor_model, _) = train(
        model,
        &TrainData { training: &sim[..16], validation: &sim[16..] },
        &cfg,
    )
    .unwrap();
    let donor = DonorSnapshot::new(donor_model);

    let mut real_template = template.clone();
    real_template.fidelity = Fidelity::perturbed_default();
    let real = build(&real_template, 12, 9);

    let policy = BlockPolicy::parse("FTR").unwrap();
    println!("fine-tuning with policy {policy} on 8 perturbed scenarios…");
    let ft_cfg = FinetuneConfig {
        learning_rate: None, // donor rate / 10
        donor_learning_rate: cfg.learning_rate,
        max_epochs: 15,
        patience: 4,
        seed: 5,
    };
    let (tuned, history) = finetune(
        &donor,
        &TransferMethod::Manual { policy },
        &TrainData { training: &real[..8], validation: &real[8..10] },
        &ft_cfg,
    )
    .unwrap();
    println!(
        "fine-tuned: best val MAPE {:.2}% at epoch {}",
        history.best_val_mape_pct, history.best_epoch
    );

    // frozen encoding must be bitwise identical to the donor's
    let mut frozen = 0;
    for (name, p) in tuned.store.iter() {
        if p.block == Block::Encoding {
            let donor_values = &donor.store().get(name).unwrap().values;
            assert!(
                p.values.iter().zip(donor_values).all(|(a, b)| a.to_bits() == b.to_bits()),
                "frozen parameter {name} changed"
            );
            frozen += 1;
        }
    }
    println!("verified {frozen} frozen encoding tensors are bitwise donor-equal");

    let donor_eval = evaluate(donor.model(), &real[10..]).unwrap();
    let tuned_eval = evaluate(&tuned, &real[10..]).unwrap();
    println!(
        "perturbed eval MAPE: donor raw {:.2}% → fine-tuned {:.2}%",
        donor_eval.mape_pct, tuned_eval.mape_pct
    );
}
