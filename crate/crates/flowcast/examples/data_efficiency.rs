//! Data-efficiency sweep: how the fine-tuning advantage over from-scratch
//! training shrinks as more realistic data becomes available.
//!
//! ```bash
//! cargo run --release --example data_efficiency
//! ```

use rayon::prelude::*;

use flowcast::dataio::{fit_normalizer, windowize, WindowedScenario};
use flowcast::metrics::{efficiency_sweep, SweepConfig};
use flowcast::model::{train, DelayModel, ModelConfig, TrainConfig, TrainData};
use flowcast::netsim::{
    gen_scenarios, simulate, Fidelity, PacketSize, RangeF, RangeU, ScenarioTemplate, TopologySpec,
    TrafficSpec,
};
use flowcast::transfer::{BlockPolicy, DonorSnapshot, FinetuneConfig};

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

    println!("training donor on 40 ideal scenarios…");
    let sim = build(&template, 40, 3);
    let model_cfg = ModelConfig::tiny();
    let normalizer = fit_normalizer(&sim[..34]).unwrap();
    let donor = DelayModel::init(model_cfg.clone(), normalizer, 1).unwrap();
    let donor_train = TrainConfig { learning_rate: 3e-3, max_epochs: 25, patience: 5, seed: 2 };
    let (donor, _) = train(
        donor,
        &TrainData { training: &sim[..34], validation: &sim[34..] },
        &donor_train,
    )
    .unwrap();
    let donor = DonorSnapshot::new(donor);

    let mut real_template = template;
    real_template.fidelity = Fidelity::perturbed_default();
    let real = build(&real_template, 30, 9);
    let pool = &real[..22];
    let validation = &real[22..25];
    let evaluation = &real[25..];

    let sweep_cfg = SweepConfig {
        counts: vec![3, 6, 12, 22],
        seeds: vec![1, 2, 3],
        model: model_cfg,
        scratch: donor_train.clone(),
        finetune: FinetuneConfig {
            learning_rate: None,
            donor_learning_rate: donor_train.learning_rate,
            max_epochs: 25,
            patience: 5,
            seed: 0,
        },
        policy: BlockPolicy::parse("FTR").unwrap(),
    };
    println!("sweeping counts {:?} × {} seeds…", sweep_cfg.counts, sweep_cfg.seeds.len());
    let curve = efficiency_sweep(&donor, pool, validation, evaluation, &sweep_cfg).unwrap();

    println!("\n{:>6} {:>12} {:>12} {:>12}", "count", "scratch", "fine-tuned", "advantage");
    for p in &curve.points {
        println!(
            "{:>6} {:>11.2}% {:>11.2}% {:>11.1}%",
            p.real_scenario_count,
            p.scratch_mape_pct,
            p.finetuned_mape_pct,
            100.0 * (p.scratch_mape_pct - p.finetuned_mape_pct) / p.scratch_mape_pct
        );
    }
    println!("\n{}", curve.to_csv());
}
