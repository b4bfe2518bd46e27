// scratch probe for sizing the directional experiment, deleted before ship
use std::time::Instant;

use rayon::prelude::*;

use flowcast::dataio::{fit_normalizer, windowize, WindowedScenario};
use flowcast::metrics::evaluate;
use flowcast::model::{train, DelayModel, ModelConfig, TrainConfig, TrainData};
use flowcast::netsim::*;
use flowcast::transfer::{finetune, BlockPolicy, DonorSnapshot, FinetuneConfig, TransferMethod};

fn template(fidelity: Fidelity) -> ScenarioTemplate {
    ScenarioTemplate {
        topology: TopologySpec::Random {
            nodes: RangeU { min: 5, max: 7 },
            capacity_bps: RangeF { min: 6e6, max: 3e7 },
            prop_delay_s: RangeF { min: 2e-5, max: 2e-4 },
            extra_link_prob: 0.25,
            buffer_pkts: 1000,
        },
        flow_count: RangeU { min: 3, max: 5 },
        traffic: vec![TrafficSpec::Poisson { rate_pps: RangeF { min: 300.0, max: 1500.0 } }],
        packet_size: PacketSize::Fixed { bytes: 1000.0 },
        duration_s: RangeF { min: 2.0, max: 2.5 },
        utilization_cap: 0.6,
        fidelity,
    }
}

fn build(scenarios: &[Scenario], window: f64) -> Vec<WindowedScenario> {
    scenarios
        .par_iter()
        .map(|s| {
            let trace = simulate(s).unwrap();
            windowize(&trace, s, window).unwrap()
        })
        .collect()
}

fn main() {
    let t0 = Instant::now();
    let model_cfg = ModelConfig {
        embedding_dim: 16,
        mpa_iterations: 4,
        window_length_s: 0.1,
        encoder_hidden: 16,
        readout_hidden: 16,
        inter_window_memory: true,
    };

    let sim = gen_scenarios(&template(Fidelity::Ideal), 200, 10).unwrap();
    let real = gen_scenarios(&template(Fidelity::Perturbed { processing_delay_s: 1e-3, capacity_derating: 0.9, jitter_sd_s: 2e-5 }), 62, 20).unwrap();
    let sim_w = build(&sim, 0.1);
    let real_w = build(&real, 0.1);
    println!("[{:?}] data built: sim {} scen, real {} scen", t0.elapsed(), sim_w.len(), real_w.len());

    let (sim_train, sim_val) = sim_w.split_at(170);
    let pool = &real_w[..40];
    let real_val = &real_w[40..46];
    let real_eval = &real_w[46..];

    let normalizer = fit_normalizer(sim_train).unwrap();
    let donor_model = DelayModel::init(model_cfg.clone(), normalizer, 1).unwrap();
    let donor_cfg = TrainConfig { learning_rate: 3e-3, max_epochs: 80, patience: 12, seed: 2 };
    let (donor_model, hist) = train(
        donor_model,
        &TrainData { training: sim_train, validation: sim_val },
        &donor_cfg,
    )
    .unwrap();
    println!(
        "[{:?}] donor trained: best val {:.2}% at epoch {}/{}",
        t0.elapsed(),
        hist.best_val_mape_pct,
        hist.best_epoch,
        hist.epochs.len()
    );

    let donor_on_ideal = evaluate(&donor_model, sim_val).unwrap().mape_pct;
    let donor_on_real = evaluate(&donor_model, real_eval).unwrap().mape_pct;
    println!("donor MAPE: ideal val {donor_on_ideal:.2}%, perturbed eval {donor_on_real:.2}%");

    let donor = DonorSnapshot::new(donor_model);
    let seeds = [101u64, 102, 103];
    let counts = [10usize, 40];
    let cells: Vec<(usize, u64)> = counts
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let results: Vec<(usize, u64, f64, f64)> = cells
        .par_iter()
        .map(|&(n, seed)| {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut idx: Vec<usize> = (0..pool.len()).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            idx.shuffle(&mut rng);
            let subset: Vec<WindowedScenario> = idx[..n].iter().map(|&i| pool[i].clone()).collect();
            let data = TrainData { training: &subset, validation: real_val };

            let scratch_norm = fit_normalizer(&subset).unwrap();
            let scratch = DelayModel::init(model_cfg.clone(), scratch_norm, seed).unwrap();
            let scratch_cfg = TrainConfig { learning_rate: 3e-3, max_epochs: 80, patience: 12, seed };
            let (scratch, _) = train(scratch, &data, &scratch_cfg).unwrap();
            let scratch_mape = evaluate(&scratch, real_eval).unwrap().mape_pct;

            let ft_cfg = FinetuneConfig {
                learning_rate: None,
                donor_learning_rate: 3e-3,
                max_epochs: 80,
                patience: 12,
                seed,
            };
            let method = TransferMethod::Manual { policy: BlockPolicy::parse("FTR").unwrap() };
            let (ft, _) = finetune(&donor, &method, &data, &ft_cfg).unwrap();
            let ft_mape = evaluate(&ft, real_eval).unwrap().mape_pct;
            (n, seed, scratch_mape, ft_mape)
        })
        .collect();

    for &(n, seed, s, f) in &results {
        println!("n={n} seed={seed}: scratch {s:.2}% ft {f:.2}%");
    }
    for &n in &counts {
        let rows: Vec<_> = results.iter().filter(|r| r.0 == n).collect();
        let s_avg: f64 = rows.iter().map(|r| r.2).sum::<f64>() / rows.len() as f64;
        let f_avg: f64 = rows.iter().map(|r| r.3).sum::<f64>() / rows.len() as f64;
        println!(
            "n={n}: scratch {s_avg:.2}% ft {f_avg:.2}% | improvement {:.1}% | donor/ft ratio {:.2}",
            100.0 * (s_avg - f_avg) / s_avg,
            donor_on_real / f_avg
        );
    }
    println!("total {:?}", t0.elapsed());
}
