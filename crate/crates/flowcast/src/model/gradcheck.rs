//! Finite-difference verification of the analytic gradients, end to end:
//! through windows, message passing, the GRUs and the readout.

use crate::dataio::{ColumnStats, FlowSpec, FlowWindow, GraphSpec, HopRef, LinkSpec, Normalizer,
    QueueSpec, WindowedScenario};
use crate::error::Result;
use crate::model::config::ModelConfig;
use crate::model::net::{build_forward, mape_loss, DelayModel};

#[derive(Clone, Debug)]
pub struct GradCheckItem {
    pub name: String,
    pub max_rel_err: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub items: Vec<GradCheckItem>,
    pub tolerance: f64,
    pub parameters_checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradCheckItem> {
        self.items.iter().filter(|i| !i.passed)
    }
}

/// A hand-built 2-flow, 2-window scenario: two queues and links, one flow
/// crossing both hops, one flow on the second hop only.
pub fn builtin_scenario() -> WindowedScenario {
    let graph = GraphSpec {
        flows: vec![
            FlowSpec { id: 0, hops: vec![HopRef { queue: 0, link: 0 }, HopRef { queue: 1, link: 1 }] },
            FlowSpec { id: 1, hops: vec![HopRef { queue: 1, link: 1 }] },
        ],
        queues: vec![
            QueueSpec { id: 0, buffer_pkts: 1000 },
            QueueSpec { id: 1, buffer_pkts: 500 },
        ],
        links: vec![
            LinkSpec { id: 0, capacity_bps: 1e7, queue: 0 },
            LinkSpec { id: 1, capacity_bps: 8e6, queue: 1 },
        ],
    };
    let cell = |bw: f64, rate: f64, size: f64, target: f64| FlowWindow {
        avg_bandwidth_bps: bw,
        packet_rate_pps: rate,
        mean_packet_size_bytes: size,
        packets: (rate * 0.1) as u64,
        target_delay_s: target,
        active: true,
    };
    WindowedScenario {
        scenario_id: 0,
        window_length_s: 0.1,
        window_widths: vec![0.1, 0.1],
        graph,
        grid: vec![
            vec![cell(2.1e6, 260.0, 1010.0, 2.3e-3), cell(1.4e6, 310.0, 560.0, 1.1e-3)],
            vec![cell(3.3e6, 410.0, 1005.0, 3.9e-3), cell(0.9e6, 200.0, 565.0, 0.9e-3)],
        ],
    }
}

fn builtin_normalizer() -> Normalizer {
    // representative raw-feature scales for the built-in scenario
    Normalizer {
        flow: ColumnStats {
            mean: vec![2e6, 300.0, 800.0, 1.5],
            sd: vec![1e6, 80.0, 220.0, 0.5],
        },
        link: ColumnStats { mean: vec![9e6], sd: vec![1e6] },
        queue: ColumnStats { mean: vec![750.0], sd: vec![250.0] },
        target_mean_s: 2e-3,
    }
}

/// Central finite difference (step `h`) against the analytic gradient for
/// every parameter element, scored as |analytic − fd| / max(1, |analytic|).
///
/// `corrupt` names a parameter whose analytic gradient is deliberately
/// shifted before comparison — a negative control that must fail.
pub fn gradient_check(tolerance: f64, corrupt: Option<&str>) -> Result<GradCheckReport> {
    let scenario = builtin_scenario();
    let model = DelayModel::init(ModelConfig::tiny(), builtin_normalizer(), 20_24)?;
    gradient_check_model(&model, &scenario, tolerance, corrupt)
}

pub fn gradient_check_model(
    model: &DelayModel,
    scenario: &WindowedScenario,
    tolerance: f64,
    corrupt: Option<&str>,
) -> Result<GradCheckReport> {
    let h = 1e-6;

    let loss_of = |store: &crate::autodiff::ParamStore| -> Result<f64> {
        let mut pass = build_forward(&model.config, store, &model.normalizer, scenario, false)?;
        let loss = mape_loss(&mut pass, scenario)?.expect("built-in scenario is fully active");
        pass.tape.check_finite()?;
        Ok(pass.tape.scalar(loss))
    };

    // analytic gradients
    let mut analytic = model.store.clone();
    {
        let mut pass = build_forward(&model.config, &model.store, &model.normalizer, scenario, false)?;
        let loss = mape_loss(&mut pass, scenario)?.expect("built-in scenario is fully active");
        let grads = pass.tape.backward(loss)?;
        analytic.zero_grads();
        pass.params.accumulate_grads(&mut analytic, &grads);
    }

    let names: Vec<String> = model.store.names().cloned().collect();
    let mut items = Vec::with_capacity(names.len());
    let mut parameters_checked = 0usize;
    for name in names {
        let len = model.store.get(&name).unwrap().len();
        let mut max_rel = 0.0f64;
        for k in 0..len {
            let mut plus = model.store.clone();
            plus.get_mut(&name).unwrap().values[k] += h;
            let mut minus = model.store.clone();
            minus.get_mut(&name).unwrap().values[k] -= h;
            let fd = (loss_of(&plus)? - loss_of(&minus)?) / (2.0 * h);
            let mut a = analytic.get(&name).unwrap().grad[k];
            if corrupt == Some(name.as_str()) {
                a += 1.0;
            }
            let rel = (a - fd).abs() / a.abs().max(1.0);
            max_rel = max_rel.max(rel);
            parameters_checked += 1;
        }
        items.push(GradCheckItem { name: name.clone(), max_rel_err: max_rel, passed: max_rel < tolerance });
    }
    Ok(GradCheckReport { items, tolerance, parameters_checked })
}
