//! Adam optimizer over a [`ParamStore`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::store::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moment: BTreeMap<String, Vec<f64>>,
    second_moment: BTreeMap<String, Vec<f64>>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }
}

/// One Adam update. Only trainable parameters move; every gradient buffer is
/// zeroed afterwards. Stepping a store with no trainable parameters is an
/// error — a model must always keep something adjustable.
pub fn optimizer_step(store: &mut ParamStore, state: &mut OptimizerState) -> Result<()> {
    if store.num_trainable() == 0 {
        return Err(Error::config("no trainable parameters"));
    }
    state.step += 1;
    let bias1 = 1.0 - state.beta1.powi(state.step as i32);
    let bias2 = 1.0 - state.beta2.powi(state.step as i32);

    for (name, param) in store.iter_mut() {
        if param.trainable {
            let m = state
                .first_moment
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; param.len()]);
            let v = state
                .second_moment
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; param.len()]);
            for k in 0..param.values.len() {
                let g = param.grad[k];
                m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
                v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
                let m_hat = m[k] / bias1;
                let v_hat = v[k] / bias2;
                param.values[k] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
            }
        }
        param.grad.iter_mut().for_each(|g| *g = 0.0);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::store::Block;

    fn scalar_store(w: f64, grad: f64) -> ParamStore {
        let mut store = ParamStore::new();
        store.insert("w", vec![w], vec![1], Block::Readout).unwrap();
        store.get_mut("w").unwrap().grad = vec![grad];
        store
    }

    #[test]
    fn moves_against_the_gradient() {
        let mut store = scalar_store(0.0, 1.0);
        let mut state = OptimizerState::new(0.1);
        optimizer_step(&mut store, &mut state).unwrap();
        assert!(store.get("w").unwrap().values[0] < 0.0);
        assert_eq!(store.get("w").unwrap().grad, vec![0.0]);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut store = scalar_store(3.5, 1.0);
        let mut state = OptimizerState::new(0.0);
        optimizer_step(&mut store, &mut state).unwrap();
        assert_eq!(store.get("w").unwrap().values, vec![3.5]);
    }

    #[test]
    fn frozen_parameters_are_bitwise_untouched() {
        let mut store = scalar_store(1.25, 7.0);
        store
            .insert("frozen", vec![0.333, -0.125], vec![2], Block::Encoding)
            .unwrap();
        {
            let p = store.get_mut("frozen").unwrap();
            p.trainable = false;
            p.grad = vec![5.0, 5.0];
        }
        let before: Vec<u64> = store
            .get("frozen")
            .unwrap()
            .values
            .iter()
            .map(|v| v.to_bits())
            .collect();
        let mut state = OptimizerState::new(0.1);
        optimizer_step(&mut store, &mut state).unwrap();
        let after: Vec<u64> = store
            .get("frozen")
            .unwrap()
            .values
            .iter()
            .map(|v| v.to_bits())
            .collect();
        assert_eq!(before, after);
        // but its grad buffer is still zeroed
        assert_eq!(store.get("frozen").unwrap().grad, vec![0.0, 0.0]);
    }

    #[test]
    fn all_frozen_store_is_an_error() {
        let mut store = scalar_store(0.0, 1.0);
        store.get_mut("w").unwrap().trainable = false;
        let mut state = OptimizerState::new(0.1);
        let err = optimizer_step(&mut store, &mut state).unwrap_err();
        assert!(err.to_string().contains("no trainable parameters"));
    }

    #[test]
    fn identical_inputs_give_identical_updates() {
        let run = || {
            let mut store = scalar_store(0.7, -0.3);
            let mut state = OptimizerState::new(0.01);
            for _ in 0..5 {
                store.get_mut("w").unwrap().grad = vec![-0.3];
                optimizer_step(&mut store, &mut state).unwrap();
            }
            store.get("w").unwrap().values[0].to_bits()
        };
        assert_eq!(run(), run());
    }
}
