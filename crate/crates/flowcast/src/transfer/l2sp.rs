//! Starting-point weight penalty: pulls transferred weights toward the
//! donor's values and fresh weights toward zero.

use crate::autodiff::{ParamStore, Var};
use crate::dataio::WindowedScenario;
use crate::error::{Error, Result};
use crate::model::{ForwardPass, TrainHooks};

/// penalty = (α/2)·Σ_transferred ‖w − w⁰‖² + (β/2)·Σ_fresh ‖w‖²
///
/// Independent scalar computation over every parameter; frozen transferred
/// tensors contribute exactly zero because they stay bitwise equal to the
/// donor's.
pub fn l2sp_penalty(
    receiver: &ParamStore,
    donor: &ParamStore,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let mut transferred = 0.0;
    let mut fresh = 0.0;
    for (name, p) in receiver.iter() {
        if p.fresh {
            fresh += p.values.iter().map(|w| w * w).sum::<f64>();
        } else {
            let donor_param = donor.get(name).ok_or_else(|| {
                Error::config(format!("donor has no parameter `{name}` to anchor against"))
            })?;
            if donor_param.shape != p.shape {
                return Err(Error::config(format!(
                    "parameter `{name}`: receiver shape {:?} does not match donor shape {:?}",
                    p.shape, donor_param.shape
                )));
            }
            transferred += p
                .values
                .iter()
                .zip(&donor_param.values)
                .map(|(w, w0)| (w - w0) * (w - w0))
                .sum::<f64>();
        }
    }
    Ok(0.5 * alpha * transferred + 0.5 * beta * fresh)
}

/// Adds the penalty to a live tape, bound to the same parameter leaves the
/// forward pass used so gradients accumulate onto them. Only trainable
/// parameters are penalized — frozen ones cannot move, and their term is
/// identically zero anyway.
pub fn add_l2sp_penalty(
    pass: &mut ForwardPass,
    receiver: &ParamStore,
    donor: &ParamStore,
    alpha: f64,
    beta: f64,
    loss: Var,
) -> Result<Var> {
    if alpha == 0.0 && beta == 0.0 {
        return Ok(loss);
    }
    let names: Vec<String> = receiver
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(n, _)| n.clone())
        .collect();
    let mut terms = Vec::new();
    for name in names {
        let p = receiver.get(&name).unwrap();
        let (weight, anchored) = if p.fresh { (beta, false) } else { (alpha, true) };
        if weight == 0.0 {
            continue;
        }
        let w = pass.params.bind(&mut pass.tape, receiver, &name);
        let deviation = if anchored {
            let donor_param = donor.get(&name).ok_or_else(|| {
                Error::config(format!("donor has no parameter `{name}` to anchor against"))
            })?;
            if donor_param.shape != p.shape {
                return Err(Error::config(format!(
                    "parameter `{name}`: receiver shape {:?} does not match donor shape {:?}",
                    p.shape, donor_param.shape
                )));
            }
            let w0 = pass.tape.constant(&donor_param.values);
            pass.tape.sub(w, w0)
        } else {
            w
        };
        let sq = pass.tape.square(deviation);
        let sum = pass.tape.sum(sq);
        terms.push(pass.tape.scale(sum, 0.5 * weight));
    }
    if terms.is_empty() {
        return Ok(loss);
    }
    let penalty = pass.tape.sum_many(&terms);
    Ok(pass.tape.add(loss, penalty))
}

/// Training hook adding the penalty to every scenario's loss.
pub struct L2spHook {
    pub donor: ParamStore,
    pub alpha: f64,
    pub beta: f64,
}

impl TrainHooks for L2spHook {
    fn augment_loss(
        &mut self,
        pass: &mut ForwardPass,
        store: &ParamStore,
        _scenario: &WindowedScenario,
        loss: Var,
    ) -> Result<Var> {
        add_l2sp_penalty(pass, store, &self.donor, self.alpha, self.beta, loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Block, Tape, TapeParams};

    fn store_with(values: &[(&str, Vec<f64>, bool)]) -> ParamStore {
        let mut store = ParamStore::new();
        for (name, vals, fresh) in values {
            let n = vals.len();
            store.insert(name, vals.clone(), vec![n], Block::Mpa).unwrap();
            store.get_mut(name).unwrap().fresh = *fresh;
        }
        store
    }

    #[test]
    fn penalty_is_zero_at_donor_weights() {
        let donor = store_with(&[("a", vec![0.5, -1.5], false), ("b", vec![2.0], false)]);
        let receiver = donor.clone();
        assert_eq!(l2sp_penalty(&receiver, &donor, 3.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_single_scalar() {
        // w⁰ = 1, w = 3, α = 2 → (2/2)·(3−1)² = 4
        let donor = store_with(&[("w", vec![1.0], false)]);
        let receiver = store_with(&[("w", vec![3.0], false)]);
        assert_eq!(l2sp_penalty(&receiver, &donor, 2.0, 0.0).unwrap(), 4.0);
    }

    #[test]
    fn beta_applies_to_fresh_parameters_only() {
        let donor = store_with(&[("kept", vec![1.0], false), ("new", vec![5.0], false)]);
        let receiver = store_with(&[("kept", vec![1.0], false), ("new", vec![3.0], true)]);
        // α side zero (kept == donor), β side (0.5)·β·3²
        let p = l2sp_penalty(&receiver, &donor, 7.0, 2.0).unwrap();
        assert_eq!(p, 9.0);
    }

    #[test]
    fn penalty_is_invariant_under_parameter_renaming() {
        let donor = store_with(&[("a", vec![0.3, 0.7], false), ("b", vec![-2.0], false)]);
        let mut receiver = donor.clone();
        receiver.get_mut("a").unwrap().values = vec![0.6, 0.9];
        let expected = l2sp_penalty(&receiver, &donor, 1.3, 0.0).unwrap();

        let donor_renamed = store_with(&[("x", vec![0.3, 0.7], false), ("y", vec![-2.0], false)]);
        let mut receiver_renamed = donor_renamed.clone();
        receiver_renamed.get_mut("x").unwrap().values = vec![0.6, 0.9];
        let renamed = l2sp_penalty(&receiver_renamed, &donor_renamed, 1.3, 0.0).unwrap();
        assert_eq!(expected, renamed);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let donor = store_with(&[("w", vec![1.0, 2.0], false)]);
        let receiver = store_with(&[("w", vec![1.0], false)]);
        let err = l2sp_penalty(&receiver, &donor, 1.0, 0.0).unwrap_err();
        assert!(err.to_string().contains("shape"));
    }

    #[test]
    fn tape_penalty_gradient_matches_finite_differences() {
        let donor = store_with(&[("w", vec![0.4, -0.8, 1.3], false), ("v", vec![0.9], true)]);
        let mut receiver = donor.clone();
        receiver.get_mut("w").unwrap().values = vec![0.1, 0.2, 0.3];
        receiver.get_mut("v").unwrap().values = vec![-0.7];
        let (alpha, beta) = (1.7, 0.6);

        let penalty_of = |store: &ParamStore| {
            // value route: the tape version must agree with it
            l2sp_penalty(store, &donor, alpha, beta).unwrap()
        };

        // analytic gradient via a bare tape
        let mut pass = ForwardPass {
            tape: Tape::new(),
            params: TapeParams::new(),
            preds: vec![],
            embeddings: None,
        };
        let zero = pass.tape.scalar_const(0.0);
        let total = add_l2sp_penalty(&mut pass, &receiver, &donor, alpha, beta, zero).unwrap();
        assert!((pass.tape.scalar(total) - penalty_of(&receiver)).abs() < 1e-12);
        let grads = pass.tape.backward(total).unwrap();
        let mut analytic = receiver.clone();
        analytic.zero_grads();
        pass.params.accumulate_grads(&mut analytic, &grads);

        let h = 1e-6;
        for name in ["w", "v"] {
            let len = receiver.get(name).unwrap().len();
            for k in 0..len {
                let mut plus = receiver.clone();
                plus.get_mut(name).unwrap().values[k] += h;
                let mut minus = receiver.clone();
                minus.get_mut(name).unwrap().values[k] -= h;
                let fd = (penalty_of(&plus) - penalty_of(&minus)) / (2.0 * h);
                let a = analytic.get(name).unwrap().grad[k];
                assert!(
                    (a - fd).abs() / a.abs().max(1.0) < 1e-4,
                    "{name}[{k}]: analytic {a}, fd {fd}"
                );
            }
        }
    }
}
