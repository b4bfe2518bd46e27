//! Entropic optimal transport on a masked cost matrix, solved with
//! log-domain Sinkhorn iterations.
//!
//! Pairs outside the mask are infeasible (the limit of an arbitrarily large
//! cost); working in log space keeps the scalings finite even at small
//! regularization.

use crate::error::{Error, Result};

/// Sparse cost over masked (row, col) pairs only.
#[derive(Clone, Debug)]
pub struct MaskedCost {
    pub rows: usize,
    pub cols: usize,
    /// (row, col, cost) for every feasible pair.
    pub entries: Vec<(usize, usize, f64)>,
}

impl MaskedCost {
    pub fn validate(&self) -> Result<()> {
        let mut row_ok = vec![false; self.rows];
        let mut col_ok = vec![false; self.cols];
        for &(i, j, c) in &self.entries {
            if i >= self.rows || j >= self.cols {
                return Err(Error::config(format!("mask entry ({i}, {j}) out of bounds")));
            }
            if !c.is_finite() || c < 0.0 {
                return Err(Error::numeric(format!("cost at ({i}, {j}) is {c}")));
            }
            row_ok[i] = true;
            col_ok[j] = true;
        }
        if row_ok.iter().any(|ok| !ok) || col_ok.iter().any(|ok| !ok) {
            return Err(Error::config(
                "mask leaves a row or column with no feasible pair; transport is infeasible",
            ));
        }
        Ok(())
    }
}

/// Transport plan between uniform marginals: weights on the masked pairs,
/// in entry order.
pub fn sinkhorn_plan(cost: &MaskedCost, epsilon: f64, iterations: usize) -> Result<Vec<f64>> {
    if epsilon <= 0.0 {
        return Err(Error::config("sinkhorn epsilon must be > 0"));
    }
    cost.validate()?;
    let (n, m) = (cost.rows, cost.cols);
    let log_a = -(n as f64).ln(); // ln(1/n)
    let log_b = -(m as f64).ln();

    // per-row / per-column entry indices
    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut by_col: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (idx, &(i, j, _)) in cost.entries.iter().enumerate() {
        by_row[i].push(idx);
        by_col[j].push(idx);
    }

    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; m];
    let logsumexp = |terms: &mut dyn Iterator<Item = f64>| -> f64 {
        let vals: Vec<f64> = terms.collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return max;
        }
        max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    };

    for _ in 0..iterations {
        for i in 0..n {
            let lse = logsumexp(&mut by_row[i].iter().map(|&idx| {
                let (_, j, c) = cost.entries[idx];
                (g[j] - c) / epsilon
            }));
            f[i] = epsilon * (log_a - lse);
        }
        for j in 0..m {
            let lse = logsumexp(&mut by_col[j].iter().map(|&idx| {
                let (i, _, c) = cost.entries[idx];
                (f[i] - c) / epsilon
            }));
            g[j] = epsilon * (log_b - lse);
        }
        if f.iter().chain(g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numeric(
                "sinkhorn scaling vectors left the finite range; try a larger epsilon",
            ));
        }
    }

    Ok(cost
        .entries
        .iter()
        .map(|&(i, j, c)| ((f[i] + g[j] - c) / epsilon).exp())
        .collect())
}

/// Entropic transport cost ⟨P, C⟩ between uniform marginals.
pub fn sinkhorn_distance(cost: &MaskedCost, epsilon: f64, iterations: usize) -> Result<f64> {
    let plan = sinkhorn_plan(cost, epsilon, iterations)?;
    Ok(plan
        .iter()
        .zip(&cost.entries)
        .map(|(p, &(_, _, c))| p * c)
        .sum())
}
