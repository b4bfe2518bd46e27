//! Dynamic tape for reverse-mode differentiation over small f64 vectors.
//!
//! Each op records its parents and enough data to replay the chain rule in
//! reverse. Non-finite values poison the tape instead of panicking; the
//! poison surfaces as a `Numeric` error naming the op when `backward` (or
//! `check_finite`) is called.

use crate::error::{Error, Result};
use crate::autodiff::store::ParamStore;

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softplus(Var),
    Abs(Var),
    Square(Var),
    Sum(Var),
    Concat(Var, Var),
    /// Elementwise sum of same-length vectors.
    SumMany(Vec<Var>),
    /// y = W x + b with W row-major `rows × cols`.
    Affine { w: Var, b: Var, x: Var, rows: usize, cols: usize },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::Softplus(..) => "softplus",
            Op::Abs(..) => "abs",
            Op::Square(..) => "square",
            Op::Sum(..) => "sum",
            Op::Concat(..) => "concat",
            Op::SumMany(..) => "sum_many",
            Op::Affine { .. } => "affine",
        }
    }
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Gradients of a scalar loss with respect to every tape node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> &[f64] {
        &self.grads[v.0]
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    poison: Option<String>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Value of a length-1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        debug_assert_eq!(self.nodes[v.0].value.len(), 1);
        self.nodes[v.0].value[0]
    }

    /// Returns the recorded numeric failure, if any op produced NaN/Inf.
    pub fn check_finite(&self) -> Result<()> {
        match &self.poison {
            Some(op) => Err(Error::numeric(format!("non-finite value in op `{op}`"))),
            None => Ok(()),
        }
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        if self.poison.is_none() && value.iter().any(|x| !x.is_finite()) {
            self.poison = Some(op.name().to_string());
        }
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant(&mut self, value: &[f64]) -> Var {
        self.leaf(value.to_vec())
    }

    pub fn scalar_const(&mut self, x: f64) -> Var {
        self.leaf(vec![x])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = zip_with(self.value(a), self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = zip_with(self.value(a), self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = zip_with(self.value(a), self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).iter().map(|x| x * c).collect();
        self.push(v, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|x| x.max(0.0)).collect();
        self.push(v, Op::Relu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|&x| softplus(x)).collect();
        self.push(v, Op::Softplus(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|x| x.abs()).collect();
        self.push(v, Op::Abs(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|x| x * x).collect();
        self.push(v, Op::Square(a))
    }

    /// Sum of all elements, yielding a length-1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = vec![self.value(a).iter().sum()];
        self.push(v, Op::Sum(a))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).to_vec();
        v.extend_from_slice(self.value(b));
        self.push(v, Op::Concat(a, b))
    }

    /// Elementwise sum of same-length vectors. The terms are summed in the
    /// order given; callers that need a permutation-invariant result sort
    /// the terms first (see `canonical_sum`).
    pub fn sum_many(&mut self, terms: &[Var]) -> Var {
        assert!(!terms.is_empty(), "sum_many over empty set");
        let len = self.value(terms[0]).len();
        let mut v = vec![0.0; len];
        for &t in terms {
            debug_assert_eq!(self.value(t).len(), len);
            for (acc, x) in v.iter_mut().zip(self.value(t)) {
                *acc += x;
            }
        }
        self.push(v, Op::SumMany(terms.to_vec()))
    }

    /// Elementwise sum with the terms sorted by value beforehand, so the
    /// result is bit-identical under any permutation of `terms`.
    pub fn canonical_sum(&mut self, terms: &[Var]) -> Var {
        let mut sorted = terms.to_vec();
        sorted.sort_by(|&a, &b| {
            let (va, vb) = (self.value(a), self.value(b));
            va.iter()
                .zip(vb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        self.sum_many(&sorted)
    }

    /// y = W x + b with `w` a row-major `rows × cols` matrix flattened to a
    /// vector, `x` of length `cols` and `b` of length `rows`.
    pub fn affine(&mut self, w: Var, b: Var, x: Var, rows: usize, cols: usize) -> Var {
        debug_assert_eq!(self.value(w).len(), rows * cols);
        debug_assert_eq!(self.value(x).len(), cols);
        debug_assert_eq!(self.value(b).len(), rows);
        let mut v = self.value(b).to_vec();
        {
            let wv = self.value(w);
            let xv = self.value(x);
            for r in 0..rows {
                let row = &wv[r * cols..(r + 1) * cols];
                let mut acc = 0.0;
                for (wi, xi) in row.iter().zip(xv) {
                    acc += wi * xi;
                }
                v[r] += acc;
            }
        }
        self.push(v, Op::Affine { w, b, x, rows, cols })
    }

    /// Reverse pass from a scalar loss node. Returns per-node gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.check_finite()?;
        assert_eq!(self.value(loss).len(), 1, "loss must be scalar");
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        grads[loss.0][0] = 1.0;

        for i in (0..=loss.0).rev() {
            if grads[i].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = std::mem::take(&mut grads[i]);
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    axpy(&mut grads[a.0], &g, 1.0);
                    axpy(&mut grads[b.0], &g, 1.0);
                }
                Op::Sub(a, b) => {
                    axpy(&mut grads[a.0], &g, 1.0);
                    axpy(&mut grads[b.0], &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    for (k, gk) in g.iter().enumerate() {
                        grads[a.0][k] += gk * bv[k];
                    }
                    for (k, gk) in g.iter().enumerate() {
                        grads[b.0][k] += gk * av[k];
                    }
                }
                Op::Scale(a, c) => axpy(&mut grads[a.0], &g, *c),
                Op::Sigmoid(a) => {
                    let yv = &self.nodes[i].value;
                    for (k, gk) in g.iter().enumerate() {
                        grads[a.0][k] += gk * yv[k] * (1.0 - yv[k]);
                    }
                }
                Op::Tanh(a) => {
                    let yv = &self.nodes[i].value;
                    for (k, gk) in g.iter().enumerate() {
                        grads[a.0][k] += gk * (1.0 - yv[k] * yv[k]);
                    }
                }
                Op::Relu(a) => {
                    let xv = &self.nodes[a.0].value;
                    for (k, gk) in g.iter().enumerate() {
                        if xv[k] > 0.0 {
                            grads[a.0][k] += gk;
                        }
                    }
                }
                Op::Softplus(a) => {
                    let xv = &self.nodes[a.0].value;
                    for (k, gk) in g.iter().enumerate() {
                        grads[a.0][k] += gk * sigmoid(xv[k]);
                    }
                }
                Op::Abs(a) => {
                    let xv = &self.nodes[a.0].value;
                    for (k, gk) in g.iter().enumerate() {
                        grads[a.0][k] += gk * sign(xv[k]);
                    }
                }
                Op::Square(a) => {
                    let xv = &self.nodes[a.0].value;
                    for (k, gk) in g.iter().enumerate() {
                        grads[a.0][k] += gk * 2.0 * xv[k];
                    }
                }
                Op::Sum(a) => {
                    let gk = g[0];
                    for ga in grads[a.0].iter_mut() {
                        *ga += gk;
                    }
                }
                Op::Concat(a, b) => {
                    let la = self.nodes[a.0].value.len();
                    axpy(&mut grads[a.0], &g[..la], 1.0);
                    axpy(&mut grads[b.0], &g[la..], 1.0);
                }
                Op::SumMany(terms) => {
                    for t in terms {
                        axpy(&mut grads[t.0], &g, 1.0);
                    }
                }
                Op::Affine { w, b, x, rows, cols } => {
                    let xv = self.nodes[x.0].value.clone();
                    let wv = self.nodes[w.0].value.clone();
                    for r in 0..*rows {
                        let gr = g[r];
                        grads[b.0][r] += gr;
                        let gw = &mut grads[w.0][r * cols..(r + 1) * cols];
                        for (c, xc) in xv.iter().enumerate() {
                            gw[c] += gr * xc;
                        }
                    }
                    let gx = &mut grads[x.0];
                    for r in 0..*rows {
                        let gr = g[r];
                        let row = &wv[r * cols..(r + 1) * cols];
                        for (c, wc) in row.iter().enumerate() {
                            gx[c] += gr * wc;
                        }
                    }
                }
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::numeric(format!(
                    "non-finite gradient in op `{}`",
                    self.nodes[i].op.name()
                )));
            }
            grads[i] = g;
        }
        Ok(Gradients { grads })
    }
}

/// Bindings from parameter names to tape leaves, so one forward pass binds
/// each parameter exactly once and gradients flow back into the store.
#[derive(Default)]
pub struct TapeParams {
    bound: Vec<(String, Var)>,
}

impl TapeParams {
    pub fn new() -> Self {
        Self::default()
    }

    /// Leaf holding the current value of `name`, created on first use.
    pub fn bind(&mut self, tape: &mut Tape, store: &ParamStore, name: &str) -> Var {
        if let Some((_, v)) = self.bound.iter().find(|(n, _)| n == name) {
            return *v;
        }
        let param = store
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"));
        let v = tape.leaf(param.values.clone());
        self.bound.push((name.to_string(), v));
        v
    }

    /// Adds the computed gradients into the store's grad buffers.
    ///
    /// Gradients accumulate for every bound parameter, trainable or not;
    /// the optimizer decides what actually moves.
    pub fn accumulate_grads(&self, store: &mut ParamStore, grads: &Gradients) {
        for (name, var) in &self.bound {
            let param = store.get_mut(name).expect("bound parameter exists");
            for (pg, g) in param.grad.iter_mut().zip(grads.get(*var)) {
                *pg += g;
            }
        }
    }
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn axpy(dst: &mut [f64], src: &[f64], c: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s * c;
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    // ln(1 + e^x), stable for large |x|
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central finite difference of a scalar-valued function of one leaf.
    pub(crate) fn finite_diff(
        build: impl Fn(&mut Tape, Var) -> Var,
        input: &[f64],
        h: f64,
    ) -> Vec<f64> {
        let mut fd = vec![0.0; input.len()];
        for k in 0..input.len() {
            let eval = |delta: f64| {
                let mut x = input.to_vec();
                x[k] += delta;
                let mut tape = Tape::new();
                let leaf = tape.leaf(x);
                let out = build(&mut tape, leaf);
                tape.scalar(out)
            };
            fd[k] = (eval(h) - eval(-h)) / (2.0 * h);
        }
        fd
    }

    fn assert_grad_close(analytic: &[f64], fd: &[f64]) {
        for (a, f) in analytic.iter().zip(fd) {
            let rel = (a - f).abs() / a.abs().max(1.0);
            assert!(rel < 1e-4, "gradient mismatch: analytic {a}, fd {f}");
        }
    }

    fn check_unary(build: impl Fn(&mut Tape, Var) -> Var + Copy, input: &[f64]) {
        let mut tape = Tape::new();
        let leaf = tape.leaf(input.to_vec());
        let out = build(&mut tape, leaf);
        let grads = tape.backward(out).unwrap();
        let fd = finite_diff(build, input, 1e-6);
        assert_grad_close(grads.get(leaf), &fd);
    }

    #[test]
    fn linear_case_gradient_is_input() {
        // loss = Σ w·x with w=[1,2], x=[3,4] → ∂loss/∂w = [3,4]
        let mut tape = Tape::new();
        let w = tape.leaf(vec![1.0, 2.0]);
        let x = tape.constant(&[3.0, 4.0]);
        let wx = tape.mul(w, x);
        let loss = tape.sum(wx);
        assert_eq!(tape.scalar(loss), 11.0);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w), &[3.0, 4.0]);
    }

    #[test]
    fn elementwise_primitives_match_finite_differences() {
        let input = [0.37, -1.2, 2.4, -0.05];
        check_unary(|t, x| { let y = t.sigmoid(x); t.sum(y) }, &input);
        check_unary(|t, x| { let y = t.tanh(x); t.sum(y) }, &input);
        check_unary(|t, x| { let y = t.softplus(x); t.sum(y) }, &input);
        check_unary(|t, x| { let y = t.square(x); t.sum(y) }, &input);
        check_unary(|t, x| { let y = t.abs(x); t.sum(y) }, &input);
        // relu checked away from the kink
        check_unary(|t, x| { let y = t.relu(x); t.sum(y) }, &[0.5, -0.7, 1.3, -2.0]);
        check_unary(|t, x| { let y = t.scale(x, -1.7); t.sum(y) }, &input);
    }

    #[test]
    fn binary_and_structural_primitives_match_finite_differences() {
        let input = [0.3, -0.8, 1.1];
        let other = [2.0, 0.5, -1.5];
        check_unary(
            |t, x| {
                let c = t.constant(&[2.0, 0.5, -1.5]);
                let y = t.mul(x, c);
                t.sum(y)
            },
            &input,
        );
        check_unary(
            |t, x| {
                let c = t.constant(&other);
                let y = t.sub(x, c);
                let z = t.square(y);
                t.sum(z)
            },
            &input,
        );
        check_unary(
            |t, x| {
                let c = t.constant(&[1.0, -2.0, 3.0]);
                let y = t.concat(x, c);
                let z = t.square(y);
                t.sum(z)
            },
            &input,
        );
        check_unary(
            |t, x| {
                let y = t.sum_many(&[x, x, x]);
                let z = t.square(y);
                t.sum(z)
            },
            &input,
        );
    }

    #[test]
    fn affine_matches_finite_differences_in_all_arguments() {
        let w = [0.3, -0.2, 0.5, 0.1, 0.7, -0.4]; // 2×3
        let b = [0.1, -0.6];
        let x = [1.2, -0.3, 0.8];

        // grad wrt w
        check_unary(
            |t, wv| {
                let bv = t.constant(&b);
                let xv = t.constant(&x);
                let y = t.affine(wv, bv, xv, 2, 3);
                let z = t.square(y);
                t.sum(z)
            },
            &w,
        );
        // grad wrt x
        check_unary(
            |t, xv| {
                let wv = t.constant(&w);
                let bv = t.constant(&b);
                let y = t.affine(wv, bv, xv, 2, 3);
                let z = t.square(y);
                t.sum(z)
            },
            &x,
        );
        // grad wrt b
        check_unary(
            |t, bv| {
                let wv = t.constant(&w);
                let xv = t.constant(&x);
                let y = t.affine(wv, bv, xv, 2, 3);
                let z = t.square(y);
                t.sum(z)
            },
            &b,
        );
    }

    #[test]
    fn canonical_sum_is_bitwise_permutation_invariant() {
        let vals = [
            vec![0.1, 0.3],
            vec![-2.0, 1e-9],
            vec![7.7, -0.5],
            vec![0.1, 0.2],
        ];
        let sum_of = |order: &[usize]| {
            let mut tape = Tape::new();
            let vars: Vec<Var> = order.iter().map(|&i| tape.leaf(vals[i].clone())).collect();
            let s = tape.canonical_sum(&vars);
            tape.value(s).to_vec()
        };
        let a = sum_of(&[0, 1, 2, 3]);
        let b = sum_of(&[3, 2, 1, 0]);
        let c = sum_of(&[2, 0, 3, 1]);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn non_finite_forward_is_reported_with_op_name() {
        let mut tape = Tape::new();
        let x = tape.leaf(vec![1e308]);
        let y = tape.square(x); // overflows to inf
        let err = tape.backward(y).unwrap_err();
        assert!(err.to_string().contains("square"), "got: {err}");
    }

    #[test]
    fn gradient_flows_through_shared_subexpressions() {
        // loss = (x + x)² → dloss/dx = 8x
        let mut tape = Tape::new();
        let x = tape.leaf(vec![3.0]);
        let two_x = tape.add(x, x);
        let sq = tape.square(two_x);
        let grads = tape.backward(sq).unwrap();
        assert_eq!(grads.get(x), &[24.0]);
    }
}
