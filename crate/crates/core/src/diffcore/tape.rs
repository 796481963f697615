//! Reverse-mode differentiation over a linear tape of dense ops.
//!
//! Every op appends a node holding its forward value. Because nodes can only
//! reference earlier nodes, the tape is always in topological order and the
//! backward sweep is a single reverse pass.

use crate::diffcore::array::{gemm, Array};
use crate::diffcore::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu(Var),
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Cosine {
        f: Var,
        bank: Var,
        f_norm: f64,
        m_norms: Vec<f64>,
    },
    SoftCrossEntropy {
        logits: Var,
        target: Vec<f64>,
        probs: Vec<f64>,
    },
    Distance {
        a: Var,
        b: Var,
    },
    Hinge(Var),
    WeightedSum(Vec<(Var, f64)>),
    Sum(Var),
    Pick {
        x: Var,
        index: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Array,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    fn push(&mut self, value: Array, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    /// Records a constant. Gradients reach it but flow no further.
    pub fn input(&mut self, value: Array) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records the current value of a parameter.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).clone(), Op::Param(id))
    }

    /// `x · w + b` where `x` is `N×in` (or a single `in` vector), `w` is
    /// `in×out` and `b` has `out` entries.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if wv.shape().len() != 2 {
            return Err(Error::shape("linear", format!("weight must be 2-D, got {:?}", wv.shape())));
        }
        let (fan_in, fan_out) = (wv.shape()[0], wv.shape()[1]);
        if xv.shape().is_empty() || xv.shape().len() > 2 || xv.cols() != fan_in {
            return Err(Error::shape(
                "linear",
                format!("input {:?} does not match weight {:?}", xv.shape(), wv.shape()),
            ));
        }
        if bv.shape() != [fan_out] {
            return Err(Error::shape(
                "linear",
                format!("bias {:?} does not match {fan_out} outputs", bv.shape()),
            ));
        }
        let n = xv.rows();
        if n == 0 {
            return Err(Error::Empty("linear"));
        }
        let mut out = Vec::with_capacity(n * fan_out);
        for _ in 0..n {
            out.extend_from_slice(bv.data());
        }
        gemm(n, fan_in, fan_out, xv.data(), (fan_in, 1), wv.data(), (fan_out, 1), &mut out, true);
        let shape = if xv.shape().len() == 1 { vec![fan_out] } else { vec![n, fan_out] };
        let value = Array::new(shape, out)?;
        Ok(self.push(value, Op::Linear { x, w, b }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(value, Op::Relu(x))
    }

    /// Channel-wise max over the rows of an `N×d` matrix, giving a `d` vector.
    /// The gradient of each channel goes to the first row attaining the max.
    pub fn max_pool_points(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape().len() != 2 {
            return Err(Error::shape("max_pool_points", format!("expected N×d, got {:?}", xv.shape())));
        }
        let (n, d) = (xv.shape()[0], xv.shape()[1]);
        if n == 0 {
            return Err(Error::Empty("max_pool_points"));
        }
        let mut best = xv.row(0).to_vec();
        let mut argmax = vec![0usize; d];
        for i in 1..n {
            for (j, &v) in xv.row(i).iter().enumerate() {
                if v > best[j] {
                    best[j] = v;
                    argmax[j] = i;
                }
            }
        }
        Ok(self.push(Array::vector(best), Op::MaxPool { x, argmax }))
    }

    /// Cosine similarity between a feature vector `f` (length `d`) and each
    /// row of a `K×d` prototype bank.
    pub fn cosine_logits(&mut self, f: Var, bank: Var) -> Result<Var> {
        let (fv, mv) = (self.value(f), self.value(bank));
        if fv.shape().len() != 1 || mv.shape().len() != 2 || mv.shape()[1] != fv.len() {
            return Err(Error::shape(
                "cosine_logits",
                format!("feature {:?} vs bank {:?}", fv.shape(), mv.shape()),
            ));
        }
        let f_norm = norm(fv.data());
        if !(f_norm > f64::MIN_POSITIVE) {
            return Err(Error::NormUnderflow("cosine_logits (feature)"));
        }
        let k = mv.shape()[0];
        let mut m_norms = Vec::with_capacity(k);
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let row = mv.row(i);
            let m_norm = norm(row);
            if !(m_norm > f64::MIN_POSITIVE) {
                return Err(Error::NormUnderflow("cosine_logits (prototype)"));
            }
            out.push((dot(fv.data(), row) / (f_norm * m_norm)).clamp(-1.0, 1.0));
            m_norms.push(m_norm);
        }
        Ok(self.push(
            Array::vector(out),
            Op::Cosine {
                f,
                bank,
                f_norm,
                m_norms,
            },
        ))
    }

    /// `-Σ t_i log softmax(z)_i` for a fixed target distribution `t`.
    pub fn soft_cross_entropy(&mut self, logits: Var, target: &[f64]) -> Result<Var> {
        let z = self.value(logits);
        if z.shape().len() != 1 || z.len() != target.len() {
            return Err(Error::shape(
                "soft_cross_entropy",
                format!("logits {:?} vs target of length {}", z.shape(), target.len()),
            ));
        }
        let log_probs = log_softmax(z.data());
        let loss = -target.iter().zip(&log_probs).map(|(t, lp)| t * lp).sum::<f64>();
        let probs = log_probs.iter().map(|lp| lp.exp()).collect();
        Ok(self.push(
            Array::scalar(loss),
            Op::SoftCrossEntropy {
                logits,
                target: target.to_vec(),
                probs,
            },
        ))
    }

    /// Euclidean distance between two vectors of equal shape.
    pub fn distance(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(Error::shape("distance", format!("{:?} vs {:?}", av.shape(), bv.shape())));
        }
        let d = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        Ok(self.push(Array::scalar(d), Op::Distance { a, b }))
    }

    /// Elementwise `max(0, x)` on a scalar, with zero gradient at the kink.
    pub fn hinge(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(value, Op::Hinge(x))
    }

    /// `bias + Σ weight_i · x_i` over scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)], bias: f64) -> Result<Var> {
        let mut total = bias;
        for &(v, weight) in terms {
            let value = self.value(v);
            if !value.is_scalar() {
                return Err(Error::shape("weighted_sum", format!("term has shape {:?}", value.shape())));
            }
            total += weight * value.item();
        }
        Ok(self.push(Array::scalar(total), Op::WeightedSum(terms.to_vec())))
    }

    /// Sum of all entries.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Array::scalar(s), Op::Sum(x))
    }

    /// A single entry of a vector as a scalar node.
    pub fn pick(&mut self, x: Var, index: usize) -> Result<Var> {
        let xv = self.value(x);
        if index >= xv.len() {
            return Err(Error::shape("pick", format!("index {index} out of {}", xv.len())));
        }
        let value = xv.data()[index];
        Ok(self.push(Array::scalar(value), Op::Pick { x, index }))
    }

    /// Backpropagates from a scalar loss node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        self.backward_from(&[(loss, Array::filled(self.value(loss).shape(), 1.0))])
    }

    /// Backpropagates from arbitrary adjoint seeds. Seeds for the same node
    /// are summed.
    pub fn backward_from(&self, seeds: &[(Var, Array)]) -> Result<Gradients> {
        let mut adj: Vec<Option<Array>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut last = 0;
        for (v, seed) in seeds {
            if !seed.same_shape(self.value(*v)) {
                return Err(Error::shape(
                    "backward",
                    format!("seed {:?} vs node {:?}", seed.shape(), self.value(*v).shape()),
                ));
            }
            accumulate(&mut adj[v.0], seed, 1.0);
            last = last.max(v.0 + 1);
        }

        for i in (0..last).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf | Op::Param(_) => {}
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (fan_in, fan_out) = (wv.shape()[0], wv.shape()[1]);
                    let n = xv.rows();
                    let mut dx = vec![0.0; n * fan_in];
                    // dx = g · wᵀ
                    gemm(n, fan_out, fan_in, g.data(), (fan_out, 1), wv.data(), (1, fan_out), &mut dx, false);
                    // dw = xᵀ · g
                    let mut dw = vec![0.0; fan_in * fan_out];
                    gemm(fan_in, n, fan_out, xv.data(), (1, fan_in), g.data(), (fan_out, 1), &mut dw, false);
                    let mut db = vec![0.0; fan_out];
                    for r in 0..n {
                        for (acc, v) in db.iter_mut().zip(g.row(r)) {
                            *acc += v;
                        }
                    }
                    accumulate(&mut adj[x.0], &Array::new(xv.shape().to_vec(), dx)?, 1.0);
                    accumulate(&mut adj[w.0], &Array::new(wv.shape().to_vec(), dw)?, 1.0);
                    accumulate(&mut adj[b.0], &Array::vector(db), 1.0);
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let mut dx = g.clone();
                    for (d, &v) in dx.data_mut().iter_mut().zip(xv.data()) {
                        if v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut adj[x.0], &dx, 1.0);
                }
                Op::MaxPool { x, argmax } => {
                    let xv = self.value(*x);
                    let d = xv.cols();
                    let mut dx = Array::zeros(xv.shape());
                    for (j, &row) in argmax.iter().enumerate() {
                        dx.data_mut()[row * d + j] += g.data()[j];
                    }
                    accumulate(&mut adj[x.0], &dx, 1.0);
                }
                Op::Cosine {
                    f,
                    bank,
                    f_norm,
                    m_norms,
                } => {
                    let (fv, mv) = (self.value(*f), self.value(*bank));
                    let y = node.value.data();
                    let d = fv.len();
                    let mut df = vec![0.0; d];
                    let mut dm = vec![0.0; mv.len()];
                    for (i, &m_norm) in m_norms.iter().enumerate() {
                        let gi = g.data()[i];
                        if gi == 0.0 {
                            continue;
                        }
                        let row = mv.row(i);
                        let inv = 1.0 / (f_norm * m_norm);
                        let yf = y[i] / (f_norm * f_norm);
                        let ym = y[i] / (m_norm * m_norm);
                        for j in 0..d {
                            df[j] += gi * (row[j] * inv - yf * fv.data()[j]);
                            dm[i * d + j] = gi * (fv.data()[j] * inv - ym * row[j]);
                        }
                    }
                    accumulate(&mut adj[f.0], &Array::vector(df), 1.0);
                    accumulate(&mut adj[bank.0], &Array::new(mv.shape().to_vec(), dm)?, 1.0);
                }
                Op::SoftCrossEntropy { logits, target, probs } => {
                    let gs = g.item();
                    let mass: f64 = target.iter().sum();
                    let dz = probs.iter().zip(target).map(|(p, t)| gs * (mass * p - t)).collect();
                    accumulate(&mut adj[logits.0], &Array::vector(dz), 1.0);
                }
                Op::Distance { a, b } => {
                    let dist = node.value.item();
                    if dist > 0.0 {
                        let (av, bv) = (self.value(*a), self.value(*b));
                        let scale = g.item() / dist;
                        let diff: Vec<f64> =
                            av.data().iter().zip(bv.data()).map(|(x, y)| scale * (x - y)).collect();
                        let diff = Array::new(av.shape().to_vec(), diff)?;
                        accumulate(&mut adj[a.0], &diff, 1.0);
                        accumulate(&mut adj[b.0], &diff, -1.0);
                    }
                }
                Op::Hinge(x) => {
                    if self.value(*x).item() > 0.0 {
                        accumulate(&mut adj[x.0], &g, 1.0);
                    }
                }
                Op::WeightedSum(terms) => {
                    for &(v, weight) in terms {
                        let shape = self.value(v).shape();
                        accumulate(&mut adj[v.0], &Array::filled(shape, g.item()), weight);
                    }
                }
                Op::Sum(x) => {
                    let shape = self.value(*x).shape();
                    accumulate(&mut adj[x.0], &Array::filled(shape, g.item()), 1.0);
                }
                Op::Pick { x, index } => {
                    let mut dx = Array::zeros(self.value(*x).shape());
                    dx.data_mut()[*index] = g.item();
                    accumulate(&mut adj[x.0], &dx, 1.0);
                }
            }
            adj[i] = Some(g);
        }
        Ok(Gradients { adjoints: adj })
    }
}

fn accumulate(slot: &mut Option<Array>, value: &Array, scale: f64) {
    match slot {
        Some(acc) => acc.add_scaled(value, scale),
        None => {
            *slot = Some(if scale == 1.0 { value.clone() } else { value.map(|v| scale * v) });
        }
    }
}

/// Adjoints produced by a backward sweep.
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Array>>,
}

impl Gradients {
    /// Adjoint of `v`, or `None` if the seeds do not depend on it.
    pub fn get(&self, v: Var) -> Option<&Array> {
        self.adjoints.get(v.0).and_then(|a| a.as_ref())
    }

    /// Adds `scale ×` every parameter leaf's adjoint into `acc`, which is
    /// indexed by [`ParamId`]. Parameters recorded several times are summed
    /// in tape order.
    pub fn accumulate_params(&self, tape: &Tape, acc: &mut [Array], scale: f64) {
        for (node, adj) in tape.nodes.iter().zip(&self.adjoints) {
            if let (Op::Param(id), Some(g)) = (&node.op, adj) {
                acc[id.index()].add_scaled(g, scale);
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Numerically stable `log softmax`.
pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    log_softmax(z).into_iter().map(f64::exp).collect()
}
