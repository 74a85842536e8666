//! Minimal feed-forward network with manual backpropagation.
//!
//! Everything is `f64` and batch-major: a batch is a row-major
//! `rows x cols` [`Matrix`]. Layers keep no per-call state; `forward`
//! returns a [`Tape`] that `backward` consumes, so a network can be shared
//! immutably while being evaluated.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { rows: rows.len(), cols, data: rows.concat() }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Kaiming-uniform initialization.
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-bound..bound)).collect();
        Self { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum: 0.1,
            eps: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Layer {
    Dense(Dense),
    Relu,
    BatchNorm(BatchNorm),
    Dropout { rate: f64 },
}

impl Layer {
    fn describe(&self) -> String {
        match self {
            Layer::Dense(d) => format!("dense {}x{}", d.inputs, d.outputs),
            Layer::Relu => "relu".into(),
            Layer::BatchNorm(b) => format!("batchnorm {}", b.gamma.len()),
            Layer::Dropout { rate } => format!("dropout {rate}"),
        }
    }
}

/// What a layer saved during `forward` for its backward pass.
#[derive(Debug, Clone)]
enum Saved {
    Dense { input: Matrix },
    Relu { mask: Vec<bool> },
    BatchNorm { xhat: Matrix, inv_std: Vec<f64>, mean: Vec<f64>, var: Vec<f64>, train: bool },
    Dropout { scale: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Tape {
    saved: Vec<Saved>,
    pub output: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn input_width(&self) -> usize {
        self.layers.iter().find_map(|l| if let Layer::Dense(d) = l { Some(d.inputs) } else { None }).unwrap_or(0)
    }

    pub fn output_width(&self) -> usize {
        self.layers.iter().rev().find_map(|l| if let Layer::Dense(d) = l { Some(d.outputs) } else { None }).unwrap_or(0)
    }

    pub fn shapes(&self) -> Vec<String> {
        self.layers.iter().map(Layer::describe).collect()
    }

    /// Runs the batch through the network. `rng` drives dropout masks and is
    /// only consulted in training mode.
    pub fn forward(&self, x: &Matrix, mode: Mode, rng: &mut impl Rng) -> Tape {
        let mut cur = x.clone();
        let mut saved = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    assert_eq!(cur.cols, d.inputs, "dense input width");
                    let mut out = Matrix::zeros(cur.rows, d.outputs);
                    for r in 0..cur.rows {
                        let xr = cur.row(r);
                        let yr = out.row_mut(r);
                        for (o, y) in yr.iter_mut().enumerate() {
                            let w = &d.weights[o * d.inputs..(o + 1) * d.inputs];
                            *y = d.bias[o] + w.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    saved.push(Saved::Dense { input: std::mem::replace(&mut cur, out) });
                }
                Layer::Relu => {
                    let mask: Vec<bool> = cur.data.iter().map(|&v| v > 0.0).collect();
                    for (v, &m) in cur.data.iter_mut().zip(&mask) {
                        if !m {
                            *v = 0.0;
                        }
                    }
                    saved.push(Saved::Relu { mask });
                }
                Layer::BatchNorm(bn) => {
                    let (n, w) = (cur.rows, cur.cols);
                    let train = mode == Mode::Train && n > 1;
                    let (mean, var) = if train {
                        let mut mean = vec![0.0; w];
                        let mut var = vec![0.0; w];
                        for r in 0..n {
                            for (m, v) in mean.iter_mut().zip(cur.row(r)) {
                                *m += v / n as f64;
                            }
                        }
                        for r in 0..n {
                            for ((s, v), m) in var.iter_mut().zip(cur.row(r)).zip(&mean) {
                                *s += (v - m) * (v - m) / n as f64;
                            }
                        }
                        (mean, var)
                    } else {
                        (bn.running_mean.clone(), bn.running_var.clone())
                    };
                    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + bn.eps).sqrt()).collect();
                    let mut xhat = Matrix::zeros(n, w);
                    for r in 0..n {
                        for c in 0..w {
                            let h = (cur.row(r)[c] - mean[c]) * inv_std[c];
                            xhat.row_mut(r)[c] = h;
                            cur.row_mut(r)[c] = bn.gamma[c] * h + bn.beta[c];
                        }
                    }
                    saved.push(Saved::BatchNorm { xhat, inv_std, mean, var, train });
                }
                Layer::Dropout { rate } => {
                    let scale: Vec<f64> = if mode == Mode::Train && *rate > 0.0 {
                        let keep = 1.0 - rate;
                        cur.data.iter().map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 }).collect()
                    } else {
                        vec![1.0; cur.data.len()]
                    };
                    for (v, s) in cur.data.iter_mut().zip(&scale) {
                        *v *= s;
                    }
                    saved.push(Saved::Dropout { scale });
                }
            }
        }
        Tape { saved, output: cur }
    }

    /// Inference-mode forward pass.
    pub fn predict(&self, x: &Matrix) -> Matrix {
        // Eval mode never draws from the generator.
        let mut unused = rand::rngs::mock::StepRng::new(0, 0);
        self.forward(x, Mode::Eval, &mut unused).output
    }

    /// Gradients of every parameter tensor (see [`Network::params`] for the
    /// order) given `d_out = dL/d(output)`.
    pub fn backward(&self, tape: &Tape, d_out: &Matrix) -> Vec<Vec<f64>> {
        let mut grads: Vec<Vec<f64>> = Vec::new();
        let mut g = d_out.clone();
        for (layer, saved) in self.layers.iter().zip(&tape.saved).rev() {
            match (layer, saved) {
                (Layer::Dense(d), Saved::Dense { input }) => {
                    let mut dw = vec![0.0; d.weights.len()];
                    let mut db = vec![0.0; d.outputs];
                    let mut dx = Matrix::zeros(input.rows, d.inputs);
                    for r in 0..input.rows {
                        let gr = g.row(r);
                        let xr = input.row(r);
                        for (o, &go) in gr.iter().enumerate() {
                            if go == 0.0 {
                                continue;
                            }
                            db[o] += go;
                            let w = &d.weights[o * d.inputs..(o + 1) * d.inputs];
                            let dwr = &mut dw[o * d.inputs..(o + 1) * d.inputs];
                            for ((dwi, xi), (dxi, wi)) in dwr.iter_mut().zip(xr).zip(dx.row_mut(r).iter_mut().zip(w)) {
                                *dwi += go * xi;
                                *dxi += go * wi;
                            }
                        }
                    }
                    grads.push(db);
                    grads.push(dw);
                    g = dx;
                }
                (Layer::Relu, Saved::Relu { mask }) => {
                    for (v, &m) in g.data.iter_mut().zip(mask) {
                        if !m {
                            *v = 0.0;
                        }
                    }
                }
                (Layer::BatchNorm(bn), Saved::BatchNorm { xhat, inv_std, train, .. }) => {
                    let (n, w) = (g.rows, g.cols);
                    let mut dgamma = vec![0.0; w];
                    let mut dbeta = vec![0.0; w];
                    for r in 0..n {
                        for c in 0..w {
                            dgamma[c] += g.row(r)[c] * xhat.row(r)[c];
                            dbeta[c] += g.row(r)[c];
                        }
                    }
                    let mut dx = Matrix::zeros(n, w);
                    for c in 0..w {
                        let k = bn.gamma[c] * inv_std[c];
                        for r in 0..n {
                            dx.row_mut(r)[c] = if *train {
                                k * (g.row(r)[c] - dbeta[c] / n as f64 - xhat.row(r)[c] * dgamma[c] / n as f64)
                            } else {
                                k * g.row(r)[c]
                            };
                        }
                    }
                    grads.push(dbeta);
                    grads.push(dgamma);
                    g = dx;
                }
                (Layer::Dropout { .. }, Saved::Dropout { scale }) => {
                    for (v, s) in g.data.iter_mut().zip(scale) {
                        *v *= s;
                    }
                }
                _ => unreachable!("tape does not match network"),
            }
        }
        grads.reverse();
        grads
    }

    /// Trainable tensors in a fixed order: per layer, weights then bias for
    /// dense layers and gamma then beta for batch-norm layers.
    pub fn params(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Dense(d) => {
                    out.push(&d.weights);
                    out.push(&d.bias);
                }
                Layer::BatchNorm(b) => {
                    out.push(&b.gamma);
                    out.push(&b.beta);
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Dense(d) => {
                    out.push(&mut d.weights);
                    out.push(&mut d.bias);
                }
                Layer::BatchNorm(b) => {
                    out.push(&mut b.gamma);
                    out.push(&mut b.beta);
                }
                _ => {}
            }
        }
        out
    }

    /// Folds the batch statistics of a training pass into the running
    /// averages.
    pub fn update_running_stats(&mut self, tape: &Tape) {
        for (layer, saved) in self.layers.iter_mut().zip(&tape.saved) {
            if let (Layer::BatchNorm(bn), Saved::BatchNorm { mean, var, train: true, .. }) = (layer, saved) {
                let m = bn.momentum;
                for c in 0..mean.len() {
                    bn.running_mean[c] = (1.0 - m) * bn.running_mean[c] + m * mean[c];
                    bn.running_var[c] = (1.0 - m) * bn.running_var[c] + m * var[c];
                }
            }
        }
    }

    pub fn has_non_finite(&self) -> bool {
        self.params().iter().any(|p| p.iter().any(|v| !v.is_finite()))
    }
}

/// Row-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean softmax cross-entropy against target distributions, and its gradient
/// with respect to the logits.
pub fn softmax_cross_entropy(logits: &Matrix, targets: &Matrix) -> (f64, Matrix) {
    let p = softmax(logits);
    let n = logits.rows as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(logits.rows, logits.cols);
    for r in 0..logits.rows {
        for c in 0..logits.cols {
            let t = targets.row(r)[c];
            if t > 0.0 {
                loss -= t * p.row(r)[c].max(1e-300).ln();
            }
            grad.row_mut(r)[c] = (p.row(r)[c] - t) / n;
        }
    }
    (loss / n, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerConfig {
    Sgd { learning_rate: f64, momentum: f64 },
    Adam { learning_rate: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        Self::Adam { learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: i32,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, net: &Network) -> Self {
        let zeros: Vec<Vec<f64>> = net.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Self { config, first: zeros.clone(), second: zeros, steps: 0 }
    }

    pub fn step(&mut self, net: &mut Network, grads: &[Vec<f64>]) {
        self.steps += 1;
        let t = self.steps;
        for (((p, g), m), v) in
            net.params_mut().into_iter().zip(grads).zip(self.first.iter_mut()).zip(self.second.iter_mut())
        {
            match self.config {
                OptimizerConfig::Sgd { learning_rate, momentum } => {
                    for ((pi, gi), mi) in p.iter_mut().zip(g).zip(m.iter_mut()) {
                        *mi = momentum * *mi - learning_rate * gi;
                        *pi += *mi;
                    }
                }
                OptimizerConfig::Adam { learning_rate, beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for (((pi, gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        *pi -= learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Versioned on-disk envelope for trained networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile<T> {
    pub format: String,
    pub version: u32,
    pub layer_shapes: Vec<String>,
    pub model: T,
}
