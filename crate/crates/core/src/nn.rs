//! Dense feed-forward Q-network with ReLU hidden layers and a linear head,
//! trained with a masked squared-error loss and Adam.
//!
//! Weights of a layer are stored row-major as `[out][in]`.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut SimRng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut layer = Self::zeros(in_dim, out_dim);
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..=limit);
        }
        layer
    }

    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.in_dim + inp]
    }

    fn affine(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

/// The parameter set of a Q-network. Gradients and optimizer moments use the
/// same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

/// Gradients have the same layout as the weights they belong to.
pub type Gradients = QNetwork;

impl QNetwork {
    /// `sizes` lists layer widths from input to output, e.g. `[3, 24, 24, 5]`.
    pub fn new(sizes: &[usize], rng: &mut SimRng) -> Self {
        assert!(
            sizes.len() >= 2,
            "need at least an input and an output width"
        );
        Self {
            layers: sizes
                .windows(2)
                .map(|w| Dense::glorot(w[0], w[1], rng))
                .collect(),
        }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(
            sizes.len() >= 2,
            "need at least an input and an output width"
        );
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Snapshot("network has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Snapshot(format!(
                    "layer widths do not chain: {} then {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        for l in &layers {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::Snapshot(
                    "layer buffer sizes do not match widths".into(),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].in_dim];
        s.extend(self.layers.iter().map(|l| l.out_dim));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Parameters in snapshot order: per layer, weights then biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    fn zip_apply(&mut self, other: &Self, mut f: impl FnMut(&mut f64, f64)) {
        for (a, b) in self.params_mut().zip(other.params()) {
            f(a, *b);
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.zip_apply(other, |a, b| *a += b);
    }

    pub fn scale(&mut self, k: f64) {
        self.params_mut().for_each(|p| *p *= k);
    }

    /// Q-values for one input vector.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_dim(), "input width mismatch");
        let last = self.layers.len() - 1;
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.affine(&x);
            if i != last {
                x.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        x
    }

    /// Pre-activations of every layer for `input`.
    pub fn pre_activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        self.forward_cache(input).0
    }

    fn forward_cache(&self, input: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        assert_eq!(input.len(), self.input_dim(), "input width mismatch");
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = vec![input.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(post.last().expect("non-empty"));
            let a = if i == last {
                z.clone()
            } else {
                z.iter().map(|v| v.max(0.0)).collect()
            };
            pre.push(z);
            post.push(a);
        }
        (pre, post)
    }

    /// Loss `(target - Q(input, action))^2` and its exact gradient. Only the
    /// taken action's output contributes.
    pub fn backward(&self, input: &[f64], action: usize, target: f64) -> (f64, Gradients) {
        assert!(action < self.output_dim(), "action index out of range");
        let (pre, post) = self.forward_cache(input);
        let q = post.last().expect("non-empty")[action];
        let loss = mse_loss(q, target);

        let mut grads = Self::zeros(&self.sizes());
        let mut delta = vec![0.0; self.output_dim()];
        delta[action] = mse_loss_grad(q, target);

        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let g = &mut grads.layers[i];
            let x = &post[i];
            for o in 0..layer.out_dim {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (gw, xi) in row.iter_mut().zip(x) {
                    *gw += d * xi;
                }
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (j, p) in prev.iter_mut().enumerate() {
                    *p += d * layer.weight(o, j);
                }
            }
            for (p, z) in prev.iter_mut().zip(&pre[i - 1]) {
                if *z <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        (loss, grads)
    }

    /// Text snapshot: a header, then per layer its widths, one line per
    /// weight row and one line of biases. Values use shortest round-trip
    /// formatting, so reading a snapshot back is exact.
    pub fn to_snapshot(&self) -> String {
        let mut s = String::new();
        let sizes: Vec<String> = self.sizes().iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "qnetwork v1 {}", sizes.join(" "));
        for (i, l) in self.layers.iter().enumerate() {
            let _ = writeln!(s, "layer {i} {} {}", l.in_dim, l.out_dim);
            for row in l.weights.chunks_exact(l.in_dim) {
                let _ = writeln!(s, "{}", join(row));
            }
            let _ = writeln!(s, "{}", join(&l.bias));
        }
        s
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Snapshot("empty snapshot".into()))?;
        let mut head = header.split_whitespace();
        if head.next() != Some("qnetwork") || head.next() != Some("v1") {
            return Err(Error::Snapshot(format!("unrecognised header {header:?}")));
        }
        let sizes = head.map(parse_usize).collect::<Result<Vec<_>>>()?;
        if sizes.len() < 2 {
            return Err(Error::Snapshot("header lists fewer than two widths".into()));
        }
        let mut layers = Vec::new();
        for (i, w) in sizes.windows(2).enumerate() {
            let expect = format!("layer {i} {} {}", w[0], w[1]);
            match lines.next() {
                Some(l) if l.split_whitespace().collect::<Vec<_>>().join(" ") == expect => {}
                other => {
                    return Err(Error::Snapshot(format!(
                        "expected {expect:?}, found {other:?}"
                    )))
                }
            }
            let mut layer = Dense::zeros(w[0], w[1]);
            for o in 0..w[1] {
                let row = parse_row(lines.next(), w[0])?;
                layer.weights[o * w[0]..(o + 1) * w[0]].copy_from_slice(&row);
            }
            layer.bias = parse_row(lines.next(), w[1])?;
            layers.push(layer);
        }
        if let Some(extra) = lines.next() {
            return Err(Error::Snapshot(format!("trailing data {extra:?}")));
        }
        Self::from_layers(layers)
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Snapshot(format!("bad width {s:?}")))
}

fn parse_row(line: Option<&str>, len: usize) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| Error::Snapshot("truncated snapshot".into()))?;
    let row = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Snapshot(format!("bad number {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if row.len() != len {
        return Err(Error::Snapshot(format!(
            "expected {len} values, found {}",
            row.len()
        )));
    }
    Ok(row)
}

/// Squared error between one predicted Q-value and its target.
pub fn mse_loss(predicted: f64, target: f64) -> f64 {
    (target - predicted).powi(2)
}

/// Derivative of [`mse_loss`] with respect to `predicted`.
pub fn mse_loss_grad(predicted: f64, target: f64) -> f64 {
    2.0 * (predicted - target)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment estimates with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step_count: u64,
    first_moment: QNetwork,
    second_moment: QNetwork,
}

impl Adam {
    pub fn new(config: AdamConfig, net: &QNetwork) -> Self {
        let sizes = net.sizes();
        Self {
            config,
            step_count: 0,
            first_moment: QNetwork::zeros(&sizes),
            second_moment: QNetwork::zeros(&sizes),
        }
    }

    pub fn step(&mut self, net: &mut QNetwork, grads: &Gradients) {
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let params = net.params_mut();
        let m = self.first_moment.params_mut();
        let v = self.second_moment.params_mut();
        for (((p, m), v), g) in params.zip(m).zip(v).zip(grads.params()) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}
