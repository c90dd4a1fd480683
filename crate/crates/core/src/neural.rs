//! Minimal dense policy network and its training numerics.
//!
//! A fully-connected net with ReLU hidden layers, tanh output, and
//! inverted dropout on the second hidden layer. Gradients are hand-rolled
//! (weighted L1 loss, subgradient 0 at kinks), optimized with
//! bias-corrected Adam. Exploration noise comes from a discretized
//! Ornstein-Uhlenbeck process.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Policy input width: 5 waypoints x 3 body coords + body velocity (3)
/// + previous yaw-rate command (1).
pub const INPUT_DIM: usize = 19;
/// Four control channels.
pub const OUTPUT_DIM: usize = 4;

/// Identifier recorded in model files for the input vector layout above.
pub const INPUT_LAYOUT: &str = "wp5_bodyvel_yawrate";

pub const DEFAULT_HIDDEN: [usize; 3] = [64, 32, 16];

/// Which hidden layer gets dropout (0-based; 1 = the second hidden layer).
pub const DROPOUT_HIDDEN_LAYER: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// Row-major weights: `weights[o * in_dim + i]`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    fn affine(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.biases[o];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out[o] = acc;
        }
    }
}

#[derive(Clone, Debug)]
pub struct PolicyNet {
    pub layers: Vec<Layer>,
    pub dropout_rate: f64,
    pub mode: Mode,
}

/// Intermediates retained by a cached forward pass.
pub struct ForwardCache {
    /// `inputs[l]` is what layer l consumed (post-activation, post-dropout).
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    pub preacts: Vec<Vec<f64>>,
    /// Multiplicative dropout mask (0 or 1/keep) on the dropout layer's
    /// activations, when one was sampled.
    pub dropout_mask: Option<Vec<f64>>,
}

/// Per-parameter gradients, same shapes as the net.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &PolicyNet) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for w in &mut self.weights {
            w.fill(0.0);
        }
        for b in &mut self.biases {
            b.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for v in w.iter_mut() {
                *v *= factor;
            }
        }
        for b in &mut self.biases {
            for v in b.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

/// Reusable buffers for the training-loop hot path: one allocation per
/// run instead of per sample.
pub struct ForwardScratch {
    /// `acts[l]` is the input consumed by layer l (post-activation,
    /// post-dropout output of layer l-1).
    acts: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
    mask: Vec<f64>,
    delta: Vec<f64>,
    prev: Vec<f64>,
    output: [f64; OUTPUT_DIM],
}

impl ForwardScratch {
    pub fn for_net(net: &PolicyNet) -> Self {
        let mut acts = vec![vec![0.0; net.input_dim()]];
        let mut preacts = Vec::new();
        let mut widest = 0;
        for l in &net.layers {
            acts.push(vec![0.0; l.out_dim]);
            preacts.push(vec![0.0; l.out_dim]);
            widest = widest.max(l.out_dim).max(l.in_dim);
        }
        Self {
            acts,
            preacts,
            mask: Vec::new(),
            delta: vec![0.0; widest],
            prev: vec![0.0; widest],
            output: [0.0; OUTPUT_DIM],
        }
    }
}

/// Per-channel weights of the L1 training loss.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub w_t: f64,
    pub w_a: f64,
    pub w_e: f64,
    pub w_r: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_t: 1.0,
            w_a: 1.0,
            w_e: 1.0,
            w_r: 1.0,
        }
    }
}

impl LossWeights {
    pub fn as_array(&self) -> [f64; 4] {
        [self.w_t, self.w_a, self.w_e, self.w_r]
    }

    pub fn validate(&self) -> bool {
        let w = self.as_array();
        w.iter().all(|x| *x >= 0.0) && w.iter().any(|x| *x > 0.0)
    }
}

impl PolicyNet {
    /// He-initialized random net: hidden ReLU layers then the tanh output.
    pub fn random(hidden: &[usize], dropout_rate: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut sizes = vec![INPUT_DIM];
        sizes.extend_from_slice(hidden);
        sizes.push(OUTPUT_DIM);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (ind, outd) = (w[0], w[1]);
                let std = (2.0 / ind as f64).sqrt();
                Layer {
                    weights: (0..ind * outd)
                        .map(|_| std * rng::next_gaussian(rng))
                        .collect(),
                    biases: vec![0.0; outd],
                    in_dim: ind,
                    out_dim: outd,
                }
            })
            .collect();
        Self {
            layers,
            dropout_rate,
            mode: Mode::Eval,
        }
    }

    pub fn zeros(hidden: &[usize]) -> Self {
        let mut sizes = vec![INPUT_DIM];
        sizes.extend_from_slice(hidden);
        sizes.push(OUTPUT_DIM);
        Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            dropout_rate: 0.5,
            mode: Mode::Eval,
        }
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn hidden_count(&self) -> usize {
        self.layers.len() - 1
    }

    /// Deterministic eval-mode forward pass (no dropout, no cache).
    pub fn infer(&self, input: &[f64]) -> [f64; OUTPUT_DIM] {
        assert_eq!(input.len(), self.input_dim(), "input width mismatch");
        let mut cur = input.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.out_dim];
            layer.affine(&cur, &mut out);
            if l < last {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            } else {
                for v in &mut out {
                    *v = v.tanh();
                }
            }
            cur = out;
        }
        let mut y = [0.0; OUTPUT_DIM];
        y.copy_from_slice(&cur);
        y
    }

    /// Forward pass retaining intermediates for backprop. In train mode
    /// an inverted-dropout mask is drawn from `mask_stream` for the
    /// dropout layer; kept units are scaled by 1/keep.
    pub fn forward_cached(
        &self,
        input: &[f64],
        mask_stream: Option<&mut ChaCha8Rng>,
    ) -> ([f64; OUTPUT_DIM], ForwardCache) {
        assert_eq!(input.len(), self.input_dim(), "input width mismatch");
        let train = self.mode == Mode::Train && self.dropout_rate > 0.0;
        let mut mask_rng = mask_stream;

        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut preacts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut dropout_mask = None;

        let mut cur = input.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            inputs.push(cur.clone());
            let mut pre = vec![0.0; layer.out_dim];
            layer.affine(&cur, &mut pre);
            preacts.push(pre.clone());
            let mut act = pre;
            if l < last {
                for v in &mut act {
                    *v = v.max(0.0);
                }
                if train && l == DROPOUT_HIDDEN_LAYER.min(self.hidden_count() - 1) {
                    let rng = mask_rng
                        .as_deref_mut()
                        .expect("train-mode forward needs a mask stream");
                    let keep = 1.0 - self.dropout_rate;
                    let mask: Vec<f64> = (0..act.len())
                        .map(|_| {
                            if rng::next_f64(rng) < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    for (v, m) in act.iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    dropout_mask = Some(mask);
                }
            } else {
                for v in &mut act {
                    *v = v.tanh();
                }
            }
            cur = act;
        }
        let mut y = [0.0; OUTPUT_DIM];
        y.copy_from_slice(&cur);
        (
            y,
            ForwardCache {
                inputs,
                preacts,
                dropout_mask,
            },
        )
    }

    /// Weighted-L1 loss and its full parameter gradient for one sample.
    ///
    /// Subgradient 0 is taken at the |.| kink and at ReLU corners.
    pub fn loss_and_grad(
        &self,
        input: &[f64],
        label: &[f64; OUTPUT_DIM],
        weights: &LossWeights,
        mask_stream: Option<&mut ChaCha8Rng>,
    ) -> (f64, Gradients) {
        let mut grads = Gradients::zeros_like(self);
        let mut scratch = ForwardScratch::for_net(self);
        let loss =
            self.accumulate_loss_and_grad(input, label, weights, mask_stream, &mut scratch, &mut grads);
        (loss, grads)
    }

    /// Allocation-free variant for the training loop: gradients are
    /// *added* onto `grads`, intermediates live in `scratch`.
    pub fn accumulate_loss_and_grad(
        &self,
        input: &[f64],
        label: &[f64; OUTPUT_DIM],
        weights: &LossWeights,
        mask_stream: Option<&mut ChaCha8Rng>,
        scratch: &mut ForwardScratch,
        grads: &mut Gradients,
    ) -> f64 {
        assert_eq!(input.len(), self.input_dim(), "input width mismatch");
        let train = self.mode == Mode::Train && self.dropout_rate > 0.0;
        let mut mask_rng = mask_stream;
        let last = self.layers.len() - 1;
        let dropout_layer = DROPOUT_HIDDEN_LAYER.min(self.hidden_count() - 1);

        scratch.acts[0].copy_from_slice(input);
        scratch.mask.clear();
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = scratch.acts.split_at_mut(l + 1);
            let x = &before[l];
            let act = &mut after[0];
            let pre = &mut scratch.preacts[l];
            layer.affine(x, pre);
            if l < last {
                for (a, p) in act.iter_mut().zip(pre.iter()) {
                    *a = p.max(0.0);
                }
                if train && l == dropout_layer {
                    let rng = mask_rng
                        .as_deref_mut()
                        .expect("train-mode forward needs a mask stream");
                    let keep = 1.0 - self.dropout_rate;
                    for a in act.iter_mut() {
                        let m = if rng::next_f64(rng) < keep {
                            1.0 / keep
                        } else {
                            0.0
                        };
                        scratch.mask.push(m);
                        *a *= m;
                    }
                }
            } else {
                for (a, p) in act.iter_mut().zip(pre.iter()) {
                    *a = p.tanh();
                }
            }
        }
        scratch
            .output
            .copy_from_slice(&scratch.acts[self.layers.len()]);
        let output = scratch.output;

        let w = weights.as_array();
        let mut loss = 0.0;
        for j in 0..OUTPUT_DIM {
            let diff = output[j] - label[j];
            loss += w[j] * diff.abs();
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            // Through tanh: d tanh(p)/dp = 1 - tanh(p)^2.
            scratch.delta[j] = w[j] * sign * (1.0 - output[j] * output[j]);
        }

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x = &scratch.acts[l];
            for o in 0..layer.out_dim {
                let d = scratch.delta[o];
                grads.biases[l][o] += d;
                let row = &mut grads.weights[l][o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, xi) in row.iter_mut().zip(x.iter()) {
                    *g += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            // Propagate into the previous layer's activations.
            let prev = &mut scratch.prev[..layer.in_dim];
            prev.fill(0.0);
            for o in 0..layer.out_dim {
                let d = scratch.delta[o];
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (p, wv) in prev.iter_mut().zip(row) {
                    *p += d * wv;
                }
            }
            let pl = l - 1;
            if pl == dropout_layer && pl < last && !scratch.mask.is_empty() {
                for (p, m) in prev.iter_mut().zip(&scratch.mask) {
                    *p *= m;
                }
            }
            // ReLU subgradient on the previous layer's pre-activations.
            for (p, pre) in prev.iter_mut().zip(&scratch.preacts[pl]) {
                if *pre <= 0.0 {
                    *p = 0.0;
                }
            }
            scratch.delta[..layer.in_dim].copy_from_slice(prev);
        }

        loss
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|v| v.is_finite()) && l.biases.iter().all(|v| v.is_finite())
        })
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub cfg: AdamConfig,
    pub step: u64,
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &PolicyNet, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step: 0,
            m_w: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            v_w: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            m_b: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            v_b: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(net: &mut PolicyNet, grads: &Gradients, opt: &mut AdamState) {
    opt.step += 1;
    let t = opt.step as i32;
    let c = opt.cfg;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    for (l, layer) in net.layers.iter_mut().enumerate() {
        update_slice(
            &mut layer.weights,
            &grads.weights[l],
            &mut opt.m_w[l],
            &mut opt.v_w[l],
            c,
            bc1,
            bc2,
        );
        update_slice(
            &mut layer.biases,
            &grads.biases[l],
            &mut opt.m_b[l],
            &mut opt.v_b[l],
            c,
            bc1,
            bc2,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    c: AdamConfig,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
    }
}

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck exploration noise
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OuConfig {
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl Default for OuConfig {
    fn default() -> Self {
        Self {
            theta: 0.15,
            mu: 0.0,
            sigma: 0.2,
            dt: 1.0 / 60.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OuNoise {
    pub cfg: OuConfig,
    pub state: [f64; OUTPUT_DIM],
    rng: ChaCha8Rng,
}

impl OuNoise {
    pub fn new(cfg: OuConfig, rng: ChaCha8Rng) -> Self {
        Self {
            cfg,
            state: [0.0; OUTPUT_DIM],
            rng,
        }
    }

    /// x <- x + theta*(mu - x)*dt + sigma*sqrt(dt)*N(0, I).
    pub fn sample(&mut self) -> [f64; OUTPUT_DIM] {
        let c = self.cfg;
        let sd = c.sigma * c.dt.sqrt();
        for x in &mut self.state {
            *x += c.theta * (c.mu - *x) * c.dt + sd * rng::next_gaussian(&mut self.rng);
        }
        self.state
    }
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("failed to parse model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported model format_version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported input_layout {0:?}")]
    UnsupportedLayout(String),
    #[error("unsupported activation {0:?}")]
    UnsupportedActivation(String),
    #[error("model has no layers")]
    Empty,
    #[error("layer {layer}: declared {declared_in}x{declared_out} but weight vector has {actual} entries")]
    WeightLength {
        layer: usize,
        declared_in: usize,
        declared_out: usize,
        actual: usize,
    },
    #[error("layer {layer}: declared {declared_out} outputs but bias vector has {actual} entries")]
    BiasLength {
        layer: usize,
        declared_out: usize,
        actual: usize,
    },
    #[error("layer {layer}: input width {actual} does not chain from previous layer width {expected}")]
    ShapeChain {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    #[error("model input width {0} does not match the {INPUT_DIM}-feature layout")]
    BadInputDim(usize),
    #[error("model output width {0}, expected {OUTPUT_DIM}")]
    BadOutputDim(usize),
    #[error("layer {0} contains non-finite parameters")]
    NonFinite(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    input_layout: String,
    layers: Vec<ModelLayer>,
    hidden_activation: String,
    output_activation: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelLayer {
    #[serde(rename = "in")]
    in_dim: usize,
    #[serde(rename = "out")]
    out_dim: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

/// Serialize a net to the versioned JSON model format.
pub fn save_model(net: &PolicyNet) -> String {
    let file = ModelFile {
        format_version: 1,
        input_layout: INPUT_LAYOUT.to_string(),
        layers: net
            .layers
            .iter()
            .map(|l| ModelLayer {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                w: l.weights.clone(),
                b: l.biases.clone(),
            })
            .collect(),
        hidden_activation: "relu".to_string(),
        output_activation: "tanh".to_string(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

/// Parse and validate a model file. No partially-built net escapes: any
/// structural mismatch is an error naming the offending layer.
pub fn load_model(text: &str) -> Result<PolicyNet, ModelError> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.format_version != 1 {
        return Err(ModelError::UnsupportedVersion(file.format_version));
    }
    if file.input_layout != INPUT_LAYOUT {
        return Err(ModelError::UnsupportedLayout(file.input_layout));
    }
    if file.hidden_activation != "relu" {
        return Err(ModelError::UnsupportedActivation(file.hidden_activation));
    }
    if file.output_activation != "tanh" {
        return Err(ModelError::UnsupportedActivation(file.output_activation));
    }
    if file.layers.is_empty() {
        return Err(ModelError::Empty);
    }

    let mut layers = Vec::with_capacity(file.layers.len());
    let mut prev_out = None;
    for (i, l) in file.layers.iter().enumerate() {
        if l.w.len() != l.in_dim * l.out_dim {
            return Err(ModelError::WeightLength {
                layer: i,
                declared_in: l.in_dim,
                declared_out: l.out_dim,
                actual: l.w.len(),
            });
        }
        if l.b.len() != l.out_dim {
            return Err(ModelError::BiasLength {
                layer: i,
                declared_out: l.out_dim,
                actual: l.b.len(),
            });
        }
        if let Some(expected) = prev_out {
            if l.in_dim != expected {
                return Err(ModelError::ShapeChain {
                    layer: i,
                    expected,
                    actual: l.in_dim,
                });
            }
        }
        if !(l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite())) {
            return Err(ModelError::NonFinite(i));
        }
        prev_out = Some(l.out_dim);
        layers.push(Layer {
            weights: l.w.clone(),
            biases: l.b.clone(),
            in_dim: l.in_dim,
            out_dim: l.out_dim,
        });
    }
    let first_in = layers[0].in_dim;
    if first_in != INPUT_DIM {
        return Err(ModelError::BadInputDim(first_in));
    }
    let last_out = layers.last().unwrap().out_dim;
    if last_out != OUTPUT_DIM {
        return Err(ModelError::BadOutputDim(last_out));
    }

    Ok(PolicyNet {
        layers,
        dropout_rate: 0.5,
        mode: Mode::Eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded(name: &str) -> ChaCha8Rng {
        rng::stream(20250810, name)
    }

    fn random_input(rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..INPUT_DIM)
            .map(|_| rng::next_f64(rng) * 4.0 - 2.0)
            .collect()
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = PolicyNet::zeros(&DEFAULT_HIDDEN);
        let y = net.infer(&[1.0; INPUT_DIM]);
        assert_eq!(y, [0.0; 4]);
    }

    #[test]
    fn hand_evaluated_chain_of_identities() {
        // Every layer 1x1 with weight 1 and bias 0:
        // tanh(relu(relu(relu(0.5)))) = tanh(0.5).
        let mut net = PolicyNet::zeros(&[1, 1, 1]);
        net.layers = vec![
            Layer { weights: vec![1.0], biases: vec![0.0], in_dim: 1, out_dim: 1 },
            Layer { weights: vec![1.0], biases: vec![0.0], in_dim: 1, out_dim: 1 },
            Layer { weights: vec![1.0], biases: vec![0.0], in_dim: 1, out_dim: 1 },
            Layer { weights: vec![1.0], biases: vec![0.0], in_dim: 1, out_dim: 1 },
        ];
        let mut cur = vec![0.5];
        let last = net.layers.len() - 1;
        for (l, layer) in net.layers.iter().enumerate() {
            let mut out = vec![0.0; 1];
            layer.affine(&cur, &mut out);
            cur = out;
            if l < last {
                cur[0] = cur[0].max(0.0);
            } else {
                cur[0] = cur[0].tanh();
            }
        }
        assert!((cur[0] - 0.46212).abs() < 1e-5, "{}", cur[0]);
    }

    #[test]
    fn eval_forward_is_pure() {
        let mut rng = seeded("init");
        let net = PolicyNet::random(&DEFAULT_HIDDEN, 0.5, &mut rng);
        let x = random_input(&mut rng);
        let a = net.infer(&x);
        let b = net.infer(&x);
        assert_eq!(a, b);
    }

    #[test]
    fn output_stays_in_unit_box() {
        let mut rng = seeded("box");
        for _ in 0..20 {
            let net = PolicyNet::random(&DEFAULT_HIDDEN, 0.5, &mut rng);
            let x: Vec<f64> = (0..INPUT_DIM)
                .map(|_| rng::next_f64(&mut rng) * 200.0 - 100.0)
                .collect();
            for y in net.infer(&x) {
                assert!((-1.0..=1.0).contains(&y));
            }
        }
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let mut rng = seeded("dropout-net");
        let mut net = PolicyNet::random(&DEFAULT_HIDDEN, 0.5, &mut rng);
        let x = random_input(&mut rng);

        net.set_mode(Mode::Eval);
        let (_, eval_cache) = net.forward_cached(&x, None);
        let eval_act: Vec<f64> = eval_cache.preacts[DROPOUT_HIDDEN_LAYER]
            .iter()
            .map(|v| v.max(0.0))
            .collect();

        net.set_mode(Mode::Train);
        let mut mask_rng = seeded("dropout-mask");
        let draws = 100_000;
        let mut mean = vec![0.0; eval_act.len()];
        for _ in 0..draws {
            let (_, cache) = net.forward_cached(&x, Some(&mut mask_rng));
            let mask = cache.dropout_mask.as_ref().unwrap();
            for (m, (acc, base)) in mask.iter().zip(mean.iter_mut().zip(&eval_act)) {
                *acc += m * base / draws as f64;
            }
        }
        for (unit, (avg, base)) in mean.iter().zip(&eval_act).enumerate() {
            if *base < 1e-6 {
                continue; // dead unit: nothing to compare
            }
            assert!(
                (avg - base).abs() / base < 0.02,
                "unit {unit}: {avg} vs {base}"
            );
        }
    }

    #[test]
    fn exact_label_gives_zero_loss_and_gradient() {
        let mut rng = seeded("zero-loss");
        let mut net = PolicyNet::random(&DEFAULT_HIDDEN, 0.5, &mut rng);
        net.set_mode(Mode::Eval);
        let x = random_input(&mut rng);
        let y = net.infer(&x);
        let (loss, grads) = net.loss_and_grad(&x, &y, &LossWeights::default(), None);
        assert_eq!(loss, 0.0);
        for layer in &grads.weights {
            assert!(layer.iter().all(|g| *g == 0.0));
        }
    }

    #[test]
    fn weighted_loss_hand_value() {
        // Output fixed at (0.5, 0, 0, 0) away from the label with weights
        // (2, 1, 1, 1) gives loss 1.0.
        let mut net = PolicyNet::zeros(&[4]);
        net.set_mode(Mode::Eval);
        let x = vec![0.0; INPUT_DIM];
        let y = net.infer(&x); // all zeros
        let label = [y[0] - 0.5, y[1], y[2], y[3]];
        let weights = LossWeights {
            w_t: 2.0,
            ..LossWeights::default()
        };
        let (loss, _) = net.loss_and_grad(&x, &label, &weights, None);
        assert!((loss - 1.0).abs() < 1e-12, "{loss}");
    }

    /// Central finite differences with the dropout mask held fixed.
    fn finite_difference_check(
        net: &mut PolicyNet,
        x: &[f64],
        label: &[f64; 4],
        weights: &LossWeights,
        mask_seed: u64,
    ) -> f64 {
        let h = 1e-6;
        let mask = || rng::stream(mask_seed, "fd-mask");
        let (_, analytic) = net.loss_and_grad(x, label, weights, Some(&mut mask()));
        let mut worst: f64 = 0.0;
        for l in 0..net.layers.len() {
            for i in 0..net.layers[l].weights.len() {
                let orig = net.layers[l].weights[i];
                net.layers[l].weights[i] = orig + h;
                let (lp, _) = net.loss_and_grad(x, label, weights, Some(&mut mask()));
                net.layers[l].weights[i] = orig - h;
                let (lm, _) = net.loss_and_grad(x, label, weights, Some(&mut mask()));
                net.layers[l].weights[i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let ga = analytic.weights[l][i];
                let rel = (ga - fd).abs() / ga.abs().max(fd.abs()).max(1e-4);
                worst = worst.max(rel);
            }
            for i in 0..net.layers[l].biases.len() {
                let orig = net.layers[l].biases[i];
                net.layers[l].biases[i] = orig + h;
                let (lp, _) = net.loss_and_grad(x, label, weights, Some(&mut mask()));
                net.layers[l].biases[i] = orig - h;
                let (lm, _) = net.loss_and_grad(x, label, weights, Some(&mut mask()));
                net.layers[l].biases[i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let ga = analytic.biases[l][i];
                let rel = (ga - fd).abs() / ga.abs().max(fd.abs()).max(1e-4);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded("fd");
        for case in 0..3 {
            let mut net = PolicyNet::random(&[8, 6, 5], 0.5, &mut rng);
            net.set_mode(if case % 2 == 0 { Mode::Train } else { Mode::Eval });
            let x = random_input(&mut rng);
            let label = [
                rng::next_f64(&mut rng) * 2.0 - 1.0,
                rng::next_f64(&mut rng) * 2.0 - 1.0,
                rng::next_f64(&mut rng) * 2.0 - 1.0,
                rng::next_f64(&mut rng) * 2.0 - 1.0,
            ];
            let weights = LossWeights {
                w_t: 2.0,
                w_a: 1.0,
                w_e: 0.5,
                w_r: 1.5,
            };
            let worst = finite_difference_check(&mut net, &x, &label, &weights, 99 + case);
            assert!(worst < 1e-4, "case {case}: worst rel error {worst}");
        }
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut rng = seeded("adam0");
        let mut net = PolicyNet::random(&DEFAULT_HIDDEN, 0.5, &mut rng);
        let before = net.clone();
        let grads = Gradients::zeros_like(&net);
        let mut opt = AdamState::new(&net, AdamConfig::default());
        adam_step(&mut net, &grads, &mut opt);
        assert_eq!(opt.step, 1);
        for (a, b) in net.layers.iter().zip(&before.layers) {
            assert_eq!(a.weights, b.weights);
            assert_eq!(a.biases, b.biases);
        }
    }

    #[test]
    fn adam_first_step_magnitude_is_lr_for_any_scale() {
        for &g in &[1.0, 3.0, 0.1, 250.0] {
            let mut net = PolicyNet::zeros(&[1]);
            let mut grads = Gradients::zeros_like(&net);
            grads.weights[0][0] = g;
            let mut opt = AdamState::new(&net, AdamConfig::default());
            adam_step(&mut net, &grads, &mut opt);
            let delta = net.layers[0].weights[0];
            let lr = AdamConfig::default().lr;
            assert!(
                (delta + lr).abs() < 1e-9,
                "g={g}: delta {delta} vs -{lr}"
            );
        }
    }

    #[test]
    fn ou_deterministic_mean_reversion() {
        let cfg = OuConfig {
            sigma: 0.0,
            ..OuConfig::default()
        };
        let mut ou = OuNoise::new(cfg, seeded("ou"));
        ou.state = [1.0; 4];
        let decay = 1.0 - cfg.theta * cfg.dt;
        let mut expect = 1.0;
        for _ in 0..50 {
            expect *= decay;
            let s = ou.sample();
            for v in s {
                assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
            }
        }
    }

    #[test]
    fn ou_stationary_variance() {
        let cfg = OuConfig::default();
        let mut ou = OuNoise::new(cfg, seeded("ou-var"));
        // Burn in past the mixing time, then accumulate.
        for _ in 0..20_000 {
            ou.sample();
        }
        let n = 250_000;
        let mut sq = 0.0;
        for _ in 0..n {
            let s = ou.sample();
            for v in s {
                sq += v * v;
            }
        }
        let var = sq / (4.0 * n as f64);
        let expect = cfg.sigma * cfg.sigma / (2.0 * cfg.theta);
        assert!(
            (var - expect).abs() / expect < 0.05,
            "var {var} vs {expect}"
        );
    }

    #[test]
    fn ou_equal_seeds_equal_streams() {
        let mut a = OuNoise::new(OuConfig::default(), seeded("ou-eq"));
        let mut b = OuNoise::new(OuConfig::default(), seeded("ou-eq"));
        for _ in 0..100 {
            assert_eq!(a.sample(), b.sample());
        }
    }

    #[test]
    fn model_round_trip_is_bitwise() {
        let mut rng = seeded("model-rt");
        let net = PolicyNet::random(&DEFAULT_HIDDEN, 0.5, &mut rng);
        let text = save_model(&net);
        let back = load_model(&text).unwrap();
        for (a, b) in net.layers.iter().zip(&back.layers) {
            assert_eq!(a.weights, b.weights);
            assert_eq!(a.biases, b.biases);
        }
        assert_eq!(text, save_model(&back));
    }

    #[test]
    fn truncated_model_is_rejected_whole() {
        let mut rng = seeded("model-trunc");
        let net = PolicyNet::random(&DEFAULT_HIDDEN, 0.5, &mut rng);
        let text = save_model(&net);
        let truncated = &text[..text.len() / 2];
        assert!(matches!(load_model(truncated), Err(ModelError::Parse(_))));
    }

    #[test]
    fn mismatched_weight_length_names_layer() {
        let mut rng = seeded("model-mismatch");
        let net = PolicyNet::random(&DEFAULT_HIDDEN, 0.5, &mut rng);
        let mut file: serde_json::Value = serde_json::from_str(&save_model(&net)).unwrap();
        let w = file["layers"][2]["w"].as_array_mut().unwrap();
        w.pop();
        let text = serde_json::to_string(&file).unwrap();
        match load_model(&text) {
            Err(ModelError::WeightLength { layer, .. }) => assert_eq!(layer, 2),
            other => panic!("expected WeightLength error, got {other:?}"),
        }
    }

    #[test]
    fn training_on_frozen_dataset_decreases_loss() {
        let weights = LossWeights::default();
        let mut monotone = 0;
        let trials = 20;
        for trial in 0..trials {
            let mut data_rng = rng::stream(500 + trial, "frozen-data");
            let samples: Vec<(Vec<f64>, [f64; 4])> = (0..512)
                .map(|_| {
                    let x = random_input(&mut data_rng);
                    let y = [
                        (x[0] * 0.3 + x[5] * 0.1).tanh(),
                        (x[1] * 0.2 - x[6] * 0.2).tanh(),
                        (x[2] * 0.25).tanh(),
                        (x[3] * 0.15 + x[7] * 0.05).tanh(),
                    ];
                    (x, y)
                })
                .collect();
            let mut init_rng = rng::stream(900 + trial, "frozen-init");
            let mut net = PolicyNet::random(&DEFAULT_HIDDEN, 0.5, &mut init_rng);
            let mut opt = AdamState::new(&net, AdamConfig::default());
            let mut mask_rng = rng::stream(1300 + trial, "frozen-mask");

            let eval_loss = |net: &PolicyNet| -> f64 {
                samples
                    .iter()
                    .map(|(x, y)| {
                        let out = net.infer(x);
                        out.iter()
                            .zip(y)
                            .map(|(a, b)| (a - b).abs())
                            .sum::<f64>()
                    })
                    .sum::<f64>()
                    / samples.len() as f64
            };

            let mut prev = eval_loss(&net);
            let mut ok = true;
            for _ in 0..50 {
                net.set_mode(Mode::Train);
                let mut grads = Gradients::zeros_like(&net);
                for (x, y) in &samples {
                    let (_, g) = net.loss_and_grad(x, y, &weights, Some(&mut mask_rng));
                    grads.accumulate(&g, 1.0 / samples.len() as f64);
                }
                adam_step(&mut net, &grads, &mut opt);
                net.set_mode(Mode::Eval);
                let cur = eval_loss(&net);
                if cur >= prev {
                    ok = false;
                    break;
                }
                prev = cur;
            }
            if ok {
                monotone += 1;
            }
        }
        assert!(
            monotone * 100 >= trials * 95,
            "monotone in {monotone}/{trials} trials"
        );
    }
}
