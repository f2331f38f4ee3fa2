//! Dual-branch network: per-branch conv stack with global max pooling,
//! concatenation (accelerometer first), hidden dense layers, linear output.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::ArchSpec;
use crate::error::{Error, Result};
use crate::nn::activation::{relu_backward_in_place, relu_in_place};
use crate::nn::dropout::dropout_mask;
use crate::nn::pool::max_pool_raw;
use crate::nn::{Conv2d, Dense};
use crate::rng::{derive_seed, seeded_rng};
use crate::window::CHANNELS;

/// Axes per sensor; each branch sees its window as a one-channel
/// `[frames, 3]` image.
const AXES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub convs: Vec<Conv2d>,
}

impl Branch {
    fn init(filters: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut channels = 1;
        let convs = filters
            .iter()
            .map(|&k| {
                let layer = Conv2d::init(channels, k, rng);
                channels = k;
                layer
            })
            .collect();
        Self { convs }
    }
}

/// All trainable state of the network, plus the architecture that shaped it.
///
/// The same type doubles as a gradient container (see [`zeros_like`]).
///
/// [`zeros_like`]: SpeedNetParams::zeros_like
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedNetParams {
    pub arch: ArchSpec,
    pub accel: Branch,
    pub gyro: Branch,
    pub hidden: Vec<Dense>,
    pub output: Dense,
}

/// Validated construction with deterministic initialization.
pub fn build_model(arch: &ArchSpec, seed: u64) -> Result<SpeedNetParams> {
    arch.validate()?;
    SpeedNetParams::init(arch, seed)
}

impl SpeedNetParams {
    /// Initializes without the search-range check, which allows the small
    /// variants used for gradient checks. Branches and head draw from
    /// independent seed streams.
    pub fn init(arch: &ArchSpec, seed: u64) -> Result<Self> {
        arch.validate_structure()?;
        let accel = Branch::init(&arch.conv_filters, &mut seeded_rng(derive_seed(seed, 1)));
        let gyro = Branch::init(&arch.conv_filters, &mut seeded_rng(derive_seed(seed, 2)));
        let mut rng = seeded_rng(derive_seed(seed, 3));
        let mut width = arch.concat_len();
        let hidden = arch
            .dense_units
            .iter()
            .map(|&u| {
                let layer = Dense::init(width, u, &mut rng);
                width = u;
                layer
            })
            .collect();
        let output = Dense::init(width, 1, &mut rng);
        Ok(Self {
            arch: arch.clone(),
            accel,
            gyro,
            hidden,
            output,
        })
    }

    /// Same shapes, every value zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Parameter tensors in serialization order: accel convs (weights,
    /// bias), gyro convs, hidden dense layers, output layer.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for c in self.accel.convs.iter().chain(&self.gyro.convs) {
            out.push(&c.weights);
            out.push(&c.bias);
        }
        for d in self.hidden.iter().chain(std::iter::once(&self.output)) {
            out.push(&d.weights);
            out.push(&d.bias);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for c in self.accel.convs.iter_mut().chain(self.gyro.convs.iter_mut()) {
            out.push(&mut c.weights);
            out.push(&mut c.bias);
        }
        for d in self.hidden.iter_mut().chain(std::iter::once(&mut self.output)) {
            out.push(&mut d.weights);
            out.push(&mut d.bias);
        }
        out
    }

    /// Counted by walking every tensor.
    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn concat_len(&self) -> usize {
        self.accel.convs.last().map_or(0, |c| c.filters) + self.gyro.convs.last().map_or(0, |c| c.filters)
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= factor;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_window(&self, window: &[f64]) -> Result<()> {
        let frames = self.arch.input_frames;
        if window.len() != frames * CHANNELS {
            return Err(Error::ShapeMismatch {
                expected: format!("[{frames}, {CHANNELS}]"),
                got: format!("{} values", window.len()),
            });
        }
        Ok(())
    }

    /// Inference-mode prediction in mph.
    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        self.check_window(window)?;
        Ok(self.trace(window, None).output)
    }

    /// Forward pass. In training mode, dropout masks come from `rng`.
    pub fn forward(&self, window: &[f64], training: bool, rng: &mut ChaCha8Rng) -> Result<f64> {
        self.check_window(window)?;
        Ok(self.trace(window, training.then_some(rng)).output)
    }

    /// Forward pass that keeps what backpropagation needs.
    pub(crate) fn trace(&self, window: &[f64], dropout_rng: Option<&mut ChaCha8Rng>) -> Trace {
        let frames = self.arch.input_frames;
        let accel = branch_forward(&self.accel, &sensor_plane(window, frames, 0), frames);
        let gyro = branch_forward(&self.gyro, &sensor_plane(window, frames, AXES), frames);

        let mut x: Vec<f64> = accel.pooled.iter().chain(&gyro.pooled).copied().collect();
        let concat = x.clone();
        let mut hidden_out = Vec::with_capacity(self.hidden.len());
        let mut gates = Vec::with_capacity(self.hidden.len());
        let mut rng = dropout_rng;
        for layer in &self.hidden {
            let z = layer.forward_raw(&x);
            let mask = match rng.as_deref_mut() {
                Some(r) => dropout_mask(z.len(), self.arch.dropout, r, true),
                None => vec![1.0; z.len()],
            };
            let gate: Vec<f64> = z
                .iter()
                .zip(&mask)
                .map(|(&zv, &m)| if zv > 0.0 { m } else { 0.0 })
                .collect();
            x = z.iter().zip(&gate).map(|(zv, g)| zv * g).collect();
            hidden_out.push(x.clone());
            gates.push(gate);
        }
        let output = self.output.forward_raw(&x)[0];
        Trace {
            accel,
            gyro,
            concat,
            hidden_out,
            gates,
            output,
        }
    }

    /// Accumulates `d(loss)/d(params)` into `grads` given `d(loss)/d(output)`.
    pub(crate) fn backward(&self, trace: &Trace, grad_output: f64, grads: &mut Self) {
        let last_input = trace.hidden_out.last().unwrap_or(&trace.concat);
        let mut dx = vec![0.0; last_input.len()];
        self.output.backward_raw(
            last_input,
            &[grad_output],
            &mut grads.output.weights,
            &mut grads.output.bias,
            Some(&mut dx),
        );
        for l in (0..self.hidden.len()).rev() {
            let dz: Vec<f64> = dx.iter().zip(&trace.gates[l]).map(|(d, g)| d * g).collect();
            let input = if l == 0 { &trace.concat } else { &trace.hidden_out[l - 1] };
            let mut d_in = vec![0.0; input.len()];
            let g = &mut grads.hidden[l];
            self.hidden[l].backward_raw(input, &dz, &mut g.weights, &mut g.bias, Some(&mut d_in));
            dx = d_in;
        }
        let split = trace.accel.pooled.len();
        branch_backward(&self.accel, &trace.accel, &dx[..split], self.arch.input_frames, &mut grads.accel);
        branch_backward(&self.gyro, &trace.gyro, &dx[split..], self.arch.input_frames, &mut grads.gyro);
    }

    /// Mean absolute error over a set of windows and its gradient with
    /// respect to every parameter. Dropout is active only when `dropout_rng`
    /// is given.
    pub fn loss_and_gradient(
        &self,
        windows: &[&[f64]],
        labels: &[f64],
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Self)> {
        if windows.len() != labels.len() {
            return Err(Error::LengthMismatch(windows.len(), labels.len()));
        }
        if windows.is_empty() {
            return Err(Error::Empty);
        }
        let n = windows.len() as f64;
        let mut grads = self.zeros_like();
        let mut total = 0.0;
        let mut rng = dropout_rng;
        for (w, &y) in windows.iter().zip(labels) {
            self.check_window(w)?;
            let trace = self.trace(w, rng.as_deref_mut());
            let d = trace.output - y;
            total += d.abs();
            self.backward(&trace, crate::nn::loss::sign(d) / n, &mut grads);
        }
        Ok((total / n, grads))
    }
}

/// Extracts one sensor's three columns as a `[1, frames, 3]` plane.
fn sensor_plane(window: &[f64], frames: usize, first_col: usize) -> Vec<f64> {
    let mut plane = Vec::with_capacity(frames * AXES);
    for row in window.chunks_exact(CHANNELS) {
        plane.extend_from_slice(&row[first_col..first_col + AXES]);
    }
    plane
}

pub(crate) struct BranchTrace {
    /// Patch matrix of each conv layer's input.
    cols: Vec<Vec<f64>>,
    /// Post-ReLU output of each conv layer.
    acts: Vec<Vec<f64>>,
    argmax: Vec<usize>,
    pooled: Vec<f64>,
}

pub(crate) struct Trace {
    accel: BranchTrace,
    gyro: BranchTrace,
    concat: Vec<f64>,
    hidden_out: Vec<Vec<f64>>,
    /// `relu'(z) * dropout multiplier` per hidden layer.
    gates: Vec<Vec<f64>>,
    pub(crate) output: f64,
}

fn branch_forward(branch: &Branch, plane: &[f64], frames: usize) -> BranchTrace {
    let positions = frames * AXES;
    let mut cols = Vec::with_capacity(branch.convs.len());
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(branch.convs.len());
    for conv in &branch.convs {
        let input = acts.last().map_or(plane, Vec::as_slice);
        let mut c = Vec::new();
        let mut out = vec![0.0; conv.filters * positions];
        conv.forward_raw(input, frames, AXES, &mut c, &mut out);
        relu_in_place(&mut out);
        cols.push(c);
        acts.push(out);
    }
    let last = branch.convs.last().map_or(0, |c| c.filters);
    let (pooled, argmax) = max_pool_raw(acts.last().map_or(&[][..], Vec::as_slice), last, positions);
    BranchTrace {
        cols,
        acts,
        argmax,
        pooled,
    }
}

fn branch_backward(branch: &Branch, trace: &BranchTrace, d_pooled: &[f64], frames: usize, grads: &mut Branch) {
    let positions = frames * AXES;
    let top = branch.convs.len() - 1;
    let mut d_act = vec![0.0; branch.convs[top].filters * positions];
    for (k, (&i, &g)) in trace.argmax.iter().zip(d_pooled).enumerate() {
        d_act[k * positions + i] = g;
    }
    for l in (0..=top).rev() {
        relu_backward_in_place(&trace.acts[l], &mut d_act);
        let conv = &branch.convs[l];
        let g = &mut grads.convs[l];
        if l == 0 {
            conv.backward_raw(&trace.cols[0], &d_act, frames, AXES, &mut g.weights, &mut g.bias, None);
        } else {
            let mut d_in = vec![0.0; conv.in_channels * positions];
            conv.backward_raw(&trace.cols[l], &d_act, frames, AXES, &mut g.weights, &mut g.bias, Some(&mut d_in));
            d_act = d_in;
        }
    }
}

/// Uniform random window, handy for tests and benchmarks.
pub fn random_window<R: Rng + ?Sized>(frames: usize, rng: &mut R) -> Vec<f64> {
    (0..frames * CHANNELS)
        .map(|i| {
            if i % CHANNELS < AXES {
                rng.random_range(-2.0..2.0)
            } else {
                rng.random_range(-200.0..200.0)
            }
        })
        .collect()
}
