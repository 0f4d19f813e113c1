use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand::RngCore;

use super::Tensor;
use crate::error::{contract, Error};
use crate::math;
use crate::Result;

/// Fully connected network: `tanh` on hidden layers, identity on the output.
///
/// Parameters live in one flat buffer. Layer `l` maps `dims[l]` inputs to
/// `dims[l + 1]` outputs and stores its weights input-major (`w[i * fan_out + j]`
/// connects input `i` to output `j`), followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer activations from a forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds at least the input")
    }
}

fn layout(dims: &[usize]) -> Result<(Vec<usize>, usize)> {
    contract!(dims.len() >= 2, "network needs at least input and output widths, got {:?}", dims);
    contract!(dims[1..].iter().all(|&d| d > 0), "layer widths after the input must be positive: {:?}", dims);
    let mut offsets = Vec::with_capacity(dims.len());
    let mut total = 0;
    for w in dims.windows(2) {
        offsets.push(total);
        total += w[0] * w[1] + w[1];
    }
    offsets.push(total);
    Ok((offsets, total))
}

impl DenseNet {
    /// Uniform initialization in `±1/sqrt(fan_in)` for weights and biases.
    pub fn new<R: RngCore + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let (offsets, total) = layout(dims)?;
        let mut params = vec![0.0; total];
        for (l, w) in dims.windows(2).enumerate() {
            let bound = 1.0 / math::sqrt(w[0].max(1) as f64);
            for p in &mut params[offsets[l]..offsets[l + 1]] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            offsets,
            params,
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let (offsets, total) = layout(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            offsets,
            params: vec![0.0; total],
        })
    }

    /// Builds a network from per-layer `(weights, bias)` pairs, weights input-major.
    pub fn from_layers(dims: &[usize], layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        contract!(layers.len() == dims.len() - 1, "expected {} layers, got {}", dims.len() - 1, layers.len());
        for (l, (w, b)) in layers.iter().enumerate() {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            contract!(w.len() == fan_in * fan_out, "layer {l}: weight count {} != {}x{}", w.len(), fan_in, fan_out);
            contract!(b.len() == fan_out, "layer {l}: bias length {} != {}", b.len(), fan_out);
            let off = net.offsets[l];
            net.params[off..off + w.len()].copy_from_slice(w);
            net.params[off + w.len()..off + w.len() + b.len()].copy_from_slice(b);
        }
        net.ensure_finite(0)?;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer_weights(&self, layer: usize) -> &[f64] {
        let off = self.offsets[layer];
        &self.params[off..off + self.dims[layer] * self.dims[layer + 1]]
    }

    pub fn layer_bias(&self, layer: usize) -> &[f64] {
        let end = self.offsets[layer + 1];
        &self.params[end - self.dims[layer + 1]..end]
    }

    pub fn layer_bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let end = self.offsets[layer + 1];
        let n = self.dims[layer + 1];
        &mut self.params[end - n..end]
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for l in 0..self.num_layers() {
            x = self.layer_forward(l, &x);
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.dims.len());
        activations.push(input.to_vec());
        for l in 0..self.num_layers() {
            let next = self.layer_forward(l, activations.last().unwrap());
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    fn layer_forward(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let fan_out = self.dims[l + 1];
        let w = self.layer_weights(l);
        let mut out = self.layer_bias(l).to_vec();
        for (i, &xi) in x.iter().enumerate() {
            math::axpy(xi, &w[i * fan_out..(i + 1) * fan_out], &mut out);
        }
        if l + 1 < self.num_layers() {
            for v in &mut out {
                *v = math::tanh(*v);
            }
        }
        out
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        contract!(
            input.len() == self.input_dim(),
            "input length {} != network input width {}",
            input.len(),
            self.input_dim()
        );
        Ok(())
    }

    /// Gradients of `Σ_k output_grad[k] * out[k]` with respect to all parameters
    /// and the input. Recomputes the forward pass.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let trace = self.forward_trace(input)?;
        let mut grads = vec![0.0; self.num_params()];
        let input_grad = self.backward_trace(&trace, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Accumulates parameter gradients into `grads` and returns the input gradient.
    pub fn backward_trace(&self, trace: &Trace, output_grad: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        contract!(grads.len() == self.num_params(), "gradient buffer length {} != {}", grads.len(), self.num_params());
        self.backprop(trace, output_grad, Some(grads))
    }

    /// Input gradient only; parameter gradients are not formed.
    pub fn input_grad(&self, trace: &Trace, output_grad: &[f64]) -> Result<Vec<f64>> {
        self.backprop(trace, output_grad, None)
    }

    fn backprop(&self, trace: &Trace, output_grad: &[f64], mut grads: Option<&mut [f64]>) -> Result<Vec<f64>> {
        contract!(
            output_grad.len() == self.output_dim(),
            "output gradient length {} != network output width {}",
            output_grad.len(),
            self.output_dim()
        );
        contract!(trace.activations.len() == self.dims.len(), "trace does not belong to this network");
        let mut delta = output_grad.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let x = &trace.activations[l];
            if let Some(g) = grads.as_deref_mut() {
                let off = self.offsets[l];
                let (gw, gb) = g[off..self.offsets[l + 1]].split_at_mut(fan_in * fan_out);
                for (i, &xi) in x.iter().enumerate() {
                    if xi != 0.0 {
                        math::axpy(xi, &delta, &mut gw[i * fan_out..(i + 1) * fan_out]);
                    }
                }
                for (b, d) in gb.iter_mut().zip(&delta) {
                    *b += d;
                }
            }
            let w = self.layer_weights(l);
            let mut dx: Vec<f64> = (0..fan_in)
                .map(|i| math::dot(&w[i * fan_out..(i + 1) * fan_out], &delta))
                .collect();
            if l > 0 {
                // x is the tanh output of the previous layer
                for (d, a) in dx.iter_mut().zip(x) {
                    *d *= 1.0 - a * a;
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// `self ← retention · self + (1 − retention) · online`.
    pub fn polyak_toward(&mut self, online: &DenseNet, retention: f64) -> Result<()> {
        contract!(self.dims == online.dims, "polyak update between shapes {:?} and {:?}", self.dims, online.dims);
        let mix = 1.0 - retention;
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t = retention * *t + mix * o;
        }
        Ok(())
    }

    /// Fails with the first offending layer if any parameter is NaN or infinite.
    pub fn ensure_finite(&self, step: u64) -> Result<()> {
        match self.params.iter().position(|p| !p.is_finite()) {
            None => Ok(()),
            Some(idx) => {
                let layer = self.offsets.windows(2).position(|w| idx >= w[0] && idx < w[1]).unwrap_or(0);
                Err(Error::NonFinite {
                    what: "network parameters",
                    detail: alloc::format!("layer {layer}, parameter {idx}, update step {step}"),
                })
            }
        }
    }

    /// One `(fan_in, fan_out)` weight tensor and one bias tensor per layer.
    pub fn to_tensors(&self) -> Vec<Tensor> {
        let mut out = Vec::with_capacity(2 * self.num_layers());
        for l in 0..self.num_layers() {
            out.push(Tensor {
                shape: vec![self.dims[l], self.dims[l + 1]],
                data: self.layer_weights(l).to_vec(),
            });
            out.push(Tensor::vector(self.layer_bias(l).to_vec()));
        }
        out
    }

    pub fn from_tensors(tensors: &[Tensor]) -> Result<Self> {
        contract!(!tensors.is_empty() && tensors.len() % 2 == 0, "expected weight/bias tensor pairs, got {}", tensors.len());
        let mut dims = Vec::new();
        let mut layers = Vec::new();
        for pair in tensors.chunks(2) {
            let (w, b) = (&pair[0], &pair[1]);
            contract!(w.shape.len() == 2 && b.shape.len() == 1, "bad layer tensor shapes {:?} / {:?}", w.shape, b.shape);
            contract!(w.shape[1] == b.shape[0], "weight fan-out {} != bias length {}", w.shape[1], b.shape[0]);
            if dims.is_empty() {
                dims.push(w.shape[0]);
            }
            contract!(*dims.last().unwrap() == w.shape[0], "layer widths do not chain");
            dims.push(w.shape[1]);
            layers.push((w.data.clone(), b.data.clone()));
        }
        Self::from_layers(&dims, &layers)
    }
}
