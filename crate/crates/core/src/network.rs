//! Small feed-forward networks with exact reverse-mode gradients.
//!
//! Supported layers: `Dense`, `ReLU`, `Conv2d` (stride 1, zero padding) and
//! `Flatten`, composed into a [`Network`] that maps a batched input tensor to
//! raw logits. Backward passes return gradients w.r.t. every parameter and
//! w.r.t. the input in one sweep, which is what both the optimizer and the
//! attacks consume. Architectures stay deliberately small: at most four
//! dense layers and two convolution layers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss::cross_entropy_batch;
use crate::rng::{self, Stream};
use crate::tensor::{shape_string, Tensor};

/// Architecture element, parameter-free description of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Dense { input: usize, output: usize },
    Relu,
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize, padding: usize },
    Flatten,
}

/// Fully connected layer; weights are `[output][input]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// 2-D convolution, stride 1, square kernel, zero padding.
/// Kernels are `[out_c][in_c][k][k]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub padding: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Relu,
    Conv2d(Conv2d),
    Flatten,
}

impl Layer {
    fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Relu => "relu",
            Layer::Conv2d(_) => "conv2d",
            Layer::Flatten => "flatten",
        }
    }

    fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense { input: d.input, output: d.output },
            Layer::Relu => LayerSpec::Relu,
            Layer::Conv2d(c) => LayerSpec::Conv2d {
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                kernel: c.kernel,
                padding: c.padding,
            },
            Layer::Flatten => LayerSpec::Flatten,
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Layer::Dense(d) => d.weights.len() + d.bias.len(),
            Layer::Conv2d(c) => c.weights.len() + c.bias.len(),
            _ => 0,
        }
    }

    /// Output sample shape for a given input sample shape.
    fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: String| Error::ShapeMismatch {
            context: format!("layer {} ({})", index, self.kind()),
            expected,
            got: shape_string(input),
        };
        match self {
            Layer::Dense(d) => {
                if input != [d.input] {
                    return Err(mismatch(format!("[{}]", d.input)));
                }
                Ok(vec![d.output])
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::Conv2d(c) => {
                if input.len() != 3 || input[0] != c.in_channels {
                    return Err(mismatch(format!("[{}xHxW]", c.in_channels)));
                }
                let (h, w) = (input[1], input[2]);
                let out = |d: usize| (d + 2 * c.padding).checked_sub(c.kernel - 1);
                match (out(h), out(w)) {
                    (Some(oh), Some(ow)) if oh > 0 && ow > 0 => {
                        Ok(vec![c.out_channels, oh, ow])
                    }
                    _ => Err(mismatch(format!("spatial dims >= kernel {}", c.kernel))),
                }
            }
            Layer::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

/// Ordered list of layers mapping `[batch, input_shape...]` to logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    n_classes: usize,
}

/// Cached activations from a forward pass: the input to each layer plus the
/// final logits, all batched.
pub struct Trace {
    activations: Vec<Tensor>,
}

impl Trace {
    /// The logits produced by the traced forward pass.
    pub fn logits(&self) -> &Tensor {
        self.activations.last().expect("trace holds at least the input")
    }

    /// Layer inputs in order: `activations()[i]` feeds layer `i`, the last
    /// entry is the logits.
    pub fn activations(&self) -> &[Tensor] {
        &self.activations
    }
}

impl Network {
    /// Compose layers over an input shape, validating that adjacent shapes
    /// agree and that the result ends in a logit vector.
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let dense_count = layers.iter().filter(|l| matches!(l, Layer::Dense(_))).count();
        let conv_count = layers.iter().filter(|l| matches!(l, Layer::Conv2d(_))).count();
        if dense_count == 0 || dense_count > 4 {
            return Err(Error::InvalidConfig(format!(
                "networks need 1..=4 dense layers, got {}",
                dense_count
            )));
        }
        if conv_count > 2 {
            return Err(Error::InvalidConfig(format!(
                "networks support at most 2 conv layers, got {}",
                conv_count
            )));
        }
        let mut shape = input_shape.clone();
        for (i, layer) in layers.iter().enumerate() {
            shape = layer.output_shape(i, &shape)?;
        }
        if shape.len() != 1 || shape[0] < 2 {
            return Err(Error::InvalidConfig(format!(
                "network must end in a logit vector of >= 2 classes, got shape {}",
                shape_string(&shape)
            )));
        }
        Ok(Self { input_shape, layers, n_classes: shape[0] })
    }

    /// He-uniform initialized MLP: Dense/ReLU pairs then a Dense head.
    pub fn mlp(input_dim: usize, hidden: &[usize], n_classes: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::chacha(rng::stream_seed(seed, Stream::Init));
        let mut layers = Vec::new();
        let mut fan_in = input_dim;
        for &h in hidden {
            layers.push(Layer::Dense(Dense::he_uniform(fan_in, h, &mut rng)));
            layers.push(Layer::Relu);
            fan_in = h;
        }
        layers.push(Layer::Dense(Dense::he_uniform(fan_in, n_classes, &mut rng)));
        Self::new(vec![input_dim], layers)
    }

    /// He-uniform initialized conv stack: Conv/ReLU blocks, flatten, then a
    /// Dense head. `convs` lists `(out_channels, kernel)`; padding keeps the
    /// spatial size (`kernel / 2`).
    pub fn conv_net(
        input_shape: [usize; 3],
        convs: &[(usize, usize)],
        n_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng::chacha(rng::stream_seed(seed, Stream::Init));
        let mut layers = Vec::new();
        let (mut c, mut h, mut w) = (input_shape[0], input_shape[1], input_shape[2]);
        for &(out_c, k) in convs {
            let pad = k / 2;
            layers.push(Layer::Conv2d(Conv2d::he_uniform(c, out_c, k, pad, &mut rng)));
            layers.push(Layer::Relu);
            h = h + 2 * pad - k + 1;
            w = w + 2 * pad - k + 1;
            c = out_c;
        }
        layers.push(Layer::Flatten);
        layers.push(Layer::Dense(Dense::he_uniform(c * h * w, n_classes, &mut rng)));
        Self::new(input_shape.to_vec(), layers)
    }

    /// Two-class linear model whose logit difference is exactly `w.x + b`;
    /// class 1 wins when the score is positive. Handy against datasets with
    /// a known ground-truth hyperplane.
    pub fn linear_two_class(w: &[f64], b: f64) -> Result<Self> {
        let d = w.len();
        let mut weights = Vec::with_capacity(2 * d);
        for wi in w {
            weights.push(-wi / 2.0);
        }
        for wi in w {
            weights.push(wi / 2.0);
        }
        Self::new(
            vec![d],
            vec![Layer::Dense(Dense {
                input: d,
                output: 2,
                weights,
                bias: vec![-b / 2.0, b / 2.0],
            })],
        )
    }

    /// Zero-parameter network from an architecture description.
    pub fn from_arch(input_shape: Vec<usize>, arch: &[LayerSpec]) -> Result<Self> {
        let layers = arch
            .iter()
            .map(|spec| match *spec {
                LayerSpec::Dense { input, output } => Layer::Dense(Dense {
                    input,
                    output,
                    weights: vec![0.0; input * output],
                    bias: vec![0.0; output],
                }),
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Conv2d { in_channels, out_channels, kernel, padding } => {
                    Layer::Conv2d(Conv2d {
                        in_channels,
                        out_channels,
                        kernel,
                        padding,
                        weights: vec![0.0; out_channels * in_channels * kernel * kernel],
                        bias: vec![0.0; out_channels],
                    })
                }
                LayerSpec::Flatten => Layer::Flatten,
            })
            .collect();
        Self::new(input_shape, layers)
    }

    pub fn arch(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Flat view over all parameters, layer by layer, weights before bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.extend_from_slice(&d.weights);
                    out.extend_from_slice(&d.bias);
                }
                Layer::Conv2d(c) => {
                    out.extend_from_slice(&c.weights);
                    out.extend_from_slice(&c.bias);
                }
                _ => {}
            }
        }
        out
    }

    /// Overwrite all parameters from a flat buffer laid out as
    /// [`Network::params_flat`] produces it.
    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ShapeMismatch {
                context: "set_params_flat".into(),
                expected: format!("{} parameters", self.param_count()),
                got: format!("{}", params.len()),
            });
        }
        let mut at = 0;
        fn take<'a>(params: &'a [f64], at: &mut usize, n: usize) -> &'a [f64] {
            let s = &params[*at..*at + n];
            *at += n;
            s
        }
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    let n = d.weights.len();
                    d.weights.copy_from_slice(take(params, &mut at, n));
                    let n = d.bias.len();
                    d.bias.copy_from_slice(take(params, &mut at, n));
                }
                Layer::Conv2d(c) => {
                    let n = c.weights.len();
                    c.weights.copy_from_slice(take(params, &mut at, n));
                    let n = c.bias.len();
                    c.bias.copy_from_slice(take(params, &mut at, n));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != self.input_shape.len() + 1 || x.sample_shape() != self.input_shape {
            return Err(Error::ShapeMismatch {
                context: "network input".into(),
                expected: format!("[batch x {}]", shape_string(&self.input_shape)),
                got: shape_string(x.shape()),
            });
        }
        Ok(())
    }

    /// Logits for a batched input; parameters are never mutated.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_with_trace(x)?.1)
    }

    /// Forward pass that also records every intermediate activation for a
    /// later backward pass.
    pub fn forward_with_trace(&self, x: &Tensor) -> Result<(Trace, Tensor)> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let input = activations.last().expect("non-empty");
            let output = match layer {
                Layer::Dense(d) => d.forward(input),
                Layer::Relu => relu_forward(input),
                Layer::Conv2d(c) => c.forward(input),
                Layer::Flatten => flatten_forward(input),
            };
            activations.push(output);
        }
        let logits = activations.last().expect("non-empty").clone();
        Ok((Trace { activations }, logits))
    }

    /// Backpropagate `dlogits` through the traced pass.
    ///
    /// Returns the flat parameter gradient (aligned with
    /// [`Network::params_flat`]) and the gradient w.r.t. the input batch.
    pub fn backward(&self, trace: &Trace, dlogits: &Tensor) -> (Vec<f64>, Tensor) {
        self.backward_impl(trace, dlogits, true)
    }

    /// Input gradient only; skips parameter-gradient accumulation. This is
    /// the attack path, where parameters are frozen.
    pub fn backward_input(&self, trace: &Trace, dlogits: &Tensor) -> Tensor {
        self.backward_impl(trace, dlogits, false).1
    }

    fn backward_impl(
        &self,
        trace: &Trace,
        dlogits: &Tensor,
        with_params: bool,
    ) -> (Vec<f64>, Tensor) {
        debug_assert_eq!(trace.activations.len(), self.layers.len() + 1);
        let mut grad = dlogits.clone();
        // Parameter gradients are assembled back-to-front, then reversed.
        let mut param_chunks: Vec<Vec<f64>> = Vec::new();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.activations[i];
            grad = match layer {
                Layer::Dense(d) => {
                    let (dparams, dinput) = d.backward(input, &grad, with_params);
                    if with_params {
                        param_chunks.push(dparams);
                    }
                    dinput
                }
                Layer::Relu => relu_backward(input, &grad),
                Layer::Conv2d(c) => {
                    let (dparams, dinput) = c.backward(input, &grad, with_params);
                    if with_params {
                        param_chunks.push(dparams);
                    }
                    dinput
                }
                Layer::Flatten => {
                    Tensor::new(input.shape().to_vec(), grad.data().to_vec())
                        .expect("flatten preserves element count")
                }
            };
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for chunk in param_chunks.into_iter().rev() {
            flat.extend_from_slice(&chunk);
        }
        (flat, grad)
    }
}

/// One forward-backward pass of mean cross-entropy over a labeled batch.
///
/// Returns `(param_grads, input_grad, mean_loss)`; gradients are scaled by
/// `1 / batch`.
pub fn backward_ce(net: &Network, x: &Tensor, labels: &[usize]) -> Result<(Vec<f64>, Tensor, f64)> {
    let (trace, logits) = net.forward_with_trace(x)?;
    let (losses, mut dlogits) = cross_entropy_batch(&logits, labels)?;
    let scale = 1.0 / x.batch_len() as f64;
    for g in dlogits.data_mut() {
        *g *= scale;
    }
    let (param_grads, input_grad) = net.backward(&trace, &dlogits);
    let mean_loss = losses.iter().sum::<f64>() * scale;
    Ok((param_grads, input_grad, mean_loss))
}

impl Dense {
    fn he_uniform(input: usize, output: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Self {
        let limit = libm::sqrt(6.0 / input as f64);
        let weights = (0..input * output)
            .map(|_| rng::uniform(rng, -limit, limit))
            .collect();
        Self { input, output, weights, bias: vec![0.0; output] }
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let n = x.batch_len();
        let mut out = Tensor::zeros(vec![n, self.output]);
        for s in 0..n {
            let row = x.sample(s);
            let out_row = out.sample_mut(s);
            for o in 0..self.output {
                let w = &self.weights[o * self.input..(o + 1) * self.input];
                let mut acc = self.bias[o];
                for (xi, wi) in row.iter().zip(w) {
                    acc += xi * wi;
                }
                out_row[o] = acc;
            }
        }
        out
    }

    fn backward(&self, x: &Tensor, dy: &Tensor, with_params: bool) -> (Vec<f64>, Tensor) {
        let n = x.batch_len();
        let mut dx = Tensor::zeros(x.shape().to_vec());
        let mut dw = vec![0.0; if with_params { self.weights.len() } else { 0 }];
        let mut db = vec![0.0; if with_params { self.bias.len() } else { 0 }];
        for s in 0..n {
            let xrow = x.sample(s);
            let dyrow = dy.sample(s);
            let dxrow = dx.sample_mut(s);
            for o in 0..self.output {
                let g = dyrow[o];
                if g == 0.0 {
                    continue;
                }
                let w = &self.weights[o * self.input..(o + 1) * self.input];
                for i in 0..self.input {
                    dxrow[i] += g * w[i];
                }
                if with_params {
                    let dwrow = &mut dw[o * self.input..(o + 1) * self.input];
                    for i in 0..self.input {
                        dwrow[i] += g * xrow[i];
                    }
                    db[o] += g;
                }
            }
        }
        let mut dparams = dw;
        dparams.extend_from_slice(&db);
        (dparams, dx)
    }
}

impl Conv2d {
    fn he_uniform(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        padding: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let limit = libm::sqrt(6.0 / fan_in as f64);
        let weights = (0..out_channels * fan_in)
            .map(|_| rng::uniform(rng, -limit, limit))
            .collect();
        Self { in_channels, out_channels, kernel, padding, weights, bias: vec![0.0; out_channels] }
    }

    fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (h + 2 * self.padding - self.kernel + 1, w + 2 * self.padding - self.kernel + 1)
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        let n = x.batch_len();
        let (h, w) = (x.sample_shape()[1], x.sample_shape()[2]);
        let (oh, ow) = self.out_dims(h, w);
        let k = self.kernel;
        let pad = self.padding as isize;
        let mut out = Tensor::zeros(vec![n, self.out_channels, oh, ow]);
        for s in 0..n {
            let xs = x.sample(s);
            let os = out.sample_mut(s);
            for oc in 0..self.out_channels {
                for i in 0..oh {
                    for j in 0..ow {
                        let mut acc = self.bias[oc];
                        for ic in 0..self.in_channels {
                            for u in 0..k {
                                let xi = i as isize + u as isize - pad;
                                if xi < 0 || xi >= h as isize {
                                    continue;
                                }
                                for v in 0..k {
                                    let xj = j as isize + v as isize - pad;
                                    if xj < 0 || xj >= w as isize {
                                        continue;
                                    }
                                    let xval = xs[(ic * h + xi as usize) * w + xj as usize];
                                    let kval = self.weights[((oc * self.in_channels + ic) * k + u) * k + v];
                                    acc += xval * kval;
                                }
                            }
                        }
                        os[(oc * oh + i) * ow + j] = acc;
                    }
                }
            }
        }
        out
    }

    fn backward(&self, x: &Tensor, dy: &Tensor, with_params: bool) -> (Vec<f64>, Tensor) {
        let n = x.batch_len();
        let (h, w) = (x.sample_shape()[1], x.sample_shape()[2]);
        let (oh, ow) = self.out_dims(h, w);
        let k = self.kernel;
        let pad = self.padding as isize;
        let mut dx = Tensor::zeros(x.shape().to_vec());
        let mut dw = vec![0.0; if with_params { self.weights.len() } else { 0 }];
        let mut db = vec![0.0; if with_params { self.bias.len() } else { 0 }];
        for s in 0..n {
            let xs = x.sample(s);
            let dys = dy.sample(s);
            let dxs = dx.sample_mut(s);
            for oc in 0..self.out_channels {
                for i in 0..oh {
                    for j in 0..ow {
                        let g = dys[(oc * oh + i) * ow + j];
                        if g == 0.0 {
                            continue;
                        }
                        if with_params {
                            db[oc] += g;
                        }
                        for ic in 0..self.in_channels {
                            for u in 0..k {
                                let xi = i as isize + u as isize - pad;
                                if xi < 0 || xi >= h as isize {
                                    continue;
                                }
                                for v in 0..k {
                                    let xj = j as isize + v as isize - pad;
                                    if xj < 0 || xj >= w as isize {
                                        continue;
                                    }
                                    let xidx = (ic * h + xi as usize) * w + xj as usize;
                                    let kidx = ((oc * self.in_channels + ic) * k + u) * k + v;
                                    dxs[xidx] += g * self.weights[kidx];
                                    if with_params {
                                        dw[kidx] += g * xs[xidx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut dparams = dw;
        dparams.extend_from_slice(&db);
        (dparams, dx)
    }
}

fn relu_forward(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&xi, &gi)| if xi > 0.0 { gi } else { 0.0 })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

fn flatten_forward(x: &Tensor) -> Tensor {
    Tensor::new(vec![x.batch_len(), x.sample_len()], x.data().to_vec())
        .expect("flatten preserves element count")
}
