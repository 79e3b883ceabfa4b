use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ops::{self, ConvGeom};
use super::train::EpochLog;
use super::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::preprocess::{to_feature_matrix, FeatureOptions};
use crate::seed::{self, tag};
use crate::signal::{IqSnapshot, NUM_CLASSES, SNAPSHOT_LEN};

/// Values fed to the network per snapshot (128 bins x real/imaginary).
pub const INPUT_LEN: usize = 2 * SNAPSHOT_LEN;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Valid 2-D convolution with `maps` output feature maps and a `[kh, kw]` kernel.
    Conv { maps: usize, kernel: [usize; 2] },
    Dense { units: usize },
    Relu,
    /// Drop probability in `[0, 1)`.
    Dropout { rate: f64 },
    Flatten,
    Sigmoid,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// `[channels, height, width]`; the feature matrix is laid out as `[1, 2, 128]`.
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    #[serde(default)]
    pub features: FeatureOptions,
}

fn cnn(maps1: usize, kernel1: [usize; 2], maps2: usize, kernel2: [usize; 2], units: usize) -> NetworkConfig {
    use LayerSpec::*;
    NetworkConfig {
        input_shape: [1, 2, SNAPSHOT_LEN],
        layers: vec![
            Conv { maps: maps1, kernel: kernel1 },
            Relu,
            Conv { maps: maps2, kernel: kernel2 },
            Relu,
            Dropout { rate: 0.6 },
            Flatten,
            Dense { units },
            Relu,
            Dropout { rate: 0.6 },
            Dense { units: NUM_CLASSES },
            Sigmoid,
        ],
        features: FeatureOptions::default(),
    }
}

impl NetworkConfig {
    /// The reference architecture: 64 maps (1x3) -> 1024 maps (2x3) -> 128 -> 15.
    ///
    /// Panics if the shape chain does not produce a 126,976-wide flatten and
    /// 15 outputs.
    pub fn paper() -> Self {
        let c = cnn(64, [1, 3], 1024, [2, 3], 128);
        assert_eq!(c.flatten_size().expect("preset shape chain"), Some(126_976));
        assert_eq!(c.output_len().expect("preset shape chain"), NUM_CLASSES);
        c
    }

    /// Reduced network for desktop runs: 16 maps -> 128 maps -> 32 -> 15,
    /// without dropout. At 60% the 32-unit layer barely trains in 20 epochs.
    pub fn desk() -> Self {
        let mut c = cnn(16, [1, 3], 128, [2, 3], 32);
        c.layers.retain(|l| !matches!(l, LayerSpec::Dropout { .. }));
        c
    }

    /// Both kernels 1x3 as the layer captions read; the second convolution
    /// then keeps both rows and the flatten is twice as wide.
    pub fn strict_caption() -> Self {
        cnn(64, [1, 3], 1024, [1, 3], 128)
    }

    /// Activation shapes: the input followed by the output of each layer.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.iter().product::<usize>() != INPUT_LEN {
            return Err(Error::Shape(format!(
                "input shape {:?} must hold {INPUT_LEN} feature values",
                self.input_shape
            )));
        }
        if self.layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        let mut shapes = vec![self.input_shape.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let cur = shapes.last().unwrap();
            let next = match layer {
                LayerSpec::Conv { maps, kernel } => {
                    let [c, h, w] = cur[..] else {
                        return Err(Error::Shape(format!("layer {i}: conv needs a 3-D input, got {cur:?}")));
                    };
                    let g = ConvGeom::new([c, h, w], *maps, *kernel).map_err(|e| Error::Shape(format!("layer {i}: {e}")))?;
                    vec![g.out_c, g.out_h(), g.out_w()]
                }
                LayerSpec::Dense { units } => {
                    if cur.len() != 1 {
                        return Err(Error::Shape(format!("layer {i}: dense needs a flat input, got {cur:?}")));
                    }
                    if *units == 0 {
                        return Err(Error::Shape(format!("layer {i}: dense with zero units")));
                    }
                    vec![*units]
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(Error::InvalidConfig(format!("layer {i}: dropout rate {rate} outside [0, 1)")));
                    }
                    cur.clone()
                }
                LayerSpec::Flatten => vec![cur.iter().product()],
                LayerSpec::Relu | LayerSpec::Sigmoid | LayerSpec::Softmax => cur.clone(),
            };
            shapes.push(next);
        }
        Ok(shapes)
    }

    /// Width of the first flatten layer's output, if there is one.
    pub fn flatten_size(&self) -> Result<Option<usize>> {
        let shapes = self.shapes()?;
        Ok(self.layers.iter().position(|l| *l == LayerSpec::Flatten).map(|i| shapes[i + 1][0]))
    }

    pub fn output_len(&self) -> Result<usize> {
        Ok(self.shapes()?.last().unwrap().iter().product())
    }

    /// Shapes of the trainable tensors (weight then bias per conv/dense layer).
    pub fn param_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let shapes = self.shapes()?;
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerSpec::Conv { maps, kernel } => {
                    out.push(vec![*maps, shapes[i][0], kernel[0], kernel[1]]);
                    out.push(vec![*maps]);
                }
                LayerSpec::Dense { units } => {
                    out.push(vec![*units, shapes[i][0]]);
                    out.push(vec![*units]);
                }
                _ => {}
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Op {
    Conv { geom: ConvGeom, param: usize },
    Dense { param: usize },
    Relu,
    Dropout(f64),
    Flatten,
    Sigmoid,
    Softmax,
}

/// Output activation of a trainable network, fused with its loss in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Head {
    Sigmoid,
    Softmax,
}

/// Per-thread activation and gradient buffers.
pub struct Workspace<S> {
    acts: Vec<Vec<S>>,
    grads: Vec<Vec<S>>,
    masks: Vec<Vec<S>>,
    masked: Vec<bool>,
}

impl<S: Scalar> Workspace<S> {
    pub fn new(net: &Network<S>) -> Self {
        let acts: Vec<Vec<S>> = net.sizes.iter().map(|&n| vec![S::zero(); n]).collect();
        let masks = net
            .ops
            .iter()
            .zip(&net.sizes)
            .map(|(op, &n)| if matches!(op, Op::Dropout(_)) { vec![S::zero(); n] } else { Vec::new() })
            .collect();
        Workspace { grads: acts.clone(), acts, masks, masked: vec![false; net.ops.len()] }
    }

    fn load(&mut self, input: &[f32]) {
        for (a, &x) in self.acts[0].iter_mut().zip(input) {
            *a = S::of(x as f64);
        }
    }

    pub fn output(&self) -> &[S] {
        self.acts.last().unwrap()
    }
}

/// A network configuration with its weights and training history.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<S> {
    config: NetworkConfig,
    ops: Vec<Op>,
    sizes: Vec<usize>,
    params: Vec<Tensor<S>>,
    pub training_log: Vec<EpochLog>,
}

impl<S: Scalar> Network<S> {
    /// Builds the network with He-uniform weights for layers feeding a ReLU,
    /// Glorot-uniform for the others, and zero biases.
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        let shapes = config.param_shapes()?;
        let mut params = Vec::with_capacity(shapes.len());
        let mut p = 0;
        for (i, layer) in config.layers.iter().enumerate() {
            if !matches!(layer, LayerSpec::Conv { .. } | LayerSpec::Dense { .. }) {
                continue;
            }
            let w_shape = &shapes[p];
            let fan_in: usize = w_shape[1..].iter().product();
            let fan_out = w_shape[0] * w_shape[2..].iter().product::<usize>();
            let feeds_relu = config.layers[i + 1..]
                .iter()
                .find(|l| !matches!(l, LayerSpec::Dropout { .. }))
                .is_some_and(|l| *l == LayerSpec::Relu);
            let limit = if feeds_relu {
                (6.0 / fan_in as f64).sqrt()
            } else {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            };
            let mut rng = seed::rng(seed::derive(seed, &[tag::INIT, i as u64]));
            let n: usize = w_shape.iter().product();
            let w = (0..n).map(|_| S::of(rng.random_range(-limit..limit))).collect();
            params.push(Tensor::new(w_shape.clone(), w)?);
            params.push(Tensor::zeros(&shapes[p + 1]));
            p += 2;
        }
        Self::from_params(config, params, Vec::new())
    }

    pub fn from_params(config: NetworkConfig, params: Vec<Tensor<S>>, training_log: Vec<EpochLog>) -> Result<Self> {
        let shapes = config.shapes()?;
        let expected = config.param_shapes()?;
        if params.len() != expected.len() {
            return Err(Error::Shape(format!("config needs {} weight tensors, got {}", expected.len(), params.len())));
        }
        for (i, (t, s)) in params.iter().zip(&expected).enumerate() {
            if t.shape() != &s[..] {
                return Err(Error::Shape(format!("weight tensor {i} has shape {:?}, config needs {s:?}", t.shape())));
            }
        }
        let mut ops = Vec::with_capacity(config.layers.len());
        let mut p = 0;
        for (i, layer) in config.layers.iter().enumerate() {
            ops.push(match layer {
                LayerSpec::Conv { maps, kernel } => {
                    let [c, h, w] = shapes[i][..] else { unreachable!("checked by shapes()") };
                    p += 2;
                    Op::Conv { geom: ConvGeom::new([c, h, w], *maps, *kernel)?, param: p - 2 }
                }
                LayerSpec::Dense { .. } => {
                    p += 2;
                    Op::Dense { param: p - 2 }
                }
                LayerSpec::Relu => Op::Relu,
                LayerSpec::Dropout { rate } => Op::Dropout(*rate),
                LayerSpec::Flatten => Op::Flatten,
                LayerSpec::Sigmoid => Op::Sigmoid,
                LayerSpec::Softmax => Op::Softmax,
            });
        }
        let sizes = shapes.iter().map(|s| s.iter().product()).collect();
        Ok(Network { config, ops, sizes, params, training_log })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<S>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<S>] {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub(crate) fn head(&self) -> Result<Head> {
        match self.ops.last() {
            Some(Op::Sigmoid) => Ok(Head::Sigmoid),
            Some(Op::Softmax) => Ok(Head::Softmax),
            _ => Err(Error::InvalidConfig("training needs a sigmoid or softmax output layer".into())),
        }
    }

    /// Runs layers `0..upto`. With `dropout_seed`, dropout layers draw fresh
    /// masks; without it they are the identity.
    fn forward_range(&self, ws: &mut Workspace<S>, upto: usize, dropout_seed: Option<u64>) -> Result<()> {
        for l in 0..upto {
            let (lo, hi) = ws.acts.split_at_mut(l + 1);
            let (x, y) = (&lo[l][..], &mut hi[0][..]);
            match &self.ops[l] {
                Op::Conv { geom, param } => {
                    ops::conv2d_forward(geom, x, self.params[*param].data(), self.params[param + 1].data(), y)?
                }
                Op::Dense { param } => ops::dense_forward(x, self.params[*param].data(), self.params[param + 1].data(), y)?,
                Op::Relu => ops::relu_forward(x, y)?,
                Op::Dropout(rate) => match dropout_seed {
                    Some(s) if *rate > 0.0 => {
                        ops::fill_dropout_mask(&mut ws.masks[l], *rate, seed::derive(s, &[l as u64]))?;
                        ops::apply_mask(x, &ws.masks[l], y)?;
                        ws.masked[l] = true;
                    }
                    _ => {
                        y.copy_from_slice(x);
                        ws.masked[l] = false;
                    }
                },
                Op::Flatten => y.copy_from_slice(x),
                Op::Sigmoid => ops::sigmoid_forward(x, y)?,
                Op::Softmax => ops::softmax_forward(x, y)?,
            }
        }
        Ok(())
    }

    /// Back-propagates the gradient held for activation `upto` down to the
    /// input, accumulating parameter gradients into `grads`.
    fn backward_range(&self, ws: &mut Workspace<S>, upto: usize, grads: &mut [Tensor<S>]) -> Result<()> {
        for l in (0..upto).rev() {
            let (glo, ghi) = ws.grads.split_at_mut(l + 1);
            let dy = &ghi[0][..];
            let dx = if l == 0 { None } else { Some(&mut glo[l][..]) };
            let (x, y) = (&ws.acts[l][..], &ws.acts[l + 1][..]);
            match &self.ops[l] {
                Op::Conv { geom, param } => {
                    let (gw, gb) = grads[*param..].split_at_mut(1);
                    ops::conv2d_backward(geom, x, self.params[*param].data(), dy, dx, gw[0].data_mut(), gb[0].data_mut())?
                }
                Op::Dense { param } => {
                    let (gw, gb) = grads[*param..].split_at_mut(1);
                    ops::dense_backward(x, self.params[*param].data(), dy, dx, gw[0].data_mut(), gb[0].data_mut())?
                }
                op => {
                    let Some(dx) = dx else { continue };
                    match op {
                        Op::Relu => ops::relu_backward(y, dy, dx)?,
                        Op::Dropout(_) if ws.masked[l] => ops::apply_mask(dy, &ws.masks[l], dx)?,
                        Op::Dropout(_) | Op::Flatten => dx.copy_from_slice(dy),
                        Op::Sigmoid => ops::sigmoid_backward(y, dy, dx)?,
                        Op::Softmax => ops::softmax_backward(y, dy, dx)?,
                        Op::Conv { .. } | Op::Dense { .. } => unreachable!(),
                    }
                }
            }
        }
        Ok(())
    }

    pub fn zero_grads(&self) -> Vec<Tensor<S>> {
        self.params.iter().map(|t| Tensor::zeros(t.shape())).collect()
    }

    /// One training sample: forward with dropout, fused head loss, backward.
    /// Adds the parameter gradients into `grads` and returns the loss.
    pub(crate) fn accumulate(
        &self,
        ws: &mut Workspace<S>,
        input: &[f32],
        target: &[S],
        dropout_seed: Option<u64>,
        grads: &mut [Tensor<S>],
    ) -> Result<f64> {
        let head = self.head()?;
        let body = self.ops.len() - 1;
        ws.load(input);
        self.forward_range(ws, body, dropout_seed)?;
        let loss = match head {
            Head::Sigmoid => ops::sigmoid_bce_with_logits(&ws.acts[body], target, &mut ws.grads[body])?,
            Head::Softmax => ops::softmax_cce_with_logits(&ws.acts[body], target, &mut ws.grads[body])?,
        };
        self.backward_range(ws, body, grads)?;
        Ok(loss)
    }

    /// Loss and parameter gradients of one sample through every layer,
    /// including the output activation, with `dloss` giving dL/d(output).
    /// Used for gradient checking of the unfused path.
    pub fn output_gradients(
        &self,
        input: &[f32],
        dropout_seed: Option<u64>,
        dloss: impl FnOnce(&[S], &mut [S]),
    ) -> Result<Vec<Tensor<S>>> {
        let mut ws = Workspace::new(self);
        let mut grads = self.zero_grads();
        ws.load(input);
        let n = self.ops.len();
        self.forward_range(&mut ws, n, dropout_seed)?;
        let (acts, grads_buf) = (&ws.acts, &mut ws.grads);
        dloss(&acts[n], &mut grads_buf[n]);
        self.backward_range(&mut ws, n, &mut grads)?;
        Ok(grads)
    }

    /// Forward pass in evaluation mode; `output` receives the final activation.
    pub fn forward_with(&self, ws: &mut Workspace<S>, input: &[f32], dropout_seed: Option<u64>) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::Shape(format!("input has {} values, network expects {}", input.len(), self.input_len())));
        }
        ws.load(input);
        self.forward_range(ws, self.ops.len(), dropout_seed)
    }

    pub fn predict_input(&self, input: &[f32]) -> Result<Vec<f64>> {
        let mut ws = Workspace::new(self);
        self.forward_with(&mut ws, input, None)?;
        Ok(ws.output().iter().map(|v| v.to64()).collect())
    }

    /// Dropout-free scores for one snapshot.
    pub fn predict(&self, snapshot: &IqSnapshot) -> Result<Vec<f64>> {
        let features: Vec<f32> =
            to_feature_matrix(snapshot, self.config.features).to_network_input().iter().map(|&v| v as f32).collect();
        self.predict_input(&features)
    }

    /// Scores for `inputs.len() / input_len` samples, row-major, computed in parallel.
    pub fn predict_batch(&self, inputs: &[f32]) -> Result<Vec<f64>> {
        let n_in = self.input_len();
        if inputs.len() % n_in != 0 {
            return Err(Error::Shape(format!("batch of {} values is not a multiple of {n_in}", inputs.len())));
        }
        let rows: Vec<Vec<f64>> = inputs
            .par_chunks(n_in)
            .map_init(
                || Workspace::new(self),
                |ws, x| {
                    self.forward_with(ws, x, None).map(|_| ws.output().iter().map(|v| v.to64()).collect::<Vec<f64>>())
                },
            )
            .collect::<Result<_>>()?;
        Ok(rows.concat())
    }
}
