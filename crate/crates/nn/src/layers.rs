//! Layer kinds with hand-written forward and backward passes.
//!
//! Activations are channels-last: dense layers see `[B, features]`, image
//! layers see `[B, H, W, C]`.

use ndarray::{Array1, Array2, ArrayD, Axis, Ix2, IxDyn, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Serializable description of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { units: usize },
    Relu,
    Dropout { rate: f64 },
    Conv2d { filters: usize, kernel: usize },
    BatchNorm,
    MaxPool { size: usize },
    Sigmoid,
    Flatten,
    /// Block-major feature vector `[B, C·side²]` to image `[B, side, side, C]`.
    ToImage { side: usize, channels: usize },
}

pub(crate) const BN_EPS: f64 = 1e-3;
pub(crate) const BN_MOMENTUM: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    /// `[in, out]`.
    pub weights: Array2<F>,
    pub bias: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<F> {
    /// `[k·k·C_in, filters]`, row index `(ki·k + kj)·C_in + c`.
    pub kernel: Array2<F>,
    pub bias: Array1<F>,
    pub size: usize,
    pub in_channels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<F> {
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
    pub running_mean: Array1<F>,
    pub running_var: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<F> {
    Dense(Dense<F>),
    Conv2d(Conv2d<F>),
    BatchNorm(BatchNorm<F>),
    Relu,
    Dropout { rate: f64 },
    MaxPool { size: usize },
    Sigmoid,
    Flatten,
    ToImage { side: usize, channels: usize },
}

/// What backward needs from the matching forward call.
#[derive(Debug, Clone)]
pub enum LayerCache<F> {
    Dense { input: Array2<F> },
    Conv2d { patches: Array2<F>, in_shape: Vec<usize> },
    BatchNorm { xhat: Array2<F>, inv_std: Array1<F>, shape: Vec<usize> },
    /// Running statistics are used in eval mode, so the map is affine in x.
    BatchNormEval { xhat: Array2<F>, inv_std: Array1<F>, shape: Vec<usize> },
    Relu { output: ArrayD<F> },
    Dropout { mask: ArrayD<F> },
    MaxPool { argmax: Vec<usize>, in_shape: Vec<usize> },
    Sigmoid { output: ArrayD<F> },
    Reshape { in_shape: Vec<usize> },
    Identity,
}

/// Batch statistics a train-mode batchnorm produced, for the running update.
#[derive(Debug, Clone)]
pub struct BatchStats<F> {
    pub mean: Array1<F>,
    pub var: Array1<F>,
}

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
fn fan_in_uniform<F: Scalar>(shape: (usize, usize), fan_in: usize, rng: &mut ChaCha8Rng) -> Array2<F> {
    let limit = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_simple_fn(shape, || F::from_f64(rng.random_range(-limit..limit)).unwrap())
}

fn fan_in_bias<F: Scalar>(len: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Array1<F> {
    fan_in_uniform((1, len), fan_in, rng).remove_axis(ndarray::Axis(0))
}

impl<F: Scalar> Dense<F> {
    pub fn init(inputs: usize, units: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weights: fan_in_uniform((inputs, units), inputs, rng),
            bias: fan_in_bias(units, inputs, rng),
        }
    }

    pub fn zeros(inputs: usize, units: usize) -> Self {
        Self {
            weights: Array2::zeros((inputs, units)),
            bias: Array1::zeros(units),
        }
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        let mut y = x.dot(&self.weights);
        y += &self.bias;
        y
    }
}

impl<F: Scalar> Conv2d<F> {
    pub fn init(in_channels: usize, filters: usize, size: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = size * size * in_channels;
        Self {
            kernel: fan_in_uniform((fan_in, filters), fan_in, rng),
            bias: fan_in_bias(filters, fan_in, rng),
            size,
            in_channels,
        }
    }

    fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h + 1 - self.size, w + 1 - self.size)
    }

    /// Valid-padding, stride-1 patch matrix `[B·OH·OW, k·k·C]`.
    fn im2col(&self, x: &ArrayD<F>) -> Array2<F> {
        let (b, h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let k = self.size;
        let (oh, ow) = self.out_hw(h, w);
        let mut patches = Array2::zeros((b * oh * ow, k * k * c));
        for bi in 0..b {
            for i in 0..oh {
                for j in 0..ow {
                    let row = (bi * oh + i) * ow + j;
                    let mut col = 0;
                    for ki in 0..k {
                        for kj in 0..k {
                            for ch in 0..c {
                                patches[[row, col]] = x[[bi, i + ki, j + kj, ch]];
                                col += 1;
                            }
                        }
                    }
                }
            }
        }
        patches
    }

    fn col2im(&self, dpatches: &Array2<F>, in_shape: &[usize]) -> ArrayD<F> {
        let (b, h, w, c) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
        let k = self.size;
        let (oh, ow) = self.out_hw(h, w);
        let mut dx = ArrayD::zeros(IxDyn(in_shape));
        for bi in 0..b {
            for i in 0..oh {
                for j in 0..ow {
                    let row = (bi * oh + i) * ow + j;
                    let mut col = 0;
                    for ki in 0..k {
                        for kj in 0..k {
                            for ch in 0..c {
                                dx[[bi, i + ki, j + kj, ch]] += dpatches[[row, col]];
                                col += 1;
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

impl<F: Scalar> BatchNorm<F> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
        }
    }

    /// `running ← m·running + (1 − m)·batch`.
    pub fn update_running(&mut self, stats: &BatchStats<F>) {
        let m = F::from_f64(BN_MOMENTUM).unwrap();
        let one_m = F::one() - m;
        Zip::from(&mut self.running_mean)
            .and(&stats.mean)
            .for_each(|r, &b| *r = m * *r + one_m * b);
        Zip::from(&mut self.running_var)
            .and(&stats.var)
            .for_each(|r, &b| *r = m * *r + one_m * b);
    }
}

fn to_2d<F: Scalar>(x: &ArrayD<F>, what: &str) -> Result<Array2<F>> {
    x.view()
        .into_dimensionality::<Ix2>()
        .map(|v| v.to_owned())
        .map_err(|_| NnError::Shape(format!("{what} expects a 2-D batch, got {:?}", x.shape())))
}

/// Trailing-axis view `[N, C]` of a channels-last tensor.
fn as_rows<F: Scalar>(x: &ArrayD<F>) -> Array2<F> {
    let c = *x.shape().last().unwrap();
    let n = x.len() / c;
    x.as_standard_layout().into_owned().into_shape_with_order((n, c)).unwrap()
}

impl<F: Scalar> Layer<F> {
    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn params(&self) -> Vec<ndarray::ArrayViewD<'_, F>> {
        match self {
            Layer::Dense(d) => vec![d.weights.view().into_dyn(), d.bias.view().into_dyn()],
            Layer::Conv2d(c) => vec![c.kernel.view().into_dyn(), c.bias.view().into_dyn()],
            Layer::BatchNorm(b) => vec![b.gamma.view().into_dyn(), b.beta.view().into_dyn()],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<ndarray::ArrayViewMutD<'_, F>> {
        match self {
            Layer::Dense(d) => vec![d.weights.view_mut().into_dyn(), d.bias.view_mut().into_dyn()],
            Layer::Conv2d(c) => vec![c.kernel.view_mut().into_dyn(), c.bias.view_mut().into_dyn()],
            Layer::BatchNorm(b) => vec![b.gamma.view_mut().into_dyn(), b.beta.view_mut().into_dyn()],
            _ => vec![],
        }
    }

    /// Output shape excluding the batch axis.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = || NnError::Shape(format!("layer {:?} cannot take input {:?}", self.kind(), input));
        Ok(match self {
            Layer::Dense(d) => {
                if input != [d.weights.nrows()] {
                    return Err(bad());
                }
                vec![d.weights.ncols()]
            }
            Layer::Conv2d(c) => {
                if input.len() != 3 || input[2] != c.in_channels || input[0] < c.size || input[1] < c.size {
                    return Err(bad());
                }
                let (oh, ow) = c.out_hw(input[0], input[1]);
                vec![oh, ow, c.bias.len()]
            }
            Layer::BatchNorm(b) => {
                if input.last() != Some(&b.gamma.len()) {
                    return Err(bad());
                }
                input.to_vec()
            }
            Layer::MaxPool { size } => {
                if input.len() != 3 || input[0] % size != 0 || input[1] % size != 0 {
                    return Err(bad());
                }
                vec![input[0] / size, input[1] / size, input[2]]
            }
            Layer::Flatten => vec![input.iter().product()],
            Layer::ToImage { side, channels } => {
                if input != [side * side * channels] {
                    return Err(bad());
                }
                vec![*side, *side, *channels]
            }
            Layer::Relu | Layer::Dropout { .. } | Layer::Sigmoid => input.to_vec(),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu => "relu",
            Layer::Dropout { .. } => "dropout",
            Layer::MaxPool { .. } => "maxpool",
            Layer::Sigmoid => "sigmoid",
            Layer::Flatten => "flatten",
            Layer::ToImage { .. } => "to_image",
        }
    }

    pub fn forward(
        &self,
        x: ArrayD<F>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<(ArrayD<F>, LayerCache<F>, Option<BatchStats<F>>)> {
        match self {
            Layer::Dense(d) => {
                let x2 = to_2d(&x, "dense")?;
                if x2.ncols() != d.weights.nrows() {
                    return Err(NnError::Shape(format!(
                        "dense expects {} inputs, got {}",
                        d.weights.nrows(),
                        x2.ncols()
                    )));
                }
                let y = d.forward(&x2);
                Ok((y.into_dyn(), LayerCache::Dense { input: x2 }, None))
            }
            Layer::Conv2d(c) => {
                let s = x.shape().to_vec();
                if s.len() != 4 || s[3] != c.in_channels || s[1] < c.size || s[2] < c.size {
                    return Err(NnError::Shape(format!("conv2d cannot take {:?}", s)));
                }
                let (oh, ow) = c.out_hw(s[1], s[2]);
                let patches = c.im2col(&x);
                let mut y = patches.dot(&c.kernel);
                y += &c.bias;
                let y = y
                    .into_shape_with_order(IxDyn(&[s[0], oh, ow, c.bias.len()]))
                    .expect("conv output reshape");
                Ok((y, LayerCache::Conv2d { patches, in_shape: s }, None))
            }
            Layer::BatchNorm(bn) => {
                let shape = x.shape().to_vec();
                let rows = as_rows(&x);
                let n = F::from_usize(rows.nrows()).unwrap();
                let eps = F::from_f64(BN_EPS).unwrap();
                match mode {
                    Mode::Train => {
                        let mean = rows.sum_axis(Axis(0)) / n;
                        let centered = &rows - &mean;
                        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
                        let inv_std = var.mapv(|v| F::one() / (v + eps).sqrt());
                        let xhat = &centered * &inv_std;
                        let y = &xhat * &bn.gamma + &bn.beta;
                        let y = y.into_shape_with_order(IxDyn(&shape)).unwrap();
                        Ok((
                            y,
                            LayerCache::BatchNorm { xhat, inv_std, shape },
                            Some(BatchStats { mean, var }),
                        ))
                    }
                    Mode::Eval => {
                        let inv_std = bn.running_var.mapv(|v| F::one() / (v + eps).sqrt());
                        let xhat = (&rows - &bn.running_mean) * &inv_std;
                        let y = &xhat * &bn.gamma + &bn.beta;
                        let y = y.into_shape_with_order(IxDyn(&shape)).unwrap();
                        Ok((y, LayerCache::BatchNormEval { xhat, inv_std, shape }, None))
                    }
                }
            }
            Layer::Relu => {
                let y = x.mapv_into(|v| if v > F::zero() { v } else { F::zero() });
                Ok((y.clone(), LayerCache::Relu { output: y }, None))
            }
            Layer::Dropout { rate } => match mode {
                Mode::Eval => Ok((x, LayerCache::Identity, None)),
                Mode::Train => {
                    let keep = 1.0 - rate;
                    let scale = F::from_f64(1.0 / keep).unwrap();
                    let mask = ArrayD::from_shape_simple_fn(x.raw_dim(), || {
                        if rng.random::<f64>() < keep {
                            scale
                        } else {
                            F::zero()
                        }
                    });
                    let y = x * &mask;
                    Ok((y, LayerCache::Dropout { mask }, None))
                }
            },
            Layer::MaxPool { size } => {
                let s = x.shape().to_vec();
                if s.len() != 4 {
                    return Err(NnError::Shape(format!("maxpool cannot take {:?}", s)));
                }
                let (b, h, w, c) = (s[0], s[1], s[2], s[3]);
                let (oh, ow) = (h / size, w / size);
                let mut y = ArrayD::zeros(IxDyn(&[b, oh, ow, c]));
                let mut argmax = Vec::with_capacity(b * oh * ow * c);
                let flat = x.as_standard_layout();
                let flat = flat.as_slice().unwrap();
                for bi in 0..b {
                    for i in 0..oh {
                        for j in 0..ow {
                            for ch in 0..c {
                                let mut best = usize::MAX;
                                for di in 0..*size {
                                    for dj in 0..*size {
                                        let idx = ((bi * h + i * size + di) * w + j * size + dj) * c + ch;
                                        if best == usize::MAX || flat[idx] > flat[best] {
                                            best = idx;
                                        }
                                    }
                                }
                                y[[bi, i, j, ch]] = flat[best];
                                argmax.push(best);
                            }
                        }
                    }
                }
                Ok((y, LayerCache::MaxPool { argmax, in_shape: s }, None))
            }
            Layer::Sigmoid => {
                let y = x.mapv_into(sigmoid);
                Ok((y.clone(), LayerCache::Sigmoid { output: y }, None))
            }
            Layer::Flatten => {
                let s = x.shape().to_vec();
                let n: usize = s[1..].iter().product();
                let y = x
                    .as_standard_layout()
                    .into_owned()
                    .into_shape_with_order(IxDyn(&[s[0], n]))
                    .unwrap();
                Ok((y, LayerCache::Reshape { in_shape: s }, None))
            }
            Layer::ToImage { side, channels } => {
                let s = x.shape().to_vec();
                let block = side * side;
                if s.len() != 2 || s[1] != block * channels {
                    return Err(NnError::Shape(format!(
                        "to_image expects [B, {}], got {:?}",
                        block * channels,
                        s
                    )));
                }
                let y = ArrayD::from_shape_fn(IxDyn(&[s[0], *side, *side, *channels]), |ix| {
                    x[[ix[0], ix[3] * block + ix[1] * side + ix[2]]]
                });
                Ok((y, LayerCache::Reshape { in_shape: s }, None))
            }
        }
    }

    /// Returns the input gradient and one gradient per parameter tensor.
    pub fn backward(&self, cache: &LayerCache<F>, dy: ArrayD<F>) -> Result<(ArrayD<F>, Vec<ArrayD<F>>)> {
        let stale = || NnError::StaleCache(format!("{} got a cache from another layer kind", self.kind()));
        match (self, cache) {
            (Layer::Dense(d), LayerCache::Dense { input }) => {
                let dy = to_2d(&dy, "dense backward")?;
                let dw = input.t().dot(&dy);
                let db = dy.sum_axis(Axis(0));
                let dx = dy.dot(&d.weights.t());
                Ok((dx.into_dyn(), vec![dw.into_dyn(), db.into_dyn()]))
            }
            (Layer::Conv2d(c), LayerCache::Conv2d { patches, in_shape }) => {
                let f = c.bias.len();
                let rows = dy.len() / f;
                let dy2 = dy
                    .as_standard_layout()
                    .into_owned()
                    .into_shape_with_order((rows, f))
                    .map_err(|e| NnError::Shape(e.to_string()))?;
                let dk = patches.t().dot(&dy2);
                let db = dy2.sum_axis(Axis(0));
                let dpatches = dy2.dot(&c.kernel.t());
                let dx = c.col2im(&dpatches, in_shape);
                Ok((dx, vec![dk.into_dyn(), db.into_dyn()]))
            }
            (Layer::BatchNorm(bn), LayerCache::BatchNorm { xhat, inv_std, shape }) => {
                let dy2 = as_rows(&dy);
                let n = F::from_usize(dy2.nrows()).unwrap();
                let dgamma = (&dy2 * xhat).sum_axis(Axis(0));
                let dbeta = dy2.sum_axis(Axis(0));
                let dxhat = &dy2 * &bn.gamma;
                let sum_dxhat = dxhat.sum_axis(Axis(0));
                let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
                let dx = (dxhat.mapv(|v| v * n) - &sum_dxhat - xhat * &sum_dxhat_xhat) * inv_std / n;
                let dx = dx.into_shape_with_order(IxDyn(shape)).unwrap();
                Ok((dx, vec![dgamma.into_dyn(), dbeta.into_dyn()]))
            }
            (Layer::BatchNorm(bn), LayerCache::BatchNormEval { xhat, inv_std, shape }) => {
                let dy2 = as_rows(&dy);
                let dgamma = (&dy2 * xhat).sum_axis(Axis(0));
                let dbeta = dy2.sum_axis(Axis(0));
                let dx = &dy2 * inv_std * &bn.gamma;
                let dx = dx.into_shape_with_order(IxDyn(shape)).unwrap();
                Ok((dx, vec![dgamma.into_dyn(), dbeta.into_dyn()]))
            }
            (Layer::Relu, LayerCache::Relu { output }) => {
                let mut dx = dy;
                Zip::from(&mut dx).and(output).for_each(|g, &o| {
                    if o <= F::zero() {
                        *g = F::zero()
                    }
                });
                Ok((dx, vec![]))
            }
            (Layer::Dropout { .. }, LayerCache::Dropout { mask }) => Ok((dy * mask, vec![])),
            (Layer::Dropout { .. }, LayerCache::Identity) => Ok((dy, vec![])),
            (Layer::MaxPool { .. }, LayerCache::MaxPool { argmax, in_shape }) => {
                let mut dx = vec![F::zero(); in_shape.iter().product()];
                let dyc = dy.as_standard_layout();
                for (g, &idx) in dyc.iter().zip(argmax) {
                    dx[idx] += *g;
                }
                Ok((ArrayD::from_shape_vec(IxDyn(in_shape), dx).unwrap(), vec![]))
            }
            (Layer::Sigmoid, LayerCache::Sigmoid { output }) => {
                let mut dx = dy;
                Zip::from(&mut dx)
                    .and(output)
                    .for_each(|g, &o| *g = *g * o * (F::one() - o));
                Ok((dx, vec![]))
            }
            (Layer::Flatten, LayerCache::Reshape { in_shape }) => Ok((
                dy.as_standard_layout()
                    .into_owned()
                    .into_shape_with_order(IxDyn(in_shape))
                    .unwrap(),
                vec![],
            )),
            (Layer::ToImage { side, channels }, LayerCache::Reshape { in_shape }) => {
                let block = side * side;
                let mut dx = ArrayD::zeros(IxDyn(in_shape));
                for b in 0..in_shape[0] {
                    for ch in 0..*channels {
                        for r in 0..*side {
                            for c in 0..*side {
                                dx[[b, ch * block + r * side + c]] = dy[[b, r, c, ch]];
                            }
                        }
                    }
                }
                Ok((dx, vec![]))
            }
            _ => Err(stale()),
        }
    }
}

pub fn sigmoid<F: Scalar>(v: F) -> F {
    if v >= F::zero() {
        F::one() / (F::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (F::one() + e)
    }
}
