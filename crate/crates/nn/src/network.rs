//! Trunk plus three sigmoid heads (classification, angle 1, angle 2).

use ndarray::{Array1, Array2, ArrayD, ArrayView2, Ix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::layers::{sigmoid, BatchNorm, BatchStats, Conv2d, Dense, Layer, LayerCache, LayerSpec, Mode};
use crate::Scalar;

pub const NUM_HEADS: usize = 3;
pub const FEATURE_DIM: usize = 128;
pub const FEATURE_CHANNELS: usize = 8;
pub const DROPOUT_RATE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub input_dim: usize,
    pub trunk: Vec<LayerSpec>,
}

fn dense_block(units: usize) -> [LayerSpec; 3] {
    [
        LayerSpec::Dense { units },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: DROPOUT_RATE },
    ]
}

impl ModelSpec {
    /// 128 → 1024 → 2048 → 1024 → 512, ReLU and dropout after each.
    pub fn fc() -> Self {
        let trunk = [1024, 2048, 1024, 512].into_iter().flat_map(dense_block).collect();
        Self {
            name: "fc".into(),
            input_dim: FEATURE_DIM,
            trunk,
        }
    }

    /// 3×3 conv (512 filters) on the (4, 4, 8) feature image, batchnorm,
    /// ReLU, 2×2 max pool, then 1024 → 1024 → 512 dense.
    pub fn cnn() -> Self {
        let mut trunk = vec![
            LayerSpec::ToImage {
                side: 4,
                channels: FEATURE_CHANNELS,
            },
            LayerSpec::Conv2d {
                filters: 512,
                kernel: 3,
            },
            LayerSpec::BatchNorm,
            LayerSpec::Relu,
            LayerSpec::MaxPool { size: 2 },
            LayerSpec::Flatten,
        ];
        trunk.extend([1024, 1024, 512].into_iter().flat_map(dense_block));
        Self {
            name: "cnn".into(),
            input_dim: FEATURE_DIM,
            trunk,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "fc" => Ok(Self::fc()),
            "cnn" => Ok(Self::cnn()),
            other => Err(NnError::Config(format!("unknown architecture '{other}' (expected fc or cnn)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for l in &self.trunk {
            match *l {
                LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                    return Err(NnError::Config(format!("dropout rate {rate} outside [0, 1)")))
                }
                LayerSpec::Dense { units: 0 } | LayerSpec::Conv2d { filters: 0, .. } => {
                    return Err(NnError::Config("zero-width layer".into()))
                }
                LayerSpec::Conv2d { kernel: 0, .. } | LayerSpec::MaxPool { size: 0 } => {
                    return Err(NnError::Config("zero-size window".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<F> {
    pub spec: ModelSpec,
    pub layers: Vec<Layer<F>>,
    pub head: Dense<F>,
}

/// Result of a forward call: head probabilities plus everything backward needs.
#[derive(Debug, Clone)]
pub struct ForwardPass<F> {
    /// `[B, 3]` sigmoid outputs `(p, ẑ1, ẑ2)`.
    pub outputs: Array2<F>,
    /// Per-layer output shapes, batch axis included.
    pub shapes: Vec<Vec<usize>>,
    /// Train-mode batchnorm statistics keyed by layer index.
    pub batch_stats: Vec<(usize, BatchStats<F>)>,
    caches: Vec<LayerCache<F>>,
    head_input: Array2<F>,
}

enum Init<'a> {
    Random(&'a mut ChaCha8Rng),
    Zeros,
}

impl<F: Scalar> Network<F> {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(spec, Init::Random(&mut rng))
    }

    /// Every weight and bias zero; batchnorm at identity.
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        Self::build(spec, Init::Zeros)
    }

    fn build(spec: ModelSpec, mut init: Init<'_>) -> Result<Self> {
        spec.validate()?;
        let mut shape = vec![spec.input_dim];
        let mut layers = Vec::with_capacity(spec.trunk.len());
        for ls in &spec.trunk {
            let layer = match *ls {
                LayerSpec::Dense { units } => {
                    if shape.len() != 1 {
                        return Err(NnError::Config(format!("dense layer after non-flat shape {shape:?}")));
                    }
                    Layer::Dense(match &mut init {
                        Init::Random(rng) => Dense::init(shape[0], units, rng),
                        Init::Zeros => Dense::zeros(shape[0], units),
                    })
                }
                LayerSpec::Conv2d { filters, kernel } => {
                    if shape.len() != 3 {
                        return Err(NnError::Config(format!("conv2d needs an image, got {shape:?}")));
                    }
                    let mut c = match &mut init {
                        Init::Random(rng) => Conv2d::init(shape[2], filters, kernel, rng),
                        Init::Zeros => Conv2d::init(shape[2], filters, kernel, &mut ChaCha8Rng::seed_from_u64(0)),
                    };
                    if matches!(init, Init::Zeros) {
                        c.kernel.fill(F::zero());
                    }
                    Layer::Conv2d(c)
                }
                LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm::new(*shape.last().unwrap())),
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Dropout { rate } => Layer::Dropout { rate },
                LayerSpec::MaxPool { size } => Layer::MaxPool { size },
                LayerSpec::Sigmoid => Layer::Sigmoid,
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::ToImage { side, channels } => Layer::ToImage { side, channels },
            };
            shape = layer
                .output_shape(&shape)
                .map_err(|e| NnError::Config(e.to_string()))?;
            layers.push(layer);
        }
        if shape.len() != 1 {
            return Err(NnError::Config(format!("trunk must end flat, ends at {shape:?}")));
        }
        let head = match init {
            Init::Random(rng) => Dense::init(shape[0], NUM_HEADS, rng),
            Init::Zeros => Dense::zeros(shape[0], NUM_HEADS),
        };
        Ok(Self { spec, layers, head })
    }

    /// Trunk output shapes (batch axis excluded), in layer order.
    pub fn trunk_shapes(&self) -> Vec<Vec<usize>> {
        let mut shape = vec![self.spec.input_dim];
        self.layers
            .iter()
            .map(|l| {
                shape = l.output_shape(&shape).expect("validated at build");
                shape.clone()
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum::<usize>() + self.head.weights.len() + self.head.bias.len()
    }

    /// Batchnorm running statistics, which a checkpoint stores but Adam never touches.
    pub fn non_trainable_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::BatchNorm(b) => b.running_mean.len() + b.running_var.len(),
                _ => 0,
            })
            .sum()
    }

    pub fn params(&self) -> Vec<ndarray::ArrayViewD<'_, F>> {
        let mut out: Vec<_> = self.layers.iter().flat_map(|l| l.params()).collect();
        out.push(self.head.weights.view().into_dyn());
        out.push(self.head.bias.view().into_dyn());
        out
    }

    pub fn params_mut(&mut self) -> Vec<ndarray::ArrayViewMutD<'_, F>> {
        let mut out: Vec<_> = self.layers.iter_mut().flat_map(|l| l.params_mut()).collect();
        out.push(self.head.weights.view_mut().into_dyn());
        out.push(self.head.bias.view_mut().into_dyn());
        out
    }

    pub fn batchnorms_mut(&mut self) -> impl Iterator<Item = &mut BatchNorm<F>> {
        self.layers.iter_mut().filter_map(|l| match l {
            Layer::BatchNorm(b) => Some(b),
            _ => None,
        })
    }

    pub fn forward(&self, input: ArrayView2<'_, F>, mode: Mode, seed: u64) -> Result<ForwardPass<F>> {
        if input.ncols() != self.spec.input_dim {
            return Err(NnError::Config(format!(
                "model expects {} features, got {}",
                self.spec.input_dim,
                input.ncols()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: ArrayD<F> = input.to_owned().into_dyn();
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut batch_stats = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, cache, stats) = layer.forward(x, mode, &mut rng)?;
            if let Some(s) = stats {
                batch_stats.push((i, s));
            }
            shapes.push(y.shape().to_vec());
            caches.push(cache);
            x = y;
        }
        let head_input = x
            .into_dimensionality::<Ix2>()
            .map_err(|e| NnError::Shape(e.to_string()))?;
        let outputs = self.head.forward(&head_input).mapv_into(sigmoid);
        Ok(ForwardPass {
            outputs,
            shapes,
            batch_stats,
            caches,
            head_input,
        })
    }

    /// Eval-mode outputs only.
    pub fn predict(&self, input: ArrayView2<'_, F>) -> Result<Array2<F>> {
        Ok(self.forward(input, Mode::Eval, 0)?.outputs)
    }

    /// Gradients w.r.t. every trainable parameter given `dL/d(outputs)`.
    pub fn backward(&self, pass: &ForwardPass<F>, grad_outputs: &Array2<F>) -> Result<Vec<ArrayD<F>>> {
        if grad_outputs.dim() != pass.outputs.dim() {
            return Err(NnError::Shape(format!(
                "output gradient {:?} does not match outputs {:?}",
                grad_outputs.dim(),
                pass.outputs.dim()
            )));
        }
        let grad_logits = grad_outputs * &pass.outputs.mapv(|o| o * (F::one() - o));
        self.backward_logits(pass, &grad_logits)
    }

    /// As [`Network::backward`] but starting from `dL/d(head pre-activations)`.
    pub fn backward_logits(&self, pass: &ForwardPass<F>, grad_logits: &Array2<F>) -> Result<Vec<ArrayD<F>>> {
        if pass.caches.len() != self.layers.len() || pass.head_input.ncols() != self.head.weights.nrows() {
            return Err(NnError::StaleCache("forward pass belongs to a different model".into()));
        }
        let dw_head = pass.head_input.t().dot(grad_logits);
        let db_head: Array1<F> = grad_logits.sum_axis(ndarray::Axis(0));
        let mut dy = grad_logits.dot(&self.head.weights.t()).into_dyn();
        let mut per_layer: Vec<Vec<ArrayD<F>>> = Vec::with_capacity(self.layers.len());
        for (layer, cache) in self.layers.iter().zip(&pass.caches).rev() {
            let (dx, grads) = layer.backward(cache, dy)?;
            per_layer.push(grads);
            dy = dx;
        }
        per_layer.reverse();
        let mut out: Vec<ArrayD<F>> = per_layer.into_iter().flatten().collect();
        out.push(dw_head.into_dyn());
        out.push(db_head.into_dyn());
        Ok(out)
    }

    /// Folds train-mode batch statistics into the running estimates.
    pub fn apply_batch_stats(&mut self, stats: &[(usize, BatchStats<F>)]) -> Result<()> {
        for (i, s) in stats {
            match self.layers.get_mut(*i) {
                Some(Layer::BatchNorm(b)) => b.update_running(s),
                _ => return Err(NnError::StaleCache(format!("layer {i} is not a batchnorm"))),
            }
        }
        Ok(())
    }

    /// Same model in another precision.
    pub fn cast<G: Scalar>(&self) -> Network<G> {
        fn c1<F: Scalar, G: Scalar>(a: &Array1<F>) -> Array1<G> {
            a.mapv(|v| G::from_f64(v.to_f64().unwrap()).unwrap())
        }
        fn c2<F: Scalar, G: Scalar>(a: &Array2<F>) -> Array2<G> {
            a.mapv(|v| G::from_f64(v.to_f64().unwrap()).unwrap())
        }
        let dense = |d: &Dense<F>| Dense {
            weights: c2(&d.weights),
            bias: c1(&d.bias),
        };
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => Layer::Dense(dense(d)),
                Layer::Conv2d(c) => Layer::Conv2d(Conv2d {
                    kernel: c2(&c.kernel),
                    bias: c1(&c.bias),
                    size: c.size,
                    in_channels: c.in_channels,
                }),
                Layer::BatchNorm(b) => Layer::BatchNorm(BatchNorm {
                    gamma: c1(&b.gamma),
                    beta: c1(&b.beta),
                    running_mean: c1(&b.running_mean),
                    running_var: c1(&b.running_var),
                }),
                Layer::Relu => Layer::Relu,
                Layer::Dropout { rate } => Layer::Dropout { rate: *rate },
                Layer::MaxPool { size } => Layer::MaxPool { size: *size },
                Layer::Sigmoid => Layer::Sigmoid,
                Layer::Flatten => Layer::Flatten,
                Layer::ToImage { side, channels } => Layer::ToImage {
                    side: *side,
                    channels: *channels,
                },
            })
            .collect();
        Network {
            spec: self.spec.clone(),
            layers,
            head: dense(&self.head),
        }
    }
}
