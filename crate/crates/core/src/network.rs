//! Parameterised networks: forward passes, recorded forward passes and
//! reverse-mode gradients over a [`NetworkSpec`].

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer::{LayerKind, NetworkSpec};
use crate::ops::{self, ConvGeometry};
use crate::tensor::{Scalar, Tensor};

/// Standard deviation of the Gaussian used for freshly initialised weights.
pub const INIT_STD: f64 = 0.01;

/// Weight initialisation for fresh networks; biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    /// Gaussian with std [`INIT_STD`] everywhere.
    #[default]
    Gaussian,
    /// He-normal (`sqrt(2 / fan_in)`) for convs followed by ReLU, std
    /// [`INIT_STD`] for linear (classifier) convs.
    He,
}

impl std::str::FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(InitScheme::Gaussian),
            "he" => Ok(InitScheme::He),
            _ => Err(Error::Config(format!("unknown init `{s}` (gaussian or he)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Whether dropout is active. Training mode draws masks from the given RNG.
pub enum Mode<'a> {
    Inference,
    Train(&'a mut dyn RngCore),
}

#[derive(Debug, Clone)]
pub struct Network<T: Scalar = f32> {
    spec: NetworkSpec,
    params: Vec<Option<ConvParams<T>>>,
}

enum Cache<T> {
    Conv {
        input: Tensor<T>,
        output: Tensor<T>,
    },
    MaxPool {
        input_shape: Vec<usize>,
        argmax: Vec<usize>,
    },
    AvgPool {
        input_shape: Vec<usize>,
    },
    Lrn {
        input: Tensor<T>,
        scale: Tensor<T>,
    },
    Relu {
        output: Tensor<T>,
    },
    Dropout {
        mask: Option<Tensor<T>>,
    },
    Softmax {
        probs: Tensor<T>,
    },
}

/// Activations recorded by [`Network::forward_recorded`] for a later
/// [`Network::backward`].
pub struct Tape<T> {
    entries: Vec<(usize, Cache<T>)>,
    net_name: String,
}

impl<T> Default for Tape<T> {
    fn default() -> Self {
        Tape {
            entries: Vec::new(),
            net_name: String::new(),
        }
    }
}

impl<T> Tape<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Parameter gradients (one slot per layer, `Some` for conv layers) and the
/// gradient with respect to the network input.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub layers: Vec<Option<ConvParams<T>>>,
    pub input: Tensor<T>,
}

impl<T: Scalar> Gradients<T> {
    /// Zero gradients shaped like the network's parameters.
    pub fn zeros_like(net: &Network<T>) -> Vec<Option<ConvParams<T>>> {
        net.params
            .iter()
            .map(|p| {
                p.as_ref().map(|p| ConvParams {
                    weights: Tensor::zeros(p.weights.shape().to_vec()),
                    bias: Tensor::zeros(p.bias.shape().to_vec()),
                })
            })
            .collect()
    }
}

/// `acc += scale * grads`, slot by slot.
pub fn accumulate<T: Scalar>(acc: &mut [Option<ConvParams<T>>], grads: &[Option<ConvParams<T>>], scale: T) {
    for (a, g) in acc.iter_mut().zip(grads) {
        if let (Some(a), Some(g)) = (a.as_mut(), g.as_ref()) {
            a.weights.axpy(scale, &g.weights);
            a.bias.axpy(scale, &g.bias);
        }
    }
}

impl<T: Scalar> Network<T> {
    /// Gaussian(0, [`INIT_STD`]) weights, zero biases.
    pub fn new_random<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        Self::new_with(spec, InitScheme::Gaussian, rng)
    }

    pub fn new_with<R: Rng + ?Sized>(spec: NetworkSpec, scheme: InitScheme, rng: &mut R) -> Result<Self> {
        let relu: Vec<bool> = spec
            .layers
            .iter()
            .filter_map(|l| match &l.kind {
                LayerKind::Conv(c) => Some(c.relu),
                _ => None,
            })
            .collect();
        let mut relu = relu.into_iter();
        Self::with_init(spec, |shape| {
            let fan_in = (shape[1] * shape[2] * shape[3]) as f64;
            let std = match (scheme, relu.next().unwrap_or(false)) {
                (InitScheme::He, true) => (2.0 / fan_in).sqrt(),
                _ => INIT_STD,
            };
            Tensor::randn(shape, std, rng)
        })
    }

    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        Self::with_init(spec, Tensor::zeros)
    }

    fn with_init(spec: NetworkSpec, mut init: impl FnMut(Vec<usize>) -> Tensor<T>) -> Result<Self> {
        spec.validate()?;
        let params = spec
            .layers
            .iter()
            .zip(spec.layer_input_channels())
            .map(|(layer, cin)| match &layer.kind {
                LayerKind::Conv(c) => Some(ConvParams {
                    weights: init(vec![c.out_channels, cin / c.groups, c.kernel.0, c.kernel.1]),
                    bias: Tensor::zeros([c.out_channels]),
                }),
                _ => None,
            })
            .collect();
        Ok(Network { spec, params })
    }

    /// Assemble from explicit parameters; shapes are checked against the spec.
    pub fn from_parts(spec: NetworkSpec, params: Vec<Option<ConvParams<T>>>) -> Result<Self> {
        let template = Self::zeros(spec)?;
        if params.len() != template.params.len() {
            return Err(Error::shape(
                &template.spec.name,
                format!("{} parameter slots for {} layers", params.len(), template.params.len()),
            ));
        }
        for ((want, got), layer) in template.params.iter().zip(&params).zip(&template.spec.layers) {
            let ok = match (want, got) {
                (None, None) => true,
                (Some(w), Some(g)) => w.weights.shape() == g.weights.shape() && w.bias.shape() == g.bias.shape(),
                _ => false,
            };
            if !ok {
                return Err(Error::shape(
                    format!("layer `{}`", layer.name),
                    "parameter shapes do not match the layer",
                ));
            }
        }
        Ok(Network {
            spec: template.spec,
            params,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Option<ConvParams<T>>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Option<ConvParams<T>>] {
        &mut self.params
    }

    pub fn layer_params(&self, name: &str) -> Option<&ConvParams<T>> {
        self.spec.index_of(name).and_then(|i| self.params[i].as_ref())
    }

    pub fn layer_params_mut(&mut self, name: &str) -> Option<&mut ConvParams<T>> {
        let idx = self.spec.index_of(name)?;
        self.params[idx].as_mut()
    }

    pub fn parameter_count(&self) -> usize {
        self.params
            .iter()
            .flatten()
            .map(|p| p.weights.len() + p.bias.len())
            .sum()
    }

    /// Number of layers producing logits: every layer except a trailing softmax.
    pub fn logits_end(&self) -> usize {
        match self.spec.layers.last() {
            Some(l) if matches!(l.kind, LayerKind::Softmax) => self.spec.layers.len() - 1,
            _ => self.spec.layers.len(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            params: self
                .params
                .iter()
                .map(|p| {
                    p.as_ref().map(|p| ConvParams {
                        weights: p.weights.cast(),
                        bias: p.bias.cast(),
                    })
                })
                .collect(),
        }
    }

    /// Inference over the whole network (ending in softmax probabilities).
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_until(input, self.spec.layers.len())
    }

    /// Inference through layers `0..end`.
    pub fn forward_until(&self, input: &Tensor<T>, end: usize) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut x = input.clone();
        for idx in 0..end.min(self.spec.layers.len()) {
            x = self.apply(idx, x, None, false)?.0;
        }
        Ok(x)
    }

    /// Forward through layers `0..end`, recording what [`Network::backward`]
    /// needs.
    pub fn forward_recorded(
        &self,
        input: &Tensor<T>,
        tape: &mut Tape<T>,
        mut mode: Mode<'_>,
        end: usize,
    ) -> Result<Tensor<T>> {
        self.check_input(input)?;
        tape.entries.clear();
        tape.net_name = self.spec.name.clone();
        let mut x = input.clone();
        for idx in 0..end.min(self.spec.layers.len()) {
            let rng: Option<&mut dyn RngCore> = match &mut mode {
                Mode::Train(r) => Some(&mut **r),
                Mode::Inference => None,
            };
            let (out, cache) = self.apply(idx, x, rng, true)?;
            tape.entries.push((idx, cache.expect("recorded")));
            x = out;
        }
        Ok(x)
    }

    /// Back-propagate `grad_output` (the gradient of the loss with respect to
    /// the last recorded layer's output).
    pub fn backward(&self, tape: &Tape<T>, grad_output: &Tensor<T>) -> Result<Gradients<T>> {
        if tape.entries.is_empty() {
            return Err(Error::Usage("backward called without a recorded forward pass".into()));
        }
        if tape.net_name != self.spec.name {
            return Err(Error::Usage(format!(
                "tape was recorded on `{}`, not `{}`",
                tape.net_name, self.spec.name
            )));
        }
        let mut layer_grads: Vec<Option<ConvParams<T>>> = vec![None; self.params.len()];
        let mut g = grad_output.clone();
        for (idx, cache) in tape.entries.iter().rev() {
            let layer = &self.spec.layers[*idx];
            g = match (&layer.kind, cache) {
                (LayerKind::Conv(c), Cache::Conv { input, output }) => {
                    if c.relu {
                        g = ops::relu_backward(output, &g);
                    }
                    let p = self.params[*idx].as_ref().expect("conv params");
                    let geo = ConvGeometry::new(c.stride, c.padding).with_groups(c.groups);
                    let grads = ops::conv_backward(input, &p.weights, &g, geo)?;
                    layer_grads[*idx] = Some(ConvParams {
                        weights: grads.weights,
                        bias: grads.bias,
                    });
                    grads.input
                }
                (LayerKind::MaxPool(_), Cache::MaxPool { input_shape, argmax }) => {
                    ops::maxpool_backward(&g, argmax, input_shape)?
                }
                (LayerKind::AvgPool(p), Cache::AvgPool { input_shape }) => ops::avgpool_backward(&g, input_shape, p)?,
                (LayerKind::Lrn(p), Cache::Lrn { input, scale }) => ops::lrn_backward(input, scale, &g, p)?,
                (LayerKind::Relu, Cache::Relu { output }) => ops::relu_backward(output, &g),
                (LayerKind::Dropout { .. }, Cache::Dropout { mask }) => match mask {
                    Some(m) => ops::dropout_backward(m, &g),
                    None => g,
                },
                (LayerKind::Softmax, Cache::Softmax { probs }) => ops::softmax_backward(probs, &g)?,
                _ => unreachable!("cache kind always matches its layer"),
            };
        }
        Ok(Gradients {
            layers: layer_grads,
            input: g,
        })
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        let (c, _, _) = input.dims3()?;
        if c != self.spec.input_channels {
            return Err(Error::shape(
                &self.spec.name,
                format!("input has {c} channels, expected {}", self.spec.input_channels),
            ));
        }
        Ok(())
    }

    fn apply(
        &self,
        idx: usize,
        x: Tensor<T>,
        rng: Option<&mut dyn RngCore>,
        record: bool,
    ) -> Result<(Tensor<T>, Option<Cache<T>>)> {
        let layer = &self.spec.layers[idx];
        let keep = |c: Cache<T>| record.then_some(c);
        Ok(match &layer.kind {
            LayerKind::Conv(c) => {
                let p = self.params[idx].as_ref().expect("conv params");
                let geo = ConvGeometry::new(c.stride, c.padding).with_groups(c.groups);
                let mut y = ops::conv_forward(&x, &p.weights, &p.bias, geo)
                    .map_err(|e| Error::shape(format!("layer `{}`", layer.name), e.to_string()))?;
                if c.relu {
                    y = ops::relu(&y);
                }
                let cache = record.then(|| Cache::Conv {
                    input: x,
                    output: y.clone(),
                });
                (y, cache)
            }
            LayerKind::MaxPool(p) => {
                let (y, argmax) = ops::maxpool_forward(&x, p)?;
                let input_shape = x.shape().to_vec();
                (y, keep(Cache::MaxPool { input_shape, argmax }))
            }
            LayerKind::AvgPool(p) => {
                let y = ops::avgpool_forward(&x, p)?;
                let input_shape = x.shape().to_vec();
                (y, keep(Cache::AvgPool { input_shape }))
            }
            LayerKind::Lrn(p) => {
                let (y, scale) = ops::lrn_forward(&x, p)?;
                (y, keep(Cache::Lrn { input: x, scale }))
            }
            LayerKind::Relu => {
                let y = ops::relu(&x);
                let cache = record.then(|| Cache::Relu { output: y.clone() });
                (y, cache)
            }
            LayerKind::Dropout { rate } => match rng {
                Some(rng) if *rate > 0.0 => {
                    let (y, mask) = ops::dropout_forward(&x, *rate, rng);
                    (y, keep(Cache::Dropout { mask: Some(mask) }))
                }
                _ => (x, keep(Cache::Dropout { mask: None })),
            },
            LayerKind::Softmax => {
                let y = ops::softmax(&x)?;
                let cache = record.then(|| Cache::Softmax { probs: y.clone() });
                (y, cache)
            }
        })
    }
}
