//! Sequential network: a validated stack of layers with cached-activation
//! backward. Forward is read-only (safe to share across rollouts); backward
//! needs exclusive access because it accumulates into parameter grad slots.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::nn::layer::{Layer, LayerSpec};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct Network<T: Scalar> {
    layers: Vec<Layer<T>>,
    /// Per-sample shape entering layer i for the nominal input; last entry is
    /// the nominal output shape. Forward recomputes the chain for the actual
    /// input, so a fully convolutional prefix accepts other resolutions.
    shapes: Vec<Vec<usize>>,
}

/// Cached forward activations: the input seen by each layer, plus the shape
/// chain of the pass that produced them.
#[derive(Debug)]
pub struct Tape<T: Scalar> {
    inputs: Vec<Tensor<T>>,
    chain: Vec<Vec<usize>>,
    output_shape: Vec<usize>,
}

impl<T: Scalar> Network<T> {
    /// Build a network, validating the layer chain against `input_shape`
    /// (per-sample, without the batch dimension). A shape mismatch is
    /// rejected here with the offending layer index.
    ///
    /// Weight init: He-uniform for layers whose output feeds a ReLU,
    /// Xavier-uniform otherwise. Biases start at zero.
    pub fn new(input_shape: &[usize], specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        let mut shapes = vec![input_shape.to_vec()];
        for (i, spec) in specs.iter().enumerate() {
            let cur = shapes.last().unwrap().clone();
            let out = spec
                .output_shape(&cur)
                .map_err(|e| Error::msg(format!("layer {i} ({}): {e}", spec.kind_name())))?;
            shapes.push(out);
        }
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let (weight, bias) = if let Some((fan_in, fan_out)) = spec.fans() {
                let relu_fed = specs[i + 1..]
                    .iter()
                    .find(|s| !matches!(s, LayerSpec::Flatten | LayerSpec::GlobalAvgPool))
                    .is_some_and(|s| matches!(s, LayerSpec::Relu));
                let bound = if relu_fed {
                    (6.0 / fan_in as f64).sqrt()
                } else {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                };
                let (w_shape, b_len) = match *spec {
                    LayerSpec::Linear { in_dim, out_dim } => (vec![out_dim, in_dim], out_dim),
                    LayerSpec::Conv2d {
                        in_ch,
                        out_ch,
                        kernel,
                        ..
                    } => (vec![out_ch, in_ch * kernel * kernel], out_ch),
                    _ => unreachable!(),
                };
                let n: usize = w_shape.iter().product();
                let data: Vec<T> = (0..n)
                    .map(|_| T::c(rng.gen_range(-bound..bound)))
                    .collect();
                (
                    Some(Tensor::new(w_shape, data)),
                    Some(Tensor::zeros(vec![b_len])),
                )
            } else {
                (None, None)
            };
            layers.push(Layer {
                spec: *spec,
                weight,
                bias,
            });
        }
        Ok(Network { layers, shapes })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.shapes[0]
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Per-layer shape chain for an actual per-sample input shape.
    fn shape_chain(&self, sample: &[usize]) -> Result<Vec<Vec<usize>>> {
        let mut chain = vec![sample.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let out = layer
                .spec
                .output_shape(chain.last().unwrap())
                .map_err(|e| Error::msg(format!("layer {i} ({}): {e}", layer.spec.kind_name())))?;
            chain.push(out);
        }
        Ok(chain)
    }

    fn batch_sample_shape<'a>(&self, x: &'a Tensor<T>) -> Result<&'a [usize]> {
        if x.shape().len() < 2 {
            return Err(Error::ShapeMismatch {
                layer: 0,
                expected: self.shapes[0].clone(),
                got: x.shape().to_vec(),
            });
        }
        Ok(&x.shape()[1..])
    }

    /// Inference forward. `x` is `[N, ...sample_shape]`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let chain = self.shape_chain(self.batch_sample_shape(x)?)?;
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.forward(&cur, &chain[i], &chain[i + 1]);
        }
        Ok(cur)
    }

    /// Training forward: returns the output plus the activation tape needed
    /// by [`Network::backward`].
    pub fn forward_with_tape(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tape<T>)> {
        let chain = self.shape_chain(self.batch_sample_shape(x)?)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.forward(&cur, &chain[i], &chain[i + 1]);
            inputs.push(cur);
            cur = next;
        }
        let n = x.shape()[0];
        let mut output_shape = vec![n];
        output_shape.extend_from_slice(chain.last().unwrap());
        Ok((
            cur,
            Tape {
                inputs,
                chain,
                output_shape,
            },
        ))
    }

    /// Backward pass from `upstream` (gradient of the loss w.r.t. the network
    /// output). Accumulates parameter gradients into each parameter tensor's
    /// grad slot and returns the gradient w.r.t. the network input.
    ///
    /// Requires the tape from a prior `forward_with_tape`; a tape/upstream
    /// mismatch is an explicit error rather than silent corruption.
    pub fn backward(&mut self, tape: &Tape<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
        if tape.inputs.len() != self.layers.len() {
            return Err(Error::msg(format!(
                "backward without matching forward: tape has {} entries, network has {} layers",
                tape.inputs.len(),
                self.layers.len()
            )));
        }
        if upstream.shape() != tape.output_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                layer: self.layers.len(),
                expected: tape.output_shape.clone(),
                got: upstream.shape().to_vec(),
            });
        }
        let mut grad = upstream.clone();
        for i in (0..self.layers.len()).rev() {
            grad = self.layers[i].backward(&tape.inputs[i], &grad, &tape.chain[i], &tape.chain[i + 1]);
        }
        Ok(grad)
    }

    pub fn zero_grads(&mut self) {
        for layer in &mut self.layers {
            if let Some(w) = &mut layer.weight {
                w.zero_grad();
            }
            if let Some(b) = &mut layer.bias {
                b.zero_grad();
            }
        }
    }

    /// Named parameter blocks in a stable order: `layer{i}.weight`, `layer{i}.bias`.
    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if let Some(w) = &layer.weight {
                out.push((format!("layer{i}.weight"), w));
            }
            if let Some(b) = &layer.bias {
                out.push((format!("layer{i}.bias"), b));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            if let Some(w) = &mut layer.weight {
                out.push((format!("layer{i}.weight"), w));
            }
            if let Some(b) = &mut layer.bias {
                out.push((format!("layer{i}.bias"), b));
            }
        }
        out
    }

    /// Copy parameter values from another network with the identical spec.
    pub fn copy_params_from(&mut self, other: &Network<T>) -> Result<()> {
        let src = other.params();
        let mut dst = self.params_mut();
        if src.len() != dst.len() {
            return Err(Error::msg("copy_params_from: parameter count mismatch"));
        }
        for ((_, d), (_, s)) in dst.iter_mut().zip(&src) {
            if d.shape() != s.shape() {
                return Err(Error::msg("copy_params_from: parameter shape mismatch"));
            }
            d.data_mut().copy_from_slice(s.data());
        }
        Ok(())
    }

    /// Scale the weights of one layer in place (used to soften output heads).
    pub fn scale_layer_weights(&mut self, layer_idx: usize, factor: f64) {
        if let Some(w) = self.layers[layer_idx].weight.as_mut() {
            w.scale(T::c(factor));
        }
    }

    /// Cast the whole network to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    spec: l.spec,
                    weight: l.weight.as_ref().map(Tensor::cast),
                    bias: l.bias.as_ref().map(Tensor::cast),
                })
                .collect(),
            shapes: self.shapes.clone(),
        }
    }
}

impl<T: Scalar> Tape<T> {
    /// Pre-activation inputs of every ReLU layer, useful for steering tests
    /// away from the kink at zero.
    pub fn relu_inputs<'a>(&'a self, net: &Network<T>) -> Vec<&'a Tensor<T>> {
        net.layers
            .iter()
            .zip(&self.inputs)
            .filter(|(l, _)| matches!(l.spec, LayerSpec::Relu))
            .map(|(_, t)| t)
            .collect()
    }
}
