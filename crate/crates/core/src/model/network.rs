//! Forward and backward passes through a whole network.

use super::arch::{ArchitectureSpec, LayerSpec};
use super::params::{LayerParams, NetworkParams};
use crate::error::{Error, Result};
use crate::ops::{
    conv2d_backward, conv2d_valid, dense, dense_backward, maxpool, maxpool_backward, softmax,
    softmax_xent, tanh_backward, tanh_map, ArgmaxMap,
};
use crate::tensor::{Scalar, Tensor};

/// An architecture with matching parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    spec: ArchitectureSpec,
    params: NetworkParams<T>,
    shapes: Vec<Vec<usize>>,
}

/// Everything the backward pass needs from one forward pass of one sample.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    pub input: Tensor<T>,
    /// Output of every layer after its activation (the last entry holds the
    /// logits).
    pub outputs: Vec<Tensor<T>>,
    /// Argmax maps of the pooling layers, in layer order.
    pub pool_maps: Vec<ArgmaxMap>,
}

impl<T> Trace<T> {
    pub fn logits(&self) -> &Tensor<T> {
        self.outputs.last().expect("network has at least one layer")
    }
}

impl<T: Scalar> Network<T> {
    pub fn new(spec: ArchitectureSpec, params: NetworkParams<T>) -> Result<Self> {
        let shapes = spec.shapes()?;
        params.check_against(&spec)?;
        Ok(Network { spec, params, shapes })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn params(&self) -> &NetworkParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut NetworkParams<T> {
        &mut self.params
    }

    pub fn into_params(self) -> NetworkParams<T> {
        self.params
    }

    /// Output shape of each layer.
    pub fn shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            params: self.params.cast(),
            shapes: self.shapes.clone(),
        }
    }

    /// Forward one `[C, H, W]` sample, recording activations.
    pub fn forward_sample(&self, input: &Tensor<T>) -> Result<Trace<T>> {
        if input.shape() != self.spec.input {
            return Err(Error::shape(
                "forward",
                format!("input {:?}, network expects {:?}", input.shape(), self.spec.input),
            ));
        }
        let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(self.spec.layers.len());
        let mut pool_maps = Vec::new();
        let mut blocks = self.params.blocks.iter();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let x = outputs.last().unwrap_or(input);
            let block = match layer {
                LayerSpec::MaxPool { .. } => None,
                _ => blocks.next(),
            };
            let y = match (layer, block) {
                (LayerSpec::Conv { .. }, Some(LayerParams::Conv(p))) => tanh_map(&conv2d_valid(x, p)?),
                (LayerSpec::Dense { .. }, Some(LayerParams::Dense(p))) => {
                    let flat = x.clone().reshape(&[x.len()])?;
                    let z = dense(&flat, p)?;
                    if self.spec.is_output_layer(i) {
                        z
                    } else {
                        tanh_map(&z)
                    }
                }
                (LayerSpec::MaxPool { window, stride }, None) => {
                    let (y, map) = maxpool(x, *window, *stride)?;
                    pool_maps.push(map);
                    y
                }
                _ => return Err(Error::shape("forward", format!("layer {i} has no matching parameters"))),
            };
            if y.shape() != self.shapes[i].as_slice() {
                return Err(Error::shape(
                    "forward",
                    format!("layer {i} produced {:?}, expected {:?}", y.shape(), self.shapes[i]),
                ));
            }
            outputs.push(y);
        }
        Ok(Trace {
            input: input.clone(),
            outputs,
            pool_maps,
        })
    }

    /// Logits for a single sample.
    pub fn logits(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_sample(input)?.outputs.pop().expect("nonempty"))
    }

    /// Forward a `[B, C, H, W]` batch; returns `[B, units]` logits and the
    /// per-sample traces.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, Vec<Trace<T>>)> {
        let shape = batch.shape();
        if shape.len() != 4 || shape[1..] != self.spec.input {
            return Err(Error::shape(
                "forward",
                format!("batch {shape:?}, network expects [B, {:?}]", self.spec.input),
            ));
        }
        let traces = (0..shape[0])
            .map(|b| self.forward_sample(&batch.slice_outer(b)?))
            .collect::<Result<Vec<_>>>()?;
        let logits: Vec<Tensor<T>> = traces.iter().map(|t| t.logits().clone()).collect();
        Ok((Tensor::stack(&logits)?, traces))
    }

    /// Gradients of `sum(grad_logits * logits)` with respect to every
    /// parameter and the input.
    pub fn backward(&self, trace: &Trace<T>, grad_logits: &Tensor<T>) -> Result<(Tensor<T>, NetworkParams<T>)> {
        let mut grads: Vec<LayerParams<T>> = Vec::with_capacity(self.params.blocks.len());
        let mut block = self.params.blocks.len();
        let mut pool = trace.pool_maps.len();
        let mut grad = grad_logits.clone();
        for (i, layer) in self.spec.layers.iter().enumerate().rev() {
            let x = if i == 0 { &trace.input } else { &trace.outputs[i - 1] };
            grad = match layer {
                LayerSpec::Conv { .. } => {
                    block -= 1;
                    let LayerParams::Conv(p) = &self.params.blocks[block] else {
                        return Err(Error::shape("backward", format!("block {block} is not conv")));
                    };
                    let g = tanh_backward(&trace.outputs[i], &grad)?;
                    let (gi, gp) = conv2d_backward(x, p, &g)?;
                    grads.push(LayerParams::Conv(gp));
                    gi
                }
                LayerSpec::Dense { .. } => {
                    block -= 1;
                    let LayerParams::Dense(p) = &self.params.blocks[block] else {
                        return Err(Error::shape("backward", format!("block {block} is not dense")));
                    };
                    let g = if self.spec.is_output_layer(i) {
                        grad
                    } else {
                        tanh_backward(&trace.outputs[i], &grad)?
                    };
                    let flat = x.clone().reshape(&[x.len()])?;
                    let (gi, gp) = dense_backward(&flat, p, &g)?;
                    grads.push(LayerParams::Dense(gp));
                    gi.reshape(x.shape())?
                }
                LayerSpec::MaxPool { .. } => {
                    pool -= 1;
                    maxpool_backward(&trace.pool_maps[pool], &grad)?
                }
            };
        }
        grads.reverse();
        Ok((grad, NetworkParams { blocks: grads }))
    }

    /// Cross-entropy loss of one sample and its gradients.
    pub fn loss_and_grads(&self, input: &Tensor<T>, label: usize) -> Result<SampleGrads<T>> {
        let trace = self.forward_sample(input)?;
        let (loss, grad_logits) = softmax_xent(trace.logits(), label)?;
        let predicted = argmax(trace.logits().data());
        let (input_grad, grads) = self.backward(&trace, &grad_logits)?;
        Ok(SampleGrads {
            loss,
            predicted,
            input_grad,
            grads,
        })
    }

    /// Class probabilities for one sample.
    pub fn probabilities(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(softmax(&self.logits(input)?))
    }
}

pub struct SampleGrads<T> {
    pub loss: T,
    pub predicted: usize,
    pub input_grad: Tensor<T>,
    pub grads: NetworkParams<T>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
