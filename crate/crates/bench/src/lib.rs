//! Shared fixtures for the benchmarks.

use lymphnet::dataset::{synth_corpus, Sample};
use lymphnet::model::{build_network, ArchitectureSpec, Network};
use lymphnet::ops::ConvLayerParams;
use lymphnet::{Scalar, Tensor};

/// Deterministic values in `[-1, 1)` without pulling an RNG into the benches.
pub fn ramp<T: Scalar>(shape: &[usize]) -> Tensor<T> {
    Tensor::from_fn(shape, |i| T::from_f64(((i * 7919) % 2000) as f64 / 1000.0 - 1.0))
}

/// The two convolution layers of the default network, as (input, params).
pub fn conv_layers<T: Scalar>() -> [(Tensor<T>, ConvLayerParams<T>); 2] {
    [
        (ramp(&[1, 40, 40]), ConvLayerParams::new(ramp(&[20, 1, 5, 5]), ramp(&[20])).unwrap()),
        (ramp(&[20, 12, 12]), ConvLayerParams::new(ramp(&[50, 20, 5, 5]), ramp(&[50])).unwrap()),
    ]
}

pub fn default_network<T: Scalar>() -> Network<T> {
    let spec = ArchitectureSpec::default();
    Network::new(spec.clone(), build_network(&spec, 1).unwrap()).unwrap()
}

/// One default-sized batch of synthetic patches.
pub fn batch(size: usize) -> Vec<Sample> {
    let cases = size.div_ceil(20).div_ceil(4) * 4;
    let mut samples = synth_corpus(cases, 1).unwrap();
    samples.truncate(size);
    samples
}
