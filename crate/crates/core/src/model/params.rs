use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{ArchitectureSpec, LayerSpec};
use crate::error::{Error, Result};
use crate::ops::{ConvLayerParams, DenseLayerParams};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams<T> {
    Conv(ConvLayerParams<T>),
    Dense(DenseLayerParams<T>),
}

impl<T: Scalar> LayerParams<T> {
    pub fn param_count(&self) -> usize {
        match self {
            LayerParams::Conv(p) => p.param_count(),
            LayerParams::Dense(p) => p.param_count(),
        }
    }

    /// Weight tensor then bias.
    pub fn tensors(&self) -> [&Tensor<T>; 2] {
        match self {
            LayerParams::Conv(p) => [&p.kernels, &p.bias],
            LayerParams::Dense(p) => [&p.weights, &p.bias],
        }
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 2] {
        match self {
            LayerParams::Conv(p) => [&mut p.kernels, &mut p.bias],
            LayerParams::Dense(p) => [&mut p.weights, &mut p.bias],
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerParams::Conv(_) => "conv",
            LayerParams::Dense(_) => "dense",
        }
    }
}

/// One parameter block per convolution or dense layer, in network order.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<T> {
    pub blocks: Vec<LayerParams<T>>,
}

impl<T: Scalar> NetworkParams<T> {
    /// All-zero parameters shaped for `spec`.
    pub fn zeros(spec: &ArchitectureSpec) -> Result<Self> {
        let shapes = spec.shapes()?;
        let mut blocks = Vec::new();
        let mut in_shape: Vec<usize> = spec.input.to_vec();
        for (layer, out) in spec.layers.iter().zip(&shapes) {
            match *layer {
                LayerSpec::Conv { filters, kernel } => {
                    blocks.push(LayerParams::Conv(ConvLayerParams::zeros(filters, in_shape[0], kernel)))
                }
                LayerSpec::Dense { units } => blocks.push(LayerParams::Dense(DenseLayerParams::zeros(
                    units,
                    in_shape.iter().product(),
                ))),
                LayerSpec::MaxPool { .. } => {}
            }
            in_shape = out.clone();
        }
        Ok(NetworkParams { blocks })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().for_each(|t| t.fill(T::zero()));
        z
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(LayerParams::param_count).sum()
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.blocks.iter().flat_map(|b| b.tensors())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.blocks.iter_mut().flat_map(|b| b.tensors_mut())
    }

    /// `self += alpha * other`, block by block.
    pub fn add_scaled(&mut self, other: &NetworkParams<T>, alpha: T) -> Result<()> {
        if self.blocks.len() != other.blocks.len() {
            return Err(Error::shape("params", "block count differs"));
        }
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            a.add_scaled(b, alpha)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: T) {
        self.tensors_mut().for_each(|t| t.scale(alpha));
    }

    pub fn cast<U: Scalar>(&self) -> NetworkParams<U> {
        NetworkParams {
            blocks: self
                .blocks
                .iter()
                .map(|b| match b {
                    LayerParams::Conv(p) => LayerParams::Conv(ConvLayerParams {
                        kernels: p.kernels.cast(),
                        bias: p.bias.cast(),
                    }),
                    LayerParams::Dense(p) => LayerParams::Dense(DenseLayerParams {
                        weights: p.weights.cast(),
                        bias: p.bias.cast(),
                    }),
                })
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().all(Tensor::all_finite)
    }

    /// Check that every block has exactly the shape `spec` requires.
    pub fn check_against(&self, spec: &ArchitectureSpec) -> Result<()> {
        let expected = NetworkParams::<T>::zeros(spec)?;
        if expected.blocks.len() != self.blocks.len() {
            return Err(Error::shape(
                "params",
                format!(
                    "{} parameter blocks, architecture needs {}",
                    self.blocks.len(),
                    expected.blocks.len()
                ),
            ));
        }
        for (i, (a, b)) in self.blocks.iter().zip(&expected.blocks).enumerate() {
            let same = a.kind() == b.kind()
                && a.tensors().iter().zip(b.tensors()).all(|(x, y)| x.shape() == y.shape());
            if !same {
                return Err(Error::shape(
                    "params",
                    format!("block {i} ({}) does not match the architecture", a.kind()),
                ));
            }
        }
        Ok(())
    }
}

/// Glorot-uniform weights, zero biases. Values are drawn in `f64` so `f32`
/// and `f64` networks built from the same seed agree up to rounding.
pub fn build_network<T: Scalar>(spec: &ArchitectureSpec, seed: u64) -> Result<NetworkParams<T>> {
    let mut params = NetworkParams::<T>::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for block in &mut params.blocks {
        let (fan_in, fan_out, weights) = match block {
            LayerParams::Conv(p) => {
                let (f, c, k) = p.geometry()?;
                (c * k * k, f * k * k, &mut p.kernels)
            }
            LayerParams::Dense(p) => {
                let (o, i) = p.geometry()?;
                (i, o, &mut p.weights)
            }
        };
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in weights.data_mut() {
            *w = T::from_f64(rng.random_range(-limit..limit));
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_block_sizes() {
        let p = build_network::<f32>(&ArchitectureSpec::default(), 1).unwrap();
        let counts: Vec<usize> = p.blocks.iter().map(LayerParams::param_count).collect();
        assert_eq!(counts, vec![520, 25050, 100500, 2004]);
        assert_eq!(p.param_count(), 520 + 25050 + 100500 + 2004);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let spec = ArchitectureSpec::default();
        let a = build_network::<f32>(&spec, 7).unwrap();
        assert_eq!(a, build_network::<f32>(&spec, 7).unwrap());
        assert_ne!(a, build_network::<f32>(&spec, 8).unwrap());
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let p = build_network::<f64>(&ArchitectureSpec::default(), 3).unwrap();
        let limits = [
            (6.0f64 / (25.0 + 500.0)).sqrt(),
            (6.0f64 / (500.0 + 1250.0)).sqrt(),
            (6.0f64 / 700.0).sqrt(),
            (6.0f64 / 504.0).sqrt(),
        ];
        for (block, limit) in p.blocks.iter().zip(limits) {
            let [w, b] = block.tensors();
            assert!(w.max_abs() <= limit);
            assert!(w.max_abs() > 0.9 * limit);
            assert!(b.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn shape_check_detects_mismatch() {
        let spec = ArchitectureSpec::default();
        let p = NetworkParams::<f32>::zeros(&spec).unwrap();
        p.check_against(&spec).unwrap();
        assert!(p.check_against(&ArchitectureSpec::toy()).is_err());
    }
}
